use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::acts::{ActTemplate, DialogueActType};
use crate::confusion::InductionType;

/// Outcome applied when a step's repeats are used up without improvement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnFailure {
    NextStep,
    GotoUnproductive,
    EndEpisode,
}

impl OnFailure {
    pub const ALL: [OnFailure; 3] = [OnFailure::NextStep, OnFailure::GotoUnproductive, OnFailure::EndEpisode];

    pub fn keyword(self) -> &'static str {
        match self {
            OnFailure::NextStep => "next",
            OnFailure::GotoUnproductive => "unproductive",
            OnFailure::EndEpisode => "end",
        }
    }

    pub fn from_keyword(keyword: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.keyword() == keyword)
    }
}

/// A successful step always resolves the episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnSuccess {
    #[default]
    GotoResolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepSpec {
    pub act_type: DialogueActType,
    pub max_repeats: u32,
    #[serde(default)]
    pub on_success: OnSuccess,
    pub on_failure: OnFailure,
}

impl StepSpec {
    pub fn new(act_type: DialogueActType, max_repeats: u32, on_failure: OnFailure) -> Self {
        Self {
            act_type,
            max_repeats,
            on_success: OnSuccess::GotoResolved,
            on_failure,
        }
    }
}

/// Identifies one act sequence within a policy.
///
/// Serialized as its [`PolicyKey::id`], e.g. `"productive:complex_information"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolicyKey {
    General,
    Productive(InductionType),
    Unproductive,
}

impl PolicyKey {
    pub const COUNT: usize = 6;

    pub fn all() -> impl Iterator<Item = PolicyKey> {
        std::iter::once(PolicyKey::General)
            .chain(InductionType::ALL.into_iter().map(PolicyKey::Productive))
            .chain(std::iter::once(PolicyKey::Unproductive))
    }

    /// Dense index 0..6 used by compiled tables.
    pub fn slot(self) -> usize {
        match self {
            PolicyKey::General => 0,
            PolicyKey::Productive(i) => 1 + i.index(),
            PolicyKey::Unproductive => 5,
        }
    }

    /// Identifier recorded on emitted acts.
    pub fn id(self) -> String {
        match self {
            PolicyKey::General => "general".to_string(),
            PolicyKey::Productive(i) => format!("productive:{}", i.name()),
            PolicyKey::Unproductive => "unproductive".to_string(),
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "general" => Some(PolicyKey::General),
            "unproductive" => Some(PolicyKey::Unproductive),
            _ => id
                .strip_prefix("productive:")
                .and_then(InductionType::from_name)
                .map(PolicyKey::Productive),
        }
    }

    /// Section header as written in policy files.
    pub fn header(self) -> String {
        match self {
            PolicyKey::General => "[general]".to_string(),
            PolicyKey::Productive(i) => format!("[productive {}]", i.keyword()),
            PolicyKey::Unproductive => "[unproductive]".to_string(),
        }
    }
}

impl Serialize for PolicyKey {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.id())
    }
}

impl<'de> Deserialize<'de> for PolicyKey {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let id = String::deserialize(deserializer)?;
        PolicyKey::from_id(&id).ok_or_else(|| serde::de::Error::custom(format!("unknown policy id `{id}`")))
    }
}

impl fmt::Display for PolicyKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub name: String,
    pub version: String,
}

impl Default for Metadata {
    fn default() -> Self {
        Self {
            name: "unnamed".into(),
            version: "0".into(),
        }
    }
}

/// Source line numbers (1-based) recorded by the parser for diagnostics.
#[derive(Debug, Clone, Default)]
pub struct Locations {
    pub sections: BTreeMap<PolicyKey, usize>,
    pub steps: BTreeMap<(PolicyKey, usize), usize>,
    pub templates_header: Option<usize>,
    pub templates: Vec<usize>,
    pub last_line: usize,
}

/// Parsed but not yet validated policy program.
///
/// Equality ignores source locations, so an AST re-parsed from its own
/// serialization compares equal to the original.
#[derive(Debug, Clone, Default)]
pub struct PolicyAst {
    pub metadata: Metadata,
    pub general_ladder: Vec<StepSpec>,
    pub productive_table: BTreeMap<InductionType, Vec<StepSpec>>,
    pub unproductive_sequence: Vec<StepSpec>,
    pub templates: Vec<ActTemplate>,
    pub locations: Locations,
}

impl PartialEq for PolicyAst {
    fn eq(&self, other: &Self) -> bool {
        self.metadata == other.metadata
            && self.general_ladder == other.general_ladder
            && self.productive_table == other.productive_table
            && self.unproductive_sequence == other.unproductive_sequence
            && self.templates == other.templates
    }
}

impl PolicyAst {
    pub fn steps(&self, key: PolicyKey) -> Option<&[StepSpec]> {
        match key {
            PolicyKey::General => Some(&self.general_ladder),
            PolicyKey::Productive(i) => self.productive_table.get(&i).map(Vec::as_slice),
            PolicyKey::Unproductive => Some(&self.unproductive_sequence),
        }
    }

    /// Sections present in the AST, in canonical order.
    pub fn sections(&self) -> impl Iterator<Item = (PolicyKey, &[StepSpec])> + '_ {
        PolicyKey::all().filter_map(move |k| self.steps(k).map(|s| (k, s)))
    }

    pub fn step_line(&self, key: PolicyKey, index: usize) -> Option<usize> {
        self.locations.steps.get(&(key, index)).copied()
    }

    pub fn section_line(&self, key: PolicyKey) -> Option<usize> {
        self.locations.sections.get(&key).copied()
    }

    /// Canonical policy-file text for this AST. Comments are not preserved.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "name: {}", self.metadata.name);
        let _ = writeln!(out, "version: {}", self.metadata.version);
        for (key, steps) in self.sections() {
            let _ = writeln!(out, "\n{}", key.header());
            for (i, step) in steps.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "step {}: {} repeats={} on_failure={}",
                    i + 1,
                    step.act_type.dsl_name(),
                    step.max_repeats,
                    step.on_failure.keyword()
                );
            }
        }
        if !self.templates.is_empty() {
            out.push_str("\n[templates]\n");
            for t in &self.templates {
                let _ = writeln!(out, "template {}: {}", t.act_type.dsl_name(), quote(&t.template_text));
            }
        }
        out
    }
}

pub(crate) fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
