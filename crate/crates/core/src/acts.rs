//! The seven mitigation dialogue act types and their surface rendering.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mitigation act types in canonical order (index 1-7).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DialogueActType {
    Restatement,
    FeedbackRequest,
    InformationExtension,
    InformationSupplement,
    ResponseCorrection,
    Confirmation,
    SubjectChange,
}

impl DialogueActType {
    pub const ALL: [DialogueActType; 7] = [
        DialogueActType::Restatement,
        DialogueActType::FeedbackRequest,
        DialogueActType::InformationExtension,
        DialogueActType::InformationSupplement,
        DialogueActType::ResponseCorrection,
        DialogueActType::Confirmation,
        DialogueActType::SubjectChange,
    ];

    /// Canonical index, 1-based.
    pub fn index(self) -> usize {
        self as usize + 1
    }

    pub fn from_index(index: usize) -> Option<Self> {
        index.checked_sub(1).and_then(|i| Self::ALL.get(i).copied())
    }

    /// Name used in policy files, e.g. `InformationExtension`.
    pub fn dsl_name(self) -> &'static str {
        match self {
            DialogueActType::Restatement => "Restatement",
            DialogueActType::FeedbackRequest => "FeedbackRequest",
            DialogueActType::InformationExtension => "InformationExtension",
            DialogueActType::InformationSupplement => "InformationSupplement",
            DialogueActType::ResponseCorrection => "ResponseCorrection",
            DialogueActType::Confirmation => "Confirmation",
            DialogueActType::SubjectChange => "SubjectChange",
        }
    }

    pub fn from_dsl_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.dsl_name() == name)
    }

    /// Name used on the wire, e.g. `information_extension`.
    pub fn wire_name(self) -> &'static str {
        match self {
            DialogueActType::Restatement => "restatement",
            DialogueActType::FeedbackRequest => "feedback_request",
            DialogueActType::InformationExtension => "information_extension",
            DialogueActType::InformationSupplement => "information_supplement",
            DialogueActType::ResponseCorrection => "response_correction",
            DialogueActType::Confirmation => "confirmation",
            DialogueActType::SubjectChange => "subject_change",
        }
    }

    pub fn from_wire_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.wire_name() == name)
    }

    pub fn descriptor(self) -> ActDescriptor {
        act_descriptor(self)
    }
}

impl fmt::Display for DialogueActType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dsl_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ActDescriptor {
    pub act_type: DialogueActType,
    pub index: usize,
    pub name: &'static str,
    pub description: &'static str,
}

pub fn act_descriptor(act_type: DialogueActType) -> ActDescriptor {
    let (name, description) = match act_type {
        DialogueActType::Restatement => ("Restatement", "The agent repeats the information or question."),
        DialogueActType::FeedbackRequest => (
            "Feedback request",
            "The agent asks the participant how they are getting on and invites a reply.",
        ),
        DialogueActType::InformationExtension => (
            "Information extension",
            "The agent provides more information to expand on the information or question already raised.",
        ),
        DialogueActType::InformationSupplement => (
            "Information supplement",
            "The agent reformulates the information or question in a different way so it can be understood quickly.",
        ),
        DialogueActType::ResponseCorrection => (
            "Response correction",
            "The agent provides the appropriate response so the participant is not left confused.",
        ),
        DialogueActType::Confirmation => (
            "Confirmation",
            "The agent admits that the information or question has one or more issues that confused the participant.",
        ),
        DialogueActType::SubjectChange => (
            "Subject change",
            "The agent switches to a more straightforward question or another topic.",
        ),
    };
    ActDescriptor {
        act_type,
        index: act_type.index(),
        name,
        description,
    }
}

/// Placeholders a template may reference.
pub const CONTEXT_FIELDS: [&str; 4] = ["topic", "prior_utterance", "prior_agent_info", "new_topic"];

/// Values available to templates for the current turn.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TurnContext {
    pub topic: Option<String>,
    pub prior_utterance: Option<String>,
    pub prior_agent_info: Option<String>,
    pub new_topic: Option<String>,
}

impl TurnContext {
    /// Generic context used by batch simulations, where utterance content is
    /// irrelevant to the simulated user.
    pub fn simulation() -> Self {
        Self {
            topic: Some("the task".into()),
            prior_utterance: Some("the previous instruction".into()),
            prior_agent_info: Some("the relevant task details".into()),
            new_topic: Some("a warm-up question".into()),
        }
    }

    pub fn get(&self, field: &str) -> Option<&str> {
        match field {
            "topic" => self.topic.as_deref(),
            "prior_utterance" => self.prior_utterance.as_deref(),
            "prior_agent_info" => self.prior_agent_info.as_deref(),
            "new_topic" => self.new_topic.as_deref(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unbalanced brace at byte {0}")]
    UnbalancedBrace(usize),
    #[error("empty placeholder at byte {0}")]
    EmptyPlaceholder(usize),
    #[error("undeclared placeholder {{{0}}}")]
    UndeclaredPlaceholder(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("missing context field `{0}`")]
    MissingContextField(String),
    #[error("template for {act}: {source}")]
    Template {
        act: DialogueActType,
        #[source]
        source: TemplateError,
    },
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn pieces(text: &str) -> Result<Vec<Piece<'_>>, TemplateError> {
    let mut out = Vec::new();
    let mut rest = text;
    let mut offset = 0;
    while let Some(open) = rest.find(['{', '}']) {
        if rest.as_bytes()[open] == b'}' {
            return Err(TemplateError::UnbalancedBrace(offset + open));
        }
        let Some(close) = rest[open + 1..].find('}') else {
            return Err(TemplateError::UnbalancedBrace(offset + open));
        };
        let name = &rest[open + 1..open + 1 + close];
        if name.contains('{') {
            return Err(TemplateError::UnbalancedBrace(offset + open));
        }
        if name.is_empty() {
            return Err(TemplateError::EmptyPlaceholder(offset + open));
        }
        if open > 0 {
            out.push(Piece::Text(&rest[..open]));
        }
        out.push(Piece::Slot(name));
        let consumed = open + close + 2;
        rest = &rest[consumed..];
        offset += consumed;
    }
    if !rest.is_empty() {
        out.push(Piece::Text(rest));
    }
    Ok(out)
}

/// Placeholder names referenced by `text`, in order of appearance.
pub fn placeholders(text: &str) -> Result<Vec<&str>, TemplateError> {
    Ok(pieces(text)?
        .into_iter()
        .filter_map(|p| match p {
            Piece::Slot(name) => Some(name),
            Piece::Text(_) => None,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActTemplate {
    pub act_type: DialogueActType,
    pub template_text: String,
    pub description: String,
}

impl ActTemplate {
    pub fn new(act_type: DialogueActType, template_text: impl Into<String>) -> Self {
        Self {
            act_type,
            template_text: template_text.into(),
            description: act_descriptor(act_type).description.to_string(),
        }
    }

    /// Checks that every placeholder is a known context field.
    pub fn check(&self) -> Result<(), TemplateError> {
        for name in placeholders(&self.template_text)? {
            if !CONTEXT_FIELDS.contains(&name) {
                return Err(TemplateError::UndeclaredPlaceholder(name.to_string()));
            }
        }
        Ok(())
    }
}

pub fn default_template_text(act_type: DialogueActType) -> &'static str {
    match act_type {
        DialogueActType::Restatement => "Let me repeat what I said about {topic}.",
        DialogueActType::FeedbackRequest => "How are you getting on with {topic}? Tell me which part is unclear.",
        DialogueActType::InformationExtension => "Here is some more detail about {topic}: {prior_agent_info}.",
        DialogueActType::InformationSupplement => "Let me put {topic} another way, one step at a time.",
        DialogueActType::ResponseCorrection => {
            "Sorry, I gave you the wrong answer about {topic}. The correct information is: {prior_agent_info}."
        }
        DialogueActType::Confirmation => {
            "You are right, what I told you about {topic} had a problem. That was my mistake."
        }
        DialogueActType::SubjectChange => "Let's leave that for now and move on to {new_topic}.",
    }
}

/// One template per act type; immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActCatalog {
    templates: [ActTemplate; 7],
}

impl Default for ActCatalog {
    fn default() -> Self {
        Self {
            templates: DialogueActType::ALL.map(|a| ActTemplate::new(a, default_template_text(a))),
        }
    }
}

impl ActCatalog {
    /// Builds a catalog from overrides; acts without an override keep the
    /// built-in English template.
    pub fn with_overrides<'a>(overrides: impl IntoIterator<Item = &'a ActTemplate>) -> Self {
        let mut catalog = Self::default();
        for t in overrides {
            catalog.templates[t.act_type as usize] = t.clone();
        }
        catalog
    }

    pub fn template(&self, act_type: DialogueActType) -> &ActTemplate {
        &self.templates[act_type as usize]
    }

    pub fn templates(&self) -> &[ActTemplate] {
        &self.templates
    }

    pub fn render(&self, act_type: DialogueActType, context: &TurnContext) -> Result<String, RenderError> {
        let template = self.template(act_type);
        let parts =
            pieces(&template.template_text).map_err(|source| RenderError::Template { act: act_type, source })?;
        let mut out = String::with_capacity(template.template_text.len() + 32);
        for part in parts {
            match part {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(name) => {
                    let value = context
                        .get(name)
                        .ok_or_else(|| RenderError::MissingContextField(name.to_string()))?;
                    out.push_str(value);
                }
            }
        }
        Ok(out)
    }

    pub fn render_act(
        &self,
        act_type: DialogueActType,
        context: &TurnContext,
        step_index: usize,
        policy_id: &str,
    ) -> Result<DialogueAct, RenderError> {
        Ok(DialogueAct {
            act_type,
            utterance: self.render(act_type, context)?,
            step_index,
            policy_id: policy_id.to_string(),
        })
    }
}

/// A concrete act emitted by the engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueAct {
    pub act_type: DialogueActType,
    pub utterance: String,
    pub step_index: usize,
    pub policy_id: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn canonical_indices_are_a_bijection() {
        for (i, act) in DialogueActType::ALL.iter().enumerate() {
            assert_eq!(act.index(), i + 1);
            assert_eq!(DialogueActType::from_index(i + 1), Some(*act));
            assert_eq!(DialogueActType::from_dsl_name(act.dsl_name()), Some(*act));
            assert_eq!(DialogueActType::from_wire_name(act.wire_name()), Some(*act));
        }
        assert_eq!(DialogueActType::from_index(0), None);
        assert_eq!(DialogueActType::from_index(8), None);
    }

    #[test]
    fn descriptors() {
        let r = act_descriptor(DialogueActType::Restatement);
        assert_eq!(r.index, 1);
        assert!(r.description.contains("repeats the information or question"));
        assert_eq!(act_descriptor(DialogueActType::SubjectChange).index, 7);
        let names: HashSet<_> = DialogueActType::ALL.iter().map(|a| act_descriptor(*a).name).collect();
        let descs: HashSet<_> = DialogueActType::ALL
            .iter()
            .map(|a| act_descriptor(*a).description)
            .collect();
        assert_eq!(names.len(), 7);
        assert_eq!(descs.len(), 7);
    }

    #[test]
    fn render_restatement_with_topic_only() {
        let ctx = TurnContext {
            topic: Some("the maze task".into()),
            ..Default::default()
        };
        let act = ActCatalog::default()
            .render_act(DialogueActType::Restatement, &ctx, 0, "general")
            .unwrap();
        assert!(act.utterance.contains("the maze task"));
        assert_eq!(act.act_type, DialogueActType::Restatement);
    }

    #[test]
    fn render_subject_change_introduces_new_topic() {
        let ctx = TurnContext {
            new_topic: Some("a warm-up question".into()),
            ..Default::default()
        };
        let text = ActCatalog::default()
            .render(DialogueActType::SubjectChange, &ctx)
            .unwrap();
        assert!(text.contains("a warm-up question"));
    }

    #[test]
    fn render_missing_field() {
        let err = ActCatalog::default()
            .render(DialogueActType::FeedbackRequest, &TurnContext::default())
            .unwrap_err();
        assert_eq!(err, RenderError::MissingContextField("topic".into()));
    }

    #[test]
    fn default_templates_are_injective_and_deterministic() {
        let catalog = ActCatalog::default();
        let ctx = TurnContext::simulation();
        let rendered: Vec<_> = DialogueActType::ALL
            .iter()
            .map(|a| catalog.render(*a, &ctx).unwrap())
            .collect();
        let unique: HashSet<_> = rendered.iter().collect();
        assert_eq!(unique.len(), 7);
        for (a, text) in DialogueActType::ALL.iter().zip(&rendered) {
            assert_eq!(&catalog.render(*a, &ctx).unwrap(), text);
            assert!(catalog.template(*a).check().is_ok());
        }
    }

    #[test]
    fn placeholder_scanning() {
        assert_eq!(
            placeholders("a {topic} b {new_topic}").unwrap(),
            vec!["topic", "new_topic"]
        );
        assert_eq!(placeholders("no slots").unwrap(), Vec::<&str>::new());
        assert!(matches!(
            placeholders("x {topic"),
            Err(TemplateError::UnbalancedBrace(2))
        ));
        assert!(matches!(placeholders("x } y"), Err(TemplateError::UnbalancedBrace(2))));
        assert!(matches!(placeholders("{}"), Err(TemplateError::EmptyPlaceholder(0))));
        let bad = ActTemplate::new(DialogueActType::Confirmation, "about {mood}");
        assert_eq!(bad.check(), Err(TemplateError::UndeclaredPlaceholder("mood".into())));
    }

    #[test]
    fn overrides_replace_only_named_acts() {
        let custom = ActTemplate::new(DialogueActType::Confirmation, "My mistake about {topic}.");
        let catalog = ActCatalog::with_overrides([&custom]);
        assert_eq!(
            catalog.template(DialogueActType::Confirmation).template_text,
            "My mistake about {topic}."
        );
        assert_eq!(
            catalog.template(DialogueActType::Restatement).template_text,
            default_template_text(DialogueActType::Restatement)
        );
    }
}
