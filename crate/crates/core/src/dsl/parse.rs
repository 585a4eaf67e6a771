use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::ast::{Metadata, OnFailure, PolicyAst, PolicyKey, StepSpec};
use crate::acts::{ActTemplate, DialogueActType};
use crate::confusion::InductionType;

/// Policy text plus where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicySource {
    pub text: String,
    pub origin: String,
}

impl PolicySource {
    pub fn new(text: impl Into<String>, origin: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            origin: origin.into(),
        }
    }

    pub fn from_file(path: &std::path::Path) -> std::io::Result<Self> {
        Ok(Self::new(std::fs::read_to_string(path)?, path.display().to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum PolicyError {
    #[error("line {line}, column {column}: {message}\n  | {excerpt}")]
    ParseError {
        line: usize,
        column: usize,
        message: String,
        excerpt: String,
    },
    #[error("line {line}, column {column}: unknown act `{name}`")]
    UnknownAct { line: usize, column: usize, name: String },
    #[error("line {line}: duplicate section {name}")]
    DuplicateSection { line: usize, name: String },
}

impl PolicyError {
    pub fn line(&self) -> usize {
        match self {
            PolicyError::ParseError { line, .. }
            | PolicyError::UnknownAct { line, .. }
            | PolicyError::DuplicateSection { line, .. } => *line,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Steps(PolicyKey),
    Templates,
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Section::Steps(k) => f.write_str(&k.header()),
            Section::Templates => f.write_str("[templates]"),
        }
    }
}

/// Character cursor over one source line; columns are 1-based.
struct Cursor<'a> {
    line_no: usize,
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(line_no: usize, text: &'a str) -> Self {
        Self { line_no, text, pos: 0 }
    }

    fn column(&self) -> usize {
        self.text[..self.pos].chars().count() + 1
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn at_end(&self) -> bool {
        self.rest().trim().is_empty()
    }

    fn error(&self, message: impl Into<String>) -> PolicyError {
        PolicyError::ParseError {
            line: self.line_no,
            column: self.column(),
            message: message.into(),
            excerpt: self.text.to_string(),
        }
    }

    fn word(&mut self) -> &'a str {
        let rest = self.rest();
        let len = rest
            .find(|c: char| !(c.is_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    fn expect_char(&mut self, c: char) -> Result<(), PolicyError> {
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn act_name(&mut self) -> Result<DialogueActType, PolicyError> {
        self.skip_ws();
        let column = self.column();
        let name = self.word();
        if name.is_empty() {
            return Err(self.error("expected act name"));
        }
        DialogueActType::from_dsl_name(name).ok_or_else(|| PolicyError::UnknownAct {
            line: self.line_no,
            column,
            name: name.to_string(),
        })
    }

    fn quoted(&mut self) -> Result<String, PolicyError> {
        self.skip_ws();
        if !self.rest().starts_with('"') {
            return Err(self.error("expected quoted template text"));
        }
        let start = self.pos;
        self.pos += 1;
        let mut out = String::new();
        let mut chars = self.rest().char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos += i + 1;
                    return Ok(out);
                }
                '\\' => {
                    let Some((_, escaped)) = chars.next() else { break };
                    match escaped {
                        '"' => out.push('"'),
                        '\\' => out.push('\\'),
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        other => {
                            self.pos += i;
                            return Err(self.error(format!("unknown escape `\\{other}`")));
                        }
                    }
                }
                c => out.push(c),
            }
        }
        self.pos = start;
        Err(self.error("unterminated string"))
    }
}

/// Removes a trailing `#` comment that is not inside a quoted string.
fn strip_comment(line: &str) -> &str {
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_string => escaped = true,
            '"' => in_string = !in_string,
            '#' if !in_string => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_header(cur: &mut Cursor<'_>) -> Result<Section, PolicyError> {
    cur.expect_char('[')?;
    cur.skip_ws();
    let kind_col = cur.column();
    let kind = cur.word();
    let section = match kind {
        "general" => Section::Steps(PolicyKey::General),
        "unproductive" => Section::Steps(PolicyKey::Unproductive),
        "templates" => Section::Templates,
        "productive" => {
            cur.skip_ws();
            let kw = cur.word();
            match InductionType::from_keyword(kw) {
                Some(i) => Section::Steps(PolicyKey::Productive(i)),
                None if kw.is_empty() => return Err(cur.error("expected induction type after `productive`")),
                None => return Err(cur.error(format!(
                    "unknown induction type `{kw}` (expected complex, contradictory, insufficient or false_feedback)"
                ))),
            }
        }
        "" => return Err(cur.error("expected section name")),
        other => {
            return Err(PolicyError::ParseError {
                line: cur.line_no,
                column: kind_col,
                message: format!("unknown section `{other}`"),
                excerpt: cur.text.to_string(),
            })
        }
    };
    cur.skip_ws();
    cur.expect_char(']')?;
    if !cur.at_end() {
        return Err(cur.error("unexpected text after section header"));
    }
    Ok(section)
}

fn parse_step(cur: &mut Cursor<'_>, expected_number: usize) -> Result<StepSpec, PolicyError> {
    let kw = cur.word();
    if kw != "step" {
        cur.pos = 0;
        return Err(cur.error("expected `step <n>: <Act> ...`"));
    }
    cur.skip_ws();
    let num_col = cur.column();
    let digits = cur.word();
    let number: usize = digits.parse().map_err(|_| cur.error("expected step number"))?;
    if number != expected_number {
        return Err(PolicyError::ParseError {
            line: cur.line_no,
            column: num_col,
            message: format!("expected step {expected_number}, found step {number}"),
            excerpt: cur.text.to_string(),
        });
    }
    cur.expect_char(':')?;
    let act = cur.act_name()?;
    let mut repeats = None;
    let mut on_failure = None;
    loop {
        cur.skip_ws();
        if cur.at_end() {
            break;
        }
        let key_col = cur.column();
        let key = cur.word();
        cur.expect_char('=')?;
        let value_col = cur.column();
        let value = cur.word();
        let located = |message: String, column: usize| PolicyError::ParseError {
            line: cur.line_no,
            column,
            message,
            excerpt: cur.text.to_string(),
        };
        match key {
            "repeats" => {
                if repeats.is_some() {
                    return Err(located("duplicate `repeats`".into(), key_col));
                }
                let k: u32 = value
                    .parse()
                    .map_err(|_| located(format!("invalid repeat count `{value}`"), value_col))?;
                if k == 0 {
                    return Err(located("repeats must be at least 1".into(), value_col));
                }
                repeats = Some(k);
            }
            "on_failure" => {
                if on_failure.is_some() {
                    return Err(located("duplicate `on_failure`".into(), key_col));
                }
                on_failure = Some(OnFailure::from_keyword(value).ok_or_else(|| {
                    located(
                        format!("invalid on_failure `{value}` (expected next, unproductive or end)"),
                        value_col,
                    )
                })?);
            }
            "" => return Err(cur.error("expected `key=value`")),
            other => return Err(located(format!("unknown step attribute `{other}`"), key_col)),
        }
    }
    Ok(StepSpec::new(
        act,
        repeats.unwrap_or(1),
        on_failure.unwrap_or(OnFailure::NextStep),
    ))
}

fn parse_template(cur: &mut Cursor<'_>) -> Result<ActTemplate, PolicyError> {
    let kw = cur.word();
    if kw != "template" {
        cur.pos = 0;
        return Err(cur.error("expected `template <Act>: \"...\"`"));
    }
    let act = cur.act_name()?;
    cur.skip_ws();
    cur.expect_char(':')?;
    let text = cur.quoted()?;
    if !cur.at_end() {
        return Err(cur.error("unexpected text after template string"));
    }
    Ok(ActTemplate::new(act, text))
}

fn parse_metadata(
    cur: &mut Cursor<'_>,
    meta: &mut Metadata,
    seen: &mut BTreeSet<&'static str>,
) -> Result<(), PolicyError> {
    let key = cur.word();
    let slot: (&'static str, &mut String) = match key {
        "name" => ("name", &mut meta.name),
        "version" => ("version", &mut meta.version),
        _ => {
            cur.pos = 0;
            return Err(cur.error("expected a section header such as `[general]`"));
        }
    };
    cur.skip_ws();
    cur.expect_char(':')?;
    let value = cur.rest().trim();
    if value.is_empty() {
        return Err(cur.error(format!("empty {}", slot.0)));
    }
    if !seen.insert(slot.0) {
        cur.pos = 0;
        return Err(cur.error(format!("duplicate `{}`", slot.0)));
    }
    *slot.1 = value.to_string();
    Ok(())
}

/// Parses policy-file text into an AST. Structural checks beyond the grammar
/// are left to [`super::validate_program`].
pub fn parse_policy(source: &PolicySource) -> Result<PolicyAst, PolicyError> {
    let mut ast = PolicyAst::default();
    let mut meta_seen = BTreeSet::new();
    let mut current: Option<Section> = None;
    let mut seen_sections: Vec<Section> = Vec::new();
    let mut line_count = 0;

    for (idx, raw) in source.text.lines().enumerate() {
        let line_no = idx + 1;
        line_count = line_no;
        let content = strip_comment(raw);
        if content.trim().is_empty() {
            continue;
        }
        let lead = content.len() - content.trim_start().len();
        let mut cur = Cursor::new(line_no, content);
        cur.pos = lead;

        if content.trim_start().starts_with('[') {
            let section = parse_header(&mut cur)?;
            if seen_sections.contains(&section) {
                return Err(PolicyError::DuplicateSection {
                    line: line_no,
                    name: section.to_string(),
                });
            }
            seen_sections.push(section);
            match section {
                Section::Steps(key) => {
                    ast.locations.sections.insert(key, line_no);
                    if let PolicyKey::Productive(i) = key {
                        ast.productive_table.insert(i, Vec::new());
                    }
                }
                Section::Templates => ast.locations.templates_header = Some(line_no),
            }
            current = Some(section);
            continue;
        }

        match current {
            None => parse_metadata(&mut cur, &mut ast.metadata, &mut meta_seen)?,
            Some(Section::Steps(key)) => {
                let steps = match key {
                    PolicyKey::General => &mut ast.general_ladder,
                    PolicyKey::Unproductive => &mut ast.unproductive_sequence,
                    PolicyKey::Productive(i) => ast.productive_table.entry(i).or_default(),
                };
                let step = parse_step(&mut cur, steps.len() + 1)?;
                ast.locations.steps.insert((key, steps.len()), line_no);
                steps.push(step);
            }
            Some(Section::Templates) => {
                let template = parse_template(&mut cur)?;
                ast.templates.push(template);
                ast.locations.templates.push(line_no);
            }
        }
    }
    ast.locations.last_line = line_count.max(1);

    for (key, label) in [
        (PolicyKey::General, "[general]"),
        (PolicyKey::Unproductive, "[unproductive]"),
    ] {
        if !ast.locations.sections.contains_key(&key) {
            return Err(PolicyError::ParseError {
                line: line_count + 1,
                column: 1,
                message: format!("missing {label} section"),
                excerpt: String::new(),
            });
        }
    }
    Ok(ast)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<PolicyAst, PolicyError> {
        parse_policy(&PolicySource::new(text, "test"))
    }

    const MINIMAL: &str = "\
[general]
step 1: Restatement
[productive complex]
step 1: InformationSupplement repeats=2 on_failure=unproductive
[unproductive]
step 1: SubjectChange on_failure=end
";

    #[test]
    fn parses_minimal() {
        let ast = parse(MINIMAL).unwrap();
        assert_eq!(
            ast.general_ladder,
            vec![StepSpec::new(DialogueActType::Restatement, 1, OnFailure::NextStep)]
        );
        assert_eq!(
            ast.productive_table[&InductionType::ComplexInformation],
            vec![StepSpec::new(
                DialogueActType::InformationSupplement,
                2,
                OnFailure::GotoUnproductive
            )]
        );
        assert_eq!(ast.unproductive_sequence[0].on_failure, OnFailure::EndEpisode);
        assert_eq!(ast.step_line(PolicyKey::Unproductive, 0), Some(6));
        assert_eq!(ast.metadata, Metadata::default());
    }

    #[test]
    fn empty_source_is_missing_general() {
        let err = parse("").unwrap_err();
        assert!(matches!(&err, PolicyError::ParseError { message, line: 1, .. } if message.contains("[general]")));
    }

    #[test]
    fn unknown_act_is_located() {
        let err = parse("[general]\nstep 1: Restate repeats=1 on_failure=next\n").unwrap_err();
        assert_eq!(
            err,
            PolicyError::UnknownAct {
                line: 2,
                column: 9,
                name: "Restate".into()
            }
        );
    }

    #[test]
    fn duplicate_section() {
        let err = parse("[general]\nstep 1: Restatement\n[general]\n").unwrap_err();
        assert_eq!(
            err,
            PolicyError::DuplicateSection {
                line: 3,
                name: "[general]".into()
            }
        );
    }

    #[test]
    fn step_numbers_must_be_sequential() {
        let err = parse("[general]\nstep 2: Restatement\n").unwrap_err();
        assert!(matches!(err, PolicyError::ParseError { line: 2, column: 6, .. }));
    }

    #[test]
    fn comments_and_metadata() {
        let text = "# header comment\nname: lab policy  # trailing\nversion: 2\n[general] # g\nstep 1: Confirmation\n[unproductive]\nstep 1: SubjectChange on_failure=end\n[templates]\ntemplate Confirmation: \"My # mistake \\\"{topic}\\\"\"\n";
        let ast = parse(text).unwrap();
        assert_eq!(ast.metadata.name, "lab policy");
        assert_eq!(ast.metadata.version, "2");
        assert_eq!(ast.templates[0].template_text, "My # mistake \"{topic}\"");
        assert_eq!(ast.locations.templates, vec![9]);
    }

    #[test]
    fn bad_attributes() {
        for (text, col) in [
            ("[general]\nstep 1: Restatement repeats=0\n", 29),
            ("[general]\nstep 1: Restatement on_failure=later\n", 32),
            ("[general]\nstep 1: Restatement colour=red\n", 21),
            ("[general]\nstep 1: Restatement repeats=1 repeats=2\n", 31),
        ] {
            match parse(text).unwrap_err() {
                PolicyError::ParseError { line, column, .. } => assert_eq!((line, column), (2, col), "{text}"),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn unterminated_template() {
        let err = parse("[general]\nstep 1: Restatement\n[unproductive]\nstep 1: Confirmation on_failure=end\n[templates]\ntemplate Restatement: \"open\n").unwrap_err();
        assert_eq!(err.line(), 6);
    }

    #[test]
    fn unknown_section_and_induction() {
        assert_eq!(parse("[generals]\n").unwrap_err().line(), 1);
        assert_eq!(
            parse("[general]\nstep 1: Restatement\n[productive confusing]\n")
                .unwrap_err()
                .line(),
            3
        );
    }

    #[test]
    fn text_before_sections_must_be_metadata() {
        let err = parse("step 1: Restatement\n[general]\n").unwrap_err();
        assert!(matches!(err, PolicyError::ParseError { line: 1, column: 1, .. }));
    }
}
