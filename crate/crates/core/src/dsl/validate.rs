use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::ast::{OnFailure, PolicyAst, PolicyKey};
use crate::confusion::InductionType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticCode {
    InductionNotCovered,
    EmptySection,
    UnreachableAfterEnd,
    FallsOffEnd,
    UnproductiveNotTerminal,
    EscalationLoop,
    UndeclaredPlaceholder,
    MalformedTemplate,
    DuplicateTemplate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: Option<usize>,
    pub code: DiagnosticCode,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Checks the structural rules a program must satisfy before compilation.
/// An empty result means the program is valid.
pub fn validate_program(ast: &PolicyAst) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |line: Option<usize>, code, message: String| out.push(Diagnostic { line, code, message });

    let coverage_line = ast
        .locations
        .sections
        .iter()
        .filter(|(k, _)| matches!(k, PolicyKey::Productive(_)))
        .map(|(_, l)| *l)
        .max()
        .or(ast.section_line(PolicyKey::Unproductive))
        .or(if ast.locations.last_line > 0 {
            Some(ast.locations.last_line)
        } else {
            None
        });
    for induction in InductionType::ALL {
        if !ast.productive_table.contains_key(&induction) {
            push(
                coverage_line,
                DiagnosticCode::InductionNotCovered,
                format!("induction type not covered: {induction}"),
            );
        }
    }

    for (key, steps) in ast.sections() {
        let header = ast.section_line(key);
        if steps.is_empty() {
            push(
                header,
                DiagnosticCode::EmptySection,
                format!("{} has no steps", key.header()),
            );
            continue;
        }
        let last = steps.len() - 1;
        if let Some(end_at) = steps[..last].iter().position(|s| s.on_failure == OnFailure::EndEpisode) {
            push(
                ast.step_line(key, end_at),
                DiagnosticCode::UnreachableAfterEnd,
                format!(
                    "{}: unreachable steps after EndEpisode at step {}",
                    key.header(),
                    end_at + 1
                ),
            );
        }
        if steps[last].on_failure == OnFailure::NextStep {
            push(
                ast.step_line(key, last),
                DiagnosticCode::FallsOffEnd,
                format!(
                    "{}: final step {} has on_failure=next but no step follows",
                    key.header(),
                    last + 1
                ),
            );
        }
        if key == PolicyKey::Unproductive {
            if steps[last].on_failure != OnFailure::EndEpisode && steps[last].on_failure != OnFailure::NextStep {
                push(
                    ast.step_line(key, last),
                    DiagnosticCode::UnproductiveNotTerminal,
                    "[unproductive]: final step must use on_failure=end".to_string(),
                );
            }
            for (i, s) in steps.iter().enumerate() {
                if s.on_failure == OnFailure::GotoUnproductive {
                    push(
                        ast.step_line(key, i),
                        DiagnosticCode::EscalationLoop,
                        format!("[unproductive]: step {} escalates into its own section", i + 1),
                    );
                }
            }
        }
    }

    let mut seen = BTreeSet::new();
    for (i, template) in ast.templates.iter().enumerate() {
        let line = ast.locations.templates.get(i).copied();
        if !seen.insert(template.act_type) {
            push(
                line,
                DiagnosticCode::DuplicateTemplate,
                format!("duplicate template for {}", template.act_type),
            );
        }
        if let Err(err) = template.check() {
            let code = match err {
                crate::acts::TemplateError::UndeclaredPlaceholder(_) => DiagnosticCode::UndeclaredPlaceholder,
                _ => DiagnosticCode::MalformedTemplate,
            };
            push(line, code, format!("template for {}: {err}", template.act_type));
        }
    }
    out
}
