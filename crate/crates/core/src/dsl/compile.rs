use std::ops::Range;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::ast::{Metadata, PolicyAst, PolicyKey, StepSpec};
use super::parse::{parse_policy, PolicyError, PolicySource};
use super::validate::{validate_program, Diagnostic};
use crate::acts::ActCatalog;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Parse(#[from] PolicyError),
    #[error("policy has {} diagnostic(s): {}", .0.len(), .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
}

/// Dense step tables, one contiguous range per policy key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepTables {
    steps: Vec<StepSpec>,
    ranges: [Range<usize>; PolicyKey::COUNT],
}

impl StepTables {
    pub fn len(&self, key: PolicyKey) -> usize {
        self.ranges[key.slot()].len()
    }

    pub fn is_empty(&self, key: PolicyKey) -> bool {
        self.len(key) == 0
    }

    pub fn step(&self, key: PolicyKey, index: usize) -> Option<&StepSpec> {
        let range = &self.ranges[key.slot()];
        if index < range.len() {
            self.steps.get(range.start + index)
        } else {
            None
        }
    }

    pub fn steps(&self, key: PolicyKey) -> &[StepSpec] {
        &self.steps[self.ranges[key.slot()].clone()]
    }

    pub fn total_steps(&self) -> usize {
        self.steps.len()
    }
}

/// A validated, compiled policy. Immutable and shareable between sessions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyProgram {
    pub metadata: Metadata,
    pub tables: StepTables,
    pub catalog: ActCatalog,
    /// Hex SHA-256 of the source text the program was compiled from.
    pub checksum: String,
}

impl PolicyProgram {
    pub fn name(&self) -> &str {
        &self.metadata.name
    }

    pub fn step(&self, key: PolicyKey, index: usize) -> Option<&StepSpec> {
        self.tables.step(key, index)
    }

    pub fn len(&self, key: PolicyKey) -> usize {
        self.tables.len(key)
    }

    /// Structural equality: everything except the checksum.
    pub fn same_structure(&self, other: &Self) -> bool {
        self.metadata == other.metadata && self.tables == other.tables && self.catalog == other.catalog
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn compile_with_checksum(ast: &PolicyAst, checksum: String) -> Result<PolicyProgram, CompileError> {
    let diagnostics = validate_program(ast);
    if !diagnostics.is_empty() {
        return Err(CompileError::Invalid(diagnostics));
    }
    let mut steps = Vec::new();
    let ranges = std::array::from_fn(|slot| {
        let key = PolicyKey::all().nth(slot).expect("six policy keys");
        let start = steps.len();
        steps.extend_from_slice(ast.steps(key).unwrap_or(&[]));
        start..steps.len()
    });
    Ok(PolicyProgram {
        metadata: ast.metadata.clone(),
        tables: StepTables { steps, ranges },
        catalog: ActCatalog::with_overrides(&ast.templates),
        checksum,
    })
}

/// Compiles an AST; the checksum covers its canonical serialization.
pub fn compile(ast: &PolicyAst) -> Result<PolicyProgram, CompileError> {
    compile_with_checksum(ast, sha256_hex(ast.to_source().as_bytes()))
}

/// Parses, validates and compiles; the checksum covers the source bytes.
pub fn compile_source(source: &PolicySource) -> Result<PolicyProgram, CompileError> {
    let ast = parse_policy(source)?;
    compile_with_checksum(&ast, sha256_hex(source.text.as_bytes()))
}
