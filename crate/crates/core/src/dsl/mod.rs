//! Line-oriented policy language.
//!
//! ```text
//! name: default
//! version: 1
//!
//! [general]
//! step 1: Restatement repeats=1 on_failure=next
//!
//! [productive complex]
//! step 1: InformationSupplement repeats=1 on_failure=unproductive
//!
//! [unproductive]
//! step 1: SubjectChange repeats=1 on_failure=end
//!
//! [templates]
//! template Restatement: "Let me repeat what I said about {topic}."
//! ```
//!
//! `#` starts a comment outside quoted strings. `repeats` defaults to 1 and
//! `on_failure` to `next`.

mod ast;
mod compile;
mod parse;
mod validate;

pub use ast::{Locations, Metadata, OnFailure, OnSuccess, PolicyAst, PolicyKey, StepSpec};
pub use compile::{compile, compile_source, sha256_hex, CompileError, PolicyProgram, StepTables};
pub use parse::{parse_policy, PolicyError, PolicySource};
pub use validate::{validate_program, Diagnostic, DiagnosticCode};

/// Text of the shipped default policy (`policies/default.cmp`).
pub const DEFAULT_POLICY_TEXT: &str = include_str!("../../policies/default.cmp");

pub fn builtin_default() -> PolicySource {
    PolicySource::new(DEFAULT_POLICY_TEXT, "builtin")
}

/// The compiled default policy.
pub fn builtin_program() -> PolicyProgram {
    compile_source(&builtin_default()).expect("builtin policy compiles")
}

/// Resolves `builtin` or a file path to a policy source.
pub fn load_policy(spec: &str) -> std::io::Result<PolicySource> {
    if spec == "builtin" {
        Ok(builtin_default())
    } else {
        PolicySource::from_file(std::path::Path::new(spec))
    }
}
