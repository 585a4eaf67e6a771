//! JSONL session logs: one header line, then one line per event.
//!
//! Batch runs and the session service write the same format, so any log can
//! be re-checked with [`crate::audit::audit_transcript`].

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acts::TurnContext;
use crate::confusion::InductionType;
use crate::engine::{EngineConfig, Session, SessionEvent};

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub log_version: u32,
    pub session_id: String,
    pub policy_name: String,
    pub policy_checksum: String,
    pub config: EngineConfig,
    pub seed: u64,
    /// Random stream of the simulated user, for batch trials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub induction: Option<InductionType>,
    /// Template context the session rendered utterances with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<TurnContext>,
}

impl LogHeader {
    pub fn for_session(session: &Session) -> Self {
        Self {
            log_version: LOG_VERSION,
            session_id: session.id().to_string(),
            policy_name: session.program().name().to_string(),
            policy_checksum: session.program().checksum.clone(),
            config: *session.config(),
            seed: session.rng_seed(),
            stream: None,
            scenario: None,
            induction: None,
            context: Some(session.context().clone()),
        }
    }
}

#[derive(Debug, Error)]
pub enum JournalError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("log is empty")]
    Empty,
    #[error("unsupported log version {0}")]
    Version(u32),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_header<W: Write>(out: &mut W, header: &LogHeader) -> io::Result<()> {
    serde_json::to_writer(&mut *out, header)?;
    out.write_all(b"\n")
}

pub fn write_event<W: Write>(out: &mut W, event: &SessionEvent) -> io::Result<()> {
    serde_json::to_writer(&mut *out, event)?;
    out.write_all(b"\n")
}

pub fn write_log<W: Write>(out: &mut W, header: &LogHeader, events: &[SessionEvent]) -> io::Result<()> {
    write_header(out, header)?;
    for e in events {
        write_event(out, e)?;
    }
    Ok(())
}

pub fn read_log<R: BufRead>(input: R) -> Result<(LogHeader, Vec<SessionEvent>), JournalError> {
    let mut header = None;
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let json = |source| JournalError::Json { line: i + 1, source };
        if header.is_none() {
            let h: LogHeader = serde_json::from_str(&line).map_err(json)?;
            if h.log_version != LOG_VERSION {
                return Err(JournalError::Version(h.log_version));
            }
            header = Some(h);
        } else {
            events.push(serde_json::from_str(&line).map_err(json)?);
        }
    }
    Ok((header.ok_or(JournalError::Empty)?, events))
}
