//! Re-checks a JSONL session log.
//!
//! Every log is audited against the transcript invariants. When the policy
//! that produced it is available (matched by checksum), the logged
//! observations and overrides are also fed to a fresh session and the
//! regenerated transcript must equal the log up to timestamps.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use mitigator_core::audit::{audit_transcript, Violation};
use mitigator_core::dsl::PolicyProgram;
use mitigator_core::engine::{EndReason, EventKind, Observation, Session, SessionEvent};
use mitigator_core::journal::{read_log, JournalError, LogHeader};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        #[source]
        source: JournalError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Reexecution {
    /// Regenerated transcript equals the log.
    Matched,
    /// Regenerated transcript differs from the log.
    Diverged,
    /// No program with the logged checksum was supplied.
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplayReport {
    pub session_id: String,
    pub events: usize,
    pub violations: Vec<Violation>,
    pub reexecution: Reexecution,
    /// First differing event index when re-execution diverged.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<usize>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.reexecution != Reexecution::Diverged
    }
}

fn strip_time(events: &[SessionEvent]) -> Vec<SessionEvent> {
    events
        .iter()
        .cloned()
        .map(|mut e| {
            e.timestamp_ms = 0;
            e
        })
        .collect()
}

/// Drives a fresh session with the inputs recorded in `events`.
pub fn reexecute(header: &LogHeader, program: Arc<PolicyProgram>, events: &[SessionEvent]) -> Vec<SessionEvent> {
    let mut session = Session::with_id(header.session_id.clone(), program, header.config, header.seed);
    if let Some(context) = &header.context {
        session.set_context(context.clone());
    }
    let mut acted = false;
    for e in events {
        let result = match &e.kind {
            EventKind::ObservationRecorded(o) => {
                acted = false;
                session
                    .observe(Observation {
                        level: o.level,
                        induction: o.induction,
                        source: o.source,
                    })
                    .map(|_| ())
            }
            EventKind::ActEmitted(a) => {
                acted = true;
                if a.overridden {
                    session.next_act_with_override(a.act.act_type).map(|_| ())
                } else {
                    session.next_act().map(|_| ())
                }
            }
            EventKind::SessionEnded(end) if end.reason == EndReason::Exhausted && !acted => {
                acted = true;
                session.next_act().map(|_| ())
            }
            _ => Ok(()),
        };
        if result.is_err() {
            break;
        }
    }
    session.transcript().to_vec()
}

pub fn replay_events(header: &LogHeader, events: &[SessionEvent], programs: &[Arc<PolicyProgram>]) -> ReplayReport {
    let violations = audit_transcript(events, &header.config);
    let program = programs.iter().find(|p| p.checksum == header.policy_checksum);
    let (reexecution, divergence) = match program {
        None => (Reexecution::Skipped, None),
        Some(p) => {
            let regenerated = strip_time(&reexecute(header, Arc::clone(p), events));
            let logged = strip_time(events);
            if regenerated == logged {
                (Reexecution::Matched, None)
            } else {
                let at = regenerated
                    .iter()
                    .zip(&logged)
                    .position(|(a, b)| a != b)
                    .unwrap_or(regenerated.len().min(logged.len()));
                (Reexecution::Diverged, Some(at))
            }
        }
    };
    ReplayReport {
        session_id: header.session_id.clone(),
        events: events.len(),
        violations,
        reexecution,
        divergence,
    }
}

pub fn replay_file(path: &Path, programs: &[Arc<PolicyProgram>]) -> Result<ReplayReport, ReplayError> {
    let read_err = |source| ReplayError::Read {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(|e| read_err(JournalError::Io(e)))?;
    let (header, events) = read_log(BufReader::new(file)).map_err(read_err)?;
    Ok(replay_events(&header, &events, programs))
}
