use serde::{Deserialize, Serialize};

use super::{EndReason, ObservationSource, SwitchReason};
use crate::acts::{DialogueAct, DialogueActType};
use crate::confusion::{AffectState, ConfusionZone, InductionType};
use crate::dsl::PolicyKey;
use crate::ConfusionLevel;

/// One transcript entry. `turn` is the index of the observation the event
/// belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub turn: u64,
    pub timestamp_ms: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    ObservationRecorded(ObservationRecord),
    PolicySwitched(PolicySwitch),
    ActEmitted(ActRecord),
    EpisodeResolved(EpisodeRecord),
    SessionEnded(EndRecord),
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::ObservationRecorded(_) => "observation_recorded",
            EventKind::PolicySwitched(_) => "policy_switched",
            EventKind::ActEmitted(_) => "act_emitted",
            EventKind::EpisodeResolved(_) => "episode_resolved",
            EventKind::SessionEnded(_) => "session_ended",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub level: ConfusionLevel,
    pub induction: Option<InductionType>,
    pub source: ObservationSource,
    pub zone: ConfusionZone,
    pub affect: AffectState,
    pub persistence_turns: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicySwitch {
    pub from: Option<PolicyKey>,
    pub to: PolicyKey,
    pub reason: SwitchReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActRecord {
    #[serde(flatten)]
    pub act: DialogueAct,
    pub repeat: u32,
    pub max_repeats: u32,
    pub recommended: DialogueActType,
    pub overridden: bool,
    /// False for wizard overrides that leave the step bookkeeping untouched.
    pub ladder_advanced: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub acts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndRecord {
    pub reason: EndReason,
}
