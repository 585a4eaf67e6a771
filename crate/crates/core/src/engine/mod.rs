//! Session state machine: consumes confusion observations, dispatches the
//! general ladder or a zone-specific sub-policy, and emits mitigation acts.
//!
//! A session strictly alternates `observe` and `next_act`. The engine never
//! invents observations; levels come from a simulator or a human wizard.

mod events;
mod kernel;

use std::sync::Arc;
use std::time::Instant;

use rand::distr::{Alphanumeric, SampleString};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use events::{ActRecord, EndRecord, EpisodeRecord, EventKind, ObservationRecord, PolicySwitch, SessionEvent};
pub use kernel::{Decision, Emission, Kernel, ObserveEffects, Switch};

use crate::acts::{DialogueAct, DialogueActType, RenderError, TurnContext};
use crate::confusion::{classify_zone, InductionType, PersistenceLimits};
use crate::dsl::{PolicyKey, PolicyProgram};
use crate::{ConfusionAssessment, ConfusionLevel, Thresholds};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("session has ended; no further observations accepted")]
    ObservationAfterEnd,
    #[error("observation leaves the engaged zone but no induction type has been declared")]
    MissingInduction,
    #[error("no observation recorded since the last act")]
    NoObservation,
    #[error("session has ended; no further acts")]
    ActAfterEnd,
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("policy {policy} has no step {index}")]
    StepLookup { policy: PolicyKey, index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Disengaged,
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    /// The latest episode resolved and the user is still engaged. A later
    /// confused observation makes the session active again.
    Resolved,
    Ended(EndReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivePolicy {
    Idle,
    General,
    Productive(InductionType),
    Unproductive,
}

impl From<Option<PolicyKey>> for ActivePolicy {
    fn from(key: Option<PolicyKey>) -> Self {
        match key {
            None => ActivePolicy::Idle,
            Some(PolicyKey::General) => ActivePolicy::General,
            Some(PolicyKey::Productive(i)) => ActivePolicy::Productive(i),
            Some(PolicyKey::Unproductive) => ActivePolicy::Unproductive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchReason {
    /// A new episode starts.
    Entry,
    /// Confusion became unproductive.
    Deterioration,
    /// Unproductive confusion eased back into the productive zone.
    Recovery,
    /// A step failed with `on_failure=unproductive`.
    Escalation,
    /// The declared induction type changed mid-episode.
    Retarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationSource {
    #[default]
    Simulated,
    Wizard,
}

/// Which sequence handles productive confusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductiveDispatch {
    /// The induction-keyed productive sub-policy.
    #[default]
    SubPolicy,
    /// The general escalation ladder.
    GeneralLadder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub thresholds: Thresholds,
    pub limits: PersistenceLimits,
    pub dispatch: ProductiveDispatch,
    pub overrides_advance_ladder: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            limits: PersistenceLimits::default(),
            dispatch: ProductiveDispatch::SubPolicy,
            overrides_advance_ladder: false,
        }
    }
}

impl EngineConfig {
    pub fn new(thresholds: Thresholds, limits: PersistenceLimits) -> Self {
        Self {
            thresholds,
            limits,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub level: ConfusionLevel,
    #[serde(default)]
    pub induction: Option<InductionType>,
    #[serde(default)]
    pub source: ObservationSource,
}

impl Observation {
    pub fn simulated(level: ConfusionLevel, induction: Option<InductionType>) -> Self {
        Self {
            level,
            induction,
            source: ObservationSource::Simulated,
        }
    }

    pub fn wizard(level: ConfusionLevel, induction: Option<InductionType>) -> Self {
        Self {
            level,
            induction,
            source: ObservationSource::Wizard,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Clock {
    Logical,
    Wall(Instant),
}

impl Clock {
    fn now_ms(&self) -> u64 {
        match self {
            Clock::Logical => 0,
            Clock::Wall(start) => start.elapsed().as_millis() as u64,
        }
    }
}

pub fn random_session_id() -> String {
    Alphanumeric.sample_string(&mut rand::rng(), 20)
}

/// A single-owner session. Callers serialize access; distinct sessions share
/// only the immutable program.
#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    program: Arc<PolicyProgram>,
    config: EngineConfig,
    kernel: Kernel,
    level: ConfusionLevel,
    context: TurnContext,
    transcript: Vec<SessionEvent>,
    rng_seed: u64,
    clock: Clock,
    observations: u64,
    episode_acts: u32,
}

impl Session {
    /// Creates a session with a random id and wall-clock timestamps.
    pub fn new(program: Arc<PolicyProgram>, config: EngineConfig, seed: u64) -> Self {
        Self::with_id(random_session_id(), program, config, seed).with_wall_clock()
    }

    /// Creates a session with a caller-chosen id and zero timestamps, for
    /// reproducible transcripts.
    pub fn with_id(id: impl Into<String>, program: Arc<PolicyProgram>, config: EngineConfig, seed: u64) -> Self {
        Self {
            id: id.into(),
            program,
            config,
            kernel: Kernel::default(),
            level: ConfusionLevel::zero(),
            context: TurnContext::simulation(),
            transcript: Vec::new(),
            rng_seed: seed,
            clock: Clock::Logical,
            observations: 0,
            episode_acts: 0,
        }
    }

    /// Switches event timestamps to milliseconds since this call.
    pub fn with_wall_clock(mut self) -> Self {
        self.clock = Clock::Wall(Instant::now());
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn program(&self) -> &Arc<PolicyProgram> {
        &self.program
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn status(&self) -> SessionStatus {
        self.kernel.status
    }

    pub fn is_active(&self) -> bool {
        !matches!(self.kernel.status, SessionStatus::Ended(_))
    }

    pub fn active_policy(&self) -> ActivePolicy {
        self.kernel.active.into()
    }

    pub fn step_index(&self) -> usize {
        self.kernel.step_index
    }

    pub fn repeats_used(&self) -> u32 {
        self.kernel.repeats_used
    }

    pub fn context(&self) -> &TurnContext {
        &self.context
    }

    pub fn set_context(&mut self, context: TurnContext) {
        self.context = context;
    }

    pub fn assessment(&self) -> ConfusionAssessment {
        ConfusionAssessment {
            level: self.level,
            zone: self.kernel.zone,
            affect: self.kernel.affect,
            persistence_turns: self.kernel.persistence_turns,
        }
    }

    pub fn transcript(&self) -> &[SessionEvent] {
        &self.transcript
    }

    fn push(&mut self, turn: u64, kind: EventKind) {
        let timestamp_ms = self.clock.now_ms();
        self.transcript.push(SessionEvent {
            turn,
            timestamp_ms,
            kind,
        });
    }

    pub fn observe(&mut self, obs: Observation) -> Result<ConfusionAssessment, EngineError> {
        let zone = classify_zone(obs.level, &self.config.thresholds);
        let effects = self.kernel.observe(zone, obs.induction, &self.config)?;
        self.level = obs.level;
        let turn = self.observations;
        self.observations += 1;
        self.push(
            turn,
            EventKind::ObservationRecorded(ObservationRecord {
                level: obs.level,
                induction: obs.induction,
                source: obs.source,
                zone,
                affect: self.kernel.affect,
                persistence_turns: self.kernel.persistence_turns,
            }),
        );
        if effects.resolved {
            let acts = std::mem::take(&mut self.episode_acts);
            self.push(turn, EventKind::EpisodeResolved(EpisodeRecord { acts }));
        }
        if let Some(reason) = effects.ended {
            self.push(turn, EventKind::SessionEnded(EndRecord { reason }));
        }
        Ok(self.assessment())
    }

    /// Next recommended act, or `None` when no mitigation is needed or the
    /// policy ran out of steps (status becomes `Ended(Exhausted)`).
    pub fn next_act(&mut self) -> Result<Option<DialogueAct>, EngineError> {
        self.decide(None)
    }

    /// Emits a wizard-chosen act in place of the recommendation.
    pub fn next_act_with_override(&mut self, act_type: DialogueActType) -> Result<Option<DialogueAct>, EngineError> {
        self.decide(Some(act_type))
    }

    fn decide(&mut self, override_act: Option<DialogueActType>) -> Result<Option<DialogueAct>, EngineError> {
        let mut kernel = self.kernel;
        let decision = kernel.decide(&self.program, &self.config, override_act)?;
        let rendered = match &decision.emission {
            Some(e) => Some(self.program.catalog.render_act(
                e.act_type,
                &self.context,
                e.step_index,
                &e.policy.id(),
            )?),
            None => None,
        };
        self.kernel = kernel;

        let turn = self.observations.saturating_sub(1);
        for s in decision.switches {
            self.push(
                turn,
                EventKind::PolicySwitched(PolicySwitch {
                    from: s.from,
                    to: s.to,
                    reason: s.reason,
                }),
            );
        }
        if let (Some(e), Some(act)) = (decision.emission, rendered.as_ref()) {
            self.episode_acts += 1;
            self.push(
                turn,
                EventKind::ActEmitted(ActRecord {
                    act: act.clone(),
                    repeat: e.repeat,
                    max_repeats: e.max_repeats,
                    recommended: e.recommended,
                    overridden: e.overridden,
                    ladder_advanced: e.ladder_advanced,
                }),
            );
        }
        if let Some(reason) = decision.ended {
            self.push(turn, EventKind::SessionEnded(EndRecord { reason }));
        }
        Ok(rendered)
    }
}
