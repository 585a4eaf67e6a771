//! Pure dispatch state machine underlying [`super::Session`].
//!
//! The kernel holds only finite, hashable bookkeeping (no level, no
//! transcript), so the same transition code drives live sessions and the
//! exact Markov analysis of a policy.

use serde::{Deserialize, Serialize};

use super::{EndReason, EngineConfig, EngineError, ProductiveDispatch, SessionStatus, SwitchReason};
use crate::acts::DialogueActType;
use crate::confusion::{step_affect, AffectState, ConfusionZone, InductionType};
use crate::dsl::{OnFailure, PolicyKey, PolicyProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Kernel {
    pub zone: ConfusionZone,
    pub affect: AffectState,
    pub persistence_turns: u32,
    pub induction: Option<InductionType>,
    pub active: Option<PolicyKey>,
    pub step_index: usize,
    pub repeats_used: u32,
    /// Zone rank when the current step was first emitted.
    pub step_baseline: u8,
    /// Set once a step escalated with `on_failure=unproductive`; pins the
    /// unproductive sequence for the rest of the episode.
    pub escalated: bool,
    pub status: SessionStatus,
    pub observation_pending: bool,
}

impl Default for Kernel {
    fn default() -> Self {
        Self {
            zone: ConfusionZone::Engaged,
            affect: AffectState::Engagement,
            persistence_turns: 0,
            induction: None,
            active: None,
            step_index: 0,
            repeats_used: 0,
            step_baseline: 0,
            escalated: false,
            status: SessionStatus::Active,
            observation_pending: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ObserveEffects {
    pub resolved: bool,
    pub ended: Option<EndReason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Switch {
    pub from: Option<PolicyKey>,
    pub to: PolicyKey,
    pub reason: SwitchReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emission {
    pub policy: PolicyKey,
    pub step_index: usize,
    pub act_type: DialogueActType,
    pub recommended: DialogueActType,
    /// 1-based repeat number of this step.
    pub repeat: u32,
    pub max_repeats: u32,
    pub overridden: bool,
    pub ladder_advanced: bool,
}

/// Everything that happened during one `decide` call, in order: any policy
/// switches, then either an emission or an end of session.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Decision {
    pub switches: Vec<Switch>,
    pub emission: Option<Emission>,
    pub ended: Option<EndReason>,
}

impl Kernel {
    /// Records a zone observation. State is untouched on error.
    pub fn observe(
        &mut self,
        zone: ConfusionZone,
        induction: Option<InductionType>,
        config: &EngineConfig,
    ) -> Result<ObserveEffects, EngineError> {
        if let SessionStatus::Ended(_) = self.status {
            return Err(EngineError::ObservationAfterEnd);
        }
        if zone != ConfusionZone::Engaged && induction.is_none() && self.induction.is_none() {
            return Err(EngineError::MissingInduction);
        }
        if induction.is_some() {
            self.induction = induction;
        }
        self.persistence_turns = if zone == self.zone {
            self.persistence_turns.saturating_add(1)
        } else {
            0
        };
        self.zone = zone;
        self.affect = step_affect(self.affect, zone, self.persistence_turns, &config.limits);
        self.observation_pending = true;

        let mut effects = ObserveEffects::default();
        if zone == ConfusionZone::Engaged {
            if self.active.is_some() {
                self.reset_episode();
                self.status = SessionStatus::Resolved;
                effects.resolved = true;
            }
        } else if self.status == SessionStatus::Resolved {
            self.status = SessionStatus::Active;
        }
        if self.affect == AffectState::Disengaged {
            self.status = SessionStatus::Ended(EndReason::Disengaged);
            self.observation_pending = false;
            effects.ended = Some(EndReason::Disengaged);
        }
        Ok(effects)
    }

    fn reset_episode(&mut self) {
        self.active = None;
        self.step_index = 0;
        self.repeats_used = 0;
        self.step_baseline = 0;
        self.escalated = false;
    }

    fn desired_policy(&self, config: &EngineConfig) -> Option<PolicyKey> {
        match self.zone {
            ConfusionZone::Engaged => None,
            ConfusionZone::UnproductiveConfusion => Some(PolicyKey::Unproductive),
            ConfusionZone::ProductiveConfusion if self.escalated => Some(PolicyKey::Unproductive),
            ConfusionZone::ProductiveConfusion => Some(match config.dispatch {
                ProductiveDispatch::SubPolicy => {
                    PolicyKey::Productive(self.induction.expect("induction recorded before confusion"))
                }
                ProductiveDispatch::GeneralLadder => PolicyKey::General,
            }),
        }
    }

    fn switch(&mut self, to: PolicyKey, reason: SwitchReason) -> Switch {
        let from = self.active;
        self.active = Some(to);
        self.step_index = 0;
        self.repeats_used = 0;
        Switch { from, to, reason }
    }

    /// Chooses the next act. `override_act` replaces the recommended act
    /// type; it only consumes the step when `config.overrides_advance_ladder`.
    pub fn decide(
        &mut self,
        program: &PolicyProgram,
        config: &EngineConfig,
        override_act: Option<DialogueActType>,
    ) -> Result<Decision, EngineError> {
        match self.status {
            SessionStatus::Ended(_) => return Err(EngineError::ActAfterEnd),
            SessionStatus::Active | SessionStatus::Resolved => {}
        }
        if !self.observation_pending {
            return Err(EngineError::NoObservation);
        }
        self.observation_pending = false;
        let mut decision = Decision::default();
        let Some(desired) = self.desired_policy(config) else {
            return Ok(decision);
        };

        if self.active != Some(desired) {
            let reason = match (self.active, desired) {
                (None, _) => SwitchReason::Entry,
                (Some(_), PolicyKey::Unproductive) => SwitchReason::Deterioration,
                (Some(PolicyKey::Unproductive), _) => SwitchReason::Recovery,
                (Some(_), _) => SwitchReason::Retarget,
            };
            decision.switches.push(self.switch(desired, reason));
        } else {
            let current = self.active.expect("active policy");
            let step = *program.step(current, self.step_index).ok_or(EngineError::StepLookup {
                policy: current,
                index: self.step_index,
            })?;
            if self.repeats_used >= step.max_repeats {
                if self.zone.rank() < self.step_baseline {
                    self.repeats_used = 0;
                } else {
                    match step.on_failure {
                        OnFailure::NextStep => {
                            self.step_index += 1;
                            self.repeats_used = 0;
                        }
                        OnFailure::GotoUnproductive => {
                            self.escalated = true;
                            decision
                                .switches
                                .push(self.switch(PolicyKey::Unproductive, SwitchReason::Escalation));
                        }
                        OnFailure::EndEpisode => {
                            self.status = SessionStatus::Ended(EndReason::Exhausted);
                            decision.ended = Some(EndReason::Exhausted);
                            return Ok(decision);
                        }
                    }
                }
            }
        }

        let policy = self.active.expect("active policy");
        let step = *program.step(policy, self.step_index).ok_or(EngineError::StepLookup {
            policy,
            index: self.step_index,
        })?;
        let ladder_advanced = override_act.is_none() || config.overrides_advance_ladder;
        let repeat = if ladder_advanced {
            if self.repeats_used == 0 {
                self.step_baseline = self.zone.rank();
            }
            self.repeats_used += 1;
            self.repeats_used
        } else {
            self.repeats_used + 1
        };
        decision.emission = Some(Emission {
            policy,
            step_index: self.step_index,
            act_type: override_act.unwrap_or(step.act_type),
            recommended: step.act_type,
            repeat,
            max_repeats: step.max_repeats,
            overridden: override_act.is_some(),
            ladder_advanced,
        });
        Ok(decision)
    }

    /// Copy with persistence saturated at `cap`. Outcomes of `observe` only
    /// compare persistence against limits, so states that differ beyond the
    /// largest limit behave identically.
    pub fn canonical(mut self, cap: u32) -> Self {
        self.persistence_turns = self.persistence_turns.min(cap);
        if self.repeats_used == 0 {
            self.step_baseline = 0;
        }
        self
    }
}
