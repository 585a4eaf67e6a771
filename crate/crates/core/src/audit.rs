//! Transcript invariant checker.
//!
//! Replays a session's event list and reports every place it departs from
//! the engine's contract: affect chain legality, zone/level consistency,
//! dispatch correctness, ladder monotonicity and escalation, resolution
//! resets, and ordering rules.

use std::fmt;

use serde::Serialize;

use crate::confusion::{classify_zone, step_affect, AffectState, ConfusionZone, InductionType};
use crate::dsl::PolicyKey;
use crate::engine::{EndReason, EngineConfig, EventKind, SessionEvent, SwitchReason};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    TurnOrder,
    ZoneConsistency,
    Persistence,
    ChainLegality,
    AffectStep,
    Terminality,
    EventsAfterEnd,
    NoActWithoutNeed,
    Dispatch,
    Ladder,
    Escalation,
    ResolutionReset,
    Resolution,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Index into the event list.
    pub event: usize,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "event {}: {:?}: {}", self.event, self.rule, self.message)
    }
}

#[derive(Debug, Clone, Copy)]
struct StepCursor {
    policy: PolicyKey,
    step_index: usize,
    repeats_used: u32,
    max_repeats: u32,
    baseline: u8,
}

struct Auditor<'a> {
    config: &'a EngineConfig,
    out: Vec<Violation>,
    index: usize,
    last_turn: Option<u64>,
    last_act_turn: Option<u64>,
    zone: ConfusionZone,
    affect: AffectState,
    persistence: u32,
    observed: bool,
    induction: Option<InductionType>,
    active: Option<PolicyKey>,
    escalated: bool,
    cursor: Option<StepCursor>,
    fresh_entry: bool,
    after_resolution: bool,
    ended: bool,
    disengaged_pending: bool,
}

impl<'a> Auditor<'a> {
    fn flag(&mut self, rule: Rule, message: impl Into<String>) {
        self.out.push(Violation {
            event: self.index,
            rule,
            message: message.into(),
        });
    }

    fn event(&mut self, event: &SessionEvent) {
        if self.ended {
            self.flag(Rule::EventsAfterEnd, format!("{} after session end", event.kind.name()));
        }
        if self.disengaged_pending && !matches!(event.kind, EventKind::SessionEnded(_)) {
            self.flag(Rule::Terminality, "disengagement not followed by session end");
            self.disengaged_pending = false;
        }
        if let Some(last) = self.last_turn {
            if event.turn < last {
                self.flag(Rule::TurnOrder, format!("turn {} after turn {last}", event.turn));
            }
        }
        self.last_turn = Some(event.turn);

        match &event.kind {
            EventKind::ObservationRecorded(obs) => {
                let zone = classify_zone(obs.level, &self.config.thresholds);
                if zone != obs.zone {
                    self.flag(
                        Rule::ZoneConsistency,
                        format!("level {} classifies as {zone}, recorded {}", obs.level, obs.zone),
                    );
                }
                let expected_persistence = if obs.zone == self.zone { self.persistence + 1 } else { 0 };
                if obs.persistence_turns != expected_persistence {
                    self.flag(
                        Rule::Persistence,
                        format!(
                            "persistence {} (expected {expected_persistence})",
                            obs.persistence_turns
                        ),
                    );
                }
                if !self.affect.may_precede(obs.affect) {
                    self.flag(Rule::ChainLegality, format!("affect {} -> {}", self.affect, obs.affect));
                }
                let expected_affect = step_affect(self.affect, obs.zone, obs.persistence_turns, &self.config.limits);
                if obs.affect != expected_affect {
                    self.flag(
                        Rule::AffectStep,
                        format!("affect {} (expected {expected_affect})", obs.affect),
                    );
                }
                if obs.induction.is_some() {
                    self.induction = obs.induction;
                }
                self.zone = obs.zone;
                self.affect = obs.affect;
                self.persistence = obs.persistence_turns;
                self.observed = true;
                if obs.affect == AffectState::Disengaged {
                    self.disengaged_pending = true;
                }
            }
            EventKind::PolicySwitched(sw) => {
                if sw.from != self.active {
                    self.flag(
                        Rule::Dispatch,
                        format!("switch from {:?} but active policy is {:?}", sw.from, self.active),
                    );
                }
                if sw.reason == SwitchReason::Escalation {
                    self.escalated = true;
                }
                self.active = Some(sw.to);
                self.fresh_entry = true;
            }
            EventKind::ActEmitted(act) => {
                if let Some(last) = self.last_act_turn {
                    if event.turn <= last {
                        self.flag(
                            Rule::TurnOrder,
                            format!("act at turn {} after act at turn {last}", event.turn),
                        );
                    }
                }
                self.last_act_turn = Some(event.turn);
                if !self.observed {
                    self.flag(Rule::NoActWithoutNeed, "act emitted before any observation");
                }
                if self.zone == ConfusionZone::Engaged {
                    self.flag(Rule::NoActWithoutNeed, "act emitted while engaged");
                }
                let Some(policy) = PolicyKey::from_id(&act.act.policy_id) else {
                    self.flag(Rule::Dispatch, format!("unknown policy id `{}`", act.act.policy_id));
                    return;
                };
                if Some(policy) != self.active {
                    self.flag(
                        Rule::Dispatch,
                        format!("act under {policy} but active policy is {:?}", self.active),
                    );
                }
                let dispatch_ok = match (policy, self.zone) {
                    (PolicyKey::Productive(i), ConfusionZone::ProductiveConfusion) => Some(i) == self.induction,
                    (PolicyKey::General, ConfusionZone::ProductiveConfusion) => true,
                    (PolicyKey::Unproductive, ConfusionZone::UnproductiveConfusion) => true,
                    (PolicyKey::Unproductive, ConfusionZone::ProductiveConfusion) => self.escalated,
                    _ => false,
                };
                if !dispatch_ok {
                    self.flag(
                        Rule::Dispatch,
                        format!("act under {policy} does not match zone {}", self.zone),
                    );
                }
                if self.after_resolution {
                    if act.act.step_index != 0 {
                        self.flag(
                            Rule::ResolutionReset,
                            format!("first act after resolution at step {}", act.act.step_index),
                        );
                    }
                    self.after_resolution = false;
                }
                self.ladder(
                    policy,
                    act.act.step_index,
                    act.repeat,
                    act.max_repeats,
                    act.ladder_advanced,
                );
            }
            EventKind::EpisodeResolved(_) => {
                if self.zone != ConfusionZone::Engaged {
                    self.flag(Rule::Resolution, format!("episode resolved in zone {}", self.zone));
                }
                if self.active.is_none() {
                    self.flag(Rule::Resolution, "episode resolved with no active policy");
                }
                self.active = None;
                self.escalated = false;
                self.cursor = None;
                self.after_resolution = true;
            }
            EventKind::SessionEnded(end) => {
                if end.reason == EndReason::Disengaged && self.affect != AffectState::Disengaged {
                    self.flag(
                        Rule::Terminality,
                        format!("ended as disengaged with affect {}", self.affect),
                    );
                }
                self.disengaged_pending = false;
                self.ended = true;
            }
        }
    }

    /// Mirrors the engine's step bookkeeping: a step whose repeats are used
    /// up is re-entered if the zone rank fell since it began, and otherwise
    /// advances by exactly one.
    fn ladder(&mut self, policy: PolicyKey, step_index: usize, repeat: u32, max_repeats: u32, counted: bool) {
        let rank = self.zone.rank();
        let mut escalation_due = false;
        let mut cur = match self.cursor {
            Some(c) if !self.fresh_entry && c.policy == policy => c,
            _ => StepCursor {
                policy,
                step_index: 0,
                repeats_used: 0,
                max_repeats,
                baseline: rank,
            },
        };
        self.fresh_entry = false;
        if cur.repeats_used > 0 && cur.repeats_used >= cur.max_repeats {
            if rank >= cur.baseline {
                cur.step_index += 1;
                escalation_due = true;
            }
            cur.repeats_used = 0;
        }
        if step_index != cur.step_index {
            let rule = if escalation_due { Rule::Escalation } else { Rule::Ladder };
            self.flag(
                rule,
                format!("{policy}: act at step {step_index}, expected step {}", cur.step_index),
            );
            cur.step_index = step_index;
        }
        if cur.repeats_used == 0 {
            cur.max_repeats = max_repeats;
        }
        let expected_repeat = cur.repeats_used + 1;
        if repeat != expected_repeat {
            self.flag(
                Rule::Ladder,
                format!("{policy}: repeat {repeat}, expected {expected_repeat}"),
            );
        }
        if counted {
            if cur.repeats_used == 0 {
                cur.baseline = rank;
            }
            cur.repeats_used += 1;
        }
        self.cursor = Some(cur);
    }
}

/// Checks `events` against the engine contract under `config`.
pub fn audit_transcript(events: &[SessionEvent], config: &EngineConfig) -> Vec<Violation> {
    let mut auditor = Auditor {
        config,
        out: Vec::new(),
        index: 0,
        last_turn: None,
        last_act_turn: None,
        zone: ConfusionZone::Engaged,
        affect: AffectState::Engagement,
        persistence: 0,
        observed: false,
        induction: None,
        active: None,
        escalated: false,
        cursor: None,
        fresh_entry: false,
        after_resolution: false,
        ended: false,
        disengaged_pending: false,
    };
    for (i, event) in events.iter().enumerate() {
        auditor.index = i;
        auditor.event(event);
    }
    if auditor.disengaged_pending {
        auditor.index = events.len();
        auditor.flag(Rule::Terminality, "transcript ends disengaged without session end");
    }
    auditor.out
}
