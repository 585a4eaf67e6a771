//! Seeded stochastic user whose confusion level reacts to act types.
//!
//! With an act, the level moves by `N(mean_delta, sd) + N(0, noise_sd)`;
//! without one, by `drift + N(0, noise_sd)`. The result is clamped to
//! `[0, 1]`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acts::DialogueActType;
use crate::confusion::InductionType;
use crate::engine::Observation;
use crate::ConfusionLevel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("initial level for {induction} is {value}, outside [0, 1]")]
    InitialLevelOutOfRange { induction: InductionType, value: f64 },
    #[error("effect table is missing ({act}, {induction})")]
    MissingEffect {
        act: DialogueActType,
        induction: InductionType,
    },
    #[error("initial level table is missing {0}")]
    MissingInitialLevel(InductionType),
    #[error("negative or non-finite standard deviation {0}")]
    InvalidSd(f64),
    #[error("non-finite parameter {0}")]
    NonFinite(&'static str),
    #[error("max_turns must be at least 1")]
    ZeroTurns,
    #[error("turn limit of {0} exceeded")]
    TurnLimitExceeded(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectDist {
    pub mean_delta: f64,
    pub sd: f64,
}

impl EffectDist {
    pub const fn new(mean_delta: f64, sd: f64) -> Self {
        Self { mean_delta, sd }
    }
}

/// The act whose effect most directly counters each induction type.
pub fn matched_act(induction: InductionType) -> DialogueActType {
    match induction {
        InductionType::ComplexInformation => DialogueActType::InformationSupplement,
        InductionType::ContradictoryInformation => DialogueActType::ResponseCorrection,
        InductionType::InsufficientInformation => DialogueActType::InformationExtension,
        InductionType::FalseFeedback => DialogueActType::ResponseCorrection,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct SimUserParams {
    initial_level: [f64; 4],
    effect: [[EffectDist; 4]; 7],
    pub drift: f64,
    pub noise_sd: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    initial_level: BTreeMap<InductionType, f64>,
    effect: BTreeMap<DialogueActType, BTreeMap<InductionType, EffectDist>>,
    drift: f64,
    noise_sd: f64,
}

impl TryFrom<RawParams> for SimUserParams {
    type Error = SimError;

    fn try_from(raw: RawParams) -> Result<Self, SimError> {
        let mut initial_level = [0.0; 4];
        for i in InductionType::ALL {
            initial_level[i.index()] = *raw.initial_level.get(&i).ok_or(SimError::MissingInitialLevel(i))?;
        }
        let mut effect = [[EffectDist::new(0.0, 0.0); 4]; 7];
        for act in DialogueActType::ALL {
            for induction in InductionType::ALL {
                effect[act as usize][induction.index()] = *raw
                    .effect
                    .get(&act)
                    .and_then(|row| row.get(&induction))
                    .ok_or(SimError::MissingEffect { act, induction })?;
            }
        }
        SimUserParams {
            initial_level,
            effect,
            drift: raw.drift,
            noise_sd: raw.noise_sd,
        }
        .validated()
    }
}

impl From<SimUserParams> for RawParams {
    fn from(p: SimUserParams) -> Self {
        RawParams {
            initial_level: InductionType::ALL
                .iter()
                .map(|i| (*i, p.initial_level[i.index()]))
                .collect(),
            effect: DialogueActType::ALL
                .iter()
                .map(|a| {
                    let row = InductionType::ALL
                        .iter()
                        .map(|i| (*i, p.effect[*a as usize][i.index()]))
                        .collect();
                    (*a, row)
                })
                .collect(),
            drift: p.drift,
            noise_sd: p.noise_sd,
        }
    }
}

impl Default for SimUserParams {
    fn default() -> Self {
        default_params()
    }
}

/// Shipped evaluation parameters.
///
/// Matched act-induction pairs: mean -0.30. Other acts: -0.10, except
/// SubjectChange at -0.20 everywhere. All sd 0.10.
pub fn default_params() -> SimUserParams {
    let mut effect = [[EffectDist::new(-0.10, 0.10); 4]; 7];
    for induction in InductionType::ALL {
        effect[DialogueActType::SubjectChange as usize][induction.index()] = EffectDist::new(-0.20, 0.10);
        effect[matched_act(induction) as usize][induction.index()] = EffectDist::new(-0.30, 0.10);
    }
    SimUserParams {
        initial_level: [0.55, 0.60, 0.50, 0.65],
        effect,
        drift: 0.05,
        noise_sd: 0.05,
    }
}

impl SimUserParams {
    pub fn uniform(initial_level: [f64; 4], effect: EffectDist, drift: f64, noise_sd: f64) -> Result<Self, SimError> {
        SimUserParams {
            initial_level,
            effect: [[effect; 4]; 7],
            drift,
            noise_sd,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self, SimError> {
        for i in InductionType::ALL {
            let value = self.initial_level[i.index()];
            if !(0.0..=1.0).contains(&value) {
                return Err(SimError::InitialLevelOutOfRange { induction: i, value });
            }
        }
        for row in &self.effect {
            for cell in row {
                if !cell.mean_delta.is_finite() {
                    return Err(SimError::NonFinite("mean_delta"));
                }
                if !(cell.sd.is_finite() && cell.sd >= 0.0) {
                    return Err(SimError::InvalidSd(cell.sd));
                }
            }
        }
        if !self.drift.is_finite() {
            return Err(SimError::NonFinite("drift"));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(SimError::InvalidSd(self.noise_sd));
        }
        Ok(self)
    }

    pub fn initial_level(&self, induction: InductionType) -> f64 {
        self.initial_level[induction.index()]
    }

    pub fn set_initial_level(&mut self, induction: InductionType, value: f64) {
        self.initial_level[induction.index()] = value;
    }

    pub fn effect(&self, act: DialogueActType, induction: InductionType) -> EffectDist {
        self.effect[act as usize][induction.index()]
    }

    pub fn set_effect(&mut self, act: DialogueActType, induction: InductionType, dist: EffectDist) {
        self.effect[act as usize][induction.index()] = dist;
    }

    pub fn effect_entries(&self) -> usize {
        self.effect.iter().map(|row| row.len()).sum()
    }

    /// Total standard deviation and mean of the level change for one turn.
    pub fn step_distribution(&self, act: Option<DialogueActType>, induction: InductionType) -> (f64, f64) {
        match act {
            Some(a) => {
                let e = self.effect(a, induction);
                (e.mean_delta, (e.sd * e.sd + self.noise_sd * self.noise_sd).sqrt())
            }
            None => (self.drift, self.noise_sd),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub induction: InductionType,
    pub params: SimUserParams,
    pub max_turns: u32,
    pub seed: u64,
}

pub const DEFAULT_MAX_TURNS: u32 = 50;

impl Scenario {
    pub fn new(induction: InductionType, params: SimUserParams, seed: u64) -> Self {
        Self {
            induction,
            params,
            max_turns: DEFAULT_MAX_TURNS,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimUser {
    induction: InductionType,
    params: SimUserParams,
    level: f64,
    turns: u32,
    max_turns: u32,
    rng: ChaCha8Rng,
}

/// Creates the simulated user for `scenario` on random stream 0.
pub fn induce(scenario: &Scenario) -> Result<SimUser, SimError> {
    induce_on_stream(scenario, 0)
}

/// Like [`induce`] but on an independent ChaCha stream, so many users can
/// share one scenario seed.
pub fn induce_on_stream(scenario: &Scenario, stream: u64) -> Result<SimUser, SimError> {
    if scenario.max_turns == 0 {
        return Err(SimError::ZeroTurns);
    }
    let params = scenario.params.clone().validated()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(stream);
    Ok(SimUser {
        induction: scenario.induction,
        level: params.initial_level(scenario.induction),
        params,
        turns: 0,
        max_turns: scenario.max_turns,
        rng,
    })
}

impl SimUser {
    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn induction(&self) -> InductionType {
        self.induction
    }

    pub fn turns_used(&self) -> u32 {
        self.turns
    }

    pub fn turns_remaining(&self) -> u32 {
        self.max_turns - self.turns
    }

    /// Current level as an observation, without advancing the user.
    pub fn observation(&self) -> Observation {
        Observation::simulated(ConfusionLevel::saturating(self.level), Some(self.induction))
    }

    pub fn respond(&mut self, act: Option<DialogueActType>) -> Result<Observation, SimError> {
        if self.turns >= self.max_turns {
            return Err(SimError::TurnLimitExceeded(self.max_turns));
        }
        self.turns += 1;
        let z_effect: f64 = self.rng.sample(StandardNormal);
        let z_noise: f64 = self.rng.sample(StandardNormal);
        let delta = match act {
            Some(a) => {
                let e = self.params.effect(a, self.induction);
                e.mean_delta + e.sd * z_effect
            }
            None => self.params.drift,
        } + self.params.noise_sd * z_noise;
        self.level = (self.level + delta).clamp(0.0, 1.0);
        Ok(self.observation())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn deterministic(mean: f64, drift: f64) -> SimUserParams {
        SimUserParams::uniform([0.55, 0.60, 0.50, 0.65], EffectDist::new(mean, 0.0), drift, 0.0).unwrap()
    }

    #[test]
    fn induce_reads_initial_level() {
        let user = induce(&Scenario::new(InductionType::ComplexInformation, default_params(), 7)).unwrap();
        assert_eq!(user.level(), 0.55);
    }

    #[test]
    fn invalid_initial_level_rejected() {
        let mut p = default_params();
        p.set_initial_level(InductionType::FalseFeedback, 1.2);
        let err = induce(&Scenario::new(InductionType::ComplexInformation, p, 1)).unwrap_err();
        assert!(matches!(err, SimError::InitialLevelOutOfRange { .. }));
    }

    #[test]
    fn strong_effect_clamps_to_zero() {
        let mut p = default_params();
        p.noise_sd = 0.0;
        p.set_effect(
            DialogueActType::Restatement,
            InductionType::ComplexInformation,
            EffectDist::new(-1.0, 0.0),
        );
        let mut user = induce(&Scenario::new(InductionType::ComplexInformation, p, 3)).unwrap();
        let obs = user.respond(Some(DialogueActType::Restatement)).unwrap();
        assert_eq!(obs.level.value(), 0.0);
    }

    #[test]
    fn zero_drift_no_act_is_identity() {
        let mut user = induce(&Scenario::new(
            InductionType::InsufficientInformation,
            deterministic(0.0, 0.0),
            9,
        ))
        .unwrap();
        for _ in 0..5 {
            assert_eq!(user.respond(None).unwrap().level.value(), 0.50);
        }
    }

    #[test]
    fn deterministic_affine_update() {
        let mut user = induce(&Scenario::new(
            InductionType::FalseFeedback,
            deterministic(-0.05, 0.02),
            0,
        ))
        .unwrap();
        let a = user.respond(Some(DialogueActType::Confirmation)).unwrap().level.value();
        let b = user.respond(None).unwrap().level.value();
        assert!((a - 0.60).abs() < 1e-12);
        assert!((b - 0.62).abs() < 1e-12);
    }

    #[test]
    fn turn_limit() {
        let mut s = Scenario::new(InductionType::ComplexInformation, default_params(), 1);
        s.max_turns = 2;
        let mut user = induce(&s).unwrap();
        user.respond(None).unwrap();
        user.respond(None).unwrap();
        assert_eq!(user.respond(None).unwrap_err(), SimError::TurnLimitExceeded(2));
        s.max_turns = 0;
        assert_eq!(induce(&s).unwrap_err(), SimError::ZeroTurns);
    }

    #[test]
    fn default_params_shape() {
        let p = default_params();
        assert_eq!(p.effect_entries(), 28);
        assert_eq!(
            p.effect(
                DialogueActType::InformationExtension,
                InductionType::InsufficientInformation
            )
            .mean_delta,
            -0.30
        );
        assert_eq!(
            p.effect(DialogueActType::SubjectChange, InductionType::FalseFeedback)
                .mean_delta,
            -0.20
        );
        assert_eq!(
            p.effect(DialogueActType::Restatement, InductionType::FalseFeedback)
                .mean_delta,
            -0.10
        );
        let th = crate::Thresholds::default();
        for i in InductionType::ALL {
            assert!(p.initial_level(i) > th.t_a());
        }
        assert_eq!((p.drift, p.noise_sd), (0.05, 0.05));
    }

    #[test]
    fn params_json_roundtrip_and_totality() {
        let p = default_params();
        let json = p.to_json_pretty();
        assert_eq!(SimUserParams::from_json(&json).unwrap(), p);
        let mut value: serde_json::Value = serde_json::from_str(&json).unwrap();
        value["effect"]["confirmation"]
            .as_object_mut()
            .unwrap()
            .remove("false_feedback");
        let err = serde_json::from_value::<SimUserParams>(value).unwrap_err().to_string();
        assert!(err.contains("missing"), "{err}");
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = Scenario::new(InductionType::ComplexInformation, default_params(), 11);
        let run = |stream| {
            let mut u = induce_on_stream(&s, stream).unwrap();
            (0..10)
                .map(|_| u.respond(Some(DialogueActType::Restatement)).unwrap().level.value())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(0), run(0));
        assert_ne!(run(0), run(1));
    }
}
