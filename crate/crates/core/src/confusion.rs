//! Quantitative confusion state model.
//!
//! A user's confusion is a level in `[0, 1]`. Two thresholds split the unit
//! interval into three zones: below `t_a` the user is engaged, between the
//! thresholds (inclusive) the confusion is productive, and above `t_b` it is
//! unproductive. Affect moves along the chain
//! `Engagement - Confusion - Frustration - Boredom - Disengaged`, one step at a
//! time, with `Disengaged` absorbing.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("confusion level {0} outside [0, 1]")]
    LevelOutOfRange(f64),
    #[error("thresholds must satisfy 0 < t_a < t_b < 1, got t_a={t_a}, t_b={t_b}")]
    InvalidThresholds { t_a: f64, t_b: f64 },
    #[error("persistence limits must satisfy frustration_after <= boredom_after <= disengage_after, got {0:?}")]
    InvalidLimits(PersistenceLimits),
}

/// Dimensionless confusion intensity in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Level<T>(T);

impl<T: Scalar> Level<T> {
    pub fn new(value: T) -> Result<Self, ModelError> {
        if value >= T::zero() && value <= T::one() {
            Ok(Self(value))
        } else {
            Err(ModelError::LevelOutOfRange(value.to_f64().unwrap_or(f64::NAN)))
        }
    }

    /// Clamps `value` into the unit interval. NaN maps to zero.
    pub fn saturating(value: T) -> Self {
        if value.is_nan() {
            return Self(T::zero());
        }
        Self(value.max(T::zero()).min(T::one()))
    }

    pub fn zero() -> Self {
        Self(T::zero())
    }

    pub fn value(self) -> T {
        self.0
    }
}

impl<T: Scalar> fmt::Display for Level<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}", self.0)
    }
}

impl<T: Scalar + Serialize> Serialize for Level<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(serializer)
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for Level<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = T::deserialize(deserializer)?;
        Level::new(raw).map_err(serde::de::Error::custom)
    }
}

/// Lower and upper confusion thresholds, `0 < t_a < t_b < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdPair<T> {
    t_a: T,
    t_b: T,
}

impl<T: Scalar> ThresholdPair<T> {
    pub fn new(t_a: T, t_b: T) -> Result<Self, ModelError> {
        let valid = t_a > T::zero() && t_a < t_b && t_b < T::one();
        if valid {
            Ok(Self { t_a, t_b })
        } else {
            Err(ModelError::InvalidThresholds {
                t_a: t_a.to_f64().unwrap_or(f64::NAN),
                t_b: t_b.to_f64().unwrap_or(f64::NAN),
            })
        }
    }

    pub fn t_a(&self) -> T {
        self.t_a
    }

    pub fn t_b(&self) -> T {
        self.t_b
    }
}

impl<T: Scalar> Default for ThresholdPair<T> {
    fn default() -> Self {
        Self {
            t_a: T::of(0.30),
            t_b: T::of(0.70),
        }
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for ThresholdPair<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw<T> {
            t_a: T,
            t_b: T,
        }
        let raw = Raw::<T>::deserialize(deserializer)?;
        ThresholdPair::new(raw.t_a, raw.t_b).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfusionZone {
    Engaged,
    ProductiveConfusion,
    UnproductiveConfusion,
}

impl ConfusionZone {
    pub const ALL: [ConfusionZone; 3] = [
        ConfusionZone::Engaged,
        ConfusionZone::ProductiveConfusion,
        ConfusionZone::UnproductiveConfusion,
    ];

    /// Severity rank: Engaged=0 < Productive=1 < Unproductive=2.
    pub fn rank(self) -> u8 {
        match self {
            ConfusionZone::Engaged => 0,
            ConfusionZone::ProductiveConfusion => 1,
            ConfusionZone::UnproductiveConfusion => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConfusionZone::Engaged => "engaged",
            ConfusionZone::ProductiveConfusion => "productive_confusion",
            ConfusionZone::UnproductiveConfusion => "unproductive_confusion",
        }
    }
}

impl fmt::Display for ConfusionZone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffectState {
    Engagement,
    Confusion,
    Frustration,
    Boredom,
    Disengaged,
}

impl AffectState {
    pub const CHAIN: [AffectState; 5] = [
        AffectState::Engagement,
        AffectState::Confusion,
        AffectState::Frustration,
        AffectState::Boredom,
        AffectState::Disengaged,
    ];

    /// Position along the affect chain.
    pub fn position(self) -> usize {
        self as usize
    }

    /// True if `next` may directly follow `self`.
    pub fn may_precede(self, next: AffectState) -> bool {
        if self == AffectState::Disengaged {
            return next == AffectState::Disengaged;
        }
        self.position().abs_diff(next.position()) <= 1
    }

    fn toward_engagement(self) -> AffectState {
        match self {
            AffectState::Engagement | AffectState::Confusion => AffectState::Engagement,
            AffectState::Frustration => AffectState::Confusion,
            AffectState::Boredom => AffectState::Frustration,
            AffectState::Disengaged => AffectState::Disengaged,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AffectState::Engagement => "engagement",
            AffectState::Confusion => "confusion",
            AffectState::Frustration => "frustration",
            AffectState::Boredom => "boredom",
            AffectState::Disengaged => "disengaged",
        }
    }
}

impl fmt::Display for AffectState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InductionType {
    ComplexInformation,
    ContradictoryInformation,
    InsufficientInformation,
    FalseFeedback,
}

impl InductionType {
    pub const ALL: [InductionType; 4] = [
        InductionType::ComplexInformation,
        InductionType::ContradictoryInformation,
        InductionType::InsufficientInformation,
        InductionType::FalseFeedback,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Wire name, e.g. `complex_information`.
    pub fn name(self) -> &'static str {
        match self {
            InductionType::ComplexInformation => "complex_information",
            InductionType::ContradictoryInformation => "contradictory_information",
            InductionType::InsufficientInformation => "insufficient_information",
            InductionType::FalseFeedback => "false_feedback",
        }
    }

    /// Short keyword used in policy section headers, e.g. `[productive complex]`.
    pub fn keyword(self) -> &'static str {
        match self {
            InductionType::ComplexInformation => "complex",
            InductionType::ContradictoryInformation => "contradictory",
            InductionType::InsufficientInformation => "insufficient",
            InductionType::FalseFeedback => "false_feedback",
        }
    }

    pub fn from_keyword(keyword: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|i| i.keyword() == keyword)
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|i| i.name() == name)
    }
}

impl fmt::Display for InductionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self {
            InductionType::ComplexInformation => "ComplexInformation",
            InductionType::ContradictoryInformation => "ContradictoryInformation",
            InductionType::InsufficientInformation => "InsufficientInformation",
            InductionType::FalseFeedback => "FalseFeedback",
        };
        f.write_str(label)
    }
}

/// Consecutive-turn horizons after which persisting unproductive confusion
/// deteriorates affect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawLimits")]
pub struct PersistenceLimits {
    pub frustration_after: u32,
    pub boredom_after: u32,
    pub disengage_after: u32,
}

#[derive(Deserialize)]
struct RawLimits {
    frustration_after: u32,
    boredom_after: u32,
    disengage_after: u32,
}

impl TryFrom<RawLimits> for PersistenceLimits {
    type Error = ModelError;

    fn try_from(raw: RawLimits) -> Result<Self, ModelError> {
        PersistenceLimits::new(raw.frustration_after, raw.boredom_after, raw.disengage_after)
    }
}

impl PersistenceLimits {
    pub fn new(frustration_after: u32, boredom_after: u32, disengage_after: u32) -> Result<Self, ModelError> {
        Self {
            frustration_after,
            boredom_after,
            disengage_after,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self, ModelError> {
        if self.frustration_after <= self.boredom_after && self.boredom_after <= self.disengage_after {
            Ok(self)
        } else {
            Err(ModelError::InvalidLimits(self))
        }
    }

    /// Largest horizon; persistence counts beyond it never change the outcome
    /// of [`step_affect`].
    pub fn horizon(&self) -> u32 {
        self.disengage_after.max(self.boredom_after).max(self.frustration_after)
    }
}

impl Default for PersistenceLimits {
    fn default() -> Self {
        Self {
            frustration_after: 2,
            boredom_after: 4,
            disengage_after: 6,
        }
    }
}

/// The per-turn picture of the user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Assessment<T> {
    pub level: Level<T>,
    pub zone: ConfusionZone,
    pub affect: AffectState,
    pub persistence_turns: u32,
}

impl<T: Scalar> Assessment<T> {
    pub fn initial() -> Self {
        Self {
            level: Level::zero(),
            zone: ConfusionZone::Engaged,
            affect: AffectState::Engagement,
            persistence_turns: 0,
        }
    }
}

/// Total classification of a level into a zone. Both thresholds belong to
/// the productive zone.
pub fn classify_zone<T: Scalar>(level: Level<T>, thresholds: &ThresholdPair<T>) -> ConfusionZone {
    let value = level.value();
    if value < thresholds.t_a {
        ConfusionZone::Engaged
    } else if value <= thresholds.t_b {
        ConfusionZone::ProductiveConfusion
    } else {
        ConfusionZone::UnproductiveConfusion
    }
}

/// Advances affect by at most one position along the chain.
///
/// `persistence_turns` counts consecutive turns already spent in `zone`
/// (0 on the turn the zone was entered).
pub fn step_affect(
    current: AffectState,
    zone: ConfusionZone,
    persistence_turns: u32,
    limits: &PersistenceLimits,
) -> AffectState {
    use AffectState::*;
    match (current, zone) {
        (Disengaged, _) => Disengaged,
        (state, ConfusionZone::Engaged) => state.toward_engagement(),
        (Engagement, _) => Confusion,
        (state, ConfusionZone::ProductiveConfusion) => state,
        (Confusion, ConfusionZone::UnproductiveConfusion) if persistence_turns >= limits.frustration_after => {
            Frustration
        }
        (Frustration, ConfusionZone::UnproductiveConfusion) if persistence_turns >= limits.boredom_after => Boredom,
        (Boredom, ConfusionZone::UnproductiveConfusion) if persistence_turns >= limits.disengage_after => Disengaged,
        (state, ConfusionZone::UnproductiveConfusion) => state,
    }
}

pub fn is_mitigated<T>(assessment: &Assessment<T>) -> bool {
    assessment.zone == ConfusionZone::Engaged
}
