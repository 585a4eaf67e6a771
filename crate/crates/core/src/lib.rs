//! Confusion-mitigation dialogue policies.
//!
//! The crate classifies a user's confusion level into engaged, productive
//! and unproductive zones, tracks affect along the
//! engagement-confusion-frustration-boredom chain, and runs policy programs
//! written in a small line-oriented language that pick one of seven
//! mitigation acts per turn. A seeded simulated user closes the loop for
//! batch evaluation.
//!
//! Numeric model types are generic over [`num::Scalar`] (`f32` or `f64`);
//! the aliases below fix them to `f64`, which the engine and simulator use.

pub mod acts;
pub mod audit;
pub mod confusion;
pub mod dsl;
pub mod engine;
pub mod journal;
pub mod num;
pub mod simulator;

pub use acts::{act_descriptor, ActCatalog, ActDescriptor, ActTemplate, DialogueAct, DialogueActType, TurnContext};
pub use confusion::{
    classify_zone, is_mitigated, step_affect, AffectState, ConfusionZone, InductionType, ModelError, PersistenceLimits,
};
pub use dsl::{
    builtin_default, builtin_program, compile, compile_source, parse_policy, validate_program, PolicyAst, PolicyKey,
    PolicyProgram, PolicySource,
};
pub use engine::{EngineConfig, EngineError, Observation, Session, SessionEvent, SessionStatus};
pub use simulator::{default_params, induce, Scenario, SimUser, SimUserParams};

pub type ConfusionLevel = confusion::Level<f64>;
pub type Thresholds = confusion::ThresholdPair<f64>;
pub type ConfusionAssessment = confusion::Assessment<f64>;

pub type ConfusionLevelF32 = confusion::Level<f32>;
pub type ThresholdsF32 = confusion::ThresholdPair<f32>;
