use std::collections::BTreeMap;

use mitigator_core::acts::DialogueActType;
use mitigator_core::confusion::InductionType;
use serde::{Deserialize, Serialize};

/// How a single simulated trial finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialOutcome {
    Resolved,
    Disengaged,
    Exhausted,
    /// The simulated user ran out of turns first.
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: u64,
    pub outcome: TrialOutcome,
    /// Acts emitted during the trial.
    pub acts: u32,
    pub turns: u32,
    pub act_counts: [u64; 7],
}

/// Metrics for one (policy, scenario) cell.
///
/// Field order is the serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub policy: String,
    pub scenario: String,
    pub induction: InductionType,
    pub trials: u64,
    pub mitigation_rate: f64,
    /// Mean acts emitted over resolved trials; `None` when none resolved.
    pub mean_steps_to_resolution: Option<f64>,
    pub disengagement_rate: f64,
    pub exhaustion_rate: f64,
    pub truncation_rate: f64,
    pub act_histogram: BTreeMap<DialogueActType, u64>,
    pub resolved: u64,
    pub disengaged: u64,
    pub exhausted: u64,
    pub truncated: u64,
    pub mitigation_rate_se: f64,
    pub steps_sd: Option<f64>,
    pub steps_se: Option<f64>,
}

impl CellMetrics {
    pub fn from_trials(policy: &str, scenario: &str, induction: InductionType, trials: &[TrialSummary]) -> Self {
        let n = trials.len() as u64;
        let count = |o| trials.iter().filter(|t| t.outcome == o).count() as u64;
        let resolved = count(TrialOutcome::Resolved);
        let steps: Vec<f64> = trials
            .iter()
            .filter(|t| t.outcome == TrialOutcome::Resolved)
            .map(|t| f64::from(t.acts))
            .collect();
        let mut hist: BTreeMap<DialogueActType, u64> = DialogueActType::ALL.iter().map(|a| (*a, 0)).collect();
        for t in trials {
            for (act, c) in DialogueActType::ALL.iter().zip(t.act_counts) {
                *hist.get_mut(act).expect("all acts present") += c;
            }
        }
        let rate = |c: u64| if n == 0 { 0.0 } else { c as f64 / n as f64 };
        let p = rate(resolved);
        let (mean, sd) = mean_sd(&steps);
        Self {
            policy: policy.to_string(),
            scenario: scenario.to_string(),
            induction,
            trials: n,
            mitigation_rate: p,
            mean_steps_to_resolution: mean,
            disengagement_rate: rate(count(TrialOutcome::Disengaged)),
            exhaustion_rate: rate(count(TrialOutcome::Exhausted)),
            truncation_rate: rate(count(TrialOutcome::Truncated)),
            act_histogram: hist,
            resolved,
            disengaged: count(TrialOutcome::Disengaged),
            exhausted: count(TrialOutcome::Exhausted),
            truncated: count(TrialOutcome::Truncated),
            mitigation_rate_se: if n == 0 { 0.0 } else { (p * (1.0 - p) / n as f64).sqrt() },
            steps_sd: sd,
            steps_se: sd.map(|s| s / (steps.len() as f64).sqrt()),
        }
    }

    /// Outcome counts cover every trial exactly once.
    pub fn outcomes_consistent(&self) -> bool {
        let total = self.resolved + self.disengaged + self.exhausted + self.truncated;
        let rates = self.mitigation_rate + self.disengagement_rate + self.exhaustion_rate + self.truncation_rate;
        total == self.trials && (self.trials == 0 || (rates - 1.0).abs() < 1e-9)
    }
}

/// Mean and sample standard deviation; the sd needs at least two values.
fn mean_sd(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), sd)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cells: Vec<CellMetrics>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(outcome: TrialOutcome, acts: u32) -> TrialSummary {
        let mut act_counts = [0; 7];
        act_counts[0] = u64::from(acts);
        TrialSummary {
            trial: 0,
            outcome,
            acts,
            turns: acts,
            act_counts,
        }
    }

    #[test]
    fn rates_and_moments() {
        let trials = [
            trial(TrialOutcome::Resolved, 1),
            trial(TrialOutcome::Resolved, 3),
            trial(TrialOutcome::Disengaged, 5),
            trial(TrialOutcome::Truncated, 9),
        ];
        let m = CellMetrics::from_trials("p", "s", InductionType::ComplexInformation, &trials);
        assert_eq!(m.mitigation_rate, 0.5);
        assert_eq!(m.mean_steps_to_resolution, Some(2.0));
        assert_eq!(m.steps_sd, Some(2f64.sqrt()));
        assert_eq!(m.disengagement_rate, 0.25);
        assert_eq!(m.truncation_rate, 0.25);
        assert_eq!(m.act_histogram[&DialogueActType::Restatement], 18);
        assert_eq!(m.act_histogram.len(), 7);
        assert!(m.outcomes_consistent());
        assert!((m.mitigation_rate_se - (0.25f64 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn no_resolutions() {
        let m = CellMetrics::from_trials(
            "p",
            "s",
            InductionType::FalseFeedback,
            &[trial(TrialOutcome::Exhausted, 3)],
        );
        assert_eq!(m.mean_steps_to_resolution, None);
        assert_eq!(m.steps_se, None);
        assert!(m.outcomes_consistent());
    }
}
