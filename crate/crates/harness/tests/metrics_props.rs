use mitigator_core::confusion::InductionType;
use mitigator_harness::metrics::{CellMetrics, TrialOutcome, TrialSummary};
use mitigator_harness::report::{emit_report, Format};
use mitigator_harness::MetricsReport;
use proptest::prelude::*;

fn outcome() -> impl Strategy<Value = TrialOutcome> {
    prop_oneof![
        Just(TrialOutcome::Resolved),
        Just(TrialOutcome::Disengaged),
        Just(TrialOutcome::Exhausted),
        Just(TrialOutcome::Truncated),
    ]
}

fn trials() -> impl Strategy<Value = Vec<TrialSummary>> {
    prop::collection::vec((outcome(), prop::array::uniform7(0u64..5)), 0..60).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (outcome, act_counts))| {
                let acts = act_counts.iter().sum::<u64>() as u32;
                TrialSummary {
                    trial: i as u64,
                    outcome,
                    acts,
                    turns: acts,
                    act_counts,
                }
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn rates_partition_trials(t in trials()) {
        let m = CellMetrics::from_trials("p", "s", InductionType::ContradictoryInformation, &t);
        prop_assert!(m.outcomes_consistent());
        prop_assert_eq!(m.act_histogram.values().sum::<u64>(), t.iter().map(|x| u64::from(x.acts)).sum::<u64>());
        prop_assert_eq!(m.mean_steps_to_resolution.is_some(), m.resolved > 0);
        if let Some(mean) = m.mean_steps_to_resolution {
            let resolved: Vec<f64> = t.iter().filter(|x| x.outcome == TrialOutcome::Resolved).map(|x| f64::from(x.acts)).collect();
            let lo = resolved.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = resolved.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo - 1e-12 <= mean && mean <= hi + 1e-12);
        }
    }

    #[test]
    fn report_lines_parse_back(cells in prop::collection::vec(trials(), 0..5)) {
        let report = MetricsReport {
            cells: cells
                .iter()
                .enumerate()
                .map(|(i, t)| CellMetrics::from_trials("p", &format!("s{i}"), InductionType::FalseFeedback, t))
                .collect(),
        };
        let jsonl = emit_report(&report, Format::Jsonl, false).unwrap();
        let parsed: Vec<CellMetrics> = jsonl.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        prop_assert_eq!(&parsed, &report.cells);
        let summary = emit_report(&report, Format::Summary, false).unwrap();
        prop_assert_eq!(summary.lines().count(), report.cells.len() + 1);
    }
}
