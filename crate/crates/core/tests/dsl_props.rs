use std::collections::BTreeMap;
use std::sync::Arc;

use mitigator_core::acts::{ActTemplate, DialogueActType};
use mitigator_core::confusion::InductionType;
use mitigator_core::dsl::{
    builtin_default, compile, parse_policy, validate_program, Metadata, OnFailure, PolicyAst, PolicySource, StepSpec,
    DEFAULT_POLICY_TEXT,
};
use mitigator_core::engine::{EngineConfig, EngineError, Observation, ProductiveDispatch, Session};
use mitigator_core::ConfusionLevel;
use proptest::prelude::*;

fn act() -> impl Strategy<Value = DialogueActType> {
    prop::sample::select(DialogueActType::ALL.to_vec())
}

fn induction() -> impl Strategy<Value = InductionType> {
    prop::sample::select(InductionType::ALL.to_vec())
}

fn step() -> impl Strategy<Value = StepSpec> {
    (act(), 1u32..4, prop::sample::select(OnFailure::ALL.to_vec())).prop_map(|(a, k, f)| StepSpec::new(a, k, f))
}

fn steps(min: usize) -> impl Strategy<Value = Vec<StepSpec>> {
    prop::collection::vec(step(), min..5)
}

fn template_text() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof![
            "[a-zA-Z ,.:=!?']{1,8}",
            Just("{topic}".to_string()),
            Just("{new_topic}".to_string()),
            Just("\"".to_string()),
            Just("\\".to_string()),
            Just("#".to_string()),
            Just("\n".to_string()),
            Just("\t".to_string()),
        ],
        0..8,
    )
    .prop_map(|parts| parts.concat())
}

fn ast_with(min_steps: usize) -> impl Strategy<Value = PolicyAst> {
    (
        "[a-z][a-z0-9_-]{0,10}",
        "[0-9]{1,3}(\\.[0-9]{1,2})?",
        steps(min_steps),
        prop::collection::btree_map(induction(), steps(min_steps), 0..=4),
        steps(min_steps),
        prop::collection::btree_map(act(), template_text(), 0..4),
    )
        .prop_map(
            |(name, version, general, productive, unproductive, templates)| PolicyAst {
                metadata: Metadata { name, version },
                general_ladder: general,
                productive_table: productive,
                unproductive_sequence: unproductive,
                templates: templates.into_iter().map(|(a, t)| ActTemplate::new(a, t)).collect(),
                ..PolicyAst::default()
            },
        )
}

/// Generated programs that pass validation: every section has a terminal
/// last step that is legal for it, and all four inductions are covered.
fn valid_ast() -> impl Strategy<Value = PolicyAst> {
    let escalate_last = |mut s: Vec<StepSpec>, end: bool| {
        let n = s.len();
        for (i, st) in s.iter_mut().enumerate() {
            if i + 1 == n {
                st.on_failure = if end {
                    OnFailure::EndEpisode
                } else {
                    OnFailure::GotoUnproductive
                };
            } else if st.on_failure == OnFailure::EndEpisode {
                st.on_failure = OnFailure::NextStep;
            }
        }
        s
    };
    (
        steps(1),
        prop::collection::vec(steps(1), 4),
        steps(1),
        prop::collection::vec(any::<bool>(), 5),
    )
        .prop_map(move |(general, productive, unproductive, ends)| {
            let mut unproductive = escalate_last(unproductive, true);
            for s in &mut unproductive {
                if s.on_failure == OnFailure::GotoUnproductive {
                    s.on_failure = OnFailure::NextStep;
                }
            }
            let productive_table: BTreeMap<_, _> = InductionType::ALL
                .into_iter()
                .zip(productive)
                .enumerate()
                .map(|(i, (ind, s))| (ind, escalate_last(s, ends[i + 1])))
                .collect();
            PolicyAst {
                general_ladder: escalate_last(general, ends[0]),
                productive_table,
                unproductive_sequence: unproductive,
                ..PolicyAst::default()
            }
        })
}

fn reparse(ast: &PolicyAst) -> PolicyAst {
    let text = ast.to_source();
    parse_policy(&PolicySource::new(text.clone(), "generated")).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn serialize_parse_roundtrip(ast in ast_with(0)) {
        let back = reparse(&ast);
        prop_assert_eq!(&back, &ast);
        prop_assert_eq!(back.to_source(), ast.to_source());
    }

    #[test]
    fn compile_roundtrip_for_valid_programs(ast in valid_ast()) {
        prop_assert!(validate_program(&ast).is_empty(), "{:?}", validate_program(&ast));
        let direct = compile(&ast).unwrap();
        let via_text = compile(&reparse(&ast)).unwrap();
        prop_assert!(direct.same_structure(&via_text));
        prop_assert_eq!(&direct.checksum, &via_text.checksum);
        let total = ast.general_ladder.len()
            + ast.productive_table.values().map(Vec::len).sum::<usize>()
            + ast.unproductive_sequence.len();
        prop_assert_eq!(direct.tables.total_steps(), total);
    }

    #[test]
    fn validator_soundness(
        ast in valid_ast(),
        general in any::<bool>(),
        turns in prop::collection::vec((0.0f64..=1.0, induction(), prop::option::weighted(0.1, act())), 1..80),
    ) {
        let program = Arc::new(compile(&ast).unwrap());
        let config = EngineConfig {
            dispatch: if general { ProductiveDispatch::GeneralLadder } else { ProductiveDispatch::SubPolicy },
            ..EngineConfig::default()
        };
        let mut session = Session::with_id("fuzz", program, config, 0);
        for (level, ind, wizard_act) in turns {
            let obs = Observation::simulated(ConfusionLevel::new(level).unwrap(), Some(ind));
            match session.observe(obs) {
                Ok(_) => {}
                Err(EngineError::ObservationAfterEnd) => break,
                Err(e) => return Err(TestCaseError::fail(format!("observe: {e}"))),
            }
            let result = match wizard_act {
                Some(a) => session.next_act_with_override(a),
                None => session.next_act(),
            };
            match result {
                Ok(_) => {}
                Err(EngineError::ActAfterEnd) => break,
                Err(e) => return Err(TestCaseError::fail(format!("next_act: {e}"))),
            }
        }
    }

    #[test]
    fn mutated_sources_fail_with_locations(seed_line in 0usize..200, op in 0u8..6, junk in "[a-zA-Z0-9 \\[\\]=:\"#{}]{1,6}") {
        let lines: Vec<&str> = DEFAULT_POLICY_TEXT.lines().collect();
        let n = lines.len();
        let at = seed_line % n;
        let mut out: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        match op {
            0 => { out.remove(at); }
            1 => { let l = out[at].clone(); out.insert(at, l); }
            2 => { out[at].push_str(&junk); }
            3 => {
                let mut mid = out[at].len() / 2;
                while !out[at].is_char_boundary(mid) { mid -= 1; }
                out[at].insert_str(mid, &junk);
            }
            4 => { out.swap(at, (at + 7) % n); }
            _ => { out[at] = junk.clone(); }
        }
        let text = out.join("\n");
        let line_count = text.lines().count();
        match parse_policy(&PolicySource::new(text.clone(), "mutant")) {
            Err(e) => prop_assert!(e.line() >= 1 && e.line() <= line_count + 1, "{e}"),
            Ok(ast) => {
                for d in validate_program(&ast) {
                    let line = d.line;
                    prop_assert!(line.is_some_and(|l| l >= 1 && l <= line_count.max(1)), "{d:?}\n{text}");
                }
            }
        }
    }
}

#[test]
fn builtin_roundtrip_and_counts() {
    let ast = parse_policy(&builtin_default()).unwrap();
    assert!(validate_program(&ast).is_empty());
    assert_eq!(reparse(&ast), ast);

    // Independent count of the shipped file: step lines per section.
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut section = String::new();
    for line in DEFAULT_POLICY_TEXT.lines().map(str::trim) {
        if line.starts_with('[') {
            section = line.to_string();
        } else if line.starts_with("step ") {
            *counts.entry(section.clone()).or_default() += 1;
        }
    }
    assert_eq!(counts["[general]"], ast.general_ladder.len());
    assert_eq!(counts["[general]"], 7);
    assert_eq!(counts["[unproductive]"], 3);
    for i in InductionType::ALL {
        assert_eq!(
            counts[&format!("[productive {}]", i.keyword())],
            ast.productive_table[&i].len()
        );
    }
}

#[test]
fn minimal_program_step_count() {
    let one = |a| vec![StepSpec::new(a, 1, OnFailure::EndEpisode)];
    let ast = PolicyAst {
        general_ladder: one(DialogueActType::Restatement),
        productive_table: InductionType::ALL
            .into_iter()
            .map(|i| (i, one(DialogueActType::Confirmation)))
            .collect(),
        unproductive_sequence: one(DialogueActType::SubjectChange),
        ..PolicyAst::default()
    };
    assert!(validate_program(&ast).is_empty());
    assert_eq!(compile(&ast).unwrap().tables.total_steps(), 1 + 4 + 1);
}

#[test]
fn compile_rejects_invalid_ast() {
    let mut ast = parse_policy(&builtin_default()).unwrap();
    ast.productive_table.remove(&InductionType::FalseFeedback);
    assert!(compile(&ast).is_err());
}
