//! End-to-end pipeline checks: the 16-construct validation matrix for
//! trace→extract→lift→entry→replay fidelity, plus cross-stage behaviors
//! that no single module's unit tests cover.

mod common;

use common::{
    compile_text, construct_matrix, corpus_sources, random_string_args, rng, trace_and_lift,
};
use sparktrace_core::concolic::{generate, symbolic_replay, Bindings, ReplayError};
use sparktrace_core::config::Config;
use sparktrace_core::harness::instrument_and_run;
use sparktrace_core::interp::OutcomeKind;
use sparktrace_core::lifter::eval_ir;
use sparktrace_core::tracer::{baseline_trace, extract_function_instr, Tag, TraceOptions};
use sparktrace_core::value::Value;

#[test]
fn sixteen_construct_matrix_replays_faithfully() {
    let matrix = construct_matrix();
    assert_eq!(matrix.len(), 16);
    for (name, text, func, args) in matrix {
        let (extracted, module, bindings) = trace_and_lift(text, func, &args);
        let (outcome, assertions) = eval_ir(&module, &bindings)
            .unwrap_or_else(|e| panic!("{name}: evaluation failed: {e}"));
        assert!(
            outcome.matches(&extracted.outcome),
            "{name}: replay {outcome:?} vs traced {:?}",
            extracted.outcome
        );
        assert!(
            assertions.iter().all(|&a| a),
            "{name}: {} of {} assertions failed",
            assertions.iter().filter(|&&a| !a).count(),
            assertions.len()
        );
    }
}

/// Replay fidelity over the whole corpus with random inputs: the central
/// invariant of the capture/translate stages.
#[test]
fn corpus_replays_reproduce_outcomes_and_assertions() {
    let mut rng = rng(0xF1DE);
    for (name, text) in corpus_sources() {
        let program = compile_text(&text);
        for export in program.exports.clone() {
            for _ in 0..15 {
                let args = random_string_args(&mut rng, export.param_count);
                let (extracted, module, bindings) = trace_and_lift(&text, &export.name, &args);
                let (outcome, assertions) = eval_ir(&module, &bindings)
                    .unwrap_or_else(|e| panic!("{name}/{}({args:?}): {e}", export.name));
                assert!(
                    outcome.matches(&extracted.outcome),
                    "{name}/{}({args:?}): {outcome:?} vs {:?}",
                    export.name,
                    extracted.outcome
                );
                assert!(assertions.iter().all(|&a| a), "{name}/{}({args:?})", export.name);
            }
        }
    }
}

#[test]
fn symbolic_replay_matches_eval_ir_and_assertion_count() {
    let (_, module, bindings) = trace_and_lift(
        "function f(s){if (s.length == 0) { return 0; } if (s.charAt(0) == \"a\") { return 1; } return 2;}",
        "f",
        &[Value::str_from("ab")],
    );
    let (eval_outcome, assertion_results) = eval_ir(&module, &bindings).unwrap();
    let (sym_outcome, pc) = symbolic_replay(&module, &bindings).unwrap();
    assert_eq!(eval_outcome, sym_outcome);
    assert_eq!(pc.len(), assertion_results.len());
    assert_eq!(pc.len(), module.assertions().len());
    assert!(pc.iter().zip(module.assertions()).all(|(e, a)| e.taken == a.expected));
}

#[test]
fn length_condition_appears_in_path_condition() {
    let (_, module, bindings) = trace_and_lift(
        "function f(s){if (s.length == 0) { return 0; } return 1;}",
        "f",
        &[Value::str_from("a")],
    );
    let (_, pc) = symbolic_replay(&module, &bindings).unwrap();
    assert_eq!(pc.len(), 1);
    assert!(!pc[0].taken, "the ==0 comparison evaluated false");
    let shown = pc[0].expr.to_string();
    assert!(shown.contains("len(s0)"), "condition mentions the symbolic length: {shown}");
}

#[test]
fn divergent_bindings_raise_divergence_error() {
    let (_, module, _) = trace_and_lift(
        "function f(s){if (s.length == 0) { return 0; } return 1;}",
        "f",
        &[Value::str_from("a")],
    );
    let divergent: Bindings = [(0u32, Vec::new())].into_iter().collect();
    match symbolic_replay(&module, &divergent) {
        Err(ReplayError::Divergence { index: 0 }) => {}
        other => panic!("expected divergence at 0, got {other:?}"),
    }
}

#[test]
fn module_with_no_symbols_has_constant_conditions() {
    let (_, module, bindings) =
        trace_and_lift("function f(){if (1 < 2) { return 1; } return 0;}", "f", &[]);
    assert!(bindings.is_empty());
    let (_, pc) = symbolic_replay(&module, &bindings).unwrap();
    assert!(!pc.is_empty());
    assert!(pc.iter().all(|e| e.expr.is_const()), "all conditions fold to constants");
}

/// The generated suite for validator-mini reaches both the recognized
/// codes and the mishandled one.
#[test]
fn validator_generation_covers_recognized_and_mishandled_codes() {
    let text = std::fs::read_to_string(common::corpus_dir().join("validator-mini.mjs-mini"))
        .unwrap();
    let program = compile_text(&text);
    let config = Config { zero_timings: true, ..Config::default() };
    let report = generate(&program, "isVAT", &[0], &config).unwrap();
    let inputs: Vec<&Value> = report.test_cases.iter().map(|c| &c.args[0]).collect();
    let has_prefix = |p: &str| {
        inputs.iter().any(|v| matches!(v, Value::Str(s) if s.len() >= 2 && &s[..2] == p.as_bytes()))
    };
    assert!(has_prefix("ab") || has_prefix("cd"), "a recognized code is exercised: {inputs:?}");
    assert!(has_prefix("bb"), "the mishandled code is exercised: {inputs:?}");
    assert!(
        report.exceptions.iter().any(|e| e.kind == "handled"),
        "the catch block is reached"
    );
    let (coverage, findings) = instrument_and_run(&program, "isVAT", &report.test_cases);
    assert_eq!(coverage.percent(), 100.0);
    assert!(findings.iter().any(|f| f.kind == "handled"));
}

/// Coverage accumulated over a generated suite is non-decreasing in the
/// order cases were produced.
#[test]
fn cumulative_coverage_is_monotone_over_iterations() {
    let text = std::fs::read_to_string(common::corpus_dir().join("trim-mini.mjs-mini")).unwrap();
    let program = compile_text(&text);
    let config = Config { zero_timings: true, ..Config::default() };
    let report = generate(&program, "trim", &[0], &config).unwrap();
    let mut last = 0.0f64;
    for upto in 1..=report.test_cases.len() {
        let (cov, _) = instrument_and_run(&program, "trim", &report.test_cases[..upto]);
        assert!(cov.percent() >= last, "coverage dropped at prefix {upto}");
        last = cov.percent();
    }
    assert!(last > 0.0);
}

/// Re-tracing a generated test case follows the path the solver
/// predicted for the negated prefix (or is explicitly counted as a
/// divergence, never silently accepted).
#[test]
fn generated_cases_are_sound_or_counted_divergent() {
    for lib in ["count-char-mini", "between-mini", "kv-mini"] {
        let text =
            std::fs::read_to_string(common::corpus_dir().join(format!("{lib}.mjs-mini"))).unwrap();
        let program = compile_text(&text);
        let config = Config { zero_timings: true, ..Config::default() };
        let export = program.exports[0].name.clone();
        let report = generate(&program, &export, &[0], &config).unwrap();
        assert_eq!(report.divergences, 0, "{lib}: solver predictions all confirmed");
        assert!(report.unique_paths >= 2, "{lib}: exploration made progress");
    }
}

#[test]
fn outcome_kinds_of_traced_exceptions_match_interpreter_classification() {
    let text = r#"
function boom(s){ if (s.length == 1) { throw "one"; } return s; }
export function f(s){
  try { boom(s); } catch (e) { return "caught"; }
  if (s.length == 2) { throw "two"; }
  return "ok";
}
"#;
    for (input, want_kind) in [("a", "handled"), ("ab", "unhandled"), ("abc", "returned")] {
        let (extracted, module, bindings) =
            trace_and_lift(text, "f", &[Value::str_from(input)]);
        assert_eq!(extracted.outcome.kind_token(), want_kind, "input {input:?}");
        let (outcome, _) = eval_ir(&module, &bindings).unwrap();
        assert!(outcome.matches(&extracted.outcome), "input {input:?}");
    }
    // Handled runs surface the first caught message even though the run
    // continued normally afterwards.
    let (extracted, _, _) = trace_and_lift(text, "f", &[Value::str_from("a")]);
    match extracted.outcome {
        OutcomeKind::HandledException { ref message, .. } => assert_eq!(message, "one"),
        ref other => panic!("{other:?}"),
    }
}

/// Raw traces interleave verification pairs; extraction removes exactly
/// those and nothing else, and the proportions hold corpus-wide.
#[test]
fn extraction_counting_holds_across_corpus() {
    let mut rng = rng(0xC0DE);
    for (name, text) in corpus_sources() {
        let program = compile_text(&text);
        for export in program.exports.clone() {
            let args = random_string_args(&mut rng, export.param_count);
            let run = baseline_trace(
                program.get(&export.name).unwrap(),
                &args,
                &[],
                &program,
                &TraceOptions::default(),
            )
            .unwrap();
            let raw = &run.trace;
            let extracted = extract_function_instr(raw);
            let verification = raw.ops.iter().filter(|o| o.tag == Tag::Verification).count();
            assert_eq!(extracted.ops.len() + verification, raw.ops.len(), "{name}");
            assert_eq!(verification, 2 * raw.dispatch_sequence().len(), "{name}");
        }
    }
}

/// Every JumpIfFalse/JumpIfTrue dispatch emits exactly one branch
/// micro-op; guard branches live in other dispatch groups.
#[test]
fn branch_completeness_per_dispatch_group() {
    use sparktrace_core::tracer::MicroOpKind;
    let mut rng = rng(0xB4A2);
    let jump_ordinals = [15u8, 16u8]; // JumpIfFalse, JumpIfTrue
    for (name, text) in corpus_sources() {
        let program = compile_text(&text);
        for export in program.exports.clone() {
            let args = random_string_args(&mut rng, export.param_count);
            let run = baseline_trace(
                program.get(&export.name).unwrap(),
                &args,
                &[],
                &program,
                &TraceOptions::default(),
            )
            .unwrap();
            // Walk dispatch groups: a group starts at VerifyFrameSize and
            // ends before the next one.
            let ops = &run.trace.ops;
            let mut i = 0;
            let mut jumpif_dispatches = 0;
            while i < ops.len() {
                assert_eq!(ops[i].kind, MicroOpKind::VerifyFrameSize, "{name}");
                let ordinal = ops[i + 1].operands[0] as u8;
                let mut j = i + 2;
                while j < ops.len() && ops[j].kind != MicroOpKind::VerifyFrameSize {
                    j += 1;
                }
                let branches = ops[i..j]
                    .iter()
                    .filter(|o| {
                        matches!(o.kind, MicroOpKind::BranchTaken | MicroOpKind::BranchNotTaken)
                    })
                    .count();
                if jump_ordinals.contains(&ordinal) {
                    assert_eq!(branches, 1, "{name}/{}: conditional jump group", export.name);
                    jumpif_dispatches += 1;
                }
                i = j;
            }
            let _ = jumpif_dispatches;
        }
    }
}

/// A runaway loop trips the op cap; in a generation run the overflow is
/// recorded per seed rather than aborting the whole loop.
#[test]
fn trace_overflow_is_recorded_not_fatal() {
    use sparktrace_core::tracer::TraceError;
    let program = compile_text(
        "export function f(s){ while (s.length == 0) { s = s.concat(\"\"); } return s.length; }",
    );
    // Direct overflow from the tracer.
    let opts = TraceOptions { op_cap: 500, ..Default::default() };
    let err = baseline_trace(
        program.get("f").unwrap(),
        &[Value::str_from("")],
        &[0],
        &program,
        &opts,
    )
    .unwrap_err();
    assert_eq!(err, TraceError::Overflow { cap: 500 });

    // Through generate: the empty-string child overflows, others proceed.
    let config = Config { trace_op_cap: 2000, zero_timings: true, ..Config::default() };
    let report = generate(&program, "f", &[0], &config).unwrap();
    assert!(report.trace_overflows >= 1, "overflowing seed recorded");
    assert!(report.unique_paths >= 1, "non-overflowing paths still explored");
}

/// Campaign findings carry witnesses that reproduce the finding when
/// replayed alone.
#[test]
fn finding_witnesses_replay_alone() {
    use sparktrace_core::harness::{discover_corpus, run_campaign};
    let manifests = discover_corpus(&common::corpus_dir()).unwrap();
    let buggy: Vec<_> = manifests
        .into_iter()
        .filter(|m| ["benchmarkify-mini", "validator-mini", "stringify-mini"].contains(&m.name.as_str()))
        .collect();
    let config = Config { zero_timings: true, ..Config::default() };
    let report = run_campaign(&buggy, &config, 2);
    let mut checked = 0;
    for row in &report.rows {
        for finding in &row.findings {
            let cases = report
                .cases
                .iter()
                .find(|(lib, func, _)| *lib == row.library && *func == row.function)
                .map(|(_, _, cases)| cases)
                .expect("cases recorded for row");
            let witness = cases
                .iter()
                .find(|c| c.id == finding.witness)
                .expect("witness case present")
                .clone();
            let text = std::fs::read_to_string(
                common::corpus_dir().join(format!("{}.mjs-mini", row.library)),
            )
            .unwrap();
            let program = compile_text(&text);
            let (_, found) = instrument_and_run(&program, &row.function, &[witness]);
            assert!(
                found.iter().any(|f| f.kind == finding.kind
                    && f.message == finding.message
                    && f.span == finding.span),
                "{}/{}: witness {} does not reproduce {:?}",
                row.library,
                row.function,
                finding.witness,
                finding.message
            );
            checked += 1;
        }
    }
    assert!(checked >= 3, "checked {checked} findings");
}
