//! The iterative concolic loop.
//!
//! Each iteration traces one pending test case, lifts the extracted
//! trace, replays it symbolically to collect the path condition, then
//! solves the negation of every not-yet-attempted branch along that path.
//! Solutions become the next generation's seeds; paths are deduplicated
//! by signature and the search is breadth-first over generations, so all
//! negations of the current path are enqueued before any child is traced.

use super::solver::{negate_and_solve, SolveOutcome, SolverConfig};
use super::{
    negation_signature, path_signature, symbolic_replay, ExceptionInfo, PathCondition,
    Provenance, ReplayError, TestCase,
};
use crate::bytecode::CompiledProgram;
use crate::config::Config;
use crate::harness::seeds::random_seeds;
use crate::interp::OutcomeKind;
use crate::lifter::{build_entry, lift, IrModule};
use crate::tracer::{baseline_trace, extract_function_instr, MicroTrace, TraceError, TraceOptions};
use crate::value::Value;
use std::collections::{BTreeMap, HashSet, VecDeque};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GenerateError {
    #[error("function `{0}` not found")]
    FunctionNotFound(String),
    #[error("lift failed on a freshly captured trace: {0}")]
    Lift(String),
    #[error("replay failed on a freshly captured trace: {0}")]
    Replay(String),
}

/// Aggregated record of one exception site.
pub type ExceptionRecord = ExceptionInfo;

#[derive(Debug, Clone)]
pub struct GenerateReport {
    pub function: String,
    /// Seeds actually traced.
    pub iterations: usize,
    /// Unique-path test cases, in discovery order.
    pub test_cases: Vec<TestCase>,
    pub unique_paths: usize,
    /// Distinct (kind, message, span) exception sites with a witness.
    pub exceptions: Vec<ExceptionRecord>,
    pub wall_time_ms: u64,
    pub mean_iteration_ms: f64,
    /// Negated predictions whose retrace followed a different path.
    pub divergences: usize,
    /// Seeds abandoned because tracing exceeded the op cap.
    pub trace_overflows: usize,
    /// Solver verdicts observed.
    pub solver_sat: usize,
    pub solver_unsat: usize,
    pub solver_unknown: usize,
    /// Per-case path conditions, for callers that inspect paths.
    pub paths: BTreeMap<u32, Vec<(u32, bool)>>,
    /// Lifted module of each unique path, keyed by test case id.
    pub modules: BTreeMap<u32, IrModule>,
}

/// Run the concolic loop for one exported function.
///
/// `symbolic_params` are the argument positions to treat as symbolic;
/// the remaining positions keep each seed's concrete value.
pub fn generate(
    program: &CompiledProgram,
    function: &str,
    symbolic_params: &[usize],
    config: &Config,
) -> Result<GenerateReport, GenerateError> {
    let func = program
        .get(function)
        .ok_or_else(|| GenerateError::FunctionNotFound(function.to_string()))?;
    let started = Instant::now();
    let deadline_ms = config.per_function_time_budget_ms;

    let trace_opts = TraceOptions {
        op_cap: config.trace_op_cap,
        ..Default::default()
    };
    let solver_cfg = SolverConfig {
        max_len: config.max_solve_len,
        alphabet: config.alphabet.clone(),
        budget: 2_000_000,
    };

    let mut queue: VecDeque<TestCase> = random_seeds(
        function,
        func.param_count as usize,
        symbolic_params,
        config.seed_count,
        config.max_seed_len,
        &config.alphabet,
        config.rng_seed,
        0,
    )
    .into();
    let mut next_id = queue.len() as u32;

    let mut visited_paths: HashSet<u64> = HashSet::new();
    let mut attempted_negations: HashSet<u64> = HashSet::new();
    let mut parent_conditions: BTreeMap<u32, PathCondition> = BTreeMap::new();
    let mut report = GenerateReport {
        function: function.to_string(),
        iterations: 0,
        test_cases: Vec::new(),
        unique_paths: 0,
        exceptions: Vec::new(),
        wall_time_ms: 0,
        mean_iteration_ms: 0.0,
        divergences: 0,
        trace_overflows: 0,
        solver_sat: 0,
        solver_unsat: 0,
        solver_unknown: 0,
        paths: BTreeMap::new(),
        modules: BTreeMap::new(),
    };
    let mut exception_sites: HashSet<(String, String, crate::util::Span)> = HashSet::new();

    while let Some(case) = queue.pop_front() {
        if report.iterations >= config.max_iterations {
            break;
        }
        if started.elapsed().as_millis() as u64 >= deadline_ms {
            break;
        }
        report.iterations += 1;

        let run = match baseline_trace(func, &case.args, symbolic_params, program, &trace_opts) {
            Ok(run) => run,
            Err(TraceError::Overflow { .. }) => {
                report.trace_overflows += 1;
                continue;
            }
        };
        let extracted = extract_function_instr(&run.trace);
        let (module, pc) = replay_case(&extracted, &case)?;

        let sig = path_signature(&pc);
        if !visited_paths.insert(sig) {
            continue;
        }

        // Soundness check for solver-predicted paths: the parent's first k
        // conditions, plus the negation of condition k, must hold under
        // the child's bindings. (The re-traced path may unroll different
        // string work — a shorter scan, say — without being divergent;
        // what must never happen silently is a model that fails the
        // constraints it was solved for.)
        if let Provenance::NegatedBranch { parent, branch } = &case.provenance {
            if let Some(parent_pc) = parent_conditions.get(parent) {
                let k = *branch;
                let prefix_holds = parent_pc[..k]
                    .iter()
                    .all(|e| e.expr.eval_bool(&case.bindings) == e.taken)
                    && parent_pc[k].expr.eval_bool(&case.bindings) != parent_pc[k].taken;
                if !prefix_holds {
                    report.divergences += 1;
                }
            }
        }

        record_exception(&extracted.outcome, case.id, &mut exception_sites, &mut report);
        report.paths.insert(case.id, pc.iter().map(|e| (e.origin_pc, e.taken)).collect());
        report.modules.insert(case.id, module);
        parent_conditions.insert(case.id, pc.clone());

        // Enqueue every un-attempted negation of this path, in order.
        for k in 0..pc.len() {
            if pc[k].expr.is_const() {
                // Constant conditions negate to unsat; skip the solver call.
                report.solver_unsat += 1;
                continue;
            }
            if !attempted_negations.insert(negation_signature(&pc, k)) {
                continue;
            }
            match negate_and_solve(&pc, k, &extracted.symbol_table, &case.bindings, &solver_cfg) {
                SolveOutcome::Sat(bindings) => {
                    report.solver_sat += 1;
                    let mut args = case.args.clone();
                    for decl in &extracted.symbol_table {
                        if let Some(bytes) = bindings.get(&decl.id) {
                            args[decl.param_index] = Value::Str(bytes.clone());
                        }
                    }
                    queue.push_back(TestCase {
                        id: next_id,
                        function: function.to_string(),
                        generation: case.generation + 1,
                        provenance: Provenance::NegatedBranch { parent: case.id, branch: k },
                        args,
                        bindings,
                    });
                    next_id += 1;
                }
                SolveOutcome::Unsat => report.solver_unsat += 1,
                SolveOutcome::Unknown => report.solver_unknown += 1,
            }
        }

        report.test_cases.push(case);
    }

    report.unique_paths = report.test_cases.len();
    let elapsed = started.elapsed();
    if !config.zero_timings {
        report.wall_time_ms = elapsed.as_millis() as u64;
        report.mean_iteration_ms = if report.iterations > 0 {
            elapsed.as_secs_f64() * 1000.0 / report.iterations as f64
        } else {
            0.0
        };
    }
    Ok(report)
}

/// Lift a fresh extracted trace and replay it under the case's own
/// bindings. A module lifted from a trace must replay that trace's path.
fn replay_case(
    extracted: &MicroTrace,
    case: &TestCase,
) -> Result<(IrModule, PathCondition), GenerateError> {
    let module =
        build_entry(lift(extracted).map_err(|e| GenerateError::Lift(e.to_string()))?);
    let (outcome, pc) = symbolic_replay(&module, &case.bindings).map_err(|e| match e {
        ReplayError::Divergence { index } => {
            GenerateError::Replay(format!("own trace diverged at assertion {index}"))
        }
        other => GenerateError::Replay(other.to_string()),
    })?;
    debug_assert!(
        outcome.matches(&extracted.outcome),
        "replay outcome {outcome:?} != traced {:?}",
        extracted.outcome
    );
    Ok((module, pc))
}

fn record_exception(
    outcome: &OutcomeKind,
    case_id: u32,
    seen: &mut HashSet<(String, String, crate::util::Span)>,
    report: &mut GenerateReport,
) {
    let (kind, message, span) = match outcome {
        OutcomeKind::Returned(_) => return,
        OutcomeKind::HandledException { message, catch_span } => {
            ("handled", message.clone(), *catch_span)
        }
        OutcomeKind::UnhandledException { message, span } => {
            ("unhandled", message.clone(), *span)
        }
    };
    if seen.insert((kind.to_string(), message.clone(), span)) {
        report.exceptions.push(ExceptionInfo {
            kind: kind.to_string(),
            message,
            span,
            test_case_id: case_id,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytecode::compile_program;
    use crate::frontend::parse_text;

    fn cfg() -> Config {
        Config { rng_seed: 11, ..Config::default() }
    }

    fn gen(text: &str, func: &str, sym: &[usize]) -> GenerateReport {
        let program = compile_program(&parse_text(text).unwrap()).unwrap();
        generate(&program, func, sym, &cfg()).unwrap()
    }

    #[test]
    fn branch_free_function_yields_one_case() {
        let r = gen("export function f(s){return 0;}", "f", &[0]);
        assert_eq!(r.test_cases.len(), 1);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.unique_paths, 1);
        assert!(matches!(r.test_cases[0].provenance, Provenance::RandomSeed));
    }

    #[test]
    fn empty_check_produces_the_empty_string_case() {
        let r = gen(
            r#"export function f(s){if(s.length == 0){ throw "empty"; } return 0;}"#,
            "f",
            &[0],
        );
        assert_eq!(r.test_cases.len(), 2, "two paths");
        assert!(
            r.test_cases.iter().any(|c| c.args[0] == Value::Str(vec![])),
            "one generated case drives the empty-string branch"
        );
        assert_eq!(r.exceptions.len(), 1);
        assert_eq!(r.exceptions[0].kind, "unhandled");
        assert_eq!(r.exceptions[0].message, "empty");
    }

    #[test]
    fn equality_chain_is_solved_generationally() {
        let r = gen(
            r#"export function f(s){
  if (s == "ab") { return 1; }
  if (s == "cd") { return 2; }
  return 0;
}"#,
            "f",
            &[0],
        );
        let returned: Vec<&Value> = r.test_cases.iter().map(|c| &c.args[0]).collect();
        assert!(returned.contains(&&Value::str_from("ab")), "cases: {returned:?}");
        assert!(returned.contains(&&Value::str_from("cd")), "cases: {returned:?}");
    }

    #[test]
    fn path_signatures_are_unique_in_report() {
        let r = gen(
            r#"export function f(s){
  var n = 0;
  for (var i = 0; i < s.length; i = i + 1) {
    if (s.charAt(i) == "a") { n = n + 1; }
  }
  return n;
}"#,
            "f",
            &[0],
        );
        let mut sigs: Vec<Vec<(u32, bool)>> = r.paths.values().cloned().collect();
        let before = sigs.len();
        sigs.sort();
        sigs.dedup();
        assert_eq!(before, sigs.len());
        assert!(r.iterations <= cfg().max_iterations);
    }

    #[test]
    fn reports_are_deterministic_for_a_fixed_seed() {
        let text = r#"export function f(s){ if (s.indexOf("ab") == 0) { return 1; } return 0; }"#;
        let a = gen(text, "f", &[0]);
        let b = gen(text, "f", &[0]);
        assert_eq!(a.test_cases, b.test_cases);
        assert_eq!(a.paths, b.paths);
    }
}
