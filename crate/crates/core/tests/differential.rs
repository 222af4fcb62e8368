//! Differential suite: the bytecode interpreter against the AST-walking
//! oracle, and the baseline tracer against the interpreter (outcomes,
//! dispatch sequences, and per-dispatch register state).

mod common;

use common::{compile_text, corpus_sources, oracle_eval, random_string_args, rng, OracleOutcome};
use sparktrace_core::bytecode::{CompiledProgram, Const, Op};
use sparktrace_core::frontend::parse_text;
use sparktrace_core::interp::{interpret, interpret_with, Observers, OutcomeKind, RunConfig};
use sparktrace_core::tracer::{baseline_trace, TraceOptions};

fn outcome_matches_oracle(kind: &OutcomeKind, oracle: &OracleOutcome) -> bool {
    match (kind, oracle) {
        (OutcomeKind::Returned(a), OracleOutcome::Returned(b)) => a == b,
        (
            OutcomeKind::HandledException { message, catch_span },
            OracleOutcome::Handled { message: m, catch_span: cs },
        ) => message == m && catch_span == cs,
        (
            OutcomeKind::UnhandledException { message, span },
            OracleOutcome::Unhandled { message: m, span: sp },
        ) => message == m && span == sp,
        _ => false,
    }
}

/// Every exported function of every corpus library, against the oracle,
/// over deterministic random inputs.
#[test]
fn interpreter_agrees_with_ast_oracle_on_corpus() {
    let mut rng = rng(0xD1FF);
    for (name, text) in corpus_sources() {
        let ast = parse_text(&text).unwrap();
        let program = compile_text(&text);
        for export in program.exports.clone() {
            for _ in 0..60 {
                let args = random_string_args(&mut rng, export.param_count);
                let got = interpret(program.get(&export.name).unwrap(), &args, &program)
                    .unwrap_or_else(|e| panic!("{name}/{}: {e}", export.name));
                let want = oracle_eval(&ast, &export.name, &args);
                assert!(
                    outcome_matches_oracle(&got.kind, &want),
                    "{name}/{}({args:?}): interpreter {:?} vs oracle {want:?}",
                    export.name,
                    got.kind
                );
            }
        }
    }
}

/// Tracer and interpreter must produce the same outcome and the same
/// dispatch sequence, and their frame registers must agree at every
/// bytecode boundary.
#[test]
fn tracer_mirrors_interpreter_on_corpus() {
    let mut rng = rng(0x51CA);
    let opts = TraceOptions { record_registers: true, ..Default::default() };
    for (name, text) in corpus_sources() {
        let program = compile_text(&text);
        for export in program.exports.clone() {
            let func = program.get(&export.name).unwrap();
            let symbolic: Vec<usize> = (0..export.param_count).collect();
            for _ in 0..25 {
                let args = random_string_args(&mut rng, export.param_count);
                let mut registers = Vec::new();
                let mut obs = Observers { coverage: None, registers: Some(&mut registers) };
                let interp =
                    interpret_with(func, &args, &program, &RunConfig::default(), &mut obs)
                        .unwrap();
                let traced = baseline_trace(func, &args, &symbolic, &program, &opts)
                    .unwrap_or_else(|e| panic!("{name}/{}: {e}", export.name));

                assert!(
                    traced.trace.outcome.same_result(&interp.kind)
                        && outcome_spans_equal(&traced.trace.outcome, &interp.kind),
                    "{name}/{}({args:?}): tracer {:?} vs interpreter {:?}",
                    export.name,
                    traced.trace.outcome,
                    interp.kind
                );

                let interp_dispatch: Vec<(u32, u8)> =
                    interp.dispatch_log.iter().map(|(pc, op)| (*pc, op.ordinal())).collect();
                assert_eq!(
                    traced.trace.dispatch_sequence(),
                    interp_dispatch,
                    "{name}/{}({args:?}): dispatch sequences differ",
                    export.name
                );

                assert_eq!(
                    traced.register_trace, registers,
                    "{name}/{}({args:?}): register files diverge",
                    export.name
                );
            }
        }
    }
}

fn outcome_spans_equal(a: &OutcomeKind, b: &OutcomeKind) -> bool {
    match (a, b) {
        (
            OutcomeKind::HandledException { catch_span: x, .. },
            OutcomeKind::HandledException { catch_span: y, .. },
        ) => x == y,
        (
            OutcomeKind::UnhandledException { span: x, .. },
            OutcomeKind::UnhandledException { span: y, .. },
        ) => x == y,
        _ => true,
    }
}

/// The dispatch log must respect the static successor relation: each pc
/// follows from the previous op's fall-through, jump target, call, or
/// exception unwind.
#[test]
fn dispatch_log_respects_static_successors() {
    let mut rng = rng(0x5EC0);
    for (name, text) in corpus_sources() {
        let program = compile_text(&text);
        for export in program.exports.clone() {
            for _ in 0..10 {
                let args = random_string_args(&mut rng, export.param_count);
                let out =
                    interpret(program.get(&export.name).unwrap(), &args, &program).unwrap();
                check_successors(&program, &export.name, &out.dispatch_log)
                    .unwrap_or_else(|e| panic!("{name}/{}({args:?}): {e}", export.name));
            }
        }
    }
}

struct CheckFrame {
    func: String,
    handlers: Vec<u32>,
    return_to: Option<u32>,
}

fn unwind(stack: &mut Vec<CheckFrame>) -> Vec<u32> {
    while let Some(frame) = stack.last_mut() {
        if let Some(t) = frame.handlers.pop() {
            return vec![t];
        }
        stack.pop();
    }
    Vec::new()
}

/// Walk the dispatch log, tracking call frames and try-handler stacks,
/// and verify each step is statically allowed.
fn check_successors(
    program: &CompiledProgram,
    entry: &str,
    log: &[(u32, Op)],
) -> Result<(), String> {
    let mut stack =
        vec![CheckFrame { func: entry.to_string(), handlers: Vec::new(), return_to: None }];
    let mut expected: Vec<u32> = vec![0];

    for (i, (pc, op)) in log.iter().enumerate() {
        if !expected.contains(pc) {
            return Err(format!("step {i}: pc {pc} not in expected set {expected:?}"));
        }
        let current = stack.last().ok_or("empty frame stack")?.func.clone();
        let func = program.get(&current).ok_or("unknown function")?;
        if func.code[*pc as usize] != *op {
            return Err(format!("step {i}: logged op differs from static code at {pc}"));
        }
        let fall = *pc + 1;
        // A handler somewhere up the stack, without popping: runtime
        // errors may divert any fallible op there.
        let handler_peek: Vec<u32> = stack
            .iter()
            .rev()
            .find_map(|f| f.handlers.last().copied())
            .into_iter()
            .collect();
        expected = match *op {
            Op::Jump { target } => vec![target],
            Op::JumpIfFalse { target } | Op::JumpIfTrue { target } => vec![fall, target],
            Op::EnterTry { target } => {
                stack.last_mut().unwrap().handlers.push(target);
                vec![fall]
            }
            Op::LeaveTry => {
                stack.last_mut().unwrap().handlers.pop();
                vec![fall]
            }
            Op::CallFunc { name_idx, .. } => {
                let callee = match &func.constants[name_idx as usize] {
                    Const::Str(s) => String::from_utf8_lossy(s).into_owned(),
                    _ => return Err("bad call constant".into()),
                };
                if program.get(&callee).is_some() {
                    stack.push(CheckFrame {
                        func: callee,
                        handlers: Vec::new(),
                        return_to: Some(fall),
                    });
                    vec![0]
                } else {
                    unwind(&mut stack)
                }
            }
            Op::Return => {
                let done = stack.pop().ok_or("return with no frame")?;
                match done.return_to {
                    Some(ret) => vec![ret],
                    None => {
                        if i + 1 != log.len() {
                            return Err(format!("step {i}: top-level return not last"));
                        }
                        return Ok(());
                    }
                }
            }
            Op::Throw => unwind(&mut stack),
            _ => {
                let mut targets = vec![fall];
                targets.extend(handler_peek);
                targets
            }
        };
        if expected.is_empty() && i + 1 != log.len() {
            return Err(format!("step {i}: execution should have ended"));
        }
    }
    Ok(())
}
