//! Reference interpreter. Directly executes verified bytecode and records
//! the exact dispatch sequence; the baseline tracer must reproduce both
//! the outcome and that sequence.

use crate::bytecode::{BytecodeFunction, CompiledProgram, Const, Op};
use crate::semantics::{self, msg};
use crate::util::Span;
use crate::value::Value;
use std::collections::BTreeMap;
use thiserror::Error;

/// How a run ended. A handled exception reports the first caught throw
/// even though execution continued afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutcomeKind {
    Returned(Value),
    HandledException { message: String, catch_span: Span },
    UnhandledException { message: String, span: Span },
}

impl OutcomeKind {
    pub fn kind_token(&self) -> &'static str {
        match self {
            OutcomeKind::Returned(_) => "returned",
            OutcomeKind::HandledException { .. } => "handled",
            OutcomeKind::UnhandledException { .. } => "unhandled",
        }
    }

    /// Equality that ignores source spans; used when comparing against
    /// replayed runs that have no span information.
    pub fn same_result(&self, other: &OutcomeKind) -> bool {
        match (self, other) {
            (OutcomeKind::Returned(a), OutcomeKind::Returned(b)) => a == b,
            (
                OutcomeKind::HandledException { message: a, .. },
                OutcomeKind::HandledException { message: b, .. },
            ) => a == b,
            (
                OutcomeKind::UnhandledException { message: a, .. },
                OutcomeKind::UnhandledException { message: b, .. },
            ) => a == b,
            _ => false,
        }
    }
}

/// Result of one run: the outcome plus the full bytecode dispatch log,
/// flattened across calls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecOutcome {
    pub kind: OutcomeKind,
    pub dispatch_log: Vec<(u32, Op)>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum InterpError {
    #[error("step limit of {0} exceeded")]
    StepLimit(u64),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub max_steps: u64,
    pub max_call_depth: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { max_steps: 1_000_000, max_call_depth: 200 }
    }
}

/// Per-statement hit counts keyed by (function name, statement span).
pub type CoverageHits = BTreeMap<(String, Span), u64>;

/// Optional run observers: statement coverage and per-dispatch register
/// snapshots (the frame-mirroring probe).
#[derive(Default)]
pub struct Observers<'o> {
    pub coverage: Option<&'o mut CoverageHits>,
    pub registers: Option<&'o mut Vec<Vec<Value>>>,
}

pub fn interpret(
    func: &BytecodeFunction,
    args: &[Value],
    env: &CompiledProgram,
) -> Result<ExecOutcome, InterpError> {
    interpret_with(func, args, env, &RunConfig::default(), &mut Observers::default())
}

struct Frame<'a> {
    func: &'a BytecodeFunction,
    regs: Vec<Value>,
    params: Vec<Value>,
    pc: usize,
    handlers: Vec<u32>,
}

impl<'a> Frame<'a> {
    fn new(func: &'a BytecodeFunction, args: &[Value]) -> Self {
        let mut params = args.to_vec();
        params.resize(func.param_count as usize, Value::Null);
        params.truncate(func.param_count as usize);
        Frame {
            func,
            regs: vec![Value::Null; func.frame_size as usize],
            params,
            pc: 0,
            handlers: Vec::new(),
        }
    }
}

pub fn interpret_with(
    func: &BytecodeFunction,
    args: &[Value],
    env: &CompiledProgram,
    cfg: &RunConfig,
    observers: &mut Observers<'_>,
) -> Result<ExecOutcome, InterpError> {
    let mut frames = vec![Frame::new(func, args)];
    let mut acc = Value::Null;
    let mut log: Vec<(u32, Op)> = Vec::new();
    let mut first_handled: Option<(String, Span)> = None;
    let mut steps = 0u64;

    // Unwind to the nearest handler. Diverges: either control resumes at
    // the handler (continue) or the run ends with an unhandled exception.
    macro_rules! throw {
        ($message:expr, $span:expr) => {{
            let message: String = $message;
            let span: Span = $span;
            let mut caught = false;
            while let Some(frame) = frames.last_mut() {
                if let Some(target) = frame.handlers.pop() {
                    let catch_span = frame.func.statement_map[target as usize];
                    if first_handled.is_none() {
                        first_handled = Some((message.clone(), catch_span));
                    }
                    frame.pc = target as usize;
                    acc = Value::Str(message.clone().into_bytes());
                    caught = true;
                    break;
                }
                frames.pop();
            }
            if !caught {
                return Ok(ExecOutcome {
                    kind: OutcomeKind::UnhandledException { message, span },
                    dispatch_log: log,
                });
            }
            continue;
        }};
    }

    loop {
        steps += 1;
        if steps > cfg.max_steps {
            return Err(InterpError::StepLimit(cfg.max_steps));
        }
        let depth = frames.len();
        let frame = frames.last_mut().expect("frame stack never empty while running");
        let pc = frame.pc;
        let op = frame.func.code[pc];
        let span = frame.func.statement_map[pc];
        log.push((pc as u32, op));
        if let Some(cov) = observers.coverage.as_deref_mut() {
            *cov.entry((frame.func.name.clone(), span)).or_insert(0) += 1;
        }
        if let Some(regs) = observers.registers.as_deref_mut() {
            regs.push(frame.regs.clone());
        }
        frame.pc += 1;

        match op {
            Op::LdaConst { idx } => {
                acc = match &frame.func.constants[idx as usize] {
                    Const::Int(n) => Value::Int(*n),
                    Const::Str(s) => Value::Str(s.clone()),
                    Const::Bool(b) => Value::Bool(*b),
                    Const::Null => Value::Null,
                };
            }
            Op::LdaParam { idx } => acc = frame.params[idx as usize].clone(),
            Op::Ldar { reg } => acc = frame.regs[reg as usize].clone(),
            Op::Star { reg } => frame.regs[reg as usize] = acc.clone(),
            Op::Add { reg } => match semantics::add(&frame.regs[reg as usize], &acc) {
                Ok(v) => acc = v,
                Err(m) => throw!(m, span),
            },
            Op::Sub { reg } | Op::Mul { reg } | Op::Div { reg } | Op::Mod { reg } => {
                let name = match op {
                    Op::Sub { .. } => "sub",
                    Op::Mul { .. } => "mul",
                    Op::Div { .. } => "div",
                    _ => "mod",
                };
                match semantics::arith(name, &frame.regs[reg as usize], &acc) {
                    Ok(v) => acc = v,
                    Err(m) => throw!(m, span),
                }
            }
            Op::Neg => match semantics::neg(&acc) {
                Ok(v) => acc = v,
                Err(m) => throw!(m, span),
            },
            Op::Not => acc = Value::Bool(!acc.truthy()),
            Op::TestEqual { reg } => {
                acc = Value::Bool(semantics::equals(&frame.regs[reg as usize], &acc));
            }
            Op::TestLess { reg } | Op::TestLessEq { reg } => {
                let or_eq = matches!(op, Op::TestLessEq { .. });
                match semantics::less(&frame.regs[reg as usize], &acc, or_eq) {
                    Ok(v) => acc = v,
                    Err(m) => throw!(m, span),
                }
            }
            Op::Jump { target } => frame.pc = target as usize,
            Op::JumpIfFalse { target } => {
                if !acc.truthy() {
                    frame.pc = target as usize;
                }
            }
            Op::JumpIfTrue { target } => {
                if acc.truthy() {
                    frame.pc = target as usize;
                }
            }
            Op::StrLen => match &acc {
                Value::Str(s) => acc = Value::Int(s.len() as i64),
                Value::Null => throw!(msg::null_member(), span),
                other => throw!(msg::member_on("length", other.type_name()), span),
            },
            Op::StrCharAt { obj } | Op::StrCharCode { obj } => {
                let member =
                    if matches!(op, Op::StrCharAt { .. }) { "charAt" } else { "charCodeAt" };
                let s = match &frame.regs[obj as usize] {
                    Value::Str(s) => s.clone(),
                    Value::Null => throw!(msg::null_member(), span),
                    other => {
                        throw!(msg::member_on(member, other.type_name()), span)
                    }
                };
                let i = match &acc {
                    Value::Int(i) => *i,
                    _ => throw!(msg::index_not_int(member), span),
                };
                acc = if member == "charAt" {
                    Value::Str(semantics::char_at(&s, i))
                } else {
                    Value::Int(semantics::char_code_at(&s, i))
                };
            }
            Op::StrIndexOf { obj } | Op::StrConcat { obj } => {
                let member = if matches!(op, Op::StrIndexOf { .. }) { "indexOf" } else { "concat" };
                let s = match &frame.regs[obj as usize] {
                    Value::Str(s) => s.clone(),
                    Value::Null => throw!(msg::null_member(), span),
                    other => {
                        throw!(msg::member_on(member, other.type_name()), span)
                    }
                };
                let arg = match &acc {
                    Value::Str(a) => a.clone(),
                    _ => throw!(msg::arg_not_string(member), span),
                };
                if member == "indexOf" {
                    acc = Value::Int(semantics::index_of(&s, &arg));
                } else {
                    match semantics::add(&Value::Str(s), &Value::Str(arg)) {
                        Ok(v) => acc = v,
                        Err(m) => throw!(m, span),
                    }
                }
            }
            Op::StrSubstring { obj, start } => {
                let s = match &frame.regs[obj as usize] {
                    Value::Str(s) => s.clone(),
                    Value::Null => throw!(msg::null_member(), span),
                    other => {
                        throw!(msg::member_on("substring", other.type_name()), span)
                    }
                };
                let a = match &frame.regs[start as usize] {
                    Value::Int(a) => *a,
                    _ => throw!(msg::index_not_int("substring"), span),
                };
                let b = match &acc {
                    Value::Int(b) => *b,
                    _ => throw!(msg::index_not_int("substring"), span),
                };
                acc = Value::Str(semantics::substring(&s, a, b));
            }
            Op::CallFunc { name_idx, arg_base, argc } => {
                let name = match &frame.func.constants[name_idx as usize] {
                    Const::Str(s) => String::from_utf8_lossy(s).into_owned(),
                    _ => unreachable!("verified call name"),
                };
                let Some(callee) = env.get(&name) else {
                    throw!(msg::not_a_function(&name), span)
                };
                if depth >= cfg.max_call_depth {
                    throw!(msg::call_depth(), span)
                }
                let base = arg_base as usize;
                let call_args: Vec<Value> = frame.regs[base..base + argc as usize].to_vec();
                frames.push(Frame::new(callee, &call_args));
            }
            Op::Return => {
                frames.pop();
                if frames.is_empty() {
                    let kind = match first_handled {
                        Some((message, catch_span)) => {
                            OutcomeKind::HandledException { message, catch_span }
                        }
                        None => OutcomeKind::Returned(acc),
                    };
                    return Ok(ExecOutcome { kind, dispatch_log: log });
                }
            }
            Op::Throw => {
                let message = match &acc {
                    Value::Str(s) => String::from_utf8_lossy(s).into_owned(),
                    _ => throw!(msg::throw_non_string(), span),
                };
                throw!(message, span);
            }
            Op::EnterTry { target } => frame.handlers.push(target),
            Op::LeaveTry => {
                frame.handlers.pop();
            }
            Op::PinSymbolic { .. } => {
                // Tracing concern only; the interpreter treats it as a no-op.
            }
        }
    }
}
