//! Concrete evaluation of lifted modules.
//!
//! The evaluator supplies the intrinsic implementations the IR defers:
//! `ReadMem8`/`WriteMem8` over the module's memory image, `MakeSymbolic`
//! as binding installation, `AssertPathTaken` as a recorded (but
//! non-fatal) check. Running a module under its original bindings must
//! reproduce the traced outcome with every assertion holding; running it
//! under different bindings reports which assertions failed.

use super::{HaltKind, HaltPayload, InstrKind, IrModule, Terminator, ValueId};
use crate::interp::OutcomeKind;
use crate::value::{Value, MAX_STRING_LEN};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("memory access at {addr:#x} outside every region")]
    OutOfRegion { addr: u64 },
    #[error("no binding for symbol {sym}")]
    MissingBinding { sym: u32 },
    #[error("binding for symbol {sym} is {len} bytes, beyond its region capacity")]
    BindingTooLong { sym: u32, len: usize },
    #[error("value %{vid} used before definition")]
    UndefinedValue { vid: ValueId },
    #[error("division by zero at %{vid}")]
    DivisionByZero { vid: ValueId },
    #[error("block `{label}` not found")]
    BadLabel { label: String },
    #[error("halt payload is not a valid string: {reason}")]
    BadHaltString { reason: String },
}

/// Outcome of a module evaluation; spans are a source-level notion the IR
/// does not carry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayOutcome {
    Returned(Value),
    Handled(String),
    Unhandled(String),
}

impl ReplayOutcome {
    /// Does this replay reproduce the given traced outcome (ignoring
    /// spans)?
    pub fn matches(&self, outcome: &OutcomeKind) -> bool {
        match (self, outcome) {
            (ReplayOutcome::Returned(a), OutcomeKind::Returned(b)) => a == b,
            (ReplayOutcome::Handled(a), OutcomeKind::HandledException { message, .. }) => {
                a == message
            }
            (ReplayOutcome::Unhandled(a), OutcomeKind::UnhandledException { message, .. }) => {
                a == message
            }
            _ => false,
        }
    }
}

/// Evaluate the module under the given symbol bindings. Returns the halt
/// outcome and, in path order, whether each assertion held. Evaluation
/// continues past failed assertions so divergence points are all visible;
/// memory accesses that leave every region abort with `EvalError`.
pub fn eval_ir(
    module: &IrModule,
    bindings: &BTreeMap<u32, Vec<u8>>,
) -> Result<(ReplayOutcome, Vec<bool>), EvalError> {
    let mut mem: HashMap<u64, u8> =
        module.memory.bytes.iter().map(|(&a, &b)| (a, b)).collect();
    let regions = &module.memory.regions;
    let region_of = |addr: u64| regions.iter().find(|r| r.contains(addr));

    let mut values: HashMap<ValueId, i64> = HashMap::new();
    let mut assertions = Vec::new();

    let block_index: HashMap<&str, usize> =
        module.blocks.iter().enumerate().map(|(i, b)| (b.label.as_str(), i)).collect();
    let mut cursor = Some(module.entry.as_str());

    while let Some(label) = cursor {
        let &bi = block_index
            .get(label)
            .ok_or_else(|| EvalError::BadLabel { label: label.to_string() })?;
        let block = &module.blocks[bi];
        for instr in &block.instrs {
            let get = |vid: ValueId| -> Result<i64, EvalError> {
                values.get(&vid).copied().ok_or(EvalError::UndefinedValue { vid })
            };
            let operand = |i: usize| -> Result<i64, EvalError> { get(instr.operands[i]) };
            let result = match &instr.kind {
                InstrKind::Const(v) => *v,
                InstrKind::Add => operand(0)?.wrapping_add(operand(1)?),
                InstrKind::Sub => operand(0)?.wrapping_sub(operand(1)?),
                InstrKind::Mul => operand(0)?.wrapping_mul(operand(1)?),
                InstrKind::Div => {
                    let (a, b) = (operand(0)?, operand(1)?);
                    if b == 0 {
                        return Err(EvalError::DivisionByZero { vid: instr.result });
                    }
                    a.wrapping_div(b)
                }
                InstrKind::Mod => {
                    let (a, b) = (operand(0)?, operand(1)?);
                    if b == 0 {
                        return Err(EvalError::DivisionByZero { vid: instr.result });
                    }
                    a.wrapping_rem(b)
                }
                InstrKind::CmpEq => (operand(0)? == operand(1)?) as i64,
                InstrKind::CmpLt => (operand(0)? < operand(1)?) as i64,
                InstrKind::CmpLe => (operand(0)? <= operand(1)?) as i64,
                InstrKind::Not => (operand(0)? == 0) as i64,
                InstrKind::Select => {
                    if operand(0)? != 0 {
                        operand(1)?
                    } else {
                        operand(2)?
                    }
                }
                InstrKind::ReadMem8 => {
                    let addr = operand(0)? as u64;
                    if region_of(addr).is_none() {
                        return Err(EvalError::OutOfRegion { addr });
                    }
                    mem.get(&addr).copied().unwrap_or(0) as i64
                }
                InstrKind::WriteMem8 => {
                    let addr = operand(0)? as u64;
                    let src = operand(1)?;
                    if region_of(addr).is_none() {
                        return Err(EvalError::OutOfRegion { addr });
                    }
                    mem.insert(addr, src as u8);
                    0
                }
                InstrKind::MakeSymbolic(sym) => {
                    let decl = module
                        .symbol_decls
                        .iter()
                        .find(|d| d.id == *sym)
                        .ok_or(EvalError::MissingBinding { sym: *sym })?;
                    let bytes =
                        bindings.get(sym).ok_or(EvalError::MissingBinding { sym: *sym })?;
                    let cap = region_of(decl.base).map(|r| r.len).unwrap_or(0);
                    if bytes.len() > cap {
                        return Err(EvalError::BindingTooLong { sym: *sym, len: bytes.len() });
                    }
                    for (k, &b) in bytes.iter().enumerate() {
                        mem.insert(decl.base + k as u64, b);
                    }
                    bytes.len() as i64
                }
                InstrKind::AssertPathTaken { expected, .. } => {
                    let held = (operand(0)? != 0) == *expected;
                    assertions.push(held);
                    held as i64
                }
                InstrKind::LogError => 0,
            };
            values.insert(instr.result, result);
        }
        match &block.terminator {
            Terminator::FallThrough(next) => cursor = Some(next.as_str()),
            Terminator::Halt { kind, payload } => {
                let get = |vid: ValueId| -> Result<i64, EvalError> {
                    values.get(&vid).copied().ok_or(EvalError::UndefinedValue { vid })
                };
                let string_of = |base_vid: ValueId, len_vid: ValueId| -> Result<Vec<u8>, EvalError> {
                    let base = get(base_vid)? as u64;
                    let len = get(len_vid)?;
                    if !(0..=MAX_STRING_LEN as i64).contains(&len) {
                        return Err(EvalError::BadHaltString {
                            reason: format!("length {len} out of range"),
                        });
                    }
                    let mut bytes = Vec::with_capacity(len as usize);
                    for k in 0..len as u64 {
                        let addr = base + k;
                        if region_of(addr).is_none() {
                            return Err(EvalError::OutOfRegion { addr });
                        }
                        bytes.push(mem.get(&addr).copied().unwrap_or(0));
                    }
                    Ok(bytes)
                };
                let outcome = match kind {
                    HaltKind::Returned => ReplayOutcome::Returned(match payload {
                        HaltPayload::Null => Value::Null,
                        HaltPayload::Int(v) => Value::Int(get(*v)?),
                        HaltPayload::Bool(v) => Value::Bool(get(*v)? != 0),
                        HaltPayload::Str(b, l) => Value::Str(string_of(*b, *l)?),
                    }),
                    HaltKind::Handled | HaltKind::Unhandled => {
                        let (b, l) = match payload {
                            HaltPayload::Str(b, l) => (*b, *l),
                            other => {
                                return Err(EvalError::BadHaltString {
                                    reason: format!("exception payload {other:?}"),
                                })
                            }
                        };
                        let message =
                            String::from_utf8_lossy(&string_of(b, l)?).into_owned();
                        if *kind == HaltKind::Handled {
                            ReplayOutcome::Handled(message)
                        } else {
                            ReplayOutcome::Unhandled(message)
                        }
                    }
                };
                return Ok((outcome, assertions));
            }
        }
    }
    Err(EvalError::BadLabel { label: "<missing terminator>".into() })
}
