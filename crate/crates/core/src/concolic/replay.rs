//! Symbolic replay: concrete evaluation of a lifted module with a shadow
//! expression per value id.
//!
//! The concrete half must agree with [`crate::lifter::eval_ir`]; the
//! symbolic half builds the path condition. A failed assertion here is a
//! `DivergenceError` — the bindings belong to a different path and the
//! caller must re-trace them through the tracer instead.

use super::expr::{
    as_condition, cbool, cint, mk_add, mk_div, mk_eq, mk_le, mk_lt, mk_mod, mk_mul, mk_not,
    mk_sub, Bindings, ExprRef, SymExpr,
};
use super::{PathCondition, PcEntry};
use crate::lifter::{
    EvalError, HaltKind, HaltPayload, InstrKind, IrModule, ReplayOutcome, Terminator, ValueId,
};
use crate::value::{Value, MAX_STRING_LEN};
use std::collections::HashMap;
use std::rc::Rc;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ReplayError {
    /// The concrete run violated assertion `index`: these bindings follow
    /// a different path than the module encodes.
    #[error("divergence at path assertion {index}")]
    Divergence { index: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

struct Shadowed {
    concrete: i64,
    symbolic: ExprRef,
}

/// Replay the module under `bindings`, shadowing every value with a
/// symbolic expression. Returns the outcome and the path condition in
/// assertion order.
pub fn symbolic_replay(
    module: &IrModule,
    bindings: &Bindings,
) -> Result<(ReplayOutcome, PathCondition), ReplayError> {
    let mut mem: HashMap<u64, u8> = module.memory.bytes.iter().map(|(&a, &b)| (a, b)).collect();
    let mut shadow_mem: HashMap<u64, ExprRef> = HashMap::new();
    let regions = &module.memory.regions;
    let region_of = |addr: u64| regions.iter().find(|r| r.contains(addr));
    let symbol_region =
        |addr: u64| module.symbol_decls.iter().find(|d| {
            let cap = region_of(d.base).map(|r| r.len as u64).unwrap_or(0);
            addr >= d.base && addr < d.base + cap
        });

    let mut values: HashMap<ValueId, Shadowed> = HashMap::new();
    let mut condition: PathCondition = Vec::new();

    let block_index: HashMap<&str, usize> =
        module.blocks.iter().enumerate().map(|(i, b)| (b.label.as_str(), i)).collect();
    let mut cursor = Some(module.entry.as_str());

    while let Some(label) = cursor {
        let &bi = block_index
            .get(label)
            .ok_or(EvalError::BadLabel { label: label.to_string() })?;
        let block = &module.blocks[bi];
        for instr in &block.instrs {
            let get = |vid: ValueId| -> Result<(i64, ExprRef), EvalError> {
                values
                    .get(&vid)
                    .map(|s| (s.concrete, s.symbolic.clone()))
                    .ok_or(EvalError::UndefinedValue { vid })
            };
            let operand = |i: usize| get(instr.operands[i]);
            let (concrete, symbolic) = match &instr.kind {
                InstrKind::Const(v) => (*v, cint(*v)),
                InstrKind::Add | InstrKind::Sub | InstrKind::Mul | InstrKind::Div | InstrKind::Mod => {
                    let (a, ea) = operand(0)?;
                    let (b, eb) = operand(1)?;
                    let (v, e) = match instr.kind {
                        InstrKind::Add => (a.wrapping_add(b), mk_add(ea, eb)),
                        InstrKind::Sub => (a.wrapping_sub(b), mk_sub(ea, eb)),
                        InstrKind::Mul => (a.wrapping_mul(b), mk_mul(ea, eb)),
                        InstrKind::Div => {
                            if b == 0 {
                                return Err(EvalError::DivisionByZero { vid: instr.result }.into());
                            }
                            (a.wrapping_div(b), mk_div(ea, eb))
                        }
                        _ => {
                            if b == 0 {
                                return Err(EvalError::DivisionByZero { vid: instr.result }.into());
                            }
                            (a.wrapping_rem(b), mk_mod(ea, eb))
                        }
                    };
                    (v, e)
                }
                InstrKind::CmpEq => {
                    let (a, ea) = operand(0)?;
                    let (b, eb) = operand(1)?;
                    ((a == b) as i64, mk_eq(ea, eb))
                }
                InstrKind::CmpLt => {
                    let (a, ea) = operand(0)?;
                    let (b, eb) = operand(1)?;
                    ((a < b) as i64, mk_lt(ea, eb))
                }
                InstrKind::CmpLe => {
                    let (a, ea) = operand(0)?;
                    let (b, eb) = operand(1)?;
                    ((a <= b) as i64, mk_le(ea, eb))
                }
                InstrKind::Not => {
                    let (a, ea) = operand(0)?;
                    ((a == 0) as i64, mk_not(as_condition(ea)))
                }
                InstrKind::Select => {
                    let (c, _) = operand(0)?;
                    // Concretized select: the chosen arm's expression.
                    let (v, e) = if c != 0 { operand(1)? } else { operand(2)? };
                    (v, e)
                }
                InstrKind::ReadMem8 => {
                    let (addr_v, addr_e) = operand(0)?;
                    let addr = addr_v as u64;
                    if region_of(addr).is_none() {
                        return Err(EvalError::OutOfRegion { addr }.into());
                    }
                    let concrete = mem.get(&addr).copied().unwrap_or(0) as i64;
                    // Symbolic view: an explicit shadow write wins; bytes of
                    // a symbol region become SymByte; all else is concrete.
                    // A non-constant address is concretized to this replay's
                    // address, the standard concolic fallback.
                    let _ = addr_e;
                    let symbolic = if let Some(e) = shadow_mem.get(&addr) {
                        e.clone()
                    } else if let Some(decl) = symbol_region(addr) {
                        Rc::new(SymExpr::SymByte {
                            sym: decl.id,
                            offset: (addr - decl.base) as usize,
                        })
                    } else {
                        cint(concrete)
                    };
                    (concrete, symbolic)
                }
                InstrKind::WriteMem8 => {
                    let (addr_v, _) = operand(0)?;
                    let (src_v, src_e) = operand(1)?;
                    let addr = addr_v as u64;
                    if region_of(addr).is_none() {
                        return Err(EvalError::OutOfRegion { addr }.into());
                    }
                    mem.insert(addr, src_v as u8);
                    shadow_mem.insert(addr, src_e);
                    (0, cint(0))
                }
                InstrKind::MakeSymbolic(sym) => {
                    let decl = module
                        .symbol_decls
                        .iter()
                        .find(|d| d.id == *sym)
                        .ok_or(EvalError::MissingBinding { sym: *sym })?;
                    let bytes = bindings.get(sym).ok_or(EvalError::MissingBinding { sym: *sym })?;
                    let cap = region_of(decl.base).map(|r| r.len).unwrap_or(0);
                    if bytes.len() > cap {
                        return Err(
                            EvalError::BindingTooLong { sym: *sym, len: bytes.len() }.into()
                        );
                    }
                    for (k, &b) in bytes.iter().enumerate() {
                        mem.insert(decl.base + k as u64, b);
                    }
                    (bytes.len() as i64, Rc::new(SymExpr::LenOf(*sym)))
                }
                InstrKind::AssertPathTaken { expected, origin_pc, .. } => {
                    let (v, e) = operand(0)?;
                    let held = (v != 0) == *expected;
                    if !held {
                        return Err(ReplayError::Divergence { index: condition.len() });
                    }
                    condition.push(PcEntry {
                        expr: as_condition(e),
                        taken: *expected,
                        origin_pc: *origin_pc,
                    });
                    (1, cbool(true))
                }
                InstrKind::LogError => (0, cint(0)),
            };
            values.insert(instr.result, Shadowed { concrete, symbolic });
        }
        match &block.terminator {
            Terminator::FallThrough(next) => cursor = Some(next.as_str()),
            Terminator::Halt { kind, payload } => {
                let get = |vid: ValueId| -> Result<i64, EvalError> {
                    values.get(&vid).map(|s| s.concrete).ok_or(EvalError::UndefinedValue { vid })
                };
                let string_of = |b: ValueId, l: ValueId| -> Result<Vec<u8>, EvalError> {
                    let base = get(b)? as u64;
                    let len = get(l)?;
                    if !(0..=MAX_STRING_LEN as i64).contains(&len) {
                        return Err(EvalError::BadHaltString {
                            reason: format!("length {len} out of range"),
                        });
                    }
                    (0..len as u64)
                        .map(|k| {
                            let addr = base + k;
                            region_of(addr)
                                .map(|_| mem.get(&addr).copied().unwrap_or(0))
                                .ok_or(EvalError::OutOfRegion { addr })
                        })
                        .collect()
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
                                }
                                .into())
                            }
                        };
                        let message = String::from_utf8_lossy(&string_of(b, l)?).into_owned();
                        if *kind == HaltKind::Handled {
                            ReplayOutcome::Handled(message)
                        } else {
                            ReplayOutcome::Unhandled(message)
                        }
                    }
                };
                return Ok((outcome, condition));
            }
        }
    }
    Err(EvalError::BadLabel { label: "<missing terminator>".into() }.into())
}
