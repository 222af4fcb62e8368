//! Register-based bytecode with a single implicit accumulator.
//!
//! The machine keeps function parameters in a read-only bank separate from
//! the numbered locals; binary operators take their left operand from a
//! register and their right operand from the accumulator. Control flow is
//! lowered to explicit jumps, and exception scopes to `EnterTry`/`LeaveTry`
//! pairs whose handler target receives the thrown message in the
//! accumulator.

mod compile;
mod text;

pub use compile::{compile, compile_program, CompileError, CompiledProgram};
pub use text::{assemble, disassemble};

use crate::util::Span;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pool constants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Const {
    Int(i64),
    Str(Vec<u8>),
    Bool(bool),
    Null,
}

/// One bytecode. Operand meanings:
/// - register operands index the frame's locals;
/// - `target` operands are absolute bytecode indices;
/// - binary ops compute `regs[r] <op> acc` into the accumulator;
/// - string ops take the receiver from a register and the final argument
///   from the accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    LdaConst { idx: u16 },
    LdaParam { idx: u16 },
    Ldar { reg: u16 },
    Star { reg: u16 },
    Add { reg: u16 },
    Sub { reg: u16 },
    Mul { reg: u16 },
    Div { reg: u16 },
    Mod { reg: u16 },
    Neg,
    Not,
    TestEqual { reg: u16 },
    TestLess { reg: u16 },
    TestLessEq { reg: u16 },
    Jump { target: u32 },
    JumpIfFalse { target: u32 },
    JumpIfTrue { target: u32 },
    StrLen,
    StrCharAt { obj: u16 },
    StrCharCode { obj: u16 },
    StrIndexOf { obj: u16 },
    StrSubstring { obj: u16, start: u16 },
    StrConcat { obj: u16 },
    CallFunc { name_idx: u16, arg_base: u16, argc: u16 },
    Return,
    Throw,
    EnterTry { target: u32 },
    LeaveTry,
    PinSymbolic { param: u16, sym: u32 },
}

impl Op {
    pub fn mnemonic(self) -> &'static str {
        match self {
            Op::LdaConst { .. } => "LdaConst",
            Op::LdaParam { .. } => "LdaParam",
            Op::Ldar { .. } => "Ldar",
            Op::Star { .. } => "Star",
            Op::Add { .. } => "Add",
            Op::Sub { .. } => "Sub",
            Op::Mul { .. } => "Mul",
            Op::Div { .. } => "Div",
            Op::Mod { .. } => "Mod",
            Op::Neg => "Neg",
            Op::Not => "Not",
            Op::TestEqual { .. } => "TestEqual",
            Op::TestLess { .. } => "TestLess",
            Op::TestLessEq { .. } => "TestLessEq",
            Op::Jump { .. } => "Jump",
            Op::JumpIfFalse { .. } => "JumpIfFalse",
            Op::JumpIfTrue { .. } => "JumpIfTrue",
            Op::StrLen => "StrLen",
            Op::StrCharAt { .. } => "StrCharAt",
            Op::StrCharCode { .. } => "StrCharCode",
            Op::StrIndexOf { .. } => "StrIndexOf",
            Op::StrSubstring { .. } => "StrSubstring",
            Op::StrConcat { .. } => "StrConcat",
            Op::CallFunc { .. } => "CallFunc",
            Op::Return => "Return",
            Op::Throw => "Throw",
            Op::EnterTry { .. } => "EnterTry",
            Op::LeaveTry => "LeaveTry",
            Op::PinSymbolic { .. } => "PinSymbolic",
        }
    }

    /// Stable ordinal, used by the trace format's per-dispatch verification
    /// micro-op and by dispatch-sequence comparisons.
    pub fn ordinal(self) -> u8 {
        match self {
            Op::LdaConst { .. } => 0,
            Op::LdaParam { .. } => 1,
            Op::Ldar { .. } => 2,
            Op::Star { .. } => 3,
            Op::Add { .. } => 4,
            Op::Sub { .. } => 5,
            Op::Mul { .. } => 6,
            Op::Div { .. } => 7,
            Op::Mod { .. } => 8,
            Op::Neg => 9,
            Op::Not => 10,
            Op::TestEqual { .. } => 11,
            Op::TestLess { .. } => 12,
            Op::TestLessEq { .. } => 13,
            Op::Jump { .. } => 14,
            Op::JumpIfFalse { .. } => 15,
            Op::JumpIfTrue { .. } => 16,
            Op::StrLen => 17,
            Op::StrCharAt { .. } => 18,
            Op::StrCharCode { .. } => 19,
            Op::StrIndexOf { .. } => 20,
            Op::StrSubstring { .. } => 21,
            Op::StrConcat { .. } => 22,
            Op::CallFunc { .. } => 23,
            Op::Return => 24,
            Op::Throw => 25,
            Op::EnterTry { .. } => 26,
            Op::LeaveTry => 27,
            Op::PinSymbolic { .. } => 28,
        }
    }

    /// True when execution can continue at `pc + 1` after this op.
    pub fn falls_through(self) -> bool {
        !matches!(self, Op::Return | Op::Throw | Op::Jump { .. })
    }
}

/// A compiled function: code, constant pool, frame layout, and the
/// statement map used for coverage and diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BytecodeFunction {
    pub name: String,
    pub param_count: u16,
    pub frame_size: u16,
    pub constants: Vec<Const>,
    pub code: Vec<Op>,
    /// One span per bytecode index: the innermost enclosing statement.
    pub statement_map: Vec<Span>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("verify error at index {index}: {reason}")]
pub struct VerifyError {
    pub index: usize,
    pub reason: String,
}

impl BytecodeFunction {
    /// Distinct statement spans, in first-appearance order. These form the
    /// coverage universe for the function.
    pub fn statement_spans(&self) -> Vec<Span> {
        let mut seen = Vec::new();
        for sp in &self.statement_map {
            if !seen.contains(sp) {
                seen.push(*sp);
            }
        }
        seen
    }

    /// Check all structural invariants: operand bounds, jump targets,
    /// constant indices, statement-map coverage, and that every path ends
    /// in `Return` or `Throw`.
    pub fn verify(&self) -> Result<(), VerifyError> {
        let err = |index: usize, reason: String| Err(VerifyError { index, reason });
        if self.code.is_empty() {
            return err(0, "empty code".into());
        }
        if self.statement_map.len() != self.code.len() {
            return err(0, format!(
                "statement map covers {} of {} bytecodes",
                self.statement_map.len(),
                self.code.len()
            ));
        }
        for (i, op) in self.code.iter().enumerate() {
            let check_reg = |r: u16| -> Result<(), VerifyError> {
                if r >= self.frame_size {
                    return err(i, format!("register r{r} out of frame (size {})", self.frame_size));
                }
                Ok(())
            };
            let check_target = |t: u32| -> Result<(), VerifyError> {
                if (t as usize) >= self.code.len() {
                    return err(i, format!("jump target {t} out of range"));
                }
                Ok(())
            };
            match *op {
                Op::LdaConst { idx } => {
                    if (idx as usize) >= self.constants.len() {
                        return err(i, format!("constant #{idx} out of pool"));
                    }
                }
                Op::LdaParam { idx } => {
                    if idx >= self.param_count {
                        return err(i, format!("parameter a{idx} out of range"));
                    }
                }
                Op::Ldar { reg } | Op::Star { reg } => check_reg(reg)?,
                Op::Add { reg }
                | Op::Sub { reg }
                | Op::Mul { reg }
                | Op::Div { reg }
                | Op::Mod { reg }
                | Op::TestEqual { reg }
                | Op::TestLess { reg }
                | Op::TestLessEq { reg } => check_reg(reg)?,
                Op::Jump { target } | Op::JumpIfFalse { target } | Op::JumpIfTrue { target } => {
                    check_target(target)?
                }
                Op::StrCharAt { obj }
                | Op::StrCharCode { obj }
                | Op::StrIndexOf { obj }
                | Op::StrConcat { obj } => check_reg(obj)?,
                Op::StrSubstring { obj, start } => {
                    check_reg(obj)?;
                    check_reg(start)?;
                }
                Op::CallFunc { name_idx, arg_base, argc } => {
                    match self.constants.get(name_idx as usize) {
                        Some(Const::Str(_)) => {}
                        _ => return err(i, format!("call name constant #{name_idx} not a string")),
                    }
                    if argc > 0 {
                        check_reg(arg_base)?;
                        check_reg(arg_base + argc - 1)?;
                    }
                }
                Op::EnterTry { target } => check_target(target)?,
                Op::PinSymbolic { param, .. } if param >= self.param_count => {
                    return err(i, format!("pinned parameter a{param} out of range"));
                }
                _ => {}
            }
        }
        // No fall-through off the end of the code.
        let last = *self.code.last().unwrap();
        if last.falls_through() {
            return err(self.code.len() - 1, "function can fall off the end of its code".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ret_fn(code: Vec<Op>, frame_size: u16) -> BytecodeFunction {
        let n = code.len();
        BytecodeFunction {
            name: "t".into(),
            param_count: 0,
            frame_size,
            constants: vec![Const::Int(1)],
            code,
            statement_map: vec![Span::none(); n],
        }
    }

    #[test]
    fn verify_accepts_minimal_function() {
        let f = ret_fn(vec![Op::LdaConst { idx: 0 }, Op::Return], 0);
        f.verify().unwrap();
    }

    #[test]
    fn verify_rejects_out_of_range_jump() {
        let f = ret_fn(vec![Op::Jump { target: 7 }, Op::Return], 0);
        let e = f.verify().unwrap_err();
        assert_eq!(e.index, 0);
    }

    #[test]
    fn verify_rejects_register_beyond_frame() {
        let f = ret_fn(vec![Op::Star { reg: 9 }, Op::Return], 4);
        let e = f.verify().unwrap_err();
        assert!(e.reason.contains("r9"));
    }

    #[test]
    fn verify_rejects_fallthrough_off_end() {
        let f = ret_fn(vec![Op::LdaConst { idx: 0 }], 0);
        assert!(f.verify().is_err());
    }
}
