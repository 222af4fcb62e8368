//! Baseline execution tracer.
//!
//! A single linear pass dispatches over bytecodes to per-op handlers that
//! execute the program *and* emit machine-level micro-ops describing that
//! execution. Before each handler runs, the dispatcher emits a
//! `VerifyFrameSize`/`VerifyFeedbackVector` pair tagged `Verification`;
//! [`extract_function_instr`] later filters those out, leaving only the
//! ops that carry the control and data flow of the run.
//!
//! Micro-op operand model (shared contract with the lifter): the machine
//! has an accumulator, four scratch slots, per-frame register and
//! parameter banks, and the byte memory of [`memory::TraceMemory`].
//! Value-producing ops name their slots with [`Ref`] pairs; string
//! handlers bracket their byte-level work with `StrOpBegin`/`StrOpEnd`
//! and pin data-dependent choices (bounds checks, scan comparisons,
//! length unrolling) with `BranchTaken`/`BranchNotTaken` guards so that
//! replays under different inputs are either faithful or detectably
//! divergent.

pub mod machine;
pub mod memory;
mod text;

pub use machine::{baseline_trace, TraceError, TraceOptions, TraceRun};
pub use text::{dump_trace, load_trace};

use crate::interp::OutcomeKind;
use crate::value::Value;
use serde::{Deserialize, Serialize};

/// Micro-op kinds. `tag` below distinguishes the verification scaffolding
/// from ops that carry the program's control and data flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MicroOpKind {
    LoadReg,
    StoreReg,
    LoadConst,
    LoadImm,
    ArithAdd,
    ArithSub,
    ArithMul,
    ArithDiv,
    ArithMod,
    CmpEq,
    CmpLt,
    CmpLe,
    BranchTaken,
    BranchNotTaken,
    MemRead8,
    MemWrite8,
    StrOpBegin,
    StrOpEnd,
    CallBegin,
    CallEnd,
    Ret,
    ThrowOp,
    SymbolicPin,
    VerifyFrameSize,
    VerifyFeedbackVector,
}

impl MicroOpKind {
    pub fn name(self) -> &'static str {
        match self {
            MicroOpKind::LoadReg => "LoadReg",
            MicroOpKind::StoreReg => "StoreReg",
            MicroOpKind::LoadConst => "LoadConst",
            MicroOpKind::LoadImm => "LoadImm",
            MicroOpKind::ArithAdd => "ArithAdd",
            MicroOpKind::ArithSub => "ArithSub",
            MicroOpKind::ArithMul => "ArithMul",
            MicroOpKind::ArithDiv => "ArithDiv",
            MicroOpKind::ArithMod => "ArithMod",
            MicroOpKind::CmpEq => "CmpEq",
            MicroOpKind::CmpLt => "CmpLt",
            MicroOpKind::CmpLe => "CmpLe",
            MicroOpKind::BranchTaken => "BranchTaken",
            MicroOpKind::BranchNotTaken => "BranchNotTaken",
            MicroOpKind::MemRead8 => "MemRead8",
            MicroOpKind::MemWrite8 => "MemWrite8",
            MicroOpKind::StrOpBegin => "StrOpBegin",
            MicroOpKind::StrOpEnd => "StrOpEnd",
            MicroOpKind::CallBegin => "CallBegin",
            MicroOpKind::CallEnd => "CallEnd",
            MicroOpKind::Ret => "Ret",
            MicroOpKind::ThrowOp => "ThrowOp",
            MicroOpKind::SymbolicPin => "SymbolicPin",
            MicroOpKind::VerifyFrameSize => "VerifyFrameSize",
            MicroOpKind::VerifyFeedbackVector => "VerifyFeedbackVector",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        use MicroOpKind::*;
        Some(match name {
            "LoadReg" => LoadReg,
            "StoreReg" => StoreReg,
            "LoadConst" => LoadConst,
            "LoadImm" => LoadImm,
            "ArithAdd" => ArithAdd,
            "ArithSub" => ArithSub,
            "ArithMul" => ArithMul,
            "ArithDiv" => ArithDiv,
            "ArithMod" => ArithMod,
            "CmpEq" => CmpEq,
            "CmpLt" => CmpLt,
            "CmpLe" => CmpLe,
            "BranchTaken" => BranchTaken,
            "BranchNotTaken" => BranchNotTaken,
            "MemRead8" => MemRead8,
            "MemWrite8" => MemWrite8,
            "StrOpBegin" => StrOpBegin,
            "StrOpEnd" => StrOpEnd,
            "CallBegin" => CallBegin,
            "CallEnd" => CallEnd,
            "Ret" => Ret,
            "ThrowOp" => ThrowOp,
            "SymbolicPin" => SymbolicPin,
            "VerifyFrameSize" => VerifyFrameSize,
            "VerifyFeedbackVector" => VerifyFeedbackVector,
            _ => return None,
        })
    }

    /// Verification scaffolding vs. control-flow payload.
    pub fn tag(self) -> Tag {
        match self {
            MicroOpKind::VerifyFrameSize | MicroOpKind::VerifyFeedbackVector => Tag::Verification,
            _ => Tag::ControlFlow,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tag {
    ControlFlow,
    Verification,
}

impl Tag {
    pub fn token(self) -> &'static str {
        match self {
            Tag::ControlFlow => "C",
            Tag::Verification => "V",
        }
    }
}

/// Machine slot reference, encoded as a (space, value) integer pair in
/// micro-op operand lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ref {
    Acc,
    Scr(u8),
    Imm(i64),
    Frame(u16),
    Param(u16),
}

impl Ref {
    pub fn encode(self) -> [i64; 2] {
        match self {
            Ref::Acc => [0, 0],
            Ref::Scr(i) => [1, i as i64],
            Ref::Imm(v) => [2, v],
            Ref::Frame(r) => [3, r as i64],
            Ref::Param(p) => [4, p as i64],
        }
    }

    pub fn decode(space: i64, v: i64) -> Option<Ref> {
        Some(match space {
            0 => Ref::Acc,
            1 => Ref::Scr(u8::try_from(v).ok()?),
            2 => Ref::Imm(v),
            3 => Ref::Frame(u16::try_from(v).ok()?),
            4 => Ref::Param(u16::try_from(v).ok()?),
            _ => return None,
        })
    }
}

/// String-op codes carried by `StrOpBegin`.
pub mod strop {
    pub const LEN: i64 = 0;
    pub const CHAR_AT: i64 = 1;
    pub const CHAR_CODE: i64 = 2;
    pub const INDEX_OF: i64 = 3;
    pub const SUBSTRING: i64 = 4;
    pub const CONCAT: i64 = 5;
    pub const EQ: i64 = 6;
    pub const LESS: i64 = 7;
    pub const LESS_EQ: i64 = 8;
    pub const MATERIALIZE: i64 = 9;
}

/// Result codes carried by `StrOpEnd`.
pub mod strres {
    pub const INT: i64 = 0;
    pub const STR: i64 = 1;
    pub const BOOL: i64 = 2;
    pub const NONE: i64 = 3;
}

/// Constant/immediate tags in `LoadConst`/`LoadImm`.
pub mod valtag {
    pub const INT: i64 = 0;
    pub const STR: i64 = 1;
    pub const BOOL: i64 = 2;
    pub const NULL: i64 = 3;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicroOp {
    pub kind: MicroOpKind,
    pub operands: Vec<i64>,
    pub origin_pc: u32,
    pub tag: Tag,
}

impl MicroOp {
    pub fn new(kind: MicroOpKind, origin_pc: u32, operands: Vec<i64>) -> Self {
        MicroOp { kind, operands, origin_pc, tag: kind.tag() }
    }
}

/// A symbolic input: which argument it is and where its bytes live.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolDecl {
    pub id: u32,
    pub name: String,
    pub base: u64,
    pub len: usize,
    pub param_index: usize,
}

/// The linear record of one concrete run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MicroTrace {
    pub ops: Vec<MicroOp>,
    pub function_name: String,
    pub input_snapshot: Vec<Value>,
    pub symbol_table: Vec<SymbolDecl>,
    pub outcome: OutcomeKind,
}

impl MicroTrace {
    /// The dispatch sequence as (bytecode pc, opcode ordinal) pairs, read
    /// off the per-dispatch verification preamble. Only meaningful on a
    /// raw (unextracted) trace.
    pub fn dispatch_sequence(&self) -> Vec<(u32, u8)> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.ops.len() {
            if self.ops[i].kind == MicroOpKind::VerifyFrameSize {
                let pc = self.ops[i].origin_pc;
                let ordinal = self
                    .ops
                    .get(i + 1)
                    .filter(|op| op.kind == MicroOpKind::VerifyFeedbackVector)
                    .and_then(|op| op.operands.first())
                    .map(|&v| v as u8)
                    .unwrap_or(u8::MAX);
                out.push((pc, ordinal));
                i += 2;
            } else {
                i += 1;
            }
        }
        out
    }

    /// Number of contiguous same-`origin_pc` op groups; the trace file's
    /// visible "regions".
    pub fn group_count(&self) -> usize {
        let mut count = 0;
        let mut last: Option<u32> = None;
        for op in &self.ops {
            if last != Some(op.origin_pc) {
                count += 1;
                last = Some(op.origin_pc);
            }
        }
        count
    }
}

/// Keep exactly the `ControlFlow`-tagged ops, in order. Everything else
/// about the trace is unchanged. Idempotent.
pub fn extract_function_instr(trace: &MicroTrace) -> MicroTrace {
    MicroTrace {
        ops: trace.ops.iter().filter(|op| op.tag == Tag::ControlFlow).cloned().collect(),
        function_name: trace.function_name.clone(),
        input_snapshot: trace.input_snapshot.clone(),
        symbol_table: trace.symbol_table.clone(),
        outcome: trace.outcome.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytecode::compile_program;
    use crate::frontend::parse_text;

    fn trace_of(text: &str, func: &str, args: &[Value], sym: &[usize]) -> MicroTrace {
        let program = compile_program(&parse_text(text).unwrap()).unwrap();
        baseline_trace(program.get(func).unwrap(), args, sym, &program, &TraceOptions::default())
            .unwrap()
            .trace
    }

    #[test]
    fn two_bytecode_function_emits_verify_pairs() {
        let t = trace_of("function f(){return 1;}", "f", &[], &[]);
        let kinds: Vec<MicroOpKind> = t.ops.iter().map(|o| o.kind).collect();
        assert_eq!(
            kinds,
            vec![
                MicroOpKind::VerifyFrameSize,
                MicroOpKind::VerifyFeedbackVector,
                MicroOpKind::LoadConst,
                MicroOpKind::VerifyFrameSize,
                MicroOpKind::VerifyFeedbackVector,
                MicroOpKind::Ret,
            ]
        );
        assert_eq!(t.outcome, OutcomeKind::Returned(Value::Int(1)));
    }

    #[test]
    fn extraction_keeps_exactly_control_flow_ops() {
        let t = trace_of("function f(){return 1;}", "f", &[], &[]);
        let e = extract_function_instr(&t);
        let kinds: Vec<MicroOpKind> = e.ops.iter().map(|o| o.kind).collect();
        assert_eq!(kinds, vec![MicroOpKind::LoadConst, MicroOpKind::Ret]);
        assert_eq!(e.group_count(), 2);
        // idempotent
        assert_eq!(extract_function_instr(&e), e);
    }

    #[test]
    fn extraction_counting_balances() {
        let t = trace_of(
            "function f(s){var n=0; for(var i=0;i<s.length;i=i+1){n=n+1;} return n;}",
            "f",
            &[Value::str_from("abc")],
            &[0],
        );
        let e = extract_function_instr(&t);
        let verification = t.ops.iter().filter(|o| o.tag == Tag::Verification).count();
        assert_eq!(e.ops.len() + verification, t.ops.len());
        assert!(e.ops.iter().all(|o| o.tag == Tag::ControlFlow));
    }

    #[test]
    fn symbolic_param_pins_once_with_length() {
        let t = trace_of("function f(s){return s.length;}", "f", &[Value::str_from("ab")], &[0]);
        let pins: Vec<&MicroOp> =
            t.ops.iter().filter(|o| o.kind == MicroOpKind::SymbolicPin).collect();
        assert_eq!(pins.len(), 1);
        assert_eq!(pins[0].operands[2], 2, "pin carries the concrete length");
        assert_eq!(t.symbol_table.len(), 1);
        assert_eq!(t.symbol_table[0].len, 2);
        assert_eq!(t.outcome, OutcomeKind::Returned(Value::Int(2)));
    }
}
