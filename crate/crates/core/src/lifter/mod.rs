//! Trace-to-IR lifter.
//!
//! Consumes an extracted micro-op trace directly (there is no intermediate
//! dialect) and produces a self-contained SSA module: straight-line blocks
//! chained by fall-through, split at calls and branches, with memory and
//! symbolic intrinsics deferred to the evaluator. A traced branch becomes
//! an [`InstrKind::AssertPathTaken`] over the branch condition's value id;
//! the ordered list of those assertions encodes the path the trace took,
//! and replaying the module under different symbol bindings reports which
//! assertions still hold.

mod eval;
mod lift;
mod text;

pub use eval::{eval_ir, EvalError, ReplayOutcome};
pub use lift::{lift, LiftError};
pub use text::{dump_ir, load_ir, IrParseError};

use crate::tracer::memory::Region;
use crate::tracer::SymbolDecl;
use std::collections::BTreeMap;

pub type ValueId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstrKind {
    Const(i64),
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    CmpEq,
    CmpLt,
    CmpLe,
    Not,
    Select,
    /// operands: [addr] — read one byte of modeled memory.
    ReadMem8,
    /// operands: [addr, src].
    WriteMem8,
    /// Bind a symbol's bytes into its region; the result value is the
    /// symbol's (possibly rebound) length.
    MakeSymbolic(u32),
    /// operands: [cond]; asserts truthiness(cond) == expected.
    AssertPathTaken { expected: bool, origin_pc: u32, target_pc: u32 },
    /// operands: [msg_base, msg_len] — records an error/exception site.
    LogError,
}

impl InstrKind {
    pub fn name(&self) -> &'static str {
        match self {
            InstrKind::Const(_) => "Const",
            InstrKind::Add => "Add",
            InstrKind::Sub => "Sub",
            InstrKind::Mul => "Mul",
            InstrKind::Div => "Div",
            InstrKind::Mod => "Mod",
            InstrKind::CmpEq => "CmpEq",
            InstrKind::CmpLt => "CmpLt",
            InstrKind::CmpLe => "CmpLe",
            InstrKind::Not => "Not",
            InstrKind::Select => "Select",
            InstrKind::ReadMem8 => "ReadMem8",
            InstrKind::WriteMem8 => "WriteMem8",
            InstrKind::MakeSymbolic(_) => "MakeSymbolic",
            InstrKind::AssertPathTaken { .. } => "AssertPathTaken",
            InstrKind::LogError => "LogError",
        }
    }
}

/// One SSA instruction. Every instruction assigns `result`, including the
/// effect-only kinds, which keeps the textual format uniform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrInstr {
    pub result: ValueId,
    pub kind: InstrKind,
    pub operands: Vec<ValueId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaltKind {
    Returned,
    Handled,
    Unhandled,
}

impl HaltKind {
    pub fn token(self) -> &'static str {
        match self {
            HaltKind::Returned => "returned",
            HaltKind::Handled => "handled",
            HaltKind::Unhandled => "unhandled",
        }
    }
}

/// What the module's value (or exception message) is at halt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaltPayload {
    Null,
    Int(ValueId),
    Bool(ValueId),
    /// (base, len) value ids of a string in modeled memory.
    Str(ValueId, ValueId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Terminator {
    FallThrough(String),
    Halt { kind: HaltKind, payload: HaltPayload },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrBlock {
    pub label: String,
    pub instrs: Vec<IrInstr>,
    pub terminator: Terminator,
}

/// Initial contents of modeled memory: region metadata plus the bytes
/// known before execution (concrete string arguments). Everything else is
/// written by the module itself or bound via `MakeSymbolic`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MemoryImage {
    pub regions: Vec<Region>,
    pub bytes: BTreeMap<u64, u8>,
}

/// The record of one traced path's branch condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathAssertion {
    pub value_id: ValueId,
    pub expected: bool,
    pub origin_pc: u32,
    pub branch_target_pc: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrModule {
    pub entry: String,
    pub blocks: Vec<IrBlock>,
    pub symbol_decls: Vec<SymbolDecl>,
    pub memory: MemoryImage,
}

pub const ENTRY_LABEL: &str = "entry";

impl IrModule {
    pub fn block(&self, label: &str) -> Option<&IrBlock> {
        self.blocks.iter().find(|b| b.label == label)
    }

    /// Blocks in execution order, following the fall-through chain from
    /// the entry.
    pub fn chain(&self) -> Vec<&IrBlock> {
        let mut out = Vec::new();
        let mut label = Some(self.entry.as_str());
        while let Some(l) = label {
            let Some(b) = self.block(l) else { break };
            out.push(b);
            label = match &b.terminator {
                Terminator::FallThrough(next) => Some(next.as_str()),
                Terminator::Halt { .. } => None,
            };
        }
        out
    }

    /// Path assertions in execution order.
    pub fn assertions(&self) -> Vec<PathAssertion> {
        let mut out = Vec::new();
        for b in self.chain() {
            for i in &b.instrs {
                if let InstrKind::AssertPathTaken { expected, origin_pc, target_pc } = i.kind {
                    out.push(PathAssertion {
                        value_id: i.operands[0],
                        expected,
                        origin_pc,
                        branch_target_pc: target_pc,
                    });
                }
            }
        }
        out
    }
}

/// Prepend the synthetic entry block: one `MakeSymbolic` per symbol (the
/// result ids are the reserved ids `0..n`), then fall through to the
/// lifted blocks in trace order. Idempotent.
pub fn build_entry(mut module: IrModule) -> IrModule {
    if module.block(ENTRY_LABEL).is_some() {
        return module;
    }
    let instrs = module
        .symbol_decls
        .iter()
        .map(|sym| IrInstr {
            result: sym.id as ValueId,
            kind: InstrKind::MakeSymbolic(sym.id),
            operands: vec![],
        })
        .collect();
    let first = module.entry.clone();
    module.blocks.insert(
        0,
        IrBlock {
            label: ENTRY_LABEL.to_string(),
            instrs,
            terminator: Terminator::FallThrough(first),
        },
    );
    module.entry = ENTRY_LABEL.to_string();
    module
}
