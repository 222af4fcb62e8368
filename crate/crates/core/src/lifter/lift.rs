//! Abstract re-execution of an extracted trace into SSA.
//!
//! The lifter walks micro-ops once, modeling the tracer's machine slots
//! (accumulator, scratch, per-frame register and parameter banks) as SSA
//! value ids plus string (base, length-id) pairs. Value ids `0..n` are
//! reserved for the `MakeSymbolic` results that `build_entry` later emits,
//! which is how symbolic string lengths flow into the instruction stream.

use super::{
    HaltKind, HaltPayload, InstrKind, IrBlock, IrInstr, IrModule, MemoryImage, Terminator, ValueId,
};
use crate::interp::OutcomeKind;
use crate::tracer::memory::{arg_region_base, Region, RegionClass, ARG_CAPACITY, EMPTY_BASE};
use crate::tracer::{strop, strres, valtag, MicroOpKind, MicroTrace, Ref, Tag};
use crate::value::Value;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("lift error at op {seq}: {reason}")]
pub struct LiftError {
    pub seq: usize,
    pub reason: String,
}

/// Abstract slot contents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Abs {
    Int(ValueId),
    Bool(ValueId),
    Null,
    Str { base: u64, len: ValueId },
}

struct AFrame {
    regs: Vec<Abs>,
    params: Vec<Abs>,
}

struct Lifter {
    next_vid: ValueId,
    const_cache: HashMap<i64, ValueId>,
    instrs: Vec<IrInstr>,
    blocks: Vec<IrBlock>,
    acc: Abs,
    scratch: [Abs; 4],
    frames: Vec<AFrame>,
    regions: HashMap<u64, usize>,
    image: MemoryImage,
    sym_vid: HashMap<u32, ValueId>,
    first_throw: Option<(u64, usize)>,
    last_throw: Option<(u64, usize)>,
    seq: usize,
}

pub fn lift(extracted: &MicroTrace) -> Result<IrModule, LiftError> {
    let mut l = Lifter {
        next_vid: extracted.symbol_table.len() as ValueId,
        const_cache: HashMap::new(),
        instrs: Vec::new(),
        blocks: Vec::new(),
        acc: Abs::Null,
        scratch: [Abs::Null; 4],
        frames: vec![AFrame { regs: Vec::new(), params: Vec::new() }],
        regions: HashMap::new(),
        image: MemoryImage::default(),
        sym_vid: extracted.symbol_table.iter().map(|s| (s.id, s.id as ValueId)).collect(),
        first_throw: None,
        last_throw: None,
        seq: 0,
    };
    l.add_region(Region { base: EMPTY_BASE, len: 0, class: RegionClass::StringData });

    // Install arguments: symbolic ones get their bytes from bindings at
    // evaluation time, concrete strings carry their bytes in the image.
    let symbolic_params: HashMap<usize, u32> =
        extracted.symbol_table.iter().map(|s| (s.param_index, s.id)).collect();
    for (i, arg) in extracted.input_snapshot.iter().enumerate() {
        let abs = match arg {
            Value::Int(n) => Abs::Int(l.const_vid(*n)),
            Value::Bool(b) => Abs::Bool(l.const_vid(*b as i64)),
            Value::Null => Abs::Null,
            Value::Str(s) => {
                let base = arg_region_base(i);
                l.add_region(Region { base, len: ARG_CAPACITY, class: RegionClass::StringData });
                if let Some(&sym) = symbolic_params.get(&i) {
                    Abs::Str { base, len: l.sym_vid[&sym] }
                } else {
                    for (k, &b) in s.iter().enumerate() {
                        l.image.bytes.insert(base + k as u64, b);
                    }
                    Abs::Str { base, len: l.const_vid(s.len() as i64) }
                }
            }
        };
        l.frames[0].params.push(abs);
    }

    for (seq, op) in extracted.ops.iter().enumerate() {
        l.seq = seq;
        if op.tag == Tag::Verification {
            return Err(l.err(format!("verification op {} in extracted trace", op.kind.name())));
        }
        l.step(op)?;
    }

    l.finish(&extracted.outcome, &extracted.symbol_table)
}

impl Lifter {
    fn err(&self, reason: String) -> LiftError {
        LiftError { seq: self.seq, reason }
    }

    fn fresh(&mut self) -> ValueId {
        let v = self.next_vid;
        self.next_vid += 1;
        v
    }

    fn push_instr(&mut self, kind: InstrKind, operands: Vec<ValueId>) -> ValueId {
        let result = self.fresh();
        self.instrs.push(IrInstr { result, kind, operands });
        result
    }

    fn const_vid(&mut self, v: i64) -> ValueId {
        if let Some(&id) = self.const_cache.get(&v) {
            return id;
        }
        let id = self.push_instr(InstrKind::Const(v), vec![]);
        self.const_cache.insert(v, id);
        id
    }

    fn add_region(&mut self, region: Region) {
        if let Some(&at) = self.regions.get(&region.base) {
            debug_assert_eq!(self.image.regions[at].len, region.len, "region redeclared");
            return;
        }
        self.regions.insert(region.base, self.image.regions.len());
        self.image.regions.push(region);
    }

    fn end_block(&mut self) {
        let label = format!("b{}", self.blocks.len());
        let next = format!("b{}", self.blocks.len() + 1);
        let instrs = std::mem::take(&mut self.instrs);
        self.blocks.push(IrBlock { label, instrs, terminator: Terminator::FallThrough(next) });
    }

    fn reg_slot(&mut self, bank: i64, idx: usize) -> Result<&mut Abs, LiftError> {
        let frame = self.frames.last_mut().expect("lifter frame");
        let slots = match bank {
            0 => &mut frame.regs,
            1 => &mut frame.params,
            _ => return Err(LiftError { seq: self.seq, reason: format!("bad bank {bank}") }),
        };
        if slots.len() <= idx {
            slots.resize(idx + 1, Abs::Null);
        }
        Ok(&mut slots[idx])
    }

    fn decode_ref(&self, operands: &[i64], at: usize) -> Result<Ref, LiftError> {
        let space = *operands.get(at).ok_or_else(|| self.err("missing ref".into()))?;
        let v = *operands.get(at + 1).ok_or_else(|| self.err("missing ref value".into()))?;
        Ref::decode(space, v).ok_or_else(|| self.err(format!("bad ref ({space},{v})")))
    }

    fn resolve(&mut self, r: Ref) -> Result<Abs, LiftError> {
        Ok(match r {
            Ref::Acc => self.acc,
            Ref::Scr(i) => self.scratch[i as usize],
            Ref::Imm(v) => Abs::Int(self.const_vid(v)),
            Ref::Frame(i) => *self.reg_slot(0, i as usize)?,
            Ref::Param(i) => *self.reg_slot(1, i as usize)?,
        })
    }

    fn int_vid(&self, abs: Abs) -> Result<ValueId, LiftError> {
        match abs {
            Abs::Int(v) | Abs::Bool(v) => Ok(v),
            other => Err(self.err(format!("expected integer slot, found {other:?}"))),
        }
    }

    fn str_pair(&self, abs: Abs) -> Result<(u64, ValueId), LiftError> {
        match abs {
            Abs::Str { base, len } => Ok((base, len)),
            other => Err(self.err(format!("expected string slot, found {other:?}"))),
        }
    }

    fn set(&mut self, r: Ref, abs: Abs) -> Result<(), LiftError> {
        match r {
            Ref::Acc => self.acc = abs,
            Ref::Scr(i) => self.scratch[i as usize] = abs,
            Ref::Frame(i) => *self.reg_slot(0, i as usize)? = abs,
            Ref::Param(i) => *self.reg_slot(1, i as usize)? = abs,
            Ref::Imm(_) => return Err(self.err("immediate as destination".into())),
        }
        Ok(())
    }

    /// Truthiness-relevant value id of a slot, for branch assertions.
    fn truth_vid(&mut self, abs: Abs) -> ValueId {
        match abs {
            Abs::Int(v) | Abs::Bool(v) => v,
            Abs::Str { len, .. } => len,
            Abs::Null => self.const_vid(0),
        }
    }

    fn step(&mut self, op: &crate::tracer::MicroOp) -> Result<(), LiftError> {
        use MicroOpKind as K;
        let o = &op.operands;
        let need = |n: usize| -> Result<(), LiftError> {
            if o.len() >= n {
                Ok(())
            } else {
                Err(LiftError {
                    seq: self.seq,
                    reason: format!("{} needs {n} operands, has {}", op.kind.name(), o.len()),
                })
            }
        };
        match op.kind {
            K::VerifyFrameSize | K::VerifyFeedbackVector => unreachable!("filtered earlier"),
            K::SymbolicPin => {
                need(4)?;
                let sym = o[0] as u32;
                let base = o[1] as u64;
                let param = o[3] as usize;
                let len = *self
                    .sym_vid
                    .get(&sym)
                    .ok_or_else(|| self.err(format!("pin references unknown symbol {sym}")))?;
                *self.reg_slot(1, param)? = Abs::Str { base, len };
            }
            K::LoadReg => {
                need(2)?;
                self.acc = *self.reg_slot(o[0], o[1] as usize)?;
            }
            K::StoreReg => {
                need(2)?;
                let acc = self.acc;
                *self.reg_slot(o[0], o[1] as usize)? = acc;
            }
            K::LoadConst | K::LoadImm => {
                let (dst, tag_at) = if op.kind == K::LoadConst {
                    (Ref::Acc, 0)
                } else {
                    (self.decode_ref(o, 0)?, 2)
                };
                let tag = *o.get(tag_at).ok_or_else(|| self.err("missing tag".into()))?;
                let abs = match tag {
                    t if t == valtag::INT => {
                        need(tag_at + 2)?;
                        Abs::Int(self.const_vid(o[tag_at + 1]))
                    }
                    t if t == valtag::BOOL => {
                        need(tag_at + 2)?;
                        Abs::Bool(self.const_vid(o[tag_at + 1]))
                    }
                    t if t == valtag::NULL => Abs::Null,
                    t if t == valtag::STR => {
                        need(tag_at + 3)?;
                        let base = o[tag_at + 1] as u64;
                        let len = o[tag_at + 2];
                        if !self.regions.contains_key(&base) {
                            return Err(self.err(format!("string constant at unmapped {base:#x}")));
                        }
                        Abs::Str { base, len: self.const_vid(len) }
                    }
                    t => return Err(self.err(format!("bad value tag {t}"))),
                };
                self.set(dst, abs)?;
            }
            K::ArithAdd | K::ArithSub | K::ArithMul | K::ArithDiv | K::ArithMod => {
                need(6)?;
                let dst = self.decode_ref(o, 0)?;
                let l = self.decode_ref(o, 2)?;
                let r = self.decode_ref(o, 4)?;
                let (la, ra) = (self.resolve(l)?, self.resolve(r)?);
                let (lv, rv) = (self.int_vid(la)?, self.int_vid(ra)?);
                let kind = match op.kind {
                    K::ArithAdd => InstrKind::Add,
                    K::ArithSub => InstrKind::Sub,
                    K::ArithMul => InstrKind::Mul,
                    K::ArithDiv => InstrKind::Div,
                    _ => InstrKind::Mod,
                };
                let v = self.push_instr(kind, vec![lv, rv]);
                self.set(dst, Abs::Int(v))?;
            }
            K::CmpEq | K::CmpLt | K::CmpLe => {
                need(6)?;
                let dst = self.decode_ref(o, 0)?;
                let l = self.decode_ref(o, 2)?;
                let r = self.decode_ref(o, 4)?;
                let (la, ra) = (self.resolve(l)?, self.resolve(r)?);
                let (lv, rv) = (self.int_vid(la)?, self.int_vid(ra)?);
                let kind = match op.kind {
                    K::CmpEq => InstrKind::CmpEq,
                    K::CmpLt => InstrKind::CmpLt,
                    _ => InstrKind::CmpLe,
                };
                let v = self.push_instr(kind, vec![lv, rv]);
                self.set(dst, Abs::Bool(v))?;
            }
            K::BranchTaken | K::BranchNotTaken => {
                need(5)?;
                let origin_pc = o[0] as u32;
                let target_pc = o[1] as u32;
                let cond = self.decode_ref(o, 2)?;
                let expected = o[4] != 0;
                let abs = self.resolve(cond)?;
                let vid = self.truth_vid(abs);
                self.push_instr(
                    InstrKind::AssertPathTaken { expected, origin_pc, target_pc },
                    vec![vid],
                );
                self.end_block();
            }
            K::MemRead8 => {
                need(4)?;
                let dst = self.decode_ref(o, 0)?;
                let addr = self.decode_ref(o, 2)?;
                let aa = self.resolve(addr)?;
                let av = self.int_vid(aa)?;
                let v = self.push_instr(InstrKind::ReadMem8, vec![av]);
                self.set(dst, Abs::Int(v))?;
            }
            K::MemWrite8 => {
                need(4)?;
                let src = self.decode_ref(o, 0)?;
                let addr = self.decode_ref(o, 2)?;
                let (sa, aa) = (self.resolve(src)?, self.resolve(addr)?);
                let (sv, av) = (self.int_vid(sa)?, self.int_vid(aa)?);
                self.push_instr(InstrKind::WriteMem8, vec![av, sv]);
            }
            K::StrOpBegin => {
                need(1)?;
                match o[0] {
                    c if c == strop::MATERIALIZE => {
                        need(3)?;
                        self.add_region(Region {
                            base: o[1] as u64,
                            len: o[2] as usize,
                            class: RegionClass::StringData,
                        });
                    }
                    c if c == strop::LEN => {
                        let s = self.decode_ref(o, 1)?;
                        let abs = self.resolve(s)?;
                        let (_, len) = self.str_pair(abs)?;
                        self.scratch[2] = Abs::Int(len);
                    }
                    c if c == strop::CHAR_AT
                        || c == strop::CHAR_CODE
                        || c == strop::SUBSTRING =>
                    {
                        let s = self.decode_ref(o, 1)?;
                        let abs = self.resolve(s)?;
                        let (_, len) = self.str_pair(abs)?;
                        self.scratch[2] = Abs::Int(len);
                    }
                    c if c == strop::INDEX_OF
                        || c == strop::CONCAT
                        || c == strop::EQ
                        || c == strop::LESS
                        || c == strop::LESS_EQ =>
                    {
                        let a = self.decode_ref(o, 1)?;
                        let b = self.decode_ref(o, 3)?;
                        let aa = self.resolve(a)?;
                        let ba = self.resolve(b)?;
                        let (_, alen) = self.str_pair(aa)?;
                        let (_, blen) = self.str_pair(ba)?;
                        self.scratch[2] = Abs::Int(alen);
                        self.scratch[3] = Abs::Int(blen);
                    }
                    c => return Err(self.err(format!("unknown string op code {c}"))),
                }
            }
            K::StrOpEnd => {
                need(1)?;
                match o[0] {
                    c if c == strres::INT => {
                        let r = self.decode_ref(o, 1)?;
                        let abs = self.resolve(r)?;
                        let v = self.int_vid(abs)?;
                        self.acc = Abs::Int(v);
                    }
                    c if c == strres::BOOL => {
                        let r = self.decode_ref(o, 1)?;
                        let abs = self.resolve(r)?;
                        let v = self.int_vid(abs)?;
                        self.acc = Abs::Bool(v);
                    }
                    c if c == strres::STR => {
                        need(5)?;
                        let base = o[1] as u64;
                        let concrete_len = o[2] as usize;
                        let len_ref = self.decode_ref(o, 3)?;
                        self.add_region(Region {
                            base,
                            len: concrete_len,
                            class: RegionClass::StringData,
                        });
                        let abs = self.resolve(len_ref)?;
                        let len = self.int_vid(abs)?;
                        self.acc = Abs::Str { base, len };
                    }
                    c if c == strres::NONE => {}
                    c => return Err(self.err(format!("unknown string result code {c}"))),
                }
            }
            K::CallBegin => {
                need(4)?;
                let argc = o[0] as usize;
                let arg_base = o[1] as usize;
                let callee_frame = o[2] as usize;
                let callee_params = o[3] as usize;
                let mut params = Vec::with_capacity(callee_params);
                for k in 0..argc.min(callee_params) {
                    params.push(*self.reg_slot(0, arg_base + k)?);
                }
                params.resize(callee_params, Abs::Null);
                self.frames.push(AFrame { regs: vec![Abs::Null; callee_frame], params });
                self.end_block();
            }
            K::CallEnd => {
                if self.frames.len() <= 1 {
                    return Err(self.err("unbalanced CallEnd".into()));
                }
                self.frames.pop();
                self.end_block();
            }
            K::Ret => {
                // The return value rides in the accumulator; the matching
                // CallEnd (if any) pops the frame.
            }
            K::ThrowOp => {
                need(2)?;
                let base = o[0] as u64;
                let len = o[1] as usize;
                if !self.regions.contains_key(&base) {
                    return Err(self.err(format!("throw message at unmapped {base:#x}")));
                }
                let bv = self.const_vid(base as i64);
                let lv = self.const_vid(len as i64);
                self.push_instr(InstrKind::LogError, vec![bv, lv]);
                let len_vid = self.const_vid(len as i64);
                self.acc = Abs::Str { base, len: len_vid };
                if self.first_throw.is_none() {
                    self.first_throw = Some((base, len));
                }
                self.last_throw = Some((base, len));
            }
        }
        Ok(())
    }

    fn finish(
        mut self,
        outcome: &OutcomeKind,
        symbol_table: &[crate::tracer::SymbolDecl],
    ) -> Result<IrModule, LiftError> {
        let payload = match outcome {
            OutcomeKind::Returned(v) => match (v, self.acc) {
                (Value::Int(_), Abs::Int(vid)) => HaltPayload::Int(vid),
                (Value::Bool(_), Abs::Bool(vid)) => HaltPayload::Bool(vid),
                (Value::Null, _) => HaltPayload::Null,
                (Value::Str(_), Abs::Str { base, len }) => {
                    let bv = self.const_vid(base as i64);
                    HaltPayload::Str(bv, len)
                }
                (v, acc) => {
                    return Err(self.err(format!(
                        "outcome {v:?} does not match lifted accumulator {acc:?}"
                    )))
                }
            },
            OutcomeKind::HandledException { .. } => {
                let (base, len) = self
                    .first_throw
                    .ok_or_else(|| self.err("handled outcome without a throw".into()))?;
                let bv = self.const_vid(base as i64);
                let lv = self.const_vid(len as i64);
                HaltPayload::Str(bv, lv)
            }
            OutcomeKind::UnhandledException { .. } => {
                let (base, len) = self
                    .last_throw
                    .ok_or_else(|| self.err("unhandled outcome without a throw".into()))?;
                let bv = self.const_vid(base as i64);
                let lv = self.const_vid(len as i64);
                HaltPayload::Str(bv, lv)
            }
        };
        let kind = match outcome {
            OutcomeKind::Returned(_) => HaltKind::Returned,
            OutcomeKind::HandledException { .. } => HaltKind::Handled,
            OutcomeKind::UnhandledException { .. } => HaltKind::Unhandled,
        };
        let label = format!("b{}", self.blocks.len());
        let instrs = std::mem::take(&mut self.instrs);
        self.blocks.push(IrBlock { label, instrs, terminator: Terminator::Halt { kind, payload } });

        Ok(IrModule {
            entry: "b0".to_string(),
            blocks: self.blocks,
            symbol_decls: symbol_table.to_vec(),
            memory: self.image,
        })
    }
}
