//! The tracing machine: one dispatch loop over bytecodes, switching to
//! per-op handlers that execute and emit micro-ops.
//!
//! Execution semantics must match [`crate::interp`] exactly; both tiers
//! call into [`crate::semantics`] for the value-level rules, and the
//! handlers here additionally narrate every step at machine granularity:
//! register moves, arithmetic over slots, byte loads and stores of string
//! memory, and branch guards for each data-dependent choice made along
//! the concrete run.

use super::memory::{arg_region_base, TraceMemory, ARG_CAPACITY, EMPTY_BASE};
use super::{strop, strres, valtag, MicroOp, MicroOpKind, MicroTrace, Ref, SymbolDecl};
use crate::bytecode::{BytecodeFunction, CompiledProgram, Const, Op};
use crate::interp::OutcomeKind;
use crate::semantics::{self, msg};
use crate::util::Span;
use crate::value::{Value, MAX_STRING_LEN};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TraceError {
    /// The run emitted more micro-ops than the configured cap; the input
    /// drives a runaway loop.
    #[error("trace exceeded {cap} micro-ops")]
    Overflow { cap: usize },
}

#[derive(Debug, Clone)]
pub struct TraceOptions {
    pub op_cap: usize,
    pub max_call_depth: usize,
    /// Snapshot the current frame's registers at every dispatch; the
    /// frame-mirroring probe used by differential tests.
    pub record_registers: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { op_cap: 1_000_000, max_call_depth: 200, record_registers: false }
    }
}

/// Trace plus optional debug channels.
#[derive(Debug, Clone)]
pub struct TraceRun {
    pub trace: MicroTrace,
    pub register_trace: Vec<Vec<Value>>,
}

/// Machine-level value: strings live in trace memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TVal {
    Int(i64),
    Bool(bool),
    Null,
    Str { base: u64, len: usize },
}

struct TFrame<'a> {
    func: &'a BytecodeFunction,
    regs: Vec<TVal>,
    params: Vec<TVal>,
    pc: usize,
    handlers: Vec<u32>,
    call_origin: u32,
}

impl<'a> TFrame<'a> {
    fn new(func: &'a BytecodeFunction, args: &[TVal], call_origin: u32) -> Self {
        let mut params = args.to_vec();
        params.resize(func.param_count as usize, TVal::Null);
        params.truncate(func.param_count as usize);
        TFrame {
            func,
            regs: vec![TVal::Null; func.frame_size as usize],
            params,
            pc: 0,
            handlers: Vec::new(),
            call_origin,
        }
    }
}

struct Machine<'a> {
    env: &'a CompiledProgram,
    mem: TraceMemory,
    ops: Vec<MicroOp>,
    scratch: [TVal; 4],
    acc: TVal,
    frames: Vec<TFrame<'a>>,
    first_handled: Option<(String, Span)>,
    opts: &'a TraceOptions,
    register_trace: Vec<Vec<Value>>,
}

/// What a handler asks the dispatch loop to do next.
enum Flow {
    Continue,
    Finished(OutcomeKind),
}

pub fn baseline_trace(
    func: &BytecodeFunction,
    args: &[Value],
    symbolic_params: &[usize],
    env: &CompiledProgram,
    opts: &TraceOptions,
) -> Result<TraceRun, TraceError> {
    let mut m = Machine {
        env,
        mem: TraceMemory::new(),
        ops: Vec::new(),
        scratch: [TVal::Null; 4],
        acc: TVal::Null,
        frames: Vec::new(),
        first_handled: None,
        opts,
        register_trace: Vec::new(),
    };

    // Materialize arguments. String arguments get fixed per-index regions
    // so the lifter can reconstruct their bytes from the input snapshot.
    let mut arg_vals = Vec::with_capacity(args.len());
    for (i, a) in args.iter().enumerate() {
        arg_vals.push(match a {
            Value::Int(n) => TVal::Int(*n),
            Value::Bool(b) => TVal::Bool(*b),
            Value::Null => TVal::Null,
            Value::Str(s) => {
                assert!(s.len() <= ARG_CAPACITY, "argument string exceeds region capacity");
                let base = m.mem.install_arg(i, s);
                TVal::Str { base, len: s.len() }
            }
        });
    }
    m.frames.push(TFrame::new(func, &arg_vals, 0));

    // Pin symbolic parameters before the first dispatch, immediately after
    // parameter materialization.
    let mut symbol_table = Vec::new();
    let mut pins: Vec<usize> = symbolic_params.to_vec();
    pins.sort_unstable();
    pins.dedup();
    for p in pins {
        if p >= func.param_count as usize {
            continue;
        }
        if let Some(TVal::Str { len, .. }) = m.frames[0].params.get(p).copied() {
            let id = symbol_table.len() as u32;
            let base = arg_region_base(p);
            symbol_table.push(SymbolDecl {
                id,
                name: format!("arg{p}"),
                base,
                len,
                param_index: p,
            });
            m.emit(
                MicroOpKind::SymbolicPin,
                0,
                vec![id as i64, base as i64, len as i64, p as i64],
            );
        }
    }

    let outcome = m.run()?;
    Ok(TraceRun {
        trace: MicroTrace {
            ops: m.ops,
            function_name: func.name.clone(),
            input_snapshot: args.to_vec(),
            symbol_table,
            outcome,
        },
        register_trace: m.register_trace,
    })
}

impl<'a> Machine<'a> {
    fn emit(&mut self, kind: MicroOpKind, origin_pc: u32, operands: Vec<i64>) {
        self.ops.push(MicroOp::new(kind, origin_pc, operands));
    }

    fn emit_ref(&mut self, kind: MicroOpKind, pc: u32, pre: &[i64], refs: &[Ref]) {
        let mut operands = pre.to_vec();
        for r in refs {
            operands.extend_from_slice(&r.encode());
        }
        self.emit(kind, pc, operands);
    }

    fn frame(&mut self) -> &mut TFrame<'a> {
        self.frames.last_mut().expect("machine has a frame while running")
    }

    fn get(&self, r: Ref) -> TVal {
        let frame = self.frames.last().expect("frame");
        match r {
            Ref::Acc => self.acc,
            Ref::Scr(i) => self.scratch[i as usize],
            Ref::Imm(v) => TVal::Int(v),
            Ref::Frame(i) => frame.regs[i as usize],
            Ref::Param(i) => frame.params[i as usize],
        }
    }

    fn to_value(&self, v: TVal) -> Value {
        match v {
            TVal::Int(n) => Value::Int(n),
            TVal::Bool(b) => Value::Bool(b),
            TVal::Null => Value::Null,
            TVal::Str { base, len } => {
                Value::Str(self.mem.read_bytes(base, len).expect("string region present"))
            }
        }
    }

    fn str_bytes(&self, base: u64, len: usize) -> Vec<u8> {
        self.mem.read_bytes(base, len).expect("string region present")
    }

    /// Intern a byte string, emitting materialization writes on first use.
    fn intern_string(&mut self, pc: u32, content: &[u8]) -> (u64, usize) {
        let (base, fresh) = self.mem.intern(content);
        if fresh {
            self.emit(
                MicroOpKind::StrOpBegin,
                pc,
                vec![strop::MATERIALIZE, base as i64, content.len() as i64],
            );
            for (k, &b) in content.iter().enumerate() {
                let addr = base + k as u64;
                self.emit_ref(
                    MicroOpKind::MemWrite8,
                    pc,
                    &[],
                    &[Ref::Imm(b as i64), Ref::Imm(addr as i64)],
                );
                self.mem.write8(addr, b);
            }
            self.emit(MicroOpKind::StrOpEnd, pc, vec![strres::NONE]);
        }
        (base, content.len())
    }

    /// Emit a branch guard: the lifter asserts that the condition in
    /// `cond` evaluates to `value` on every replay of this path.
    fn guard(&mut self, pc: u32, target: u32, cond: Ref, value: bool) {
        let kind = if value { MicroOpKind::BranchTaken } else { MicroOpKind::BranchNotTaken };
        self.emit_ref(kind, pc, &[pc as i64, target as i64], &[cond]);
        self.ops.last_mut().unwrap().operands.push(value as i64);
    }

    /// Throw a message whose bytes already live at `region`; unwinds to
    /// the nearest handler, emitting `CallEnd` for every abandoned frame.
    fn throw_region(&mut self, pc: u32, region: (u64, usize), message: String, span: Span) -> Flow {
        self.emit(MicroOpKind::ThrowOp, pc, vec![region.0 as i64, region.1 as i64]);
        while let Some(frame) = self.frames.last_mut() {
            if let Some(target) = frame.handlers.pop() {
                let catch_span = frame.func.statement_map[target as usize];
                if self.first_handled.is_none() {
                    self.first_handled = Some((message.clone(), catch_span));
                }
                frame.pc = target as usize;
                self.acc = TVal::Str { base: region.0, len: region.1 };
                return Flow::Continue;
            }
            let popped = self.frames.pop().expect("frame");
            if !self.frames.is_empty() {
                self.emit(MicroOpKind::CallEnd, popped.call_origin, vec![]);
            }
        }
        Flow::Finished(OutcomeKind::UnhandledException { message, span })
    }

    /// Throw a synthesized runtime error message: intern it, then unwind.
    fn throw_message(&mut self, pc: u32, message: String, span: Span) -> Flow {
        let region = self.intern_string(pc, message.as_bytes());
        self.throw_region(pc, region, message, span)
    }

    fn run(&mut self) -> Result<OutcomeKind, TraceError> {
        loop {
            if self.ops.len() > self.opts.op_cap {
                return Err(TraceError::Overflow { cap: self.opts.op_cap });
            }
            let frame = self.frames.last().expect("frame");
            let pc = frame.pc as u32;
            let op = frame.func.code[frame.pc];
            let span = frame.func.statement_map[frame.pc];
            let frame_size = frame.func.frame_size;
            if self.opts.record_registers {
                let regs: Vec<Value> = frame.regs.iter().map(|&v| self.to_value(v)).collect();
                self.register_trace.push(regs);
            }
            self.emit(MicroOpKind::VerifyFrameSize, pc, vec![frame_size as i64]);
            self.emit(MicroOpKind::VerifyFeedbackVector, pc, vec![op.ordinal() as i64]);
            self.frame().pc += 1;
            match self.dispatch(op, pc, span)? {
                Flow::Continue => {}
                Flow::Finished(outcome) => return Ok(outcome),
            }
        }
    }

    fn dispatch(&mut self, op: Op, pc: u32, span: Span) -> Result<Flow, TraceError> {
        match op {
            Op::LdaConst { idx } => {
                let c = self.frames.last().unwrap().func.constants[idx as usize].clone();
                match c {
                    Const::Int(n) => {
                        self.emit(MicroOpKind::LoadConst, pc, vec![valtag::INT, n]);
                        self.acc = TVal::Int(n);
                    }
                    Const::Bool(b) => {
                        self.emit(MicroOpKind::LoadConst, pc, vec![valtag::BOOL, b as i64]);
                        self.acc = TVal::Bool(b);
                    }
                    Const::Null => {
                        self.emit(MicroOpKind::LoadConst, pc, vec![valtag::NULL]);
                        self.acc = TVal::Null;
                    }
                    Const::Str(s) => {
                        let (base, len) = self.intern_string(pc, &s);
                        self.emit(
                            MicroOpKind::LoadConst,
                            pc,
                            vec![valtag::STR, base as i64, len as i64],
                        );
                        self.acc = TVal::Str { base, len };
                    }
                }
            }
            Op::LdaParam { idx } => {
                self.emit(MicroOpKind::LoadReg, pc, vec![1, idx as i64]);
                self.acc = self.frames.last().unwrap().params[idx as usize];
            }
            Op::Ldar { reg } => {
                self.emit(MicroOpKind::LoadReg, pc, vec![0, reg as i64]);
                self.acc = self.frames.last().unwrap().regs[reg as usize];
            }
            Op::Star { reg } => {
                self.emit(MicroOpKind::StoreReg, pc, vec![0, reg as i64]);
                let acc = self.acc;
                self.frame().regs[reg as usize] = acc;
            }
            Op::Add { reg } => {
                let l = self.get(Ref::Frame(reg));
                let r = self.acc;
                match (l, r) {
                    (TVal::Int(a), TVal::Int(b)) => {
                        self.emit_ref(
                            MicroOpKind::ArithAdd,
                            pc,
                            &[],
                            &[Ref::Acc, Ref::Frame(reg), Ref::Acc],
                        );
                        self.acc = TVal::Int(a.wrapping_add(b));
                    }
                    (TVal::Str { .. }, TVal::Str { .. }) => {
                        return self.concat(pc, span, Ref::Frame(reg));
                    }
                    _ => {
                        let m = msg::bad_add(type_name(l), type_name(r));
                        return Ok(self.throw_message(pc, m, span));
                    }
                }
            }
            Op::Sub { reg } | Op::Mul { reg } => {
                let l = self.get(Ref::Frame(reg));
                let r = self.acc;
                let (name, kind) = if matches!(op, Op::Sub { .. }) {
                    ("sub", MicroOpKind::ArithSub)
                } else {
                    ("mul", MicroOpKind::ArithMul)
                };
                match (l, r) {
                    (TVal::Int(a), TVal::Int(b)) => {
                        self.emit_ref(kind, pc, &[], &[Ref::Acc, Ref::Frame(reg), Ref::Acc]);
                        self.acc = TVal::Int(if name == "sub" {
                            a.wrapping_sub(b)
                        } else {
                            a.wrapping_mul(b)
                        });
                    }
                    _ => {
                        let m = msg::bad_arith(name, type_name(l), type_name(r));
                        return Ok(self.throw_message(pc, m, span));
                    }
                }
            }
            Op::Div { reg } | Op::Mod { reg } => {
                let l = self.get(Ref::Frame(reg));
                let r = self.acc;
                let is_div = matches!(op, Op::Div { .. });
                match (l, r) {
                    (TVal::Int(a), TVal::Int(b)) => {
                        // Divisor-zero check is data-dependent control flow:
                        // guard it so replays with a different divisor diverge
                        // detectably.
                        self.emit_ref(MicroOpKind::CmpEq, pc, &[], &[Ref::Scr(0), Ref::Acc, Ref::Imm(0)]);
                        self.scratch[0] = TVal::Bool(b == 0);
                        self.guard(pc, pc, Ref::Scr(0), b == 0);
                        if b == 0 {
                            let m = if is_div { msg::div_zero() } else { msg::mod_zero() };
                            return Ok(self.throw_message(pc, m, span));
                        }
                        let kind =
                            if is_div { MicroOpKind::ArithDiv } else { MicroOpKind::ArithMod };
                        self.emit_ref(kind, pc, &[], &[Ref::Acc, Ref::Frame(reg), Ref::Acc]);
                        self.acc = TVal::Int(if is_div {
                            a.wrapping_div(b)
                        } else {
                            a.wrapping_rem(b)
                        });
                    }
                    _ => {
                        let name = if is_div { "div" } else { "mod" };
                        let m = msg::bad_arith(name, type_name(l), type_name(r));
                        return Ok(self.throw_message(pc, m, span));
                    }
                }
            }
            Op::Neg => match self.acc {
                TVal::Int(n) => {
                    self.emit_ref(MicroOpKind::ArithSub, pc, &[], &[Ref::Acc, Ref::Imm(0), Ref::Acc]);
                    self.acc = TVal::Int(n.wrapping_neg());
                }
                other => {
                    let m = msg::bad_neg(type_name(other));
                    return Ok(self.throw_message(pc, m, span));
                }
            },
            Op::Not => match self.acc {
                TVal::Bool(b) => {
                    self.emit_ref(MicroOpKind::CmpEq, pc, &[], &[Ref::Acc, Ref::Acc, Ref::Imm(0)]);
                    self.acc = TVal::Bool(!b);
                }
                TVal::Int(n) => {
                    self.emit_ref(MicroOpKind::CmpEq, pc, &[], &[Ref::Acc, Ref::Acc, Ref::Imm(0)]);
                    self.acc = TVal::Bool(n == 0);
                }
                TVal::Str { len, .. } => {
                    self.emit_ref(MicroOpKind::StrOpBegin, pc, &[strop::LEN], &[Ref::Acc]);
                    self.scratch[2] = TVal::Int(len as i64);
                    self.emit_ref(MicroOpKind::StrOpEnd, pc, &[strres::INT], &[Ref::Scr(2)]);
                    self.acc = TVal::Int(len as i64);
                    self.emit_ref(MicroOpKind::CmpEq, pc, &[], &[Ref::Acc, Ref::Acc, Ref::Imm(0)]);
                    self.acc = TVal::Bool(len == 0);
                }
                TVal::Null => {
                    self.emit_ref(MicroOpKind::LoadImm, pc, &[], &[Ref::Acc]);
                    let opn = self.ops.last_mut().unwrap();
                    opn.operands.extend_from_slice(&[valtag::BOOL, 1]);
                    self.acc = TVal::Bool(true);
                }
            },
            Op::TestEqual { reg } => {
                let l = self.get(Ref::Frame(reg));
                let r = self.acc;
                match (l, r) {
                    (TVal::Int(a), TVal::Int(b)) => {
                        self.emit_ref(MicroOpKind::CmpEq, pc, &[], &[Ref::Acc, Ref::Frame(reg), Ref::Acc]);
                        self.acc = TVal::Bool(a == b);
                    }
                    (TVal::Bool(a), TVal::Bool(b)) => {
                        self.emit_ref(MicroOpKind::CmpEq, pc, &[], &[Ref::Acc, Ref::Frame(reg), Ref::Acc]);
                        self.acc = TVal::Bool(a == b);
                    }
                    (TVal::Null, TVal::Null) => {
                        self.load_imm_bool(pc, true);
                    }
                    (TVal::Str { base: b1, len: l1 }, TVal::Str { base: b2, len: l2 }) => {
                        self.string_equality(pc, Ref::Frame(reg), (b1, l1), (b2, l2));
                    }
                    _ => {
                        self.load_imm_bool(pc, false);
                    }
                }
            }
            Op::TestLess { reg } | Op::TestLessEq { reg } => {
                let or_eq = matches!(op, Op::TestLessEq { .. });
                let l = self.get(Ref::Frame(reg));
                let r = self.acc;
                match (l, r) {
                    (TVal::Int(a), TVal::Int(b)) => {
                        let kind = if or_eq { MicroOpKind::CmpLe } else { MicroOpKind::CmpLt };
                        self.emit_ref(kind, pc, &[], &[Ref::Acc, Ref::Frame(reg), Ref::Acc]);
                        self.acc = TVal::Bool(if or_eq { a <= b } else { a < b });
                    }
                    (TVal::Str { base: b1, len: l1 }, TVal::Str { base: b2, len: l2 }) => {
                        self.string_order(pc, Ref::Frame(reg), (b1, l1), (b2, l2), or_eq);
                    }
                    _ => {
                        let m = msg::bad_compare(type_name(l), type_name(r));
                        return Ok(self.throw_message(pc, m, span));
                    }
                }
            }
            Op::Jump { target } => {
                self.frame().pc = target as usize;
            }
            Op::JumpIfFalse { target } | Op::JumpIfTrue { target } => {
                let truthy = self.truthy_acc();
                let on_true = matches!(op, Op::JumpIfTrue { .. });
                let jumps = truthy == on_true;
                let kind =
                    if jumps { MicroOpKind::BranchTaken } else { MicroOpKind::BranchNotTaken };
                self.emit_ref(kind, pc, &[pc as i64, target as i64], &[Ref::Acc]);
                self.ops.last_mut().unwrap().operands.push(truthy as i64);
                if jumps {
                    self.frame().pc = target as usize;
                }
            }
            Op::StrLen => match self.acc {
                TVal::Str { len, .. } => {
                    self.emit_ref(MicroOpKind::StrOpBegin, pc, &[strop::LEN], &[Ref::Acc]);
                    self.scratch[2] = TVal::Int(len as i64);
                    self.emit_ref(MicroOpKind::StrOpEnd, pc, &[strres::INT], &[Ref::Scr(2)]);
                    self.acc = TVal::Int(len as i64);
                }
                TVal::Null => return Ok(self.throw_message(pc, msg::null_member(), span)),
                other => {
                    let m = msg::member_on("length", type_name(other));
                    return Ok(self.throw_message(pc, m, span));
                }
            },
            Op::StrCharAt { obj } | Op::StrCharCode { obj } => {
                let is_char_at = matches!(op, Op::StrCharAt { .. });
                let member = if is_char_at { "charAt" } else { "charCodeAt" };
                let (base, len) = match self.get(Ref::Frame(obj)) {
                    TVal::Str { base, len } => (base, len),
                    TVal::Null => return Ok(self.throw_message(pc, msg::null_member(), span)),
                    other => {
                        let m = msg::member_on(member, type_name(other));
                        return Ok(self.throw_message(pc, m, span));
                    }
                };
                let i = match self.acc {
                    TVal::Int(i) => i,
                    _ => return Ok(self.throw_message(pc, msg::index_not_int(member), span)),
                };
                let code = if is_char_at { strop::CHAR_AT } else { strop::CHAR_CODE };
                self.emit_ref(MicroOpKind::StrOpBegin, pc, &[code], &[Ref::Frame(obj), Ref::Acc]);
                self.scratch[2] = TVal::Int(len as i64);

                // Bounds guards mirror the short-circuit evaluation order.
                self.emit_ref(MicroOpKind::CmpLe, pc, &[], &[Ref::Scr(0), Ref::Imm(0), Ref::Acc]);
                let ge_zero = i >= 0;
                self.scratch[0] = TVal::Bool(ge_zero);
                self.guard(pc, pc, Ref::Scr(0), ge_zero);
                let mut in_range = false;
                if ge_zero {
                    self.emit_ref(MicroOpKind::CmpLt, pc, &[], &[Ref::Scr(0), Ref::Acc, Ref::Scr(2)]);
                    in_range = (i as usize) < len;
                    self.scratch[0] = TVal::Bool(in_range);
                    self.guard(pc, pc, Ref::Scr(0), in_range);
                }
                if in_range {
                    let addr = base.wrapping_add(i as u64);
                    self.emit_ref(
                        MicroOpKind::ArithAdd,
                        pc,
                        &[],
                        &[Ref::Scr(1), Ref::Imm(base as i64), Ref::Acc],
                    );
                    self.scratch[1] = TVal::Int(addr as i64);
                    let byte = self.mem.read8(addr).expect("guarded string read");
                    self.emit_ref(MicroOpKind::MemRead8, pc, &[], &[Ref::Scr(0), Ref::Scr(1)]);
                    self.scratch[0] = TVal::Int(byte as i64);
                    if is_char_at {
                        let out = self.mem.alloc(1);
                        self.emit_ref(
                            MicroOpKind::MemWrite8,
                            pc,
                            &[],
                            &[Ref::Scr(0), Ref::Imm(out as i64)],
                        );
                        self.mem.write8(out, byte);
                        self.emit_ref(
                            MicroOpKind::StrOpEnd,
                            pc,
                            &[strres::STR, out as i64, 1],
                            &[Ref::Imm(1)],
                        );
                        self.acc = TVal::Str { base: out, len: 1 };
                    } else {
                        self.emit_ref(MicroOpKind::StrOpEnd, pc, &[strres::INT], &[Ref::Scr(0)]);
                        self.acc = TVal::Int(byte as i64);
                    }
                } else if is_char_at {
                    self.emit_ref(
                        MicroOpKind::StrOpEnd,
                        pc,
                        &[strres::STR, EMPTY_BASE as i64, 0],
                        &[Ref::Imm(0)],
                    );
                    self.acc = TVal::Str { base: EMPTY_BASE, len: 0 };
                } else {
                    self.emit_ref(MicroOpKind::StrOpEnd, pc, &[strres::INT], &[Ref::Imm(-1)]);
                    self.acc = TVal::Int(-1);
                }
                debug_assert_eq!(
                    self.to_value(self.acc),
                    if is_char_at {
                        Value::Str(semantics::char_at(&self.str_bytes(base, len), i))
                    } else {
                        Value::Int(semantics::char_code_at(&self.str_bytes(base, len), i))
                    }
                );
            }
            Op::StrIndexOf { obj } => {
                let (hb, hl) = match self.get(Ref::Frame(obj)) {
                    TVal::Str { base, len } => (base, len),
                    TVal::Null => return Ok(self.throw_message(pc, msg::null_member(), span)),
                    other => {
                        let m = msg::member_on("indexOf", type_name(other));
                        return Ok(self.throw_message(pc, m, span));
                    }
                };
                let (nb, nl) = match self.acc {
                    TVal::Str { base, len } => (base, len),
                    _ => return Ok(self.throw_message(pc, msg::arg_not_string("indexOf"), span)),
                };
                self.emit_ref(
                    MicroOpKind::StrOpBegin,
                    pc,
                    &[strop::INDEX_OF],
                    &[Ref::Frame(obj), Ref::Acc],
                );
                self.scratch[2] = TVal::Int(hl as i64);
                self.scratch[3] = TVal::Int(nl as i64);
                self.pin_len(pc, Ref::Scr(2), hl);
                self.pin_len(pc, Ref::Scr(3), nl);

                // Unrolled scan: every byte comparison performed by the
                // concrete search becomes an asserted guard.
                let hay = self.str_bytes(hb, hl);
                let needle = self.str_bytes(nb, nl);
                let mut result: i64 = -1;
                if nl == 0 {
                    result = 0;
                } else if nl <= hl {
                    'scan: for start in 0..=(hl - nl) {
                        for k in 0..nl {
                            let ha = hb + (start + k) as u64;
                            let na = nb + k as u64;
                            self.emit_ref(
                                MicroOpKind::MemRead8,
                                pc,
                                &[],
                                &[Ref::Scr(0), Ref::Imm(ha as i64)],
                            );
                            self.scratch[0] = TVal::Int(hay[start + k] as i64);
                            self.emit_ref(
                                MicroOpKind::MemRead8,
                                pc,
                                &[],
                                &[Ref::Scr(1), Ref::Imm(na as i64)],
                            );
                            self.scratch[1] = TVal::Int(needle[k] as i64);
                            let eq = hay[start + k] == needle[k];
                            self.emit_ref(
                                MicroOpKind::CmpEq,
                                pc,
                                &[],
                                &[Ref::Scr(0), Ref::Scr(0), Ref::Scr(1)],
                            );
                            self.scratch[0] = TVal::Bool(eq);
                            self.guard(pc, pc, Ref::Scr(0), eq);
                            if !eq {
                                continue 'scan;
                            }
                        }
                        result = start as i64;
                        break;
                    }
                }
                debug_assert_eq!(result, semantics::index_of(&hay, &needle));
                self.emit_ref(MicroOpKind::StrOpEnd, pc, &[strres::INT], &[Ref::Imm(result)]);
                self.acc = TVal::Int(result);
            }
            Op::StrSubstring { obj, start } => {
                let (sb, sl) = match self.get(Ref::Frame(obj)) {
                    TVal::Str { base, len } => (base, len),
                    TVal::Null => return Ok(self.throw_message(pc, msg::null_member(), span)),
                    other => {
                        let m = msg::member_on("substring", type_name(other));
                        return Ok(self.throw_message(pc, m, span));
                    }
                };
                let a = match self.get(Ref::Frame(start)) {
                    TVal::Int(a) => a,
                    _ => return Ok(self.throw_message(pc, msg::index_not_int("substring"), span)),
                };
                let b = match self.acc {
                    TVal::Int(b) => b,
                    _ => return Ok(self.throw_message(pc, msg::index_not_int("substring"), span)),
                };
                self.emit_ref(
                    MicroOpKind::StrOpBegin,
                    pc,
                    &[strop::SUBSTRING],
                    &[Ref::Frame(obj), Ref::Frame(start)],
                );
                self.scratch[2] = TVal::Int(sl as i64);
                // Pin the length and both endpoints: the copy below is
                // unrolled against their concrete values.
                self.pin_len(pc, Ref::Scr(2), sl);
                self.pin_value(pc, Ref::Frame(start), a);
                self.pin_value(pc, Ref::Acc, b);

                let (lo, hi) = semantics::substring_bounds(sl, a, b);
                let n = hi - lo;
                let out = self.mem.alloc(n);
                let src = self.str_bytes(sb, sl);
                for k in 0..n {
                    let from = sb + (lo + k) as u64;
                    let to = out + k as u64;
                    self.emit_ref(MicroOpKind::MemRead8, pc, &[], &[Ref::Scr(0), Ref::Imm(from as i64)]);
                    self.scratch[0] = TVal::Int(src[lo + k] as i64);
                    self.emit_ref(MicroOpKind::MemWrite8, pc, &[], &[Ref::Scr(0), Ref::Imm(to as i64)]);
                    self.mem.write8(to, src[lo + k]);
                }
                self.emit_ref(
                    MicroOpKind::StrOpEnd,
                    pc,
                    &[strres::STR, out as i64, n as i64],
                    &[Ref::Imm(n as i64)],
                );
                self.acc = TVal::Str { base: out, len: n };
            }
            Op::StrConcat { obj } => {
                match (self.get(Ref::Frame(obj)), self.acc) {
                    (TVal::Str { .. }, TVal::Str { .. }) => {
                        return self.concat(pc, span, Ref::Frame(obj));
                    }
                    (TVal::Null, _) => return Ok(self.throw_message(pc, msg::null_member(), span)),
                    (TVal::Str { .. }, _) => {
                        return Ok(self.throw_message(pc, msg::arg_not_string("concat"), span))
                    }
                    (other, _) => {
                        let m = msg::member_on("concat", type_name(other));
                        return Ok(self.throw_message(pc, m, span));
                    }
                }
            }
            Op::CallFunc { name_idx, arg_base, argc } => {
                let name = match &self.frames.last().unwrap().func.constants[name_idx as usize] {
                    Const::Str(s) => String::from_utf8_lossy(s).into_owned(),
                    _ => unreachable!("verified call name"),
                };
                let Some(callee) = self.env.get(&name) else {
                    return Ok(self.throw_message(pc, msg::not_a_function(&name), span));
                };
                if self.frames.len() >= self.opts.max_call_depth {
                    return Ok(self.throw_message(pc, msg::call_depth(), span));
                }
                self.emit(
                    MicroOpKind::CallBegin,
                    pc,
                    vec![
                        argc as i64,
                        arg_base as i64,
                        callee.frame_size as i64,
                        callee.param_count as i64,
                    ],
                );
                let frame = self.frames.last().unwrap();
                let args: Vec<TVal> =
                    frame.regs[arg_base as usize..(arg_base + argc) as usize].to_vec();
                self.frames.push(TFrame::new(callee, &args, pc));
            }
            Op::Return => {
                self.emit(MicroOpKind::Ret, pc, vec![]);
                let popped = self.frames.pop().expect("frame");
                if self.frames.is_empty() {
                    let kind = match self.first_handled.take() {
                        Some((message, catch_span)) => {
                            OutcomeKind::HandledException { message, catch_span }
                        }
                        None => OutcomeKind::Returned(self.to_value(self.acc)),
                    };
                    return Ok(Flow::Finished(kind));
                }
                self.emit(MicroOpKind::CallEnd, popped.call_origin, vec![]);
            }
            Op::Throw => match self.acc {
                TVal::Str { base, len } => {
                    let message = String::from_utf8_lossy(&self.str_bytes(base, len)).into_owned();
                    return Ok(self.throw_region(pc, (base, len), message, span));
                }
                _ => return Ok(self.throw_message(pc, msg::throw_non_string(), span)),
            },
            Op::EnterTry { target } => self.frame().handlers.push(target),
            Op::LeaveTry => {
                self.frame().handlers.pop();
            }
            Op::PinSymbolic { param, sym } => {
                if let TVal::Str { base, len } =
                    self.frames.last().unwrap().params[param as usize]
                {
                    self.emit(
                        MicroOpKind::SymbolicPin,
                        pc,
                        vec![sym as i64, base as i64, len as i64, param as i64],
                    );
                }
            }
        }
        Ok(Flow::Continue)
    }

    fn truthy_acc(&self) -> bool {
        match self.acc {
            TVal::Int(n) => n != 0,
            TVal::Bool(b) => b,
            TVal::Null => false,
            TVal::Str { len, .. } => len > 0,
        }
    }

    fn load_imm_bool(&mut self, pc: u32, value: bool) {
        self.emit_ref(MicroOpKind::LoadImm, pc, &[], &[Ref::Acc]);
        self.ops.last_mut().unwrap().operands.extend_from_slice(&[valtag::BOOL, value as i64]);
        self.acc = TVal::Bool(value);
    }

    /// Assert that the length held in `slot` equals its concrete value.
    fn pin_len(&mut self, pc: u32, slot: Ref, len: usize) {
        self.emit_ref(MicroOpKind::CmpEq, pc, &[], &[Ref::Scr(0), slot, Ref::Imm(len as i64)]);
        self.scratch[0] = TVal::Bool(true);
        self.guard(pc, pc, Ref::Scr(0), true);
    }

    /// Assert that an integer slot equals its concrete value.
    fn pin_value(&mut self, pc: u32, slot: Ref, value: i64) {
        self.emit_ref(MicroOpKind::CmpEq, pc, &[], &[Ref::Scr(0), slot, Ref::Imm(value)]);
        self.scratch[0] = TVal::Bool(true);
        self.guard(pc, pc, Ref::Scr(0), true);
    }

    /// String concatenation: left operand in `obj_ref`, right in the
    /// accumulator. Shared by `Add` on strings and `StrConcat`.
    fn concat(&mut self, pc: u32, span: Span, obj_ref: Ref) -> Result<Flow, TraceError> {
        let (b1, l1) = match self.get(obj_ref) {
            TVal::Str { base, len } => (base, len),
            _ => unreachable!("concat callers check tags"),
        };
        let (b2, l2) = match self.acc {
            TVal::Str { base, len } => (base, len),
            _ => unreachable!("concat callers check tags"),
        };
        self.emit_ref(MicroOpKind::StrOpBegin, pc, &[strop::CONCAT], &[obj_ref, Ref::Acc]);
        self.scratch[2] = TVal::Int(l1 as i64);
        self.scratch[3] = TVal::Int(l2 as i64);
        self.pin_len(pc, Ref::Scr(2), l1);
        self.pin_len(pc, Ref::Scr(3), l2);
        if l1 + l2 > MAX_STRING_LEN {
            return Ok(self.throw_message(pc, msg::string_too_long(), span));
        }
        let out = self.mem.alloc(l1 + l2);
        let s1 = self.str_bytes(b1, l1);
        let s2 = self.str_bytes(b2, l2);
        for (k, &byte) in s1.iter().chain(s2.iter()).enumerate() {
            let from = if k < l1 { b1 + k as u64 } else { b2 + (k - l1) as u64 };
            let to = out + k as u64;
            self.emit_ref(MicroOpKind::MemRead8, pc, &[], &[Ref::Scr(0), Ref::Imm(from as i64)]);
            self.scratch[0] = TVal::Int(byte as i64);
            self.emit_ref(MicroOpKind::MemWrite8, pc, &[], &[Ref::Scr(0), Ref::Imm(to as i64)]);
            self.mem.write8(to, byte);
        }
        self.emit_ref(MicroOpKind::ArithAdd, pc, &[], &[Ref::Scr(2), Ref::Scr(2), Ref::Scr(3)]);
        self.scratch[2] = TVal::Int((l1 + l2) as i64);
        self.emit_ref(
            MicroOpKind::StrOpEnd,
            pc,
            &[strres::STR, out as i64, (l1 + l2) as i64],
            &[Ref::Scr(2)],
        );
        self.acc = TVal::Str { base: out, len: l1 + l2 };
        Ok(Flow::Continue)
    }

    /// Byte-wise `==` on strings. The length comparison and every byte
    /// comparison actually performed are asserted as guards, so the
    /// (concrete) boolean result is stable on every non-diverging replay.
    fn string_equality(&mut self, pc: u32, lref: Ref, l: (u64, usize), r: (u64, usize)) {
        let (b1, l1) = l;
        let (b2, l2) = r;
        self.emit_ref(MicroOpKind::StrOpBegin, pc, &[strop::EQ], &[lref, Ref::Acc]);
        self.scratch[2] = TVal::Int(l1 as i64);
        self.scratch[3] = TVal::Int(l2 as i64);
        self.emit_ref(MicroOpKind::CmpEq, pc, &[], &[Ref::Scr(0), Ref::Scr(2), Ref::Scr(3)]);
        let lens_eq = l1 == l2;
        self.scratch[0] = TVal::Bool(lens_eq);
        self.guard(pc, pc, Ref::Scr(0), lens_eq);
        let mut result = false;
        if lens_eq {
            self.pin_len(pc, Ref::Scr(2), l1);
            let s1 = self.str_bytes(b1, l1);
            let s2 = self.str_bytes(b2, l2);
            result = true;
            for k in 0..l1 {
                self.emit_ref(MicroOpKind::MemRead8, pc, &[], &[Ref::Scr(0), Ref::Imm((b1 + k as u64) as i64)]);
                self.scratch[0] = TVal::Int(s1[k] as i64);
                self.emit_ref(MicroOpKind::MemRead8, pc, &[], &[Ref::Scr(1), Ref::Imm((b2 + k as u64) as i64)]);
                self.scratch[1] = TVal::Int(s2[k] as i64);
                let eq = s1[k] == s2[k];
                self.emit_ref(MicroOpKind::CmpEq, pc, &[], &[Ref::Scr(0), Ref::Scr(0), Ref::Scr(1)]);
                self.scratch[0] = TVal::Bool(eq);
                self.guard(pc, pc, Ref::Scr(0), eq);
                if !eq {
                    result = false;
                    break;
                }
            }
        }
        self.emit_ref(MicroOpKind::StrOpEnd, pc, &[strres::BOOL], &[Ref::Imm(result as i64)]);
        self.acc = TVal::Bool(result);
    }

    /// Byte-lexicographic `<` / `<=` on strings, scan unrolled and
    /// asserted like equality.
    fn string_order(&mut self, pc: u32, lref: Ref, l: (u64, usize), r: (u64, usize), or_eq: bool) {
        let (b1, l1) = l;
        let (b2, l2) = r;
        let code = if or_eq { strop::LESS_EQ } else { strop::LESS };
        self.emit_ref(MicroOpKind::StrOpBegin, pc, &[code], &[lref, Ref::Acc]);
        self.scratch[2] = TVal::Int(l1 as i64);
        self.scratch[3] = TVal::Int(l2 as i64);
        self.pin_len(pc, Ref::Scr(2), l1);
        self.pin_len(pc, Ref::Scr(3), l2);
        let s1 = self.str_bytes(b1, l1);
        let s2 = self.str_bytes(b2, l2);
        let mut result = None;
        for k in 0..l1.min(l2) {
            self.emit_ref(MicroOpKind::MemRead8, pc, &[], &[Ref::Scr(0), Ref::Imm((b1 + k as u64) as i64)]);
            self.scratch[0] = TVal::Int(s1[k] as i64);
            self.emit_ref(MicroOpKind::MemRead8, pc, &[], &[Ref::Scr(1), Ref::Imm((b2 + k as u64) as i64)]);
            self.scratch[1] = TVal::Int(s2[k] as i64);
            let eq = s1[k] == s2[k];
            self.emit_ref(MicroOpKind::CmpEq, pc, &[], &[Ref::Scr(2), Ref::Scr(0), Ref::Scr(1)]);
            self.scratch[2] = TVal::Bool(eq);
            self.guard(pc, pc, Ref::Scr(2), eq);
            if !eq {
                let lt = s1[k] < s2[k];
                self.emit_ref(MicroOpKind::CmpLt, pc, &[], &[Ref::Scr(2), Ref::Scr(0), Ref::Scr(1)]);
                self.scratch[2] = TVal::Bool(lt);
                self.guard(pc, pc, Ref::Scr(2), lt);
                result = Some(lt);
                break;
            }
        }
        let result = result.unwrap_or(if or_eq { l1 <= l2 } else { l1 < l2 });
        debug_assert_eq!(result, if or_eq { s1 <= s2 } else { s1 < s2 });
        self.emit_ref(MicroOpKind::StrOpEnd, pc, &[strres::BOOL], &[Ref::Imm(result as i64)]);
        self.acc = TVal::Bool(result);
    }
}

fn type_name(v: TVal) -> &'static str {
    match v {
        TVal::Int(_) => "int",
        TVal::Bool(_) => "bool",
        TVal::Null => "null",
        TVal::Str { .. } => "string",
    }
}
