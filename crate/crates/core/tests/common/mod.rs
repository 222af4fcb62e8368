//! Shared test support: an independent AST-walking evaluator (the
//! semantic oracle the bytecode pipeline is checked against), corpus
//! loading, and deterministic input generation.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparktrace_core::bytecode::{compile_program, CompiledProgram};
use sparktrace_core::frontend::ast::*;
use sparktrace_core::frontend::parse_text;
use sparktrace_core::semantics::msg;
use sparktrace_core::util::Span;
use sparktrace_core::value::{Value, MAX_STRING_LEN};
use std::collections::BTreeMap;
use std::path::PathBuf;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn corpus_sources() -> Vec<(String, String)> {
    let mut files: Vec<_> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|x| x == "mjs-mini").unwrap_or(false))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&p).expect("readable corpus file"))
        })
        .collect()
}

pub fn compile_text(text: &str) -> CompiledProgram {
    compile_program(&parse_text(text).expect("parseable")).expect("compilable")
}

/// Random argument strings: biased toward the branch-relevant `a..d`
/// range with some general printable bytes mixed in. Deterministic.
pub fn random_string_args(rng: &mut ChaCha8Rng, count: usize) -> Vec<Value> {
    (0..count)
        .map(|_| {
            let len = rng.gen_range(0..=8);
            let bytes = (0..len)
                .map(|_| {
                    if rng.gen_bool(0.7) {
                        b'a' + rng.gen_range(0..4)
                    } else {
                        rng.gen_range(0x20..0x7f)
                    }
                })
                .collect();
            Value::Str(bytes)
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------
// AST-walking oracle
// ---------------------------------------------------------------------

/// Outcome produced by the oracle; mirrors the interpreter's outcome
/// shape so the two can be compared directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleOutcome {
    Returned(Value),
    Handled { message: String, catch_span: Span },
    Unhandled { message: String, span: Span },
}

struct Thrown {
    message: String,
    span: Span,
}

enum Flow {
    Normal,
    Return(Value),
}

struct Oracle<'a> {
    program: &'a Program,
    first_handled: Option<(String, Span)>,
    steps: u64,
    depth: usize,
}

/// Evaluate `function(args)` by walking the AST directly. Fully
/// independent of the bytecode compiler, interpreter, and tracer; only
/// the error-message table is shared, since identical text is part of
/// the semantics under test.
pub fn oracle_eval(program: &Program, function: &str, args: &[Value]) -> OracleOutcome {
    let mut o = Oracle { program, first_handled: None, steps: 0, depth: 0 };
    let decl = program.function(function).expect("oracle target exists");
    match o.call(decl, args, Span::none()) {
        Ok(value) => match o.first_handled {
            Some((message, catch_span)) => OracleOutcome::Handled { message, catch_span },
            None => OracleOutcome::Returned(value),
        },
        Err(t) => OracleOutcome::Unhandled { message: t.message, span: t.span },
    }
}

type EvalResult<T> = Result<T, Thrown>;

impl<'a> Oracle<'a> {
    fn tick(&mut self, span: Span) -> EvalResult<()> {
        self.steps += 1;
        assert!(self.steps < 5_000_000, "oracle step budget exceeded at {span}");
        Ok(())
    }

    fn call(&mut self, decl: &FunctionDecl, args: &[Value], call_span: Span) -> EvalResult<Value> {
        if self.depth >= 200 {
            return Err(Thrown { message: msg::call_depth(), span: call_span });
        }
        self.depth += 1;
        let mut vars: BTreeMap<String, Value> = BTreeMap::new();
        for (i, p) in decl.params.iter().enumerate() {
            vars.insert(p.name.clone(), args.get(i).cloned().unwrap_or(Value::Null));
        }
        let flow = self.block(&decl.body, &mut vars)?;
        self.depth -= 1;
        Ok(match flow {
            Flow::Return(v) => v,
            Flow::Normal => Value::Null,
        })
    }

    fn block(&mut self, stmts: &[Stmt], vars: &mut BTreeMap<String, Value>) -> EvalResult<Flow> {
        for s in stmts {
            if let Flow::Return(v) = self.stmt(s, vars)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, s: &Stmt, vars: &mut BTreeMap<String, Value>) -> EvalResult<Flow> {
        self.tick(s.span)?;
        match &s.kind {
            StmtKind::VarDecl(name, e) | StmtKind::Assign(name, e) => {
                let v = self.expr(e, vars, s.span)?;
                vars.insert(name.clone(), v);
                Ok(Flow::Normal)
            }
            StmtKind::ExprStmt(e) => {
                self.expr(e, vars, s.span)?;
                Ok(Flow::Normal)
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.expr(e, vars, s.span)?,
                    None => Value::Null,
                };
                Ok(Flow::Return(v))
            }
            StmtKind::Throw(e) => {
                let v = self.expr(e, vars, s.span)?;
                match v {
                    Value::Str(m) => Err(Thrown {
                        message: String::from_utf8_lossy(&m).into_owned(),
                        span: s.span,
                    }),
                    _ => Err(Thrown { message: msg::throw_non_string(), span: s.span }),
                }
            }
            StmtKind::If(cond, then, els) => {
                if self.expr(cond, vars, s.span)?.truthy() {
                    self.block(then, vars)
                } else if let Some(els) = els {
                    self.block(els, vars)
                } else {
                    Ok(Flow::Normal)
                }
            }
            StmtKind::While(cond, body) => {
                loop {
                    self.tick(s.span)?;
                    if !self.expr(cond, vars, s.span)?.truthy() {
                        break;
                    }
                    if let Flow::Return(v) = self.block(body, vars)? {
                        return Ok(Flow::Return(v));
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::For(init, cond, step, body) => {
                if let Some(init) = init {
                    if let Flow::Return(v) = self.stmt(init, vars)? {
                        return Ok(Flow::Return(v));
                    }
                }
                loop {
                    self.tick(s.span)?;
                    if let Some(cond) = cond {
                        if !self.expr(cond, vars, s.span)?.truthy() {
                            break;
                        }
                    }
                    if let Flow::Return(v) = self.block(body, vars)? {
                        return Ok(Flow::Return(v));
                    }
                    if let Some(step) = step {
                        if let Flow::Return(v) = self.stmt(step, vars)? {
                            return Ok(Flow::Return(v));
                        }
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::TryCatch(try_block, name, catch_block, catch_span) => {
                match self.block(try_block, vars) {
                    Ok(flow) => Ok(flow),
                    Err(thrown) => {
                        if self.first_handled.is_none() {
                            self.first_handled = Some((thrown.message.clone(), *catch_span));
                        }
                        vars.insert(name.clone(), Value::Str(thrown.message.into_bytes()));
                        self.block(catch_block, vars)
                    }
                }
            }
        }
    }

    fn expr(
        &mut self,
        e: &Expr,
        vars: &mut BTreeMap<String, Value>,
        stmt_span: Span,
    ) -> EvalResult<Value> {
        let throw = |message: String| Thrown { message, span: stmt_span };
        match &e.kind {
            ExprKind::Literal(lit) => Ok(match lit {
                Lit::Int(n) => Value::Int(*n),
                Lit::Str(s) => Value::Str(s.clone()),
                Lit::Bool(b) => Value::Bool(*b),
                Lit::Null => Value::Null,
            }),
            ExprKind::Identifier(name) => {
                Ok(vars.get(name).cloned().expect("oracle: resolved identifier"))
            }
            ExprKind::Unary(op, inner) => {
                let v = self.expr(inner, vars, stmt_span)?;
                match op {
                    UnOp::Not => Ok(Value::Bool(!v.truthy())),
                    UnOp::Neg => match v {
                        Value::Int(n) => Ok(Value::Int(n.wrapping_neg())),
                        other => Err(throw(msg::bad_neg(other.type_name()))),
                    },
                }
            }
            ExprKind::Binary(BinOp::And, l, r) => {
                let lv = self.expr(l, vars, stmt_span)?;
                if !lv.truthy() {
                    return Ok(lv);
                }
                self.expr(r, vars, stmt_span)
            }
            ExprKind::Binary(BinOp::Or, l, r) => {
                let lv = self.expr(l, vars, stmt_span)?;
                if lv.truthy() {
                    return Ok(lv);
                }
                self.expr(r, vars, stmt_span)
            }
            ExprKind::Binary(op, l, r) => {
                let lv = self.expr(l, vars, stmt_span)?;
                let rv = self.expr(r, vars, stmt_span)?;
                self.binary(*op, lv, rv, stmt_span)
            }
            ExprKind::Call(name, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.expr(a, vars, stmt_span)?);
                }
                let decl = self.program.function(name).expect("oracle: resolved call");
                self.call(decl, &vals, stmt_span)
            }
            ExprKind::MethodCall(obj, name, args) => {
                let ov = self.expr(obj, vars, stmt_span)?;
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.expr(a, vars, stmt_span)?);
                }
                self.member(ov, name, &vals, stmt_span)
            }
            ExprKind::Index(obj, idx) => {
                let ov = self.expr(obj, vars, stmt_span)?;
                let iv = self.expr(idx, vars, stmt_span)?;
                self.member(ov, "charAt", &[iv], stmt_span)
            }
        }
    }

    fn binary(&mut self, op: BinOp, l: Value, r: Value, span: Span) -> EvalResult<Value> {
        let throw = |message: String| Thrown { message, span };
        let ints = |name: &str| -> EvalResult<(i64, i64)> {
            match (&l, &r) {
                (Value::Int(a), Value::Int(b)) => Ok((*a, *b)),
                _ => Err(throw(msg::bad_arith(name, l.type_name(), r.type_name()))),
            }
        };
        match op {
            BinOp::Add => match (&l, &r) {
                (Value::Int(a), Value::Int(b)) => Ok(Value::Int(a.wrapping_add(*b))),
                (Value::Str(a), Value::Str(b)) => {
                    if a.len() + b.len() > MAX_STRING_LEN {
                        return Err(throw(msg::string_too_long()));
                    }
                    let mut s = a.clone();
                    s.extend_from_slice(b);
                    Ok(Value::Str(s))
                }
                _ => Err(throw(msg::bad_add(l.type_name(), r.type_name()))),
            },
            BinOp::Sub => ints("sub").map(|(a, b)| Value::Int(a.wrapping_sub(b))),
            BinOp::Mul => ints("mul").map(|(a, b)| Value::Int(a.wrapping_mul(b))),
            BinOp::Div => {
                let (a, b) = ints("div")?;
                if b == 0 {
                    return Err(throw(msg::div_zero()));
                }
                Ok(Value::Int(a.wrapping_div(b)))
            }
            BinOp::Mod => {
                let (a, b) = ints("mod")?;
                if b == 0 {
                    return Err(throw(msg::mod_zero()));
                }
                Ok(Value::Int(a.wrapping_rem(b)))
            }
            BinOp::Eq | BinOp::Ne => {
                let eq = match (&l, &r) {
                    (Value::Int(a), Value::Int(b)) => a == b,
                    (Value::Str(a), Value::Str(b)) => a == b,
                    (Value::Bool(a), Value::Bool(b)) => a == b,
                    (Value::Null, Value::Null) => true,
                    _ => false,
                };
                Ok(Value::Bool(if op == BinOp::Eq { eq } else { !eq }))
            }
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                // a > b evaluates as b < a, mirroring left-to-right
                // evaluation with a swapped comparison.
                let (x, y, or_eq) = match op {
                    BinOp::Lt => (&l, &r, false),
                    BinOp::Le => (&l, &r, true),
                    BinOp::Gt => (&r, &l, false),
                    _ => (&r, &l, true),
                };
                match (x, y) {
                    (Value::Int(a), Value::Int(b)) => {
                        Ok(Value::Bool(if or_eq { a <= b } else { a < b }))
                    }
                    (Value::Str(a), Value::Str(b)) => {
                        Ok(Value::Bool(if or_eq { a <= b } else { a < b }))
                    }
                    _ => Err(throw(msg::bad_compare(x.type_name(), y.type_name()))),
                }
            }
            BinOp::And | BinOp::Or => unreachable!("short-circuit handled by caller"),
        }
    }

    fn member(&mut self, obj: Value, name: &str, args: &[Value], span: Span) -> EvalResult<Value> {
        let throw = |message: String| Thrown { message, span };
        let s = match obj {
            Value::Str(s) => s,
            Value::Null => return Err(throw(msg::null_member())),
            other => return Err(throw(msg::member_on(name, other.type_name()))),
        };
        let int_arg = |i: usize| -> EvalResult<i64> {
            match args.get(i) {
                Some(Value::Int(n)) => Ok(*n),
                _ => Err(Thrown { message: msg::index_not_int(name), span }),
            }
        };
        let str_arg = |i: usize| -> EvalResult<Vec<u8>> {
            match args.get(i) {
                Some(Value::Str(s)) => Ok(s.clone()),
                _ => Err(Thrown { message: msg::arg_not_string(name), span }),
            }
        };
        match name {
            "length" => Ok(Value::Int(s.len() as i64)),
            "charAt" => {
                let i = int_arg(0)?;
                Ok(Value::Str(if i >= 0 && (i as usize) < s.len() {
                    vec![s[i as usize]]
                } else {
                    vec![]
                }))
            }
            "charCodeAt" => {
                let i = int_arg(0)?;
                Ok(Value::Int(if i >= 0 && (i as usize) < s.len() {
                    s[i as usize] as i64
                } else {
                    -1
                }))
            }
            "indexOf" => {
                let needle = str_arg(0)?;
                if needle.is_empty() {
                    return Ok(Value::Int(0));
                }
                if needle.len() > s.len() {
                    return Ok(Value::Int(-1));
                }
                for start in 0..=(s.len() - needle.len()) {
                    if s[start..start + needle.len()] == needle[..] {
                        return Ok(Value::Int(start as i64));
                    }
                }
                Ok(Value::Int(-1))
            }
            "substring" => {
                let a = int_arg(0)?;
                let b = int_arg(1)?;
                let clamp = |x: i64| -> usize { x.clamp(0, s.len() as i64) as usize };
                let (mut lo, mut hi) = (clamp(a), clamp(b));
                if lo > hi {
                    std::mem::swap(&mut lo, &mut hi);
                }
                Ok(Value::Str(s[lo..hi].to_vec()))
            }
            "concat" => {
                let other = str_arg(0)?;
                if s.len() + other.len() > MAX_STRING_LEN {
                    return Err(throw(msg::string_too_long()));
                }
                let mut out = s;
                out.extend_from_slice(&other);
                Ok(Value::Str(out))
            }
            other => unreachable!("oracle: unknown member {other}"),
        }
    }
}

// ---------------------------------------------------------------------
// Construct matrix and pipeline helpers
// ---------------------------------------------------------------------

use sparktrace_core::concolic::{
    negate_and_solve, Bindings, PathCondition, PcEntry, SolveOutcome, SolverConfig, SymExpr,
};
use sparktrace_core::concolic::expr::{
    cint, mk_add, mk_and, mk_eq, mk_le, mk_lt, mk_not, mk_or, mk_sub, ExprRef,
};
use sparktrace_core::lifter::{build_entry, lift, IrModule};
use sparktrace_core::tracer::memory::arg_region_base;
use sparktrace_core::tracer::{
    baseline_trace, extract_function_instr, MicroTrace, SymbolDecl, TraceOptions,
};
use std::rc::Rc;

/// The validation matrix: each entry is (name, program, function, args).
/// String parameters are symbolized.
pub fn construct_matrix() -> Vec<(&'static str, &'static str, &'static str, Vec<Value>)> {
    vec![
        (
            "arith",
            "function f(s){var n = s.length; return (n + 12) * 3 - n / 2;}",
            "f",
            vec![Value::str_from("abcde")],
        ),
        (
            "mod-and-neg",
            "function f(s){var n = s.length; return -(n % 3) + (-n);}",
            "f",
            vec![Value::str_from("abcd")],
        ),
        (
            "comparison-chain",
            "function f(s){var n = s.length; if (n < 9) { if (n <= 4) { if (4 <= n) { return n >= 2; } } } return false;}",
            "f",
            vec![Value::str_from("abcd")],
        ),
        (
            "boolean-ops",
            "function f(s){return (s.length > 1 && s.charAt(0) == \"a\") || !(s.length == 2);}",
            "f",
            vec![Value::str_from("ab")],
        ),
        ("if", "function f(s){if (s.length == 3) { return 1; } return 0;}", "f", vec![Value::str_from("abc")]),
        (
            "if-else",
            "function f(s){if (s.length < 2) { return \"short\"; } else { return \"long\"; }}",
            "f",
            vec![Value::str_from("x")],
        ),
        (
            "nested-if",
            "function f(s){if (s.length > 0) { if (s.charAt(0) == \"a\") { return 2; } return 1; } return 0;}",
            "f",
            vec![Value::str_from("ab")],
        ),
        (
            "while",
            "function f(s){var n = 0; while (n < s.length) { n = n + 2; } return n;}",
            "f",
            vec![Value::str_from("abcde")],
        ),
        (
            "for",
            "function f(s){var n = 0; for (var i = 0; i < s.length; i = i + 1) { n = n + i; } return n;}",
            "f",
            vec![Value::str_from("abcd")],
        ),
        (
            "nested-loop",
            "function f(s){var n = 0; for (var i = 0; i < s.length; i = i + 1) { var j = 0; while (j < i) { n = n + 1; j = j + 1; } } return n;}",
            "f",
            vec![Value::str_from("abc")],
        ),
        (
            "loop-early-exit",
            "function f(s){for (var i = 0; i < s.length; i = i + 1) { if (s.charAt(i) == \"b\") { return i; } } return -1;}",
            "f",
            vec![Value::str_from("aaba")],
        ),
        ("string-length", "function f(s){return s.length;}", "f", vec![Value::str_from("abc")]),
        (
            "char-access",
            "function f(s){return s.charAt(1).concat(s.charAt(9)).length + s.charCodeAt(0) + s.charCodeAt(17);}",
            "f",
            vec![Value::str_from("abc")],
        ),
        (
            "index-of",
            "function f(s){return s.indexOf(\"bc\") + s.indexOf(\"zz\");}",
            "f",
            vec![Value::str_from("abcd")],
        ),
        (
            "substring",
            "function f(s){return s.substring(1, 3).concat(s.substring(9, 0));}",
            "f",
            vec![Value::str_from("abcde")],
        ),
        (
            "concat",
            "function f(s, t){return s.concat(t).concat(\"!\");}",
            "f",
            vec![Value::str_from("ab"), Value::str_from("cd")],
        ),
    ]
}

pub fn trace_and_lift(
    text: &str,
    func: &str,
    args: &[Value],
) -> (MicroTrace, IrModule, Bindings) {
    let program = compile_text(text);
    let symbolic: Vec<usize> = args
        .iter()
        .enumerate()
        .filter(|(_, a)| matches!(a, Value::Str(_)))
        .map(|(i, _)| i)
        .collect();
    let run = baseline_trace(
        program.get(func).unwrap(),
        args,
        &symbolic,
        &program,
        &TraceOptions::default(),
    )
    .expect("traceable");
    let extracted = extract_function_instr(&run.trace);
    let module = build_entry(lift(&extracted).expect("liftable"));
    let bindings: Bindings = extracted
        .symbol_table
        .iter()
        .map(|s| match &extracted.input_snapshot[s.param_index] {
            Value::Str(b) => (s.id, b.clone()),
            _ => unreachable!(),
        })
        .collect();
    (extracted, module, bindings)
}


// -------------------------------------------------------------------
// Independent constraint evaluation (the oracle side)
// -------------------------------------------------------------------

pub fn oracle_eval_int(e: &SymExpr, b: &Bindings) -> i64 {
    match e {
        SymExpr::SymByte { sym, offset } => {
            let bytes = b.get(sym).map(|v| v.as_slice()).unwrap_or(&[]);
            if *offset < bytes.len() {
                bytes[*offset] as i64
            } else {
                0
            }
        }
        SymExpr::LenOf(sym) => b.get(sym).map(|v| v.len() as i64).unwrap_or(0),
        SymExpr::ConstInt(v) => *v,
        SymExpr::ConstBool(x) => *x as i64,
        SymExpr::Add(x, y) => oracle_eval_int(x, b).wrapping_add(oracle_eval_int(y, b)),
        SymExpr::Sub(x, y) => oracle_eval_int(x, b).wrapping_sub(oracle_eval_int(y, b)),
        SymExpr::Mul(x, y) => oracle_eval_int(x, b).wrapping_mul(oracle_eval_int(y, b)),
        SymExpr::Div(x, y) => {
            let d = oracle_eval_int(y, b);
            if d == 0 {
                0
            } else {
                oracle_eval_int(x, b).wrapping_div(d)
            }
        }
        SymExpr::Mod(x, y) => {
            let d = oracle_eval_int(y, b);
            if d == 0 {
                0
            } else {
                oracle_eval_int(x, b).wrapping_rem(d)
            }
        }
        SymExpr::Eq(x, y) => (oracle_eval_int(x, b) == oracle_eval_int(y, b)) as i64,
        SymExpr::Lt(x, y) => (oracle_eval_int(x, b) < oracle_eval_int(y, b)) as i64,
        SymExpr::Le(x, y) => (oracle_eval_int(x, b) <= oracle_eval_int(y, b)) as i64,
        SymExpr::Not(x) => (oracle_eval_int(x, b) == 0) as i64,
        SymExpr::And(x, y) => (oracle_eval_int(x, b) != 0 && oracle_eval_int(y, b) != 0) as i64,
        SymExpr::Or(x, y) => (oracle_eval_int(x, b) != 0 || oracle_eval_int(y, b) != 0) as i64,
    }
}

pub fn oracle_satisfies(constraints: &[(ExprRef, bool)], b: &Bindings) -> bool {
    constraints.iter().all(|(e, want)| (oracle_eval_int(e, b) != 0) == *want)
}

/// Every candidate bindings vector over `alphabet` with per-symbol
/// lengths up to `max_len`.
pub fn enumerate_candidates(symbols: &[u32], alphabet: &[u8], max_len: usize) -> Vec<Bindings> {
    let mut per_symbol: Vec<Vec<Vec<u8>>> = Vec::new();
    for _ in symbols {
        let mut strings: Vec<Vec<u8>> = vec![vec![]];
        let mut all = vec![vec![]];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for s in &strings {
                for &c in alphabet {
                    let mut t = s.clone();
                    t.push(c);
                    next.push(t);
                }
            }
            all.extend(next.iter().cloned());
            strings = next;
        }
        per_symbol.push(all);
    }
    let mut out: Vec<Bindings> = vec![Bindings::new()];
    for (i, &sym) in symbols.iter().enumerate() {
        let mut next = Vec::new();
        for partial in &out {
            for s in &per_symbol[i] {
                let mut b = partial.clone();
                b.insert(sym, s.clone());
                next.push(b);
            }
        }
        out = next;
    }
    out
}

pub fn decls(n: usize) -> Vec<SymbolDecl> {
    (0..n)
        .map(|i| SymbolDecl {
            id: i as u32,
            name: format!("arg{i}"),
            base: arg_region_base(i),
            len: 1,
            param_index: i,
        })
        .collect()
}

// -------------------------------------------------------------------
// Random path-condition generation
// -------------------------------------------------------------------

pub fn random_int_expr(rng: &mut ChaCha8Rng, symbols: usize, max_len: usize, depth: usize) -> ExprRef {
    if depth == 0 || rng.gen_bool(0.45) {
        return match rng.gen_range(0..3) {
            0 => Rc::new(SymExpr::SymByte {
                sym: rng.gen_range(0..symbols) as u32,
                offset: rng.gen_range(0..max_len),
            }),
            1 => Rc::new(SymExpr::LenOf(rng.gen_range(0..symbols) as u32)),
            _ => cint(rng.gen_range(-3..120)),
        };
    }
    let a = random_int_expr(rng, symbols, max_len, depth - 1);
    let b = random_int_expr(rng, symbols, max_len, depth - 1);
    match rng.gen_range(0..3) {
        0 => mk_add(a, b),
        1 => mk_sub(a, b),
        _ => mk_add(a, cint(rng.gen_range(0..4))),
    }
}

pub fn random_bool_expr(rng: &mut ChaCha8Rng, symbols: usize, max_len: usize) -> ExprRef {
    let a = random_int_expr(rng, symbols, max_len, 2);
    let b = random_int_expr(rng, symbols, max_len, 2);
    let cmp = match rng.gen_range(0..3) {
        0 => mk_eq(a, b),
        1 => mk_lt(a, b),
        _ => mk_le(a, b),
    };
    match rng.gen_range(0..4) {
        0 => mk_not(cmp),
        1 => mk_and(cmp, random_simple_cmp(rng, symbols, max_len)),
        2 => mk_or(cmp, random_simple_cmp(rng, symbols, max_len)),
        _ => cmp,
    }
}

pub fn random_simple_cmp(rng: &mut ChaCha8Rng, symbols: usize, max_len: usize) -> ExprRef {
    let a = random_int_expr(rng, symbols, max_len, 1);
    let b = cint(rng.gen_range(0..105));
    if rng.gen_bool(0.5) {
        mk_eq(a, b)
    } else {
        mk_lt(a, b)
    }
}

pub fn random_path_condition(
    rng: &mut ChaCha8Rng,
    symbols: usize,
    max_len: usize,
    entries: usize,
) -> PathCondition {
    (0..entries)
        .map(|i| PcEntry {
            expr: random_bool_expr(rng, symbols, max_len),
            taken: rng.gen_bool(0.5),
            origin_pc: i as u32,
        })
        .collect()
}


pub fn check_against_oracle(
    pc: &PathCondition,
    k: usize,
    n_symbols: usize,
    alphabet: &[u8],
    max_len: usize,
    label: &str,
) {
    let cfg = SolverConfig { max_len, alphabet: alphabet.to_vec(), budget: 5_000_000 };
    let seed: Bindings = (0..n_symbols as u32).map(|s| (s, vec![alphabet[0]])).collect();
    let got = negate_and_solve(pc, k, &decls(n_symbols), &seed, &cfg);

    let mut constraints: Vec<(ExprRef, bool)> =
        pc[..k].iter().map(|e| (e.expr.clone(), e.taken)).collect();
    constraints.push((pc[k].expr.clone(), !pc[k].taken));
    let symbols: Vec<u32> = (0..n_symbols as u32).collect();
    let sat_set: Vec<Bindings> = enumerate_candidates(&symbols, alphabet, max_len)
        .into_iter()
        .filter(|b| oracle_satisfies(&constraints, b))
        .collect();

    match got {
        SolveOutcome::Sat(model) => {
            assert!(
                !sat_set.is_empty(),
                "{label}: solver said sat, oracle found no candidate; constraints: {}",
                describe(&constraints)
            );
            assert!(
                oracle_satisfies(&constraints, &model),
                "{label}: solver witness {model:?} rejected by oracle; constraints: {}",
                describe(&constraints)
            );
        }
        SolveOutcome::Unsat => {
            assert!(
                sat_set.is_empty(),
                "{label}: solver said unsat, oracle found {} candidates, e.g. {:?}; constraints: {}",
                sat_set.len(),
                sat_set.first(),
                describe(&constraints)
            );
        }
        SolveOutcome::Unknown => {
            panic!("{label}: budget exhausted on an oracle-sized instance")
        }
    }
}

pub fn describe(constraints: &[(ExprRef, bool)]) -> String {
    constraints
        .iter()
        .map(|(e, w)| format!("({e})={w}"))
        .collect::<Vec<_>>()
        .join(" && ")
}


// ---------------------------------------------------------------------
// Random program generation (proptest strategies)
// ---------------------------------------------------------------------

use proptest::prelude::*;


pub fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9]{0,5}".prop_filter("keyword collision", |s| {
        !matches!(
            s.as_str(),
            "function"
                | "export"
                | "var"
                | "if"
                | "else"
                | "while"
                | "for"
                | "return"
                | "throw"
                | "try"
                | "catch"
                | "true"
                | "false"
                | "null"
        )
    })
}

pub fn literal() -> impl Strategy<Value = String> {
    prop_oneof![
        (0i64..1000).prop_map(|n| n.to_string()),
        Just("true".to_string()),
        Just("false".to_string()),
        Just("null".to_string()),
        "[a-d ]{0,6}".prop_map(|s| format!("\"{s}\"")),
    ]
}

pub fn expr(vars: Vec<String>) -> BoxedStrategy<String> {
    let leaf = prop_oneof![
        literal(),
        proptest::sample::select(vars),
    ]
    .boxed();
    leaf.prop_recursive(3, 24, 3, move |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), proptest::sample::select(vec![
                "+", "-", "*", "/", "%", "==", "!=", "<", "<=", ">", ">=", "&&", "||"
            ]))
                .prop_map(|(a, b, op)| format!("({a} {op} {b})")),
            inner.clone().prop_map(|a| format!("(!{a})")),
            inner.clone().prop_map(|a| format!("(-{a})")),
            inner.clone().prop_map(|a| format!("{a}.length")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}.charAt({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}.indexOf({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}.concat({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a}[{b}]")),
        ]
        .boxed()
    })
    .boxed()
}

pub fn stmt(vars: Vec<String>, depth: u32) -> BoxedStrategy<String> {
    let e = expr(vars.clone());
    let simple = prop_oneof![
        e.clone().prop_map(|x| format!("return {x};")),
        e.clone().prop_map(|x| format!("{x};")),
        (proptest::sample::select(vars.clone()), e.clone())
            .prop_map(|(v, x)| format!("{v} = {x};")),
        e.clone().prop_map(|x| format!("throw {x};")),
    ]
    .boxed();
    if depth == 0 {
        return simple;
    }
    let inner = stmt(vars.clone(), depth - 1);
    prop_oneof![
        simple,
        (e.clone(), inner.clone()).prop_map(|(c, b)| format!("if ({c}) {{ {b} }}")),
        (e.clone(), inner.clone(), inner.clone())
            .prop_map(|(c, t, f)| format!("if ({c}) {{ {t} }} else {{ {f} }}")),
        (e.clone(), inner.clone()).prop_map(|(c, b)| format!("while ({c}) {{ {b} }}")),
        (inner.clone(), inner.clone())
            .prop_map(|(t, c)| format!("try {{ {t} }} catch (err) {{ {c} }}")),
    ]
    .boxed()
}

pub fn program() -> impl Strategy<Value = String> {
    (ident(), proptest::collection::vec(stmt(vec!["p0".to_string(), "p1".to_string()], 2), 1..4))
        .prop_map(|(name, stmts)| {
            format!("export function {name}(p0, p1) {{\n  {}\n}}\n", stmts.join("\n  "))
        })
}

