//! Symbolic expressions over string inputs.
//!
//! Two sorts share one enum: integer-valued nodes (byte reads, lengths,
//! arithmetic) and boolean-valued nodes (comparisons, connectives).
//! Construction through the `mk_*` helpers folds constants, so branch
//! conditions that never touch a symbol collapse to `ConstBool` and their
//! negations are immediately unsatisfiable.
//!
//! Byte semantics: `SymByte(s, i)` evaluates to the i-th byte of `s`'s
//! binding, or 0 when `i` is at or beyond the binding's length — the same
//! rule the IR evaluator applies to unwritten region bytes. Integer
//! arithmetic wraps at 64 bits; division and modulo by zero evaluate to 0
//! (guards in well-formed path conditions keep that case unreachable).

use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

pub type ExprRef = Rc<SymExpr>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SymExpr {
    SymByte { sym: u32, offset: usize },
    LenOf(u32),
    ConstInt(i64),
    ConstBool(bool),
    Add(ExprRef, ExprRef),
    Sub(ExprRef, ExprRef),
    Mul(ExprRef, ExprRef),
    Div(ExprRef, ExprRef),
    Mod(ExprRef, ExprRef),
    Eq(ExprRef, ExprRef),
    Lt(ExprRef, ExprRef),
    Le(ExprRef, ExprRef),
    Not(ExprRef),
    And(ExprRef, ExprRef),
    Or(ExprRef, ExprRef),
}

/// Concrete assignment: symbol id to bytes.
pub type Bindings = BTreeMap<u32, Vec<u8>>;

impl SymExpr {
    pub fn is_const(&self) -> bool {
        matches!(self, SymExpr::ConstInt(_) | SymExpr::ConstBool(_))
    }

    /// Integer value under `bindings` (booleans as 0/1).
    pub fn eval_int(&self, bindings: &Bindings) -> i64 {
        match self {
            SymExpr::SymByte { sym, offset } => bindings
                .get(sym)
                .and_then(|b| b.get(*offset))
                .copied()
                .unwrap_or(0) as i64,
            SymExpr::LenOf(sym) => bindings.get(sym).map(|b| b.len()).unwrap_or(0) as i64,
            SymExpr::ConstInt(v) => *v,
            SymExpr::ConstBool(b) => *b as i64,
            SymExpr::Add(a, b) => a.eval_int(bindings).wrapping_add(b.eval_int(bindings)),
            SymExpr::Sub(a, b) => a.eval_int(bindings).wrapping_sub(b.eval_int(bindings)),
            SymExpr::Mul(a, b) => a.eval_int(bindings).wrapping_mul(b.eval_int(bindings)),
            SymExpr::Div(a, b) => {
                let d = b.eval_int(bindings);
                if d == 0 {
                    0
                } else {
                    a.eval_int(bindings).wrapping_div(d)
                }
            }
            SymExpr::Mod(a, b) => {
                let d = b.eval_int(bindings);
                if d == 0 {
                    0
                } else {
                    a.eval_int(bindings).wrapping_rem(d)
                }
            }
            SymExpr::Eq(a, b) => (a.eval_int(bindings) == b.eval_int(bindings)) as i64,
            SymExpr::Lt(a, b) => (a.eval_int(bindings) < b.eval_int(bindings)) as i64,
            SymExpr::Le(a, b) => (a.eval_int(bindings) <= b.eval_int(bindings)) as i64,
            SymExpr::Not(a) => (a.eval_int(bindings) == 0) as i64,
            SymExpr::And(a, b) => (a.eval_int(bindings) != 0 && b.eval_int(bindings) != 0) as i64,
            SymExpr::Or(a, b) => (a.eval_int(bindings) != 0 || b.eval_int(bindings) != 0) as i64,
        }
    }

    pub fn eval_bool(&self, bindings: &Bindings) -> bool {
        self.eval_int(bindings) != 0
    }

    /// Symbols mentioned anywhere in the expression.
    pub fn collect_symbols(&self, out: &mut Vec<u32>) {
        match self {
            SymExpr::SymByte { sym, .. } | SymExpr::LenOf(sym) => {
                if !out.contains(sym) {
                    out.push(*sym);
                }
            }
            SymExpr::ConstInt(_) | SymExpr::ConstBool(_) => {}
            SymExpr::Add(a, b)
            | SymExpr::Sub(a, b)
            | SymExpr::Mul(a, b)
            | SymExpr::Div(a, b)
            | SymExpr::Mod(a, b)
            | SymExpr::Eq(a, b)
            | SymExpr::Lt(a, b)
            | SymExpr::Le(a, b)
            | SymExpr::And(a, b)
            | SymExpr::Or(a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
            SymExpr::Not(a) => a.collect_symbols(out),
        }
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymExpr::SymByte { sym, offset } => write!(f, "s{sym}[{offset}]"),
            SymExpr::LenOf(sym) => write!(f, "len(s{sym})"),
            SymExpr::ConstInt(v) => write!(f, "{v}"),
            SymExpr::ConstBool(b) => write!(f, "{b}"),
            SymExpr::Add(a, b) => write!(f, "({a} + {b})"),
            SymExpr::Sub(a, b) => write!(f, "({a} - {b})"),
            SymExpr::Mul(a, b) => write!(f, "({a} * {b})"),
            SymExpr::Div(a, b) => write!(f, "({a} / {b})"),
            SymExpr::Mod(a, b) => write!(f, "({a} % {b})"),
            SymExpr::Eq(a, b) => write!(f, "({a} == {b})"),
            SymExpr::Lt(a, b) => write!(f, "({a} < {b})"),
            SymExpr::Le(a, b) => write!(f, "({a} <= {b})"),
            SymExpr::Not(a) => write!(f, "!{a}"),
            SymExpr::And(a, b) => write!(f, "({a} && {b})"),
            SymExpr::Or(a, b) => write!(f, "({a} || {b})"),
        }
    }
}

pub fn cint(v: i64) -> ExprRef {
    Rc::new(SymExpr::ConstInt(v))
}

pub fn cbool(v: bool) -> ExprRef {
    Rc::new(SymExpr::ConstBool(v))
}

fn const_of(e: &SymExpr) -> Option<i64> {
    match e {
        SymExpr::ConstInt(v) => Some(*v),
        SymExpr::ConstBool(b) => Some(*b as i64),
        _ => None,
    }
}

macro_rules! fold_binop {
    ($name:ident, $node:ident, $op:expr) => {
        pub fn $name(a: ExprRef, b: ExprRef) -> ExprRef {
            if let (Some(x), Some(y)) = (const_of(&a), const_of(&b)) {
                #[allow(clippy::redundant_closure_call)]
                return cint(($op)(x, y));
            }
            Rc::new(SymExpr::$node(a, b))
        }
    };
}

fold_binop!(mk_add, Add, |x: i64, y: i64| x.wrapping_add(y));
fold_binop!(mk_sub, Sub, |x: i64, y: i64| x.wrapping_sub(y));
fold_binop!(mk_mul, Mul, |x: i64, y: i64| x.wrapping_mul(y));
fold_binop!(mk_div, Div, |x: i64, y: i64| if y == 0 { 0 } else { x.wrapping_div(y) });
fold_binop!(mk_mod, Mod, |x: i64, y: i64| if y == 0 { 0 } else { x.wrapping_rem(y) });

macro_rules! fold_cmp {
    ($name:ident, $node:ident, $op:expr) => {
        pub fn $name(a: ExprRef, b: ExprRef) -> ExprRef {
            if let (Some(x), Some(y)) = (const_of(&a), const_of(&b)) {
                #[allow(clippy::redundant_closure_call)]
                return cbool(($op)(x, y));
            }
            Rc::new(SymExpr::$node(a, b))
        }
    };
}

fold_cmp!(mk_eq, Eq, |x, y| x == y);
fold_cmp!(mk_lt, Lt, |x, y| x < y);
fold_cmp!(mk_le, Le, |x, y| x <= y);

pub fn mk_not(a: ExprRef) -> ExprRef {
    match const_of(&a) {
        Some(v) => cbool(v == 0),
        None => Rc::new(SymExpr::Not(a)),
    }
}

pub fn mk_and(a: ExprRef, b: ExprRef) -> ExprRef {
    match (const_of(&a), const_of(&b)) {
        (Some(x), Some(y)) => cbool(x != 0 && y != 0),
        _ => Rc::new(SymExpr::And(a, b)),
    }
}

pub fn mk_or(a: ExprRef, b: ExprRef) -> ExprRef {
    match (const_of(&a), const_of(&b)) {
        (Some(x), Some(y)) => cbool(x != 0 || y != 0),
        _ => Rc::new(SymExpr::Or(a, b)),
    }
}

/// Boolean view of a possibly integer-valued expression: truthiness.
pub fn as_condition(e: ExprRef) -> ExprRef {
    match &*e {
        SymExpr::ConstInt(v) => cbool(*v != 0),
        SymExpr::ConstBool(_)
        | SymExpr::Eq(..)
        | SymExpr::Lt(..)
        | SymExpr::Le(..)
        | SymExpr::Not(..)
        | SymExpr::And(..)
        | SymExpr::Or(..) => e,
        _ => mk_not(mk_eq(e, cint(0))),
    }
}
