//! Bounded string constraint solver.
//!
//! Not a general SMT procedure: the domain is exactly what path
//! conditions produce — per-byte equalities and inequalities, linear
//! arithmetic over byte values and lengths, and boolean combinations.
//! Lengths are enumerated exhaustively up to `max_len` (nearest the seed
//! lengths first); bytes are narrowed by interval propagation over the
//! directly-visible comparisons and then searched over the alphabet with
//! early pruning. A step budget turns pathological instances into
//! `Unknown` rather than hangs. The whole procedure is deterministic.

use super::expr::{Bindings, ExprRef, SymExpr};
use super::{PathCondition, PcEntry};
use crate::tracer::SymbolDecl;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Sat(Bindings),
    Unsat,
    Unknown,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Largest string length enumerated per symbol.
    pub max_len: usize,
    /// Candidate byte values, ascending.
    pub alphabet: Vec<u8>,
    /// Evaluation budget; exceeded means `Unknown`.
    pub budget: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { max_len: 8, alphabet: (0x20u8..0x7f).collect(), budget: 2_000_000 }
    }
}

/// Solve the first `k` conditions as observed plus the negation of
/// condition `k`. `seed` supplies the bindings the path was traced with;
/// solutions stay close to it (unconstrained positions keep seed bytes).
pub fn negate_and_solve(
    pc: &PathCondition,
    k: usize,
    decls: &[SymbolDecl],
    seed: &Bindings,
    cfg: &SolverConfig,
) -> SolveOutcome {
    assert!(k < pc.len(), "negation index in range");
    let mut constraints: Vec<(ExprRef, bool)> =
        pc[..k].iter().map(|e: &PcEntry| (e.expr.clone(), e.taken)).collect();
    constraints.push((pc[k].expr.clone(), !pc[k].taken));
    solve(&constraints, decls, seed, cfg)
}

/// Satisfy a conjunction of (expression, required truth value) pairs.
pub fn solve(
    constraints: &[(ExprRef, bool)],
    decls: &[SymbolDecl],
    seed: &Bindings,
    cfg: &SolverConfig,
) -> SolveOutcome {
    // Drop constant constraints up front; a false constant is Unsat no
    // matter the bindings.
    let mut live = Vec::new();
    for (e, want) in constraints {
        match &**e {
            SymExpr::ConstBool(b) => {
                if *b != *want {
                    return SolveOutcome::Unsat;
                }
            }
            SymExpr::ConstInt(v) => {
                if (*v != 0) != *want {
                    return SolveOutcome::Unsat;
                }
            }
            _ => live.push((e.clone(), *want)),
        }
    }
    if live.is_empty() {
        return SolveOutcome::Sat(seed_bindings(decls, seed, cfg));
    }

    let mut budget = cfg.budget;
    let symbols: Vec<u32> = decls.iter().map(|d| d.id).collect();

    // Length combinations, nearest the seed lengths first.
    let seed_len = |sym: u32| seed.get(&sym).map(|b| b.len()).unwrap_or(0).min(cfg.max_len);
    let mut combos: Vec<Vec<usize>> = vec![vec![]];
    for &sym in &symbols {
        let mut next = Vec::new();
        for combo in &combos {
            let mut lens: Vec<usize> = (0..=cfg.max_len).collect();
            lens.sort_by_key(|&l| (l.abs_diff(seed_len(sym)), l));
            for l in lens {
                let mut c = combo.clone();
                c.push(l);
                next.push(c);
            }
        }
        combos = next;
    }

    for combo in combos {
        let lens: Vec<(u32, usize)> =
            symbols.iter().copied().zip(combo.iter().copied()).collect();
        match solve_with_lengths(&live, &lens, seed, cfg, &mut budget) {
            LengthResult::Sat(b) => return SolveOutcome::Sat(b),
            LengthResult::Unsat => {}
            LengthResult::Budget => return SolveOutcome::Unknown,
        }
    }
    SolveOutcome::Unsat
}

fn seed_bindings(decls: &[SymbolDecl], seed: &Bindings, cfg: &SolverConfig) -> Bindings {
    decls
        .iter()
        .map(|d| {
            let bytes = seed.get(&d.id).cloned().unwrap_or_default();
            let mut bytes: Vec<u8> = bytes.into_iter().take(cfg.max_len).collect();
            for b in &mut bytes {
                if !cfg.alphabet.contains(b) {
                    *b = cfg.alphabet[0];
                }
            }
            (d.id, bytes)
        })
        .collect()
}

enum LengthResult {
    Sat(Bindings),
    Unsat,
    Budget,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Tri {
    Known(i64),
    Unknown,
}

/// Partial assignment: fixed lengths, some bytes assigned.
struct Partial<'a> {
    lens: &'a [(u32, usize)],
    bytes: std::collections::HashMap<(u32, usize), u8>,
}

impl<'a> Partial<'a> {
    fn len_of(&self, sym: u32) -> Option<usize> {
        self.lens.iter().find(|(s, _)| *s == sym).map(|(_, l)| *l)
    }

    fn eval(&self, e: &SymExpr, budget: &mut u64) -> Tri {
        if *budget == 0 {
            return Tri::Unknown;
        }
        *budget -= 1;
        use Tri::*;
        let bin = |a: &SymExpr, b: &SymExpr, budget: &mut u64, f: fn(i64, i64) -> i64| -> Tri {
            match (self.eval(a, budget), self.eval(b, budget)) {
                (Known(x), Known(y)) => Known(f(x, y)),
                _ => Unknown,
            }
        };
        match e {
            SymExpr::SymByte { sym, offset } => match self.len_of(*sym) {
                Some(l) if *offset >= l => Known(0),
                _ => match self.bytes.get(&(*sym, *offset)) {
                    Some(&b) => Known(b as i64),
                    None => Unknown,
                },
            },
            SymExpr::LenOf(sym) => match self.len_of(*sym) {
                Some(l) => Known(l as i64),
                None => Unknown,
            },
            SymExpr::ConstInt(v) => Known(*v),
            SymExpr::ConstBool(b) => Known(*b as i64),
            SymExpr::Add(a, b) => bin(a, b, budget, |x, y| x.wrapping_add(y)),
            SymExpr::Sub(a, b) => bin(a, b, budget, |x, y| x.wrapping_sub(y)),
            SymExpr::Mul(a, b) => bin(a, b, budget, |x, y| x.wrapping_mul(y)),
            SymExpr::Div(a, b) => {
                bin(a, b, budget, |x, y| if y == 0 { 0 } else { x.wrapping_div(y) })
            }
            SymExpr::Mod(a, b) => {
                bin(a, b, budget, |x, y| if y == 0 { 0 } else { x.wrapping_rem(y) })
            }
            SymExpr::Eq(a, b) => bin(a, b, budget, |x, y| (x == y) as i64),
            SymExpr::Lt(a, b) => bin(a, b, budget, |x, y| (x < y) as i64),
            SymExpr::Le(a, b) => bin(a, b, budget, |x, y| (x <= y) as i64),
            SymExpr::Not(a) => match self.eval(a, budget) {
                Known(v) => Known((v == 0) as i64),
                Unknown => Unknown,
            },
            SymExpr::And(a, b) => match self.eval(a, budget) {
                Known(0) => Known(0),
                Known(_) => match self.eval(b, budget) {
                    Known(v) => Known((v != 0) as i64),
                    Unknown => Unknown,
                },
                Unknown => match self.eval(b, budget) {
                    Known(0) => Known(0),
                    _ => Unknown,
                },
            },
            SymExpr::Or(a, b) => match self.eval(a, budget) {
                Known(0) => match self.eval(b, budget) {
                    Known(v) => Known((v != 0) as i64),
                    Unknown => Unknown,
                },
                Known(_) => Known(1),
                Unknown => match self.eval(b, budget) {
                    Known(v) if v != 0 => Known(1),
                    _ => Unknown,
                },
            },
        }
    }
}

/// Byte variables appearing in an expression, in-scope for the fixed
/// lengths, in first-appearance order.
fn collect_vars(e: &SymExpr, lens: &[(u32, usize)], out: &mut Vec<(u32, usize)>) {
    match e {
        SymExpr::SymByte { sym, offset } => {
            let in_scope = lens.iter().any(|(s, l)| s == sym && offset < l);
            if in_scope && !out.contains(&(*sym, *offset)) {
                out.push((*sym, *offset));
            }
        }
        SymExpr::LenOf(_) | SymExpr::ConstInt(_) | SymExpr::ConstBool(_) => {}
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
            collect_vars(a, lens, out);
            collect_vars(b, lens, out);
        }
        SymExpr::Not(a) => collect_vars(a, lens, out),
    }
}

/// Narrow a variable's candidate set using directly-visible comparisons
/// `byte <op> const` at the top level of a required constraint.
fn propagate_intervals(
    constraints: &[(ExprRef, bool)],
    var: (u32, usize),
    alphabet: &[u8],
) -> Vec<u8> {
    let mut lo = 0i64;
    let mut hi = 255i64;
    let mut pinned: Option<i64> = None;
    let mut excluded: Vec<i64> = Vec::new();

    let is_var = |e: &SymExpr| matches!(e, SymExpr::SymByte { sym, offset } if (*sym, *offset) == var);
    for (e, want) in constraints {
        let (byte_side, const_side, flipped) = match &**e {
            SymExpr::Eq(a, b) | SymExpr::Lt(a, b) | SymExpr::Le(a, b) => match (&**a, &**b) {
                (x, SymExpr::ConstInt(c)) if is_var(x) => (x, *c, false),
                (SymExpr::ConstInt(c), y) if is_var(y) => (y, *c, true),
                _ => continue,
            },
            _ => continue,
        };
        let _ = byte_side;
        match (&**e, want, flipped) {
            (SymExpr::Eq(..), true, _) => pinned = Some(const_side),
            (SymExpr::Eq(..), false, _) => excluded.push(const_side),
            // byte < c (want) / c < byte (flipped)
            (SymExpr::Lt(..), true, false) => hi = hi.min(const_side - 1),
            (SymExpr::Lt(..), false, false) => lo = lo.max(const_side),
            (SymExpr::Lt(..), true, true) => lo = lo.max(const_side + 1),
            (SymExpr::Lt(..), false, true) => hi = hi.min(const_side),
            (SymExpr::Le(..), true, false) => hi = hi.min(const_side),
            (SymExpr::Le(..), false, false) => lo = lo.max(const_side + 1),
            (SymExpr::Le(..), true, true) => lo = lo.max(const_side),
            (SymExpr::Le(..), false, true) => hi = hi.min(const_side - 1),
            _ => {}
        }
    }

    alphabet
        .iter()
        .copied()
        .filter(|&b| {
            let v = b as i64;
            v >= lo
                && v <= hi
                && !excluded.contains(&v)
                && pinned.map(|p| v == p).unwrap_or(true)
        })
        .collect()
}

fn solve_with_lengths(
    constraints: &[(ExprRef, bool)],
    lens: &[(u32, usize)],
    seed: &Bindings,
    cfg: &SolverConfig,
    budget: &mut u64,
) -> LengthResult {
    let mut partial = Partial { lens, bytes: Default::default() };

    // First pass: anything already decided by lengths alone?
    let mut pending: Vec<(ExprRef, bool)> = Vec::new();
    for (e, want) in constraints {
        match partial.eval(e, budget) {
            Tri::Known(v) => {
                if (v != 0) != *want {
                    return LengthResult::Unsat;
                }
            }
            Tri::Unknown => {
                if *budget == 0 {
                    return LengthResult::Budget;
                }
                pending.push((e.clone(), *want));
            }
        }
    }
    if pending.is_empty() {
        return LengthResult::Sat(build_bindings(lens, &partial.bytes, seed, cfg));
    }

    let mut vars: Vec<(u32, usize)> = Vec::new();
    for (e, _) in &pending {
        collect_vars(e, lens, &mut vars);
    }
    if vars.is_empty() {
        // Unknown-valued constraints with no in-scope variables cannot be
        // satisfied by byte choices.
        return LengthResult::Unsat;
    }

    // Candidate domains, seed byte first for stability.
    let domains: Vec<Vec<u8>> = vars
        .iter()
        .map(|&(sym, off)| {
            let mut dom = propagate_intervals(&pending, (sym, off), &cfg.alphabet);
            if let Some(&sb) = seed.get(&sym).and_then(|b| b.get(off)) {
                if let Some(pos) = dom.iter().position(|&d| d == sb) {
                    dom.swap(0, pos);
                }
            }
            dom
        })
        .collect();
    if domains.iter().any(|d| d.is_empty()) {
        return LengthResult::Unsat;
    }

    // Depth-first search with pruning.
    fn dfs(
        vars: &[(u32, usize)],
        domains: &[Vec<u8>],
        at: usize,
        partial: &mut Partial<'_>,
        pending: &[(ExprRef, bool)],
        budget: &mut u64,
    ) -> Result<bool, ()> {
        if *budget == 0 {
            return Err(());
        }
        // Prune on any decided-false constraint.
        for (e, want) in pending {
            match partial.eval(e, budget) {
                Tri::Known(v) if (v != 0) != *want => return Ok(false),
                _ => {}
            }
            if *budget == 0 {
                return Err(());
            }
        }
        if at == vars.len() {
            // All assigned: every constraint must now be decided true.
            for (e, want) in pending {
                match partial.eval(e, budget) {
                    Tri::Known(v) if (v != 0) == *want => {}
                    Tri::Known(_) => return Ok(false),
                    Tri::Unknown => return Err(()),
                }
            }
            return Ok(true);
        }
        for &candidate in &domains[at] {
            partial.bytes.insert(vars[at], candidate);
            match dfs(vars, domains, at + 1, partial, pending, budget) {
                Ok(true) => return Ok(true),
                Ok(false) => {}
                Err(()) => return Err(()),
            }
        }
        partial.bytes.remove(&vars[at]);
        Ok(false)
    }

    match dfs(&vars, &domains, 0, &mut partial, &pending, budget) {
        Ok(true) => LengthResult::Sat(build_bindings(lens, &partial.bytes, seed, cfg)),
        Ok(false) => LengthResult::Unsat,
        Err(()) => LengthResult::Budget,
    }
}

fn build_bindings(
    lens: &[(u32, usize)],
    bytes: &std::collections::HashMap<(u32, usize), u8>,
    seed: &Bindings,
    cfg: &SolverConfig,
) -> Bindings {
    lens.iter()
        .map(|&(sym, len)| {
            let mut out = Vec::with_capacity(len);
            for off in 0..len {
                let b = bytes.get(&(sym, off)).copied().unwrap_or_else(|| {
                    seed.get(&sym)
                        .and_then(|s| s.get(off))
                        .copied()
                        .filter(|b| cfg.alphabet.contains(b))
                        .unwrap_or(cfg.alphabet[0])
                });
                out.push(b);
            }
            (sym, out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::expr::*;
    use super::*;
    use std::rc::Rc;

    fn decls(n: usize) -> Vec<SymbolDecl> {
        (0..n)
            .map(|i| SymbolDecl {
                id: i as u32,
                name: format!("arg{i}"),
                base: crate::tracer::memory::arg_region_base(i),
                len: 1,
                param_index: i,
            })
            .collect()
    }

    fn sbyte(sym: u32, off: usize) -> ExprRef {
        Rc::new(SymExpr::SymByte { sym, offset: off })
    }

    fn slen(sym: u32) -> ExprRef {
        Rc::new(SymExpr::LenOf(sym))
    }

    fn entry(expr: ExprRef, taken: bool) -> PcEntry {
        PcEntry { expr, taken, origin_pc: 0 }
    }

    #[test]
    fn forces_empty_string_when_length_negated() {
        // Observed: len(s) == 0 was false. Negate it.
        let pc = vec![entry(mk_eq(slen(0), cint(0)), false)];
        let seed: Bindings = [(0, b"x".to_vec())].into_iter().collect();
        match negate_and_solve(&pc, 0, &decls(1), &seed, &SolverConfig::default()) {
            SolveOutcome::Sat(b) => assert_eq!(b[&0], b""),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn forces_specific_first_byte() {
        let pc = vec![
            entry(mk_lt(cint(0), slen(0)), true),
            entry(mk_eq(sbyte(0, 0), cint(97)), false),
        ];
        let seed: Bindings = [(0, b"zz".to_vec())].into_iter().collect();
        match negate_and_solve(&pc, 1, &decls(1), &seed, &SolverConfig::default()) {
            SolveOutcome::Sat(b) => {
                assert_eq!(b[&0][0], 97);
                assert_eq!(b[&0].len(), 2, "stays near the seed length");
                assert_eq!(b[&0][1], b'z', "unconstrained byte keeps the seed value");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_condition_negation_is_unsat() {
        let pc = vec![entry(cbool(true), true)];
        let seed = Bindings::new();
        assert_eq!(
            negate_and_solve(&pc, 0, &decls(0), &seed, &SolverConfig::default()),
            SolveOutcome::Unsat
        );
    }

    #[test]
    fn unsat_when_byte_constraints_conflict() {
        let pc = vec![
            entry(mk_lt(cint(0), slen(0)), true),
            entry(mk_eq(sbyte(0, 0), cint(97)), true),
            entry(mk_eq(sbyte(0, 0), cint(98)), false),
        ];
        // Negating the last entry demands s[0]==97 && s[0]==98.
        let seed: Bindings = [(0, b"a".to_vec())].into_iter().collect();
        assert_eq!(
            negate_and_solve(&pc, 2, &decls(1), &seed, &SolverConfig::default()),
            SolveOutcome::Unsat
        );
    }

    #[test]
    fn exhausted_budget_reports_unknown_not_unsat() {
        let mut conj = Vec::new();
        for i in 0..6 {
            conj.push(entry(mk_lt(sbyte(0, i), sbyte(0, i + 1)), true));
        }
        let seed: Bindings = [(0, b"aaaaaaa".to_vec())].into_iter().collect();
        let cfg = SolverConfig { budget: 50, ..Default::default() };
        let got = negate_and_solve(&conj, 5, &decls(1), &seed, &cfg);
        assert_eq!(got, SolveOutcome::Unknown);
    }

    #[test]
    fn solves_arithmetic_over_bytes() {
        // s[0] + s[1] == 197 with alphabet a..d (97..100)
        let sum = mk_add(sbyte(0, 0), sbyte(0, 1));
        let pc = vec![
            entry(mk_eq(slen(0), cint(2)), true),
            entry(mk_eq(sum, cint(197)), false),
        ];
        let seed: Bindings = [(0, b"aa".to_vec())].into_iter().collect();
        let cfg = SolverConfig { alphabet: b"abcd".to_vec(), ..Default::default() };
        match negate_and_solve(&pc, 1, &decls(1), &seed, &cfg) {
            SolveOutcome::Sat(b) => {
                let s = &b[&0];
                assert_eq!(s.len(), 2);
                assert_eq!(s[0] as i64 + s[1] as i64, 197);
            }
            other => panic!("{other:?}"),
        }
    }
}
