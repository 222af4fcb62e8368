//! Export listing and String-parameter inference.
//!
//! A parameter is inferred `Str` when the function (or any callee it is
//! passed to, transitively) uses it with a String member, indexes it, or
//! passes it into a String-typed argument position of a member call.

use super::ast::*;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamType {
    Str,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportInfo {
    pub name: String,
    pub param_count: usize,
    pub param_types: Vec<ParamType>,
}

/// String members: (name, argc, does the first argument take a string).
pub const STRING_MEMBERS: &[(&str, usize, bool)] = &[
    ("length", 0, false),
    ("charAt", 1, false),
    ("charCodeAt", 1, false),
    ("indexOf", 1, true),
    ("substring", 2, false),
    ("concat", 1, true),
];

pub fn member_arity(name: &str) -> Option<usize> {
    STRING_MEMBERS.iter().find(|(n, _, _)| *n == name).map(|(_, argc, _)| *argc)
}

pub fn list_exports(program: &Program) -> Vec<ExportInfo> {
    let types = infer_param_types(program);
    program
        .functions
        .iter()
        .filter(|f| f.exported)
        .map(|f| ExportInfo {
            name: f.name.clone(),
            param_count: f.params.len(),
            param_types: types.get(&f.name).cloned().unwrap_or_default(),
        })
        .collect()
}

/// Fixpoint inference over the whole program so that helpers propagate
/// String-ness back to the exported entry points.
pub fn infer_param_types(program: &Program) -> BTreeMap<String, Vec<ParamType>> {
    let mut types: BTreeMap<String, Vec<ParamType>> = program
        .functions
        .iter()
        .map(|f| (f.name.clone(), vec![ParamType::Unknown; f.params.len()]))
        .collect();

    loop {
        let mut changed = false;
        for f in &program.functions {
            for (i, p) in f.params.iter().enumerate() {
                if types[&f.name][i] == ParamType::Str {
                    continue;
                }
                if param_used_as_string(&f.body, &p.name, &types) {
                    types.get_mut(&f.name).unwrap()[i] = ParamType::Str;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    types
}

fn param_used_as_string(
    body: &[Stmt],
    param: &str,
    types: &BTreeMap<String, Vec<ParamType>>,
) -> bool {
    body.iter().any(|s| stmt_uses(s, param, types))
}

fn stmt_uses(s: &Stmt, param: &str, types: &BTreeMap<String, Vec<ParamType>>) -> bool {
    match &s.kind {
        StmtKind::VarDecl(_, e) | StmtKind::Assign(_, e) | StmtKind::ExprStmt(e) | StmtKind::Throw(e) => {
            expr_uses(e, param, types)
        }
        StmtKind::Return(e) => e.as_ref().is_some_and(|e| expr_uses(e, param, types)),
        StmtKind::If(c, t, els) => {
            expr_uses(c, param, types)
                || param_used_as_string(t, param, types)
                || els.as_ref().is_some_and(|b| param_used_as_string(b, param, types))
        }
        StmtKind::While(c, b) => expr_uses(c, param, types) || param_used_as_string(b, param, types),
        StmtKind::For(init, cond, step, body) => {
            init.as_ref().is_some_and(|s| stmt_uses(s, param, types))
                || cond.as_ref().is_some_and(|e| expr_uses(e, param, types))
                || step.as_ref().is_some_and(|s| stmt_uses(s, param, types))
                || param_used_as_string(body, param, types)
        }
        StmtKind::TryCatch(t, _, c, _) => {
            param_used_as_string(t, param, types) || param_used_as_string(c, param, types)
        }
    }
}

fn expr_uses(e: &Expr, param: &str, types: &BTreeMap<String, Vec<ParamType>>) -> bool {
    let is_param = |e: &Expr| matches!(&e.kind, ExprKind::Identifier(n) if n == param);
    match &e.kind {
        ExprKind::Literal(_) | ExprKind::Identifier(_) => false,
        ExprKind::Binary(_, l, r) => expr_uses(l, param, types) || expr_uses(r, param, types),
        ExprKind::Unary(_, inner) => expr_uses(inner, param, types),
        ExprKind::Call(name, args) => {
            if let Some(callee_types) = types.get(name) {
                for (i, a) in args.iter().enumerate() {
                    if is_param(a) && callee_types.get(i) == Some(&ParamType::Str) {
                        return true;
                    }
                }
            }
            args.iter().any(|a| expr_uses(a, param, types))
        }
        ExprKind::MethodCall(obj, name, args) => {
            if is_param(obj) {
                return true;
            }
            if let Some((_, _, string_arg)) = STRING_MEMBERS.iter().find(|(n, _, _)| n == name) {
                if *string_arg && args.first().is_some_and(is_param) {
                    return true;
                }
            }
            expr_uses(obj, param, types) || args.iter().any(|a| expr_uses(a, param, types))
        }
        ExprKind::Index(obj, idx) => {
            is_param(obj) || expr_uses(obj, param, types) || expr_uses(idx, param, types)
        }
    }
}
