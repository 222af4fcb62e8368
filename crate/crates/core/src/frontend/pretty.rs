//! Canonical pretty-printer. The output reparses to a structurally equal
//! program, which is the property the parser tests lean on.

use super::ast::*;

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for f in &p.functions {
        print_function(f, &mut out);
        out.push('\n');
    }
    out
}

fn print_function(f: &FunctionDecl, out: &mut String) {
    if f.exported {
        out.push_str("export ");
    }
    out.push_str("function ");
    out.push_str(&f.name);
    out.push('(');
    for (i, p) in f.params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&p.name);
    }
    out.push_str(") {\n");
    for s in &f.body {
        print_stmt(s, 1, out);
    }
    out.push_str("}\n");
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn print_block(body: &[Stmt], depth: usize, out: &mut String) {
    out.push_str("{\n");
    for s in body {
        print_stmt(s, depth + 1, out);
    }
    indent(depth, out);
    out.push('}');
}

fn print_stmt(s: &Stmt, depth: usize, out: &mut String) {
    indent(depth, out);
    print_stmt_kind(&s.kind, depth, out);
    out.push('\n');
}

fn print_stmt_kind(kind: &StmtKind, depth: usize, out: &mut String) {
    match kind {
        StmtKind::VarDecl(name, e) => {
            out.push_str("var ");
            out.push_str(name);
            out.push_str(" = ");
            print_expr(e, out);
            out.push(';');
        }
        StmtKind::Assign(name, e) => {
            out.push_str(name);
            out.push_str(" = ");
            print_expr(e, out);
            out.push(';');
        }
        StmtKind::ExprStmt(e) => {
            print_expr(e, out);
            out.push(';');
        }
        StmtKind::If(cond, then, els) => {
            out.push_str("if (");
            print_expr(cond, out);
            out.push_str(") ");
            print_block(then, depth, out);
            if let Some(els) = els {
                out.push_str(" else ");
                print_block(els, depth, out);
            }
        }
        StmtKind::While(cond, body) => {
            out.push_str("while (");
            print_expr(cond, out);
            out.push_str(") ");
            print_block(body, depth, out);
        }
        StmtKind::For(init, cond, step, body) => {
            out.push_str("for (");
            if let Some(init) = init {
                let mut tmp = String::new();
                print_stmt_kind(&init.kind, depth, &mut tmp);
                out.push_str(tmp.trim_end_matches(';'));
            }
            out.push_str("; ");
            if let Some(cond) = cond {
                print_expr(cond, out);
            }
            out.push_str("; ");
            if let Some(step) = step {
                let mut tmp = String::new();
                print_stmt_kind(&step.kind, depth, &mut tmp);
                out.push_str(tmp.trim_end_matches(';'));
            }
            out.push_str(") ");
            print_block(body, depth, out);
        }
        StmtKind::Return(e) => {
            out.push_str("return");
            if let Some(e) = e {
                out.push(' ');
                print_expr(e, out);
            }
            out.push(';');
        }
        StmtKind::Throw(e) => {
            out.push_str("throw ");
            print_expr(e, out);
            out.push(';');
        }
        StmtKind::TryCatch(t, name, c, _) => {
            out.push_str("try ");
            print_block(t, depth, out);
            out.push_str(&format!(" catch ({name}) "));
            print_block(c, depth, out);
        }
    }
}

fn print_expr(e: &Expr, out: &mut String) {
    print_expr_prec(e, 0, out);
}

fn prec_of(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::Eq | BinOp::Ne => 3,
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
        BinOp::Add | BinOp::Sub => 5,
        BinOp::Mul | BinOp::Div | BinOp::Mod => 6,
    }
}

fn print_expr_prec(e: &Expr, min: u8, out: &mut String) {
    match &e.kind {
        ExprKind::Literal(lit) => match lit {
            Lit::Int(n) => out.push_str(&n.to_string()),
            Lit::Str(s) => {
                out.push('"');
                for &b in s {
                    match b {
                        b'\n' => out.push_str("\\n"),
                        b'\t' => out.push_str("\\t"),
                        b'\\' => out.push_str("\\\\"),
                        b'"' => out.push_str("\\\""),
                        0 => out.push_str("\\0"),
                        _ => out.push(b as char),
                    }
                }
                out.push('"');
            }
            Lit::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Lit::Null => out.push_str("null"),
        },
        ExprKind::Identifier(name) => out.push_str(name),
        ExprKind::Binary(op, l, r) => {
            let p = prec_of(*op);
            let need_parens = p < min;
            if need_parens {
                out.push('(');
            }
            print_expr_prec(l, p, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            print_expr_prec(r, p + 1, out);
            if need_parens {
                out.push(')');
            }
        }
        ExprKind::Unary(op, inner) => {
            out.push_str(match op {
                UnOp::Neg => "-",
                UnOp::Not => "!",
            });
            // Unary binds tighter than any binary op.
            match inner.kind {
                ExprKind::Binary(..) => {
                    out.push('(');
                    print_expr_prec(inner, 0, out);
                    out.push(')');
                }
                _ => print_expr_prec(inner, 7, out),
            }
        }
        ExprKind::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                print_expr_prec(a, 0, out);
            }
            out.push(')');
        }
        ExprKind::MethodCall(obj, name, args) => {
            print_receiver(obj, out);
            out.push('.');
            out.push_str(name);
            if name != "length" || !args.is_empty() {
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    print_expr_prec(a, 0, out);
                }
                out.push(')');
            }
        }
        ExprKind::Index(obj, idx) => {
            print_receiver(obj, out);
            out.push('[');
            print_expr_prec(idx, 0, out);
            out.push(']');
        }
    }
}

/// Receivers of `.` / `[` must be primary-or-postfix; wrap anything else.
fn print_receiver(e: &Expr, out: &mut String) {
    match e.kind {
        ExprKind::Binary(..) | ExprKind::Unary(..) => {
            out.push('(');
            print_expr_prec(e, 0, out);
            out.push(')');
        }
        _ => print_expr_prec(e, 7, out),
    }
}
