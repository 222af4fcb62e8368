//! MiniScript abstract syntax.

use crate::util::Span;

/// A source file plus the names it exports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceProgram {
    pub path: String,
    pub text: String,
    pub exports: Vec<String>,
}

impl SourceProgram {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        SourceProgram { path: path.into(), text: text.into(), exports: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Lit {
    Int(i64),
    Str(Vec<u8>),
    Bool(bool),
    Null,
}

/// Expressions. Every node carries the span of the source text it covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Literal(Lit),
    Identifier(String),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    /// Free function call: `f(a, b)`.
    Call(String, Vec<Expr>),
    /// String member access or call: `s.length`, `s.charAt(i)`.
    MethodCall(Box<Expr>, String, Vec<Expr>),
    /// `s[i]` — sugar for `s.charAt(i)`.
    Index(Box<Expr>, Box<Expr>),
}

/// Statements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    VarDecl(String, Expr),
    Assign(String, Expr),
    ExprStmt(Expr),
    If(Expr, Vec<Stmt>, Option<Vec<Stmt>>),
    While(Expr, Vec<Stmt>),
    For(Option<Box<Stmt>>, Option<Expr>, Option<Box<Stmt>>, Vec<Stmt>),
    Return(Option<Expr>),
    Throw(Expr),
    /// `try { .. } catch (name) { .. }`; the second span is the catch clause.
    TryCatch(Vec<Stmt>, String, Vec<Stmt>, Span),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDecl {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub exported: bool,
    pub span: Span,
}

/// Root node: an ordered list of top-level function declarations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub functions: Vec<FunctionDecl>,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn exported_names(&self) -> Vec<String> {
        self.functions.iter().filter(|f| f.exported).map(|f| f.name.clone()).collect()
    }
}

/// Structural equality ignoring spans. Used by the print/reparse tests,
/// where positions legitimately change.
pub fn programs_structurally_equal(a: &Program, b: &Program) -> bool {
    fn expr_eq(a: &Expr, b: &Expr) -> bool {
        match (&a.kind, &b.kind) {
            (ExprKind::Literal(x), ExprKind::Literal(y)) => x == y,
            (ExprKind::Identifier(x), ExprKind::Identifier(y)) => x == y,
            (ExprKind::Binary(o1, l1, r1), ExprKind::Binary(o2, l2, r2)) => {
                o1 == o2 && expr_eq(l1, l2) && expr_eq(r1, r2)
            }
            (ExprKind::Unary(o1, e1), ExprKind::Unary(o2, e2)) => o1 == o2 && expr_eq(e1, e2),
            (ExprKind::Call(n1, a1), ExprKind::Call(n2, a2)) => {
                n1 == n2 && a1.len() == a2.len() && a1.iter().zip(a2).all(|(x, y)| expr_eq(x, y))
            }
            (ExprKind::MethodCall(o1, m1, a1), ExprKind::MethodCall(o2, m2, a2)) => {
                m1 == m2
                    && expr_eq(o1, o2)
                    && a1.len() == a2.len()
                    && a1.iter().zip(a2).all(|(x, y)| expr_eq(x, y))
            }
            (ExprKind::Index(o1, i1), ExprKind::Index(o2, i2)) => expr_eq(o1, o2) && expr_eq(i1, i2),
            _ => false,
        }
    }
    fn stmt_eq(a: &Stmt, b: &Stmt) -> bool {
        match (&a.kind, &b.kind) {
            (StmtKind::VarDecl(n1, e1), StmtKind::VarDecl(n2, e2)) => n1 == n2 && expr_eq(e1, e2),
            (StmtKind::Assign(n1, e1), StmtKind::Assign(n2, e2)) => n1 == n2 && expr_eq(e1, e2),
            (StmtKind::ExprStmt(e1), StmtKind::ExprStmt(e2)) => expr_eq(e1, e2),
            (StmtKind::If(c1, t1, e1), StmtKind::If(c2, t2, e2)) => {
                expr_eq(c1, c2)
                    && block_eq(t1, t2)
                    && match (e1, e2) {
                        (None, None) => true,
                        (Some(x), Some(y)) => block_eq(x, y),
                        _ => false,
                    }
            }
            (StmtKind::While(c1, b1), StmtKind::While(c2, b2)) => expr_eq(c1, c2) && block_eq(b1, b2),
            (StmtKind::For(i1, c1, s1, b1), StmtKind::For(i2, c2, s2, b2)) => {
                opt_stmt_eq(i1, i2)
                    && match (c1, c2) {
                        (None, None) => true,
                        (Some(x), Some(y)) => expr_eq(x, y),
                        _ => false,
                    }
                    && opt_stmt_eq(s1, s2)
                    && block_eq(b1, b2)
            }
            (StmtKind::Return(e1), StmtKind::Return(e2)) => match (e1, e2) {
                (None, None) => true,
                (Some(x), Some(y)) => expr_eq(x, y),
                _ => false,
            },
            (StmtKind::Throw(e1), StmtKind::Throw(e2)) => expr_eq(e1, e2),
            (StmtKind::TryCatch(t1, n1, c1, _), StmtKind::TryCatch(t2, n2, c2, _)) => {
                n1 == n2 && block_eq(t1, t2) && block_eq(c1, c2)
            }
            _ => false,
        }
    }
    fn opt_stmt_eq(a: &Option<Box<Stmt>>, b: &Option<Box<Stmt>>) -> bool {
        match (a, b) {
            (None, None) => true,
            (Some(x), Some(y)) => stmt_eq(x, y),
            _ => false,
        }
    }
    fn block_eq(a: &[Stmt], b: &[Stmt]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| stmt_eq(x, y))
    }

    a.functions.len() == b.functions.len()
        && a.functions.iter().zip(&b.functions).all(|(f, g)| {
            f.name == g.name
                && f.exported == g.exported
                && f.params.len() == g.params.len()
                && f.params.iter().zip(&g.params).all(|(p, q)| p.name == q.name)
                && block_eq(&f.body, &g.body)
        })
}
