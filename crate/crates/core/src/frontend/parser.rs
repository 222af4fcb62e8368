//! Recursive-descent parser for MiniScript.
//!
//! Grammar (informal):
//! ```text
//! program   := fndecl*
//! fndecl    := "export"? "function" ident "(" params ")" block
//! stmt      := var | assign | exprstmt | if | while | for | return | throw | try
//! expr      := or-chain with standard precedence; unary ! and -; postfix
//!              `.member(args)`, `.length`, and `[index]`
//! ```
//! Statements are semicolon-terminated; there is no automatic insertion.

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::ParseError;
use crate::util::Span;

pub fn parse(source: &SourceProgram) -> Result<Program, ParseError> {
    let toks = lex(&source.text)?;
    let mut p = Parser { toks, pos: 0 };
    let program = p.program()?;
    // Exports listed on the SourceProgram must exist; the `export` keyword
    // marks them inline, so only validate the redundant list when present.
    for name in &source.exports {
        if program.function(name).is_none() {
            return Err(ParseError::new(1, 1, format!("exported function `{name}` not declared")));
        }
    }
    Ok(program)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn cur(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, ParseError> {
        if *self.peek() == want {
            Ok(self.bump())
        } else {
            let t = self.cur();
            Err(ParseError::new(t.line, t.col, format!("expected {what}")))
        }
    }

    fn err_here(&self, msg: impl Into<String>) -> ParseError {
        let t = self.cur();
        ParseError::new(t.line, t.col, msg)
    }

    /// Span covering token range [from, to] as a byte slice of the source.
    fn span_from(&self, from: usize, to: usize) -> Span {
        let a = &self.toks[from.min(self.toks.len() - 1)];
        let b = &self.toks[to.min(self.toks.len() - 1)];
        let end = b.offset + b.len as usize;
        Span::new(a.line, a.col, end.saturating_sub(a.offset) as u32)
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut functions = Vec::new();
        while *self.peek() != Tok::Eof {
            functions.push(self.fndecl()?);
        }
        let names: Vec<&str> = functions.iter().map(|f| f.name.as_str()).collect();
        for (i, f) in functions.iter().enumerate() {
            if names[..i].contains(&f.name.as_str()) {
                return Err(ParseError::new(
                    f.span.line,
                    f.span.col,
                    format!("duplicate function `{}`", f.name),
                ));
            }
        }
        Ok(Program { functions })
    }

    fn fndecl(&mut self) -> Result<FunctionDecl, ParseError> {
        let start = self.pos;
        let exported = if *self.peek() == Tok::Export {
            self.bump();
            true
        } else {
            false
        };
        self.expect(Tok::Function, "`function`")?;
        let name = self.ident("function name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let at = self.pos;
                let pname = self.ident("parameter name")?;
                params.push(Param { name: pname, span: self.span_from(at, at) });
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        let body = self.block()?;
        let end = self.pos - 1;
        let mut seen = std::collections::HashSet::new();
        for p in &params {
            if !seen.insert(p.name.clone()) {
                return Err(ParseError::new(p.span.line, p.span.col, "duplicate parameter"));
            }
        }
        Ok(FunctionDecl { name, params, body, exported, span: self.span_from(start, end) })
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            _ => Err(self.err_here(format!("expected {what}"))),
        }
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(self.err_here("unexpected end of input in block"));
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let start = self.pos;
        match self.peek().clone() {
            Tok::Var => {
                let s = self.var_decl()?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(Stmt { kind: s, span: self.span_from(start, self.pos - 1) })
            }
            Tok::Return => {
                self.bump();
                let expr = if *self.peek() == Tok::Semi { None } else { Some(self.expr()?) };
                self.expect(Tok::Semi, "`;`")?;
                Ok(Stmt { kind: StmtKind::Return(expr), span: self.span_from(start, self.pos - 1) })
            }
            Tok::Throw => {
                self.bump();
                let expr = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(Stmt { kind: StmtKind::Throw(expr), span: self.span_from(start, self.pos - 1) })
            }
            Tok::If => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                let then = self.block()?;
                let els = if *self.peek() == Tok::Else {
                    self.bump();
                    if *self.peek() == Tok::If {
                        // `else if` chains desugar to a one-statement else block
                        let nested = self.stmt()?;
                        Some(vec![nested])
                    } else {
                        Some(self.block()?)
                    }
                } else {
                    None
                };
                Ok(Stmt {
                    kind: StmtKind::If(cond, then, els),
                    span: self.span_from(start, self.pos - 1),
                })
            }
            Tok::While => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                let body = self.block()?;
                Ok(Stmt {
                    kind: StmtKind::While(cond, body),
                    span: self.span_from(start, self.pos - 1),
                })
            }
            Tok::For => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let init = if *self.peek() == Tok::Semi {
                    None
                } else {
                    let at = self.pos;
                    let kind = if *self.peek() == Tok::Var {
                        self.var_decl()?
                    } else {
                        self.assign_or_expr_stmt()?
                    };
                    Some(Box::new(Stmt { kind, span: self.span_from(at, self.pos - 1) }))
                };
                self.expect(Tok::Semi, "`;`")?;
                let cond = if *self.peek() == Tok::Semi { None } else { Some(self.expr()?) };
                self.expect(Tok::Semi, "`;`")?;
                let step = if *self.peek() == Tok::RParen {
                    None
                } else {
                    let at = self.pos;
                    let kind = self.assign_or_expr_stmt()?;
                    Some(Box::new(Stmt { kind, span: self.span_from(at, self.pos - 1) }))
                };
                self.expect(Tok::RParen, "`)`")?;
                let body = self.block()?;
                Ok(Stmt {
                    kind: StmtKind::For(init, cond, step, body),
                    span: self.span_from(start, self.pos - 1),
                })
            }
            Tok::Try => {
                self.bump();
                let try_block = self.block()?;
                let catch_start = self.pos;
                self.expect(Tok::Catch, "`catch`")?;
                self.expect(Tok::LParen, "`(`")?;
                let name = self.ident("catch variable")?;
                self.expect(Tok::RParen, "`)`")?;
                let catch_block = self.block()?;
                let catch_span = self.span_from(catch_start, self.pos - 1);
                Ok(Stmt {
                    kind: StmtKind::TryCatch(try_block, name, catch_block, catch_span),
                    span: self.span_from(start, self.pos - 1),
                })
            }
            _ => {
                let kind = self.assign_or_expr_stmt()?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(Stmt { kind, span: self.span_from(start, self.pos - 1) })
            }
        }
    }

    fn var_decl(&mut self) -> Result<StmtKind, ParseError> {
        self.expect(Tok::Var, "`var`")?;
        let name = self.ident("variable name")?;
        self.expect(Tok::Assign, "`=`")?;
        let init = self.expr()?;
        Ok(StmtKind::VarDecl(name, init))
    }

    /// `name = expr` or a bare expression statement.
    fn assign_or_expr_stmt(&mut self) -> Result<StmtKind, ParseError> {
        if let Tok::Ident(name) = self.peek().clone() {
            if self.toks[self.pos + 1].tok == Tok::Assign {
                self.bump();
                self.bump();
                let value = self.expr()?;
                return Ok(StmtKind::Assign(name, value));
            }
        }
        Ok(StmtKind::ExprStmt(self.expr()?))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(0)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let start = self.pos;
        let mut lhs = self.unary()?;
        loop {
            let (op, prec) = match self.peek() {
                Tok::OrOr => (BinOp::Or, 1),
                Tok::AndAnd => (BinOp::And, 2),
                Tok::EqEq => (BinOp::Eq, 3),
                Tok::NotEq => (BinOp::Ne, 3),
                Tok::Lt => (BinOp::Lt, 4),
                Tok::Le => (BinOp::Le, 4),
                Tok::Gt => (BinOp::Gt, 4),
                Tok::Ge => (BinOp::Ge, 4),
                Tok::Plus => (BinOp::Add, 5),
                Tok::Minus => (BinOp::Sub, 5),
                Tok::Star => (BinOp::Mul, 6),
                Tok::Slash => (BinOp::Div, 6),
                Tok::Percent => (BinOp::Mod, 6),
                _ => break,
            };
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            let span = self.span_from(start, self.pos - 1);
            lhs = Expr { kind: ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        match self.peek() {
            Tok::Bang => {
                self.bump();
                let e = self.unary()?;
                let span = self.span_from(start, self.pos - 1);
                Ok(Expr { kind: ExprKind::Unary(UnOp::Not, Box::new(e)), span })
            }
            Tok::Minus => {
                self.bump();
                let e = self.unary()?;
                let span = self.span_from(start, self.pos - 1);
                Ok(Expr { kind: ExprKind::Unary(UnOp::Neg, Box::new(e)), span })
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let mut e = self.primary()?;
        loop {
            match self.peek() {
                Tok::Dot => {
                    self.bump();
                    let name = self.ident("member name")?;
                    let args = if *self.peek() == Tok::LParen {
                        self.bump();
                        let mut args = Vec::new();
                        if *self.peek() != Tok::RParen {
                            loop {
                                args.push(self.expr()?);
                                if *self.peek() == Tok::Comma {
                                    self.bump();
                                } else {
                                    break;
                                }
                            }
                        }
                        self.expect(Tok::RParen, "`)`")?;
                        args
                    } else if name == "length" {
                        Vec::new()
                    } else {
                        return Err(self.err_here(format!("member `{name}` requires arguments")));
                    };
                    let span = self.span_from(start, self.pos - 1);
                    e = Expr { kind: ExprKind::MethodCall(Box::new(e), name, args), span };
                }
                Tok::LBracket => {
                    self.bump();
                    let idx = self.expr()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    let span = self.span_from(start, self.pos - 1);
                    e = Expr { kind: ExprKind::Index(Box::new(e), Box::new(idx)), span };
                }
                _ => break,
            }
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let tok = self.peek().clone();
        match tok {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr { kind: ExprKind::Literal(Lit::Int(n)), span: self.span_from(start, start) })
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr { kind: ExprKind::Literal(Lit::Str(s)), span: self.span_from(start, start) })
            }
            Tok::True => {
                self.bump();
                Ok(Expr {
                    kind: ExprKind::Literal(Lit::Bool(true)),
                    span: self.span_from(start, start),
                })
            }
            Tok::False => {
                self.bump();
                Ok(Expr {
                    kind: ExprKind::Literal(Lit::Bool(false)),
                    span: self.span_from(start, start),
                })
            }
            Tok::Null => {
                self.bump();
                Ok(Expr { kind: ExprKind::Literal(Lit::Null), span: self.span_from(start, start) })
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    self.bump();
                    let mut args = Vec::new();
                    if *self.peek() != Tok::RParen {
                        loop {
                            args.push(self.expr()?);
                            if *self.peek() == Tok::Comma {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    let span = self.span_from(start, self.pos - 1);
                    Ok(Expr { kind: ExprKind::Call(name, args), span })
                } else {
                    Ok(Expr {
                        kind: ExprKind::Identifier(name),
                        span: self.span_from(start, start),
                    })
                }
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(self.err_here("expected expression")),
        }
    }
}
