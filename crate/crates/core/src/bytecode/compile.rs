//! AST to bytecode lowering.
//!
//! Register convention: parameters are copied into locals `r0..rP-1` by an
//! entry prologue, declared variables (including `for` initializers and
//! catch bindings) follow in syntactic order, and expression temporaries
//! live in a stack above the named slots. Binary operators evaluate left
//! to right, spilling the left value to a temporary.

use super::{BytecodeFunction, Const, Op};
use crate::frontend::ast::*;
use crate::frontend::{list_exports, member_arity, ExportInfo};
use crate::util::Span;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("compile error at {span}: {message}")]
pub struct CompileError {
    pub span: Span,
    pub message: String,
}

impl CompileError {
    fn new(span: Span, message: impl Into<String>) -> Self {
        CompileError { span, message: message.into() }
    }
}

/// A compiled library: every function plus its export metadata.
#[derive(Debug, Clone)]
pub struct CompiledProgram {
    pub functions: Vec<BytecodeFunction>,
    pub exports: Vec<ExportInfo>,
    index: BTreeMap<String, usize>,
}

impl CompiledProgram {
    pub fn get(&self, name: &str) -> Option<&BytecodeFunction> {
        self.index.get(name).map(|&i| &self.functions[i])
    }

    pub fn function_names(&self) -> Vec<&str> {
        self.functions.iter().map(|f| f.name.as_str()).collect()
    }

    /// The library's coverage universe: distinct statement spans per
    /// function, in declaration order.
    pub fn statement_universe(&self) -> Vec<(String, Span)> {
        let mut out = Vec::new();
        for f in &self.functions {
            for sp in f.statement_spans() {
                out.push((f.name.clone(), sp));
            }
        }
        out
    }
}

/// Compile every function declaration. Deterministic and total on
/// parseable input with resolvable names.
pub fn compile(program: &Program) -> Result<Vec<BytecodeFunction>, CompileError> {
    Ok(compile_program(program)?.functions)
}

pub fn compile_program(program: &Program) -> Result<CompiledProgram, CompileError> {
    let declared: Vec<&str> = program.functions.iter().map(|f| f.name.as_str()).collect();
    let mut functions = Vec::new();
    for f in &program.functions {
        let mut c = FnCompiler::new(f, &declared)?;
        c.compile_body()?;
        functions.push(c.finish());
    }
    let mut index = BTreeMap::new();
    for (i, f) in functions.iter().enumerate() {
        index.insert(f.name.clone(), i);
    }
    for f in &functions {
        debug_assert!(f.verify().is_ok(), "compiler produced unverifiable code for {}", f.name);
    }
    Ok(CompiledProgram { functions, exports: list_exports(program), index })
}

struct FnCompiler<'a> {
    decl: &'a FunctionDecl,
    declared_fns: &'a [&'a str],
    named: BTreeMap<String, u16>,
    named_total: u16,
    temp_depth: u16,
    max_temp_depth: u16,
    constants: Vec<Const>,
    code: Vec<Op>,
    spans: Vec<Span>,
    cur_span: Span,
}

impl<'a> FnCompiler<'a> {
    fn new(decl: &'a FunctionDecl, declared_fns: &'a [&'a str]) -> Result<Self, CompileError> {
        let mut named = BTreeMap::new();
        for (i, p) in decl.params.iter().enumerate() {
            named.insert(p.name.clone(), i as u16);
        }
        let mut next = decl.params.len() as u16;
        collect_locals(&decl.body, &mut named, &mut next)?;
        Ok(FnCompiler {
            decl,
            declared_fns,
            named,
            named_total: next,
            temp_depth: 0,
            max_temp_depth: 0,
            constants: Vec::new(),
            code: Vec::new(),
            spans: Vec::new(),
            cur_span: decl.span,
        })
    }

    fn finish(self) -> BytecodeFunction {
        BytecodeFunction {
            name: self.decl.name.clone(),
            param_count: self.decl.params.len() as u16,
            frame_size: self.named_total + self.max_temp_depth,
            constants: self.constants,
            code: self.code,
            statement_map: self.spans,
        }
    }

    fn emit(&mut self, op: Op) -> usize {
        self.code.push(op);
        self.spans.push(self.cur_span);
        self.code.len() - 1
    }

    fn here(&self) -> u32 {
        self.code.len() as u32
    }

    fn patch(&mut self, at: usize, target: u32) {
        match &mut self.code[at] {
            Op::Jump { target: t } | Op::JumpIfFalse { target: t } | Op::JumpIfTrue { target: t } | Op::EnterTry { target: t } => {
                *t = target
            }
            other => unreachable!("patching non-jump {other:?}"),
        }
    }

    fn const_idx(&mut self, c: Const) -> u16 {
        if let Some(i) = self.constants.iter().position(|x| *x == c) {
            return i as u16;
        }
        self.constants.push(c);
        (self.constants.len() - 1) as u16
    }

    fn alloc_temp(&mut self) -> u16 {
        let r = self.named_total + self.temp_depth;
        self.temp_depth += 1;
        self.max_temp_depth = self.max_temp_depth.max(self.temp_depth);
        r
    }

    fn free_temps(&mut self, n: u16) {
        self.temp_depth -= n;
    }

    fn resolve(&self, name: &str, span: Span) -> Result<u16, CompileError> {
        self.named
            .get(name)
            .copied()
            .ok_or_else(|| CompileError::new(span, format!("use of undeclared identifier `{name}`")))
    }

    fn compile_body(&mut self) -> Result<(), CompileError> {
        // Prologue: copy parameters into their local slots.
        self.cur_span = self.decl.span;
        for i in 0..self.decl.params.len() as u16 {
            self.emit(Op::LdaParam { idx: i });
            self.emit(Op::Star { reg: i });
        }
        let body = self.decl.body.clone();
        self.compile_block(&body)?;
        // Implicit `return null` for functions that fall off the end.
        self.cur_span = self.decl.span;
        let idx = self.const_idx(Const::Null);
        self.emit(Op::LdaConst { idx });
        self.emit(Op::Return);
        Ok(())
    }

    fn compile_block(&mut self, block: &[Stmt]) -> Result<(), CompileError> {
        for s in block {
            self.compile_stmt(s)?;
        }
        Ok(())
    }

    fn compile_stmt(&mut self, s: &Stmt) -> Result<(), CompileError> {
        self.cur_span = s.span;
        match &s.kind {
            StmtKind::VarDecl(name, init) | StmtKind::Assign(name, init) => {
                let reg = self.resolve(name, s.span)?;
                self.compile_expr(init)?;
                self.cur_span = s.span;
                self.emit(Op::Star { reg });
            }
            StmtKind::ExprStmt(e) => {
                self.compile_expr(e)?;
            }
            StmtKind::Return(e) => {
                match e {
                    Some(e) => self.compile_expr(e)?,
                    None => {
                        let idx = self.const_idx(Const::Null);
                        self.emit(Op::LdaConst { idx });
                    }
                }
                self.cur_span = s.span;
                self.emit(Op::Return);
            }
            StmtKind::Throw(e) => {
                self.compile_expr(e)?;
                self.cur_span = s.span;
                self.emit(Op::Throw);
            }
            StmtKind::If(cond, then, els) => {
                self.compile_expr(cond)?;
                self.cur_span = s.span;
                let jf = self.emit(Op::JumpIfFalse { target: 0 });
                self.compile_block(then)?;
                match els {
                    Some(els) => {
                        self.cur_span = s.span;
                        let jend = self.emit(Op::Jump { target: 0 });
                        let else_at = self.here();
                        self.patch(jf, else_at);
                        self.compile_block(els)?;
                        let end = self.here();
                        self.patch(jend, end);
                    }
                    None => {
                        let end = self.here();
                        self.patch(jf, end);
                    }
                }
            }
            StmtKind::While(cond, body) => {
                let head = self.here();
                self.compile_expr(cond)?;
                self.cur_span = s.span;
                let jf = self.emit(Op::JumpIfFalse { target: 0 });
                self.compile_block(body)?;
                self.cur_span = s.span;
                self.emit(Op::Jump { target: head });
                let end = self.here();
                self.patch(jf, end);
            }
            StmtKind::For(init, cond, step, body) => {
                if let Some(init) = init {
                    self.compile_stmt(init)?;
                }
                let head = self.here();
                let jf = match cond {
                    Some(cond) => {
                        self.cur_span = s.span;
                        self.compile_expr(cond)?;
                        self.cur_span = s.span;
                        Some(self.emit(Op::JumpIfFalse { target: 0 }))
                    }
                    None => None,
                };
                self.compile_block(body)?;
                if let Some(step) = step {
                    self.compile_stmt(step)?;
                }
                self.cur_span = s.span;
                self.emit(Op::Jump { target: head });
                let end = self.here();
                if let Some(jf) = jf {
                    self.patch(jf, end);
                }
            }
            StmtKind::TryCatch(try_block, name, catch_block, catch_span) => {
                let reg = self.resolve(name, *catch_span)?;
                let enter = self.emit(Op::EnterTry { target: 0 });
                self.compile_block(try_block)?;
                self.cur_span = s.span;
                self.emit(Op::LeaveTry);
                let jend = self.emit(Op::Jump { target: 0 });
                let catch_at = self.here();
                self.patch(enter, catch_at);
                // The unwinder leaves the thrown message in the accumulator.
                self.cur_span = *catch_span;
                self.emit(Op::Star { reg });
                self.compile_block(catch_block)?;
                let end = self.here();
                self.patch(jend, end);
            }
        }
        Ok(())
    }

    fn compile_expr(&mut self, e: &Expr) -> Result<(), CompileError> {
        match &e.kind {
            ExprKind::Literal(lit) => {
                let c = match lit {
                    Lit::Int(n) => Const::Int(*n),
                    Lit::Str(s) => Const::Str(s.clone()),
                    Lit::Bool(b) => Const::Bool(*b),
                    Lit::Null => Const::Null,
                };
                let idx = self.const_idx(c);
                self.emit(Op::LdaConst { idx });
            }
            ExprKind::Identifier(name) => {
                let reg = self.resolve(name, e.span)?;
                self.emit(Op::Ldar { reg });
            }
            ExprKind::Unary(op, inner) => {
                self.compile_expr(inner)?;
                self.emit(match op {
                    UnOp::Neg => Op::Neg,
                    UnOp::Not => Op::Not,
                });
            }
            ExprKind::Binary(BinOp::And, l, r) => {
                self.compile_expr(l)?;
                let j = self.emit(Op::JumpIfFalse { target: 0 });
                self.compile_expr(r)?;
                let end = self.here();
                self.patch(j, end);
            }
            ExprKind::Binary(BinOp::Or, l, r) => {
                self.compile_expr(l)?;
                let j = self.emit(Op::JumpIfTrue { target: 0 });
                self.compile_expr(r)?;
                let end = self.here();
                self.patch(j, end);
            }
            ExprKind::Binary(BinOp::Gt, l, r) | ExprKind::Binary(BinOp::Ge, l, r) => {
                // a > b lowers to b < a; evaluation order stays left-to-right.
                let strict = matches!(e.kind, ExprKind::Binary(BinOp::Gt, _, _));
                self.compile_expr(l)?;
                let ta = self.alloc_temp();
                self.emit(Op::Star { reg: ta });
                self.compile_expr(r)?;
                let tb = self.alloc_temp();
                self.emit(Op::Star { reg: tb });
                self.emit(Op::Ldar { reg: ta });
                self.emit(if strict { Op::TestLess { reg: tb } } else { Op::TestLessEq { reg: tb } });
                self.free_temps(2);
            }
            ExprKind::Binary(op, l, r) => {
                self.compile_expr(l)?;
                let t = self.alloc_temp();
                self.emit(Op::Star { reg: t });
                self.compile_expr(r)?;
                match op {
                    BinOp::Add => self.emit(Op::Add { reg: t }),
                    BinOp::Sub => self.emit(Op::Sub { reg: t }),
                    BinOp::Mul => self.emit(Op::Mul { reg: t }),
                    BinOp::Div => self.emit(Op::Div { reg: t }),
                    BinOp::Mod => self.emit(Op::Mod { reg: t }),
                    BinOp::Eq => self.emit(Op::TestEqual { reg: t }),
                    BinOp::Ne => {
                        self.emit(Op::TestEqual { reg: t });
                        self.emit(Op::Not)
                    }
                    BinOp::Lt => self.emit(Op::TestLess { reg: t }),
                    BinOp::Le => self.emit(Op::TestLessEq { reg: t }),
                    BinOp::And | BinOp::Or | BinOp::Gt | BinOp::Ge => unreachable!(),
                };
                self.free_temps(1);
            }
            ExprKind::Call(name, args) => {
                if !self.declared_fns.contains(&name.as_str()) {
                    return Err(CompileError::new(
                        e.span,
                        format!("call to undeclared function `{name}`"),
                    ));
                }
                let argc = args.len() as u16;
                let base = self.named_total + self.temp_depth;
                for a in args {
                    let t = self.alloc_temp();
                    self.compile_expr(a)?;
                    self.emit(Op::Star { reg: t });
                }
                let name_idx = self.const_idx(Const::Str(name.as_bytes().to_vec()));
                self.emit(Op::CallFunc { name_idx, arg_base: base, argc });
                self.free_temps(argc);
            }
            ExprKind::MethodCall(obj, name, args) => {
                let arity = member_arity(name).ok_or_else(|| {
                    CompileError::new(e.span, format!("unknown string member `{name}`"))
                })?;
                if args.len() != arity {
                    return Err(CompileError::new(
                        e.span,
                        format!("member `{name}` takes {arity} argument(s), got {}", args.len()),
                    ));
                }
                match name.as_str() {
                    "length" => {
                        self.compile_expr(obj)?;
                        self.emit(Op::StrLen);
                    }
                    "substring" => {
                        self.compile_expr(obj)?;
                        let tobj = self.alloc_temp();
                        self.emit(Op::Star { reg: tobj });
                        self.compile_expr(&args[0])?;
                        let ta = self.alloc_temp();
                        self.emit(Op::Star { reg: ta });
                        self.compile_expr(&args[1])?;
                        self.emit(Op::StrSubstring { obj: tobj, start: ta });
                        self.free_temps(2);
                    }
                    _ => {
                        self.compile_expr(obj)?;
                        let tobj = self.alloc_temp();
                        self.emit(Op::Star { reg: tobj });
                        self.compile_expr(&args[0])?;
                        self.emit(match name.as_str() {
                            "charAt" => Op::StrCharAt { obj: tobj },
                            "charCodeAt" => Op::StrCharCode { obj: tobj },
                            "indexOf" => Op::StrIndexOf { obj: tobj },
                            "concat" => Op::StrConcat { obj: tobj },
                            other => unreachable!("member {other}"),
                        });
                        self.free_temps(1);
                    }
                }
            }
            ExprKind::Index(obj, idx) => {
                self.compile_expr(obj)?;
                let tobj = self.alloc_temp();
                self.emit(Op::Star { reg: tobj });
                self.compile_expr(idx)?;
                self.emit(Op::StrCharAt { obj: tobj });
                self.free_temps(1);
            }
        }
        Ok(())
    }
}

fn collect_locals(
    block: &[Stmt],
    named: &mut BTreeMap<String, u16>,
    next: &mut u16,
) -> Result<(), CompileError> {
    let declare = |name: &str, span: Span, named: &mut BTreeMap<String, u16>, next: &mut u16| {
        if named.contains_key(name) {
            return Err(CompileError::new(span, format!("redeclaration of `{name}`")));
        }
        named.insert(name.to_string(), *next);
        *next += 1;
        Ok(())
    };
    for s in block {
        match &s.kind {
            StmtKind::VarDecl(name, _) => declare(name, s.span, named, next)?,
            StmtKind::If(_, t, e) => {
                collect_locals(t, named, next)?;
                if let Some(e) = e {
                    collect_locals(e, named, next)?;
                }
            }
            StmtKind::While(_, b) => collect_locals(b, named, next)?,
            StmtKind::For(init, _, step, body) => {
                if let Some(init) = init {
                    collect_locals(std::slice::from_ref(init), named, next)?;
                }
                if let Some(step) = step {
                    collect_locals(std::slice::from_ref(step), named, next)?;
                }
                collect_locals(body, named, next)?;
            }
            StmtKind::TryCatch(t, name, c, catch_span) => {
                collect_locals(t, named, next)?;
                declare(name, *catch_span, named, next)?;
                collect_locals(c, named, next)?;
            }
            _ => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_text;

    fn compile_one(text: &str) -> BytecodeFunction {
        let p = parse_text(text).unwrap();
        compile(&p).unwrap().remove(0)
    }

    #[test]
    fn canonical_accumulator_lowering() {
        let f = compile_one("function f(){return 1+2;}");
        assert_eq!(
            &f.code[..5],
            &[
                Op::LdaConst { idx: 0 },
                Op::Star { reg: 0 },
                Op::LdaConst { idx: 1 },
                Op::Add { reg: 0 },
                Op::Return,
            ]
        );
        assert_eq!(f.constants[0], Const::Int(1));
        assert_eq!(f.constants[1], Const::Int(2));
    }

    #[test]
    fn if_throw_produces_single_conditional_jump() {
        let f = compile_one(r#"function f(s){if(s.length==0){throw "e";} return s;}"#);
        f.verify().unwrap();
        let jumps: Vec<(usize, u32)> = f
            .code
            .iter()
            .enumerate()
            .filter_map(|(i, op)| match op {
                Op::JumpIfFalse { target } => Some((i, *target)),
                _ => None,
            })
            .collect();
        assert_eq!(jumps.len(), 1);
        let (_, target) = jumps[0];
        let throw_at = f.code.iter().position(|op| matches!(op, Op::Throw)).unwrap();
        assert_eq!(target as usize, throw_at + 1);
    }

    #[test]
    fn undeclared_function_call_is_an_error() {
        let p = parse_text("function f(){return g();}").unwrap();
        let err = compile(&p).unwrap_err();
        assert!(err.message.contains("g"));
    }

    #[test]
    fn undeclared_identifier_is_an_error() {
        let p = parse_text("function f(){return x;}").unwrap();
        assert!(compile(&p).is_err());
    }

    #[test]
    fn compile_is_deterministic() {
        let text = "function f(s){var n = 0; while(n < s.length){n = n + 1;} return n;}";
        let p = parse_text(text).unwrap();
        assert_eq!(compile(&p).unwrap(), compile(&p).unwrap());
    }

    #[test]
    fn compiler_output_verifies_on_varied_programs() {
        for text in [
            "function f(){return 1;}",
            "function f(a,b){return a.concat(b.charAt(0));}",
            "function f(s){for(var i=0;i<s.length;i=i+1){if(s[i]==\"a\"){return i;}} return 0-1;}",
            "function f(x){try{ if(x.length > 2){throw \"big\";} }catch(e){return e;} return x;}",
            "function f(n){var t = \"\"; while(n > 0 && t.length <= 6){t = t.concat(\"ab\"); n = n - 1;} return t;}",
        ] {
            let p = parse_text(text).unwrap();
            for f in compile(&p).unwrap() {
                f.verify().unwrap_or_else(|e| panic!("{text}: {e}"));
            }
        }
    }
}
