//! Textual bytecode listings.
//!
//! `disassemble` produces one line per bytecode in the stable format
//! `idx: OP operands  ; span`, preceded by a `func` header and the
//! constant pool. `assemble` parses the same format; it exists for tests
//! and hand-built fixtures rather than as a user-facing input path.

use super::{BytecodeFunction, Const, Op};
use crate::util::{decode_str_token, encode_str_token, Span};

pub fn disassemble(f: &BytecodeFunction) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "func {} params={} frame={}\n",
        f.name, f.param_count, f.frame_size
    ));
    for (i, c) in f.constants.iter().enumerate() {
        let (ty, enc) = match c {
            Const::Int(n) => ("int", n.to_string()),
            Const::Str(s) => ("str", encode_str_token(s)),
            Const::Bool(b) => ("bool", b.to_string()),
            Const::Null => ("null", "-".to_string()),
        };
        out.push_str(&format!("const #{i} {ty} {enc}\n"));
    }
    for (i, op) in f.code.iter().enumerate() {
        let operands = op_operands(*op);
        let mut line = format!("{i}: {}", op.mnemonic());
        for v in operands {
            line.push_str(&format!(" {v}"));
        }
        out.push_str(&format!("{line}  ; {}\n", f.statement_map[i]));
    }
    out
}

fn op_operands(op: Op) -> Vec<i64> {
    match op {
        Op::LdaConst { idx } | Op::LdaParam { idx } => vec![idx as i64],
        Op::Ldar { reg } | Op::Star { reg } => vec![reg as i64],
        Op::Add { reg }
        | Op::Sub { reg }
        | Op::Mul { reg }
        | Op::Div { reg }
        | Op::Mod { reg }
        | Op::TestEqual { reg }
        | Op::TestLess { reg }
        | Op::TestLessEq { reg } => vec![reg as i64],
        Op::Jump { target } | Op::JumpIfFalse { target } | Op::JumpIfTrue { target } | Op::EnterTry { target } => {
            vec![target as i64]
        }
        Op::StrCharAt { obj } | Op::StrCharCode { obj } | Op::StrIndexOf { obj } | Op::StrConcat { obj } => {
            vec![obj as i64]
        }
        Op::StrSubstring { obj, start } => vec![obj as i64, start as i64],
        Op::CallFunc { name_idx, arg_base, argc } => {
            vec![name_idx as i64, arg_base as i64, argc as i64]
        }
        Op::PinSymbolic { param, sym } => vec![param as i64, sym as i64],
        Op::Neg | Op::Not | Op::StrLen | Op::Return | Op::Throw | Op::LeaveTry => vec![],
    }
}

fn op_from(mnemonic: &str, v: &[i64]) -> Result<Op, String> {
    let u16_at = |i: usize| -> Result<u16, String> {
        v.get(i)
            .and_then(|&x| u16::try_from(x).ok())
            .ok_or_else(|| format!("{mnemonic}: bad operand {i}"))
    };
    let u32_at = |i: usize| -> Result<u32, String> {
        v.get(i)
            .and_then(|&x| u32::try_from(x).ok())
            .ok_or_else(|| format!("{mnemonic}: bad operand {i}"))
    };
    let need = |n: usize| -> Result<(), String> {
        if v.len() == n {
            Ok(())
        } else {
            Err(format!("{mnemonic}: expected {n} operands, got {}", v.len()))
        }
    };
    Ok(match mnemonic {
        "LdaConst" => { need(1)?; Op::LdaConst { idx: u16_at(0)? } }
        "LdaParam" => { need(1)?; Op::LdaParam { idx: u16_at(0)? } }
        "Ldar" => { need(1)?; Op::Ldar { reg: u16_at(0)? } }
        "Star" => { need(1)?; Op::Star { reg: u16_at(0)? } }
        "Add" => { need(1)?; Op::Add { reg: u16_at(0)? } }
        "Sub" => { need(1)?; Op::Sub { reg: u16_at(0)? } }
        "Mul" => { need(1)?; Op::Mul { reg: u16_at(0)? } }
        "Div" => { need(1)?; Op::Div { reg: u16_at(0)? } }
        "Mod" => { need(1)?; Op::Mod { reg: u16_at(0)? } }
        "Neg" => { need(0)?; Op::Neg }
        "Not" => { need(0)?; Op::Not }
        "TestEqual" => { need(1)?; Op::TestEqual { reg: u16_at(0)? } }
        "TestLess" => { need(1)?; Op::TestLess { reg: u16_at(0)? } }
        "TestLessEq" => { need(1)?; Op::TestLessEq { reg: u16_at(0)? } }
        "Jump" => { need(1)?; Op::Jump { target: u32_at(0)? } }
        "JumpIfFalse" => { need(1)?; Op::JumpIfFalse { target: u32_at(0)? } }
        "JumpIfTrue" => { need(1)?; Op::JumpIfTrue { target: u32_at(0)? } }
        "StrLen" => { need(0)?; Op::StrLen }
        "StrCharAt" => { need(1)?; Op::StrCharAt { obj: u16_at(0)? } }
        "StrCharCode" => { need(1)?; Op::StrCharCode { obj: u16_at(0)? } }
        "StrIndexOf" => { need(1)?; Op::StrIndexOf { obj: u16_at(0)? } }
        "StrSubstring" => { need(2)?; Op::StrSubstring { obj: u16_at(0)?, start: u16_at(1)? } }
        "StrConcat" => { need(1)?; Op::StrConcat { obj: u16_at(0)? } }
        "CallFunc" => {
            need(3)?;
            Op::CallFunc { name_idx: u16_at(0)?, arg_base: u16_at(1)?, argc: u16_at(2)? }
        }
        "Return" => { need(0)?; Op::Return }
        "Throw" => { need(0)?; Op::Throw }
        "EnterTry" => { need(1)?; Op::EnterTry { target: u32_at(0)? } }
        "LeaveTry" => { need(0)?; Op::LeaveTry }
        "PinSymbolic" => { need(2)?; Op::PinSymbolic { param: u16_at(0)?, sym: u32_at(1)? } }
        other => return Err(format!("unknown mnemonic `{other}`")),
    })
}

/// Parse a disassembly listing back into a function.
pub fn assemble(text: &str) -> Result<BytecodeFunction, String> {
    let mut name = None;
    let mut param_count = 0u16;
    let mut frame_size = 0u16;
    let mut constants = Vec::new();
    let mut code = Vec::new();
    let mut spans = Vec::new();

    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("func ") {
            let mut parts = rest.split_whitespace();
            name = Some(parts.next().ok_or("missing function name")?.to_string());
            for p in parts {
                if let Some(v) = p.strip_prefix("params=") {
                    param_count = v.parse().map_err(|_| "bad params")?;
                } else if let Some(v) = p.strip_prefix("frame=") {
                    frame_size = v.parse().map_err(|_| "bad frame")?;
                }
            }
        } else if let Some(rest) = line.strip_prefix("const ") {
            let mut parts = rest.split_whitespace();
            let _idx = parts.next().ok_or("missing const index")?;
            let ty = parts.next().ok_or("missing const type")?;
            let enc = parts.next().ok_or("missing const value")?;
            constants.push(match ty {
                "int" => Const::Int(enc.parse().map_err(|_| "bad int const")?),
                "str" => Const::Str(decode_str_token(enc)?),
                "bool" => Const::Bool(enc.parse().map_err(|_| "bad bool const")?),
                "null" => Const::Null,
                other => return Err(format!("unknown const type `{other}`")),
            });
        } else {
            // `idx: OP operands  ; span`
            let (head, span_text) =
                line.split_once(';').ok_or_else(|| format!("missing span on `{line}`"))?;
            let (_, op_text) =
                head.split_once(':').ok_or_else(|| format!("missing index on `{line}`"))?;
            let mut parts = op_text.split_whitespace();
            let mnemonic = parts.next().ok_or("missing mnemonic")?;
            let operands: Vec<i64> = parts
                .map(|t| t.parse().map_err(|_| format!("bad operand `{t}`")))
                .collect::<Result<_, _>>()?;
            code.push(op_from(mnemonic, &operands)?);
            spans.push(span_text.trim().parse::<Span>()?);
        }
    }
    Ok(BytecodeFunction {
        name: name.ok_or("missing func header")?,
        param_count,
        frame_size,
        constants,
        code,
        statement_map: spans,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytecode::compile;
    use crate::frontend::parse_text;

    #[test]
    fn single_return_listing() {
        let f = BytecodeFunction {
            name: "r".into(),
            param_count: 0,
            frame_size: 0,
            constants: vec![],
            code: vec![Op::Return],
            statement_map: vec![Span::new(1, 1, 2)],
        };
        let text = disassemble(&f);
        assert!(text.lines().any(|l| l.starts_with("0: Return")), "{text}");
    }

    #[test]
    fn add_example_lists_in_order() {
        let p = parse_text("function f(){return 1+2;}").unwrap();
        let f = &compile(&p).unwrap()[0];
        let listing = disassemble(f);
        let body: Vec<String> = listing
            .lines()
            .filter(|l| !l.starts_with("func") && !l.starts_with("const"))
            .map(|l| l.split_whitespace().nth(1).unwrap().to_string())
            .collect();
        assert_eq!(&body[..5], &["LdaConst", "Star", "LdaConst", "Add", "Return"]);
    }

    #[test]
    fn disassembly_round_trips() {
        let text = r#"
function pick(s, t) {
  var i = s.indexOf(t);
  if (i < 0) { throw "missing"; }
  return s.substring(i, i + t.length);
}
"#;
        let p = parse_text(text).unwrap();
        for f in compile(&p).unwrap() {
            let listed = disassemble(&f);
            let back = assemble(&listed).unwrap();
            assert_eq!(back, f);
            // dump is line-stable
            assert_eq!(disassemble(&back), listed);
        }
    }
}
