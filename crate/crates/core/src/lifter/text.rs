//! Lifted-module file format (`.sir`).
//!
//! ```text
//! MODULE v1
//! SYM <id> <base> <len> <param> <name>
//! MEM <base> <region-len> <hex-initial-bytes|->
//! BLOCK <label>
//! %<id> = <Kind> <operands...>
//! GOTO <label>
//! HALT <kind> <payload...>
//! ```
//! The first BLOCK is the module entry. `MEM` lines cover every
//! non-symbol region; symbol regions are implied by `SYM` lines at the
//! shared argument-region capacity.

use super::{
    HaltKind, HaltPayload, InstrKind, IrBlock, IrInstr, IrModule, MemoryImage, Terminator, ValueId,
};
use crate::tracer::memory::{Region, RegionClass, ARG_CAPACITY};
use crate::tracer::SymbolDecl;
use crate::MODULE_FORMAT_VERSION;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("module parse error on line {line}: {message}")]
pub struct IrParseError {
    pub line: usize,
    pub message: String,
}

pub fn dump_ir(module: &IrModule) -> String {
    let mut out = String::new();
    out.push_str(MODULE_FORMAT_VERSION);
    out.push('\n');
    for s in &module.symbol_decls {
        out.push_str(&format!("SYM {} {} {} {} {}\n", s.id, s.base, s.len, s.param_index, s.name));
    }
    let symbol_bases: Vec<u64> = module.symbol_decls.iter().map(|s| s.base).collect();
    for r in &module.memory.regions {
        if symbol_bases.contains(&r.base) {
            continue;
        }
        let mut hex = String::new();
        let mut k = 0u64;
        while let Some(&b) = module.memory.bytes.get(&(r.base + k)) {
            hex.push_str(&format!("{b:02x}"));
            k += 1;
            if k as usize >= r.len {
                break;
            }
        }
        if hex.is_empty() {
            hex.push('-');
        }
        out.push_str(&format!("MEM {} {} {hex}\n", r.base, r.len));
    }
    for b in &module.blocks {
        out.push_str(&format!("BLOCK {}\n", b.label));
        for i in &b.instrs {
            out.push_str(&format!("%{} = {}", i.result, i.kind.name()));
            match &i.kind {
                InstrKind::Const(v) => out.push_str(&format!(" {v}")),
                InstrKind::MakeSymbolic(sym) => out.push_str(&format!(" {sym}")),
                InstrKind::AssertPathTaken { expected, origin_pc, target_pc } => {
                    out.push_str(&format!(
                        " %{} {} {origin_pc} {target_pc}",
                        i.operands[0], *expected as u8
                    ));
                }
                _ => {
                    for v in &i.operands {
                        out.push_str(&format!(" %{v}"));
                    }
                }
            }
            out.push('\n');
        }
        match &b.terminator {
            Terminator::FallThrough(next) => out.push_str(&format!("GOTO {next}\n")),
            Terminator::Halt { kind, payload } => {
                out.push_str(&format!("HALT {}", kind.token()));
                match payload {
                    HaltPayload::Null => out.push_str(" null"),
                    HaltPayload::Int(v) => out.push_str(&format!(" int %{v}")),
                    HaltPayload::Bool(v) => out.push_str(&format!(" bool %{v}")),
                    HaltPayload::Str(b, l) => out.push_str(&format!(" str %{b} %{l}")),
                }
                out.push('\n');
            }
        }
    }
    out
}

pub fn load_ir(text: &str) -> Result<IrModule, IrParseError> {
    let err = |line: usize, message: String| IrParseError { line, message };
    let mut lines = text.lines().enumerate();
    let (_, version) = lines.next().ok_or_else(|| err(1, "empty module file".into()))?;
    if version.trim() != MODULE_FORMAT_VERSION {
        return Err(err(1, format!("expected `{MODULE_FORMAT_VERSION}`, got `{version}`")));
    }

    let mut symbol_decls: Vec<SymbolDecl> = Vec::new();
    let mut memory = MemoryImage::default();
    let mut blocks: Vec<IrBlock> = Vec::new();
    let mut current: Option<(String, Vec<IrInstr>)> = None;

    for (idx, raw) in lines {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().unwrap();
        match head {
            "SYM" => {
                let id: u32 = tok(&mut parts, lineno, "id")?;
                let base: u64 = tok(&mut parts, lineno, "base")?;
                let len: usize = tok(&mut parts, lineno, "len")?;
                let param_index: usize = tok(&mut parts, lineno, "param")?;
                let name = parts
                    .next()
                    .ok_or_else(|| err(lineno, "missing symbol name".into()))?
                    .to_string();
                memory.regions.push(Region {
                    base,
                    len: ARG_CAPACITY,
                    class: RegionClass::StringData,
                });
                symbol_decls.push(SymbolDecl { id, name, base, len, param_index });
            }
            "MEM" => {
                let base: u64 = tok(&mut parts, lineno, "base")?;
                let len: usize = tok(&mut parts, lineno, "region length")?;
                let hex = parts.next().ok_or_else(|| err(lineno, "missing bytes".into()))?;
                memory.regions.push(Region { base, len, class: RegionClass::StringData });
                if hex != "-" {
                    if hex.len() % 2 != 0 {
                        return Err(err(lineno, "odd hex length".into()));
                    }
                    for k in 0..hex.len() / 2 {
                        let b = u8::from_str_radix(&hex[2 * k..2 * k + 2], 16)
                            .map_err(|_| err(lineno, "bad hex".into()))?;
                        memory.bytes.insert(base + k as u64, b);
                    }
                }
            }
            "BLOCK" => {
                if let Some((label, instrs)) = current.take() {
                    return Err(err(
                        lineno,
                        format!("block `{label}` with {} instrs lacks a terminator", instrs.len()),
                    ));
                }
                let label =
                    parts.next().ok_or_else(|| err(lineno, "missing label".into()))?.to_string();
                current = Some((label, Vec::new()));
            }
            "GOTO" => {
                let (label, instrs) =
                    current.take().ok_or_else(|| err(lineno, "GOTO outside block".into()))?;
                let next =
                    parts.next().ok_or_else(|| err(lineno, "missing target".into()))?.to_string();
                blocks.push(IrBlock { label, instrs, terminator: Terminator::FallThrough(next) });
            }
            "HALT" => {
                let (label, instrs) =
                    current.take().ok_or_else(|| err(lineno, "HALT outside block".into()))?;
                let kind = match parts.next() {
                    Some("returned") => HaltKind::Returned,
                    Some("handled") => HaltKind::Handled,
                    Some("unhandled") => HaltKind::Unhandled,
                    other => return Err(err(lineno, format!("bad halt kind {other:?}"))),
                };
                let payload = match parts.next() {
                    Some("null") => HaltPayload::Null,
                    Some("int") => HaltPayload::Int(vid(&mut parts, lineno)?),
                    Some("bool") => HaltPayload::Bool(vid(&mut parts, lineno)?),
                    Some("str") => {
                        let b = vid(&mut parts, lineno)?;
                        let l = vid(&mut parts, lineno)?;
                        HaltPayload::Str(b, l)
                    }
                    other => return Err(err(lineno, format!("bad halt payload {other:?}"))),
                };
                blocks.push(IrBlock { label, instrs, terminator: Terminator::Halt { kind, payload } });
            }
            _ => {
                let (_, instrs) = current
                    .as_mut()
                    .ok_or_else(|| err(lineno, "instruction outside block".into()))?;
                let result: ValueId = head
                    .strip_prefix('%')
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| err(lineno, format!("bad result id `{head}`")))?;
                match parts.next() {
                    Some("=") => {}
                    other => return Err(err(lineno, format!("expected `=`, got {other:?}"))),
                }
                let kind_name = parts.next().ok_or_else(|| err(lineno, "missing kind".into()))?;
                let rest: Vec<&str> = parts.collect();
                let (kind, operands) = parse_instr(kind_name, &rest, lineno)?;
                instrs.push(IrInstr { result, kind, operands });
            }
        }
    }
    if let Some((label, _)) = current {
        return Err(err(0, format!("block `{label}` lacks a terminator")));
    }
    let entry = blocks
        .first()
        .map(|b| b.label.clone())
        .ok_or_else(|| err(0, "module has no blocks".into()))?;
    memory.regions.sort_by_key(|r| r.base);
    Ok(IrModule { entry, blocks, symbol_decls, memory })
}

fn parse_instr(
    name: &str,
    rest: &[&str],
    lineno: usize,
) -> Result<(InstrKind, Vec<ValueId>), IrParseError> {
    let err = |message: String| IrParseError { line: lineno, message };
    let vids = |toks: &[&str]| -> Result<Vec<ValueId>, IrParseError> {
        toks.iter()
            .map(|t| {
                t.strip_prefix('%')
                    .and_then(|x| x.parse().ok())
                    .ok_or_else(|| err(format!("bad value id `{t}`")))
            })
            .collect()
    };
    Ok(match name {
        "Const" => {
            let v: i64 =
                rest.first().and_then(|t| t.parse().ok()).ok_or_else(|| err("bad const".into()))?;
            (InstrKind::Const(v), vec![])
        }
        "MakeSymbolic" => {
            let sym: u32 =
                rest.first().and_then(|t| t.parse().ok()).ok_or_else(|| err("bad symbol".into()))?;
            (InstrKind::MakeSymbolic(sym), vec![])
        }
        "AssertPathTaken" => {
            if rest.len() != 4 {
                return Err(err("AssertPathTaken takes cond, expected, originPc, targetPc".into()));
            }
            let cond = vids(&rest[..1])?;
            let expected = match rest[1] {
                "0" => false,
                "1" => true,
                other => return Err(err(format!("bad expected flag `{other}`"))),
            };
            let origin_pc: u32 =
                rest[2].parse().map_err(|_| err("bad origin pc".into()))?;
            let target_pc: u32 =
                rest[3].parse().map_err(|_| err("bad target pc".into()))?;
            (InstrKind::AssertPathTaken { expected, origin_pc, target_pc }, cond)
        }
        _ => {
            let kind = match name {
                "Add" => InstrKind::Add,
                "Sub" => InstrKind::Sub,
                "Mul" => InstrKind::Mul,
                "Div" => InstrKind::Div,
                "Mod" => InstrKind::Mod,
                "CmpEq" => InstrKind::CmpEq,
                "CmpLt" => InstrKind::CmpLt,
                "CmpLe" => InstrKind::CmpLe,
                "Not" => InstrKind::Not,
                "Select" => InstrKind::Select,
                "ReadMem8" => InstrKind::ReadMem8,
                "WriteMem8" => InstrKind::WriteMem8,
                "LogError" => InstrKind::LogError,
                other => return Err(err(format!("unknown instruction `{other}`"))),
            };
            (kind, vids(rest)?)
        }
    })
}

fn tok<'s, T: std::str::FromStr>(
    parts: &mut impl Iterator<Item = &'s str>,
    line: usize,
    what: &str,
) -> Result<T, IrParseError> {
    parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| IrParseError { line, message: format!("bad or missing {what}") })
}

fn vid<'s>(
    parts: &mut impl Iterator<Item = &'s str>,
    line: usize,
) -> Result<ValueId, IrParseError> {
    parts
        .next()
        .and_then(|t| t.strip_prefix('%'))
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| IrParseError { line, message: "bad value id".into() })
}

#[cfg(test)]
mod tests {
    use super::super::{build_entry, lift};
    use super::*;
    use crate::interp::OutcomeKind;
    use crate::tracer::MicroTrace;
    use crate::value::Value;

    #[test]
    fn empty_module_round_trips() {
        let trace = MicroTrace {
            ops: vec![],
            function_name: "f".into(),
            input_snapshot: vec![],
            symbol_table: vec![],
            outcome: OutcomeKind::Returned(Value::Null),
        };
        let module = build_entry(lift(&trace).unwrap());
        let text = dump_ir(&module);
        let back = load_ir(&text).unwrap();
        assert_eq!(back, module);
        assert_eq!(dump_ir(&back), text);
    }

    #[test]
    fn rejects_unknown_version_and_stray_instrs() {
        assert!(load_ir("MODULE v2\n").is_err());
        assert!(load_ir("MODULE v1\n%0 = Const 1\n").is_err(), "instruction outside block");
        assert!(load_ir("MODULE v1\nBLOCK a\n").is_err(), "unterminated block");
    }
}
