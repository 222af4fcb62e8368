//! Trace file format (`.trace`).
//!
//! ```text
//! TRACE v1
//! func <name>
//! arg <i> <type> <encoded-value>
//! sym <id> <base> <len> <param> <name>
//! outcome returned <type> <encoded>
//! outcome handled|unhandled <percent-message> <span>
//! <seq> <tag> <originPc> <KIND> <operands...>
//! ```
//! Integers are decimal, strings percent-encoded, spans `line:col+len`.

use super::{MicroOp, MicroOpKind, MicroTrace, SymbolDecl, Tag};
use crate::interp::OutcomeKind;
use crate::util::{percent_decode, percent_encode, Span};
use crate::value::Value;
use crate::TRACE_FORMAT_VERSION;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("trace parse error on line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

pub fn dump_trace(trace: &MicroTrace) -> String {
    let mut out = String::new();
    out.push_str(TRACE_FORMAT_VERSION);
    out.push('\n');
    out.push_str(&format!("func {}\n", trace.function_name));
    for (i, arg) in trace.input_snapshot.iter().enumerate() {
        out.push_str(&format!("arg {i} {} {}\n", arg.type_token(), arg.encode()));
    }
    for sym in &trace.symbol_table {
        out.push_str(&format!(
            "sym {} {} {} {} {}\n",
            sym.id, sym.base, sym.len, sym.param_index, sym.name
        ));
    }
    match &trace.outcome {
        OutcomeKind::Returned(v) => {
            out.push_str(&format!("outcome returned {} {}\n", v.type_token(), v.encode()));
        }
        OutcomeKind::HandledException { message, catch_span } => {
            out.push_str(&format!(
                "outcome handled {} {}\n",
                percent_encode(message.as_bytes()),
                catch_span
            ));
        }
        OutcomeKind::UnhandledException { message, span } => {
            out.push_str(&format!(
                "outcome unhandled {} {}\n",
                percent_encode(message.as_bytes()),
                span
            ));
        }
    }
    for (seq, op) in trace.ops.iter().enumerate() {
        out.push_str(&format!("{seq} {} {} {}", op.tag.token(), op.origin_pc, op.kind.name()));
        for v in &op.operands {
            out.push_str(&format!(" {v}"));
        }
        out.push('\n');
    }
    out
}

pub fn load_trace(text: &str) -> Result<MicroTrace, TraceParseError> {
    let err = |line: usize, message: String| TraceParseError { line, message };
    let mut lines = text.lines().enumerate();
    let (_, version) =
        lines.next().ok_or_else(|| err(1, "empty trace file".into()))?;
    if version.trim() != TRACE_FORMAT_VERSION {
        return Err(err(1, format!("expected `{TRACE_FORMAT_VERSION}`, got `{version}`")));
    }

    let mut function_name = String::new();
    let mut input_snapshot = Vec::new();
    let mut symbol_table = Vec::new();
    let mut outcome = None;
    let mut ops = Vec::new();

    for (idx, raw) in lines {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let head = parts.next().unwrap();
        match head {
            "func" => {
                function_name =
                    parts.next().ok_or_else(|| err(lineno, "missing name".into()))?.to_string();
            }
            "arg" => {
                let _i: usize = parse_tok(&mut parts, lineno, "index")?;
                let ty = parts.next().ok_or_else(|| err(lineno, "missing type".into()))?;
                let enc = parts.next().ok_or_else(|| err(lineno, "missing value".into()))?;
                let v = Value::decode(ty, enc).map_err(|m| err(lineno, m))?;
                input_snapshot.push(v);
            }
            "sym" => {
                let id: u32 = parse_tok(&mut parts, lineno, "id")?;
                let base: u64 = parse_tok(&mut parts, lineno, "base")?;
                let len: usize = parse_tok(&mut parts, lineno, "len")?;
                let param_index: usize = parse_tok(&mut parts, lineno, "param")?;
                let name =
                    parts.next().ok_or_else(|| err(lineno, "missing name".into()))?.to_string();
                symbol_table.push(SymbolDecl { id, name, base, len, param_index });
            }
            "outcome" => {
                let kind = parts.next().ok_or_else(|| err(lineno, "missing kind".into()))?;
                outcome = Some(match kind {
                    "returned" => {
                        let ty = parts.next().ok_or_else(|| err(lineno, "missing type".into()))?;
                        let enc = parts.next().ok_or_else(|| err(lineno, "missing value".into()))?;
                        OutcomeKind::Returned(Value::decode(ty, enc).map_err(|m| err(lineno, m))?)
                    }
                    "handled" | "unhandled" => {
                        let enc = parts.next().ok_or_else(|| err(lineno, "missing message".into()))?;
                        let sp = parts.next().ok_or_else(|| err(lineno, "missing span".into()))?;
                        let message = String::from_utf8_lossy(
                            &percent_decode(enc).map_err(|m| err(lineno, m))?,
                        )
                        .into_owned();
                        let span: Span = sp.parse().map_err(|m: String| err(lineno, m))?;
                        if kind == "handled" {
                            OutcomeKind::HandledException { message, catch_span: span }
                        } else {
                            OutcomeKind::UnhandledException { message, span }
                        }
                    }
                    other => return Err(err(lineno, format!("unknown outcome `{other}`"))),
                });
            }
            _ => {
                // `<seq> <tag> <originPc> <KIND> <operands...>`
                let tag = match parts.next() {
                    Some("C") => Tag::ControlFlow,
                    Some("V") => Tag::Verification,
                    other => return Err(err(lineno, format!("bad tag {other:?}"))),
                };
                let origin_pc: u32 = parse_tok(&mut parts, lineno, "originPc")?;
                let kind_name =
                    parts.next().ok_or_else(|| err(lineno, "missing op kind".into()))?;
                let kind = MicroOpKind::from_name(kind_name)
                    .ok_or_else(|| err(lineno, format!("unknown micro-op `{kind_name}`")))?;
                if kind.tag() != tag {
                    return Err(err(lineno, format!("tag mismatch for {kind_name}")));
                }
                let operands: Vec<i64> = parts
                    .map(|t| t.parse().map_err(|_| err(lineno, format!("bad operand `{t}`"))))
                    .collect::<Result<_, _>>()?;
                ops.push(MicroOp { kind, operands, origin_pc, tag });
            }
        }
    }

    Ok(MicroTrace {
        ops,
        function_name,
        input_snapshot,
        symbol_table,
        outcome: outcome.ok_or_else(|| err(0, "missing outcome line".into()))?,
    })
}

fn parse_tok<'s, T: std::str::FromStr>(
    parts: &mut impl Iterator<Item = &'s str>,
    line: usize,
    what: &str,
) -> Result<T, TraceParseError> {
    parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| TraceParseError { line, message: format!("bad or missing {what}") })
}
