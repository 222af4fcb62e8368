//! Concolic engine: symbolic replay of lifted modules, branch negation,
//! bounded string solving, and the generational test-case loop.

pub mod expr;
mod generate;
mod replay;
mod solver;

pub use expr::{Bindings, ExprRef, SymExpr};
pub use generate::{generate, GenerateError, GenerateReport};
pub use replay::{symbolic_replay, ReplayError};
pub use solver::{negate_and_solve, SolveOutcome, SolverConfig};

use crate::util::{decode_str_token, encode_str_token, fnv1a64, Span};
use crate::value::Value;
use serde::{Deserialize, Serialize};

/// One observed branch condition: the expression, the direction the trace
/// took, and the bytecode that branched.
#[derive(Debug, Clone)]
pub struct PcEntry {
    pub expr: ExprRef,
    pub taken: bool,
    pub origin_pc: u32,
}

/// Ordered branch conditions of one path, aligned with the module's path
/// assertions.
pub type PathCondition = Vec<PcEntry>;

fn entry_bytes(out: &mut Vec<u8>, e: &PcEntry, taken: bool) {
    out.extend_from_slice(&e.origin_pc.to_le_bytes());
    out.push(taken as u8);
    // The expression matters: unrolled string work pins concrete values,
    // so two runs can share every (site, direction) pair yet constrain
    // different lengths or bytes. Those are distinct paths.
    out.extend_from_slice(e.expr.to_string().as_bytes());
    out.push(0);
}

/// Stable signature of a path: the branch conditions with their
/// directions, in order.
pub fn path_signature(pc: &[PcEntry]) -> u64 {
    let mut bytes = Vec::with_capacity(pc.len() * 24);
    for e in pc {
        entry_bytes(&mut bytes, e, e.taken);
    }
    fnv1a64(&bytes)
}

/// Signature of a negation attempt: the path prefix up to `k` plus the
/// flipped direction at `k`.
pub fn negation_signature(pc: &[PcEntry], k: usize) -> u64 {
    let mut bytes = Vec::with_capacity(k * 24 + 24);
    for e in &pc[..k] {
        entry_bytes(&mut bytes, e, e.taken);
    }
    entry_bytes(&mut bytes, &pc[k], !pc[k].taken);
    fnv1a64(&bytes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Provenance {
    RandomSeed,
    NegatedBranch { parent: u32, branch: usize },
}

/// A concrete input vector for one function under test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub id: u32,
    pub function: String,
    pub generation: u32,
    pub provenance: Provenance,
    /// Full argument vector, symbolic positions included.
    pub args: Vec<Value>,
    /// Symbol id to bytes for the symbolized positions.
    pub bindings: Bindings,
}

/// Serialized form (`.tc.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestCaseFile {
    pub id: u32,
    pub function: String,
    pub generation: u32,
    pub provenance: Provenance,
    pub args: Vec<TestCaseArg>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestCaseArg {
    #[serde(rename = "type")]
    pub ty: String,
    pub value: String,
}

impl TestCase {
    pub fn to_file(&self) -> TestCaseFile {
        TestCaseFile {
            id: self.id,
            function: self.function.clone(),
            generation: self.generation,
            provenance: self.provenance.clone(),
            args: self
                .args
                .iter()
                .map(|a| TestCaseArg {
                    ty: match a {
                        Value::Str(_) => "string".to_string(),
                        other => other.type_token().to_string(),
                    },
                    value: match a {
                        Value::Str(s) => encode_str_token(s),
                        other => other.encode(),
                    },
                })
                .collect(),
        }
    }
}

impl TestCaseFile {
    pub fn args_as_values(&self) -> Result<Vec<Value>, String> {
        self.args
            .iter()
            .map(|a| match a.ty.as_str() {
                "string" => decode_str_token(&a.value).map(Value::Str),
                other => Value::decode(other, &a.value),
            })
            .collect()
    }
}

/// Exception seen while generating, tied to the test case that hit it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExceptionInfo {
    pub kind: String,
    pub message: String,
    pub span: Span,
    #[serde(rename = "testCaseId")]
    pub test_case_id: u32,
}

#[cfg(test)]
mod tests {
    use super::*;
    use expr::{cint, mk_eq};

    #[test]
    fn path_signatures_distinguish_directions() {
        let taken = PcEntry { expr: mk_eq(cint(1), cint(1)), taken: true, origin_pc: 4 };
        let not_taken = PcEntry { expr: taken.expr.clone(), taken: false, origin_pc: 4 };
        assert_ne!(
            path_signature(std::slice::from_ref(&taken)),
            path_signature(std::slice::from_ref(&not_taken))
        );
        // Negating index 0 of a taken branch signs like the not-taken path.
        assert_eq!(negation_signature(&[taken], 0), path_signature(&[not_taken]));
    }

    #[test]
    fn test_case_file_round_trips_args() {
        let tc = TestCase {
            id: 3,
            function: "f".into(),
            generation: 1,
            provenance: Provenance::NegatedBranch { parent: 1, branch: 0 },
            args: vec![Value::str_from("a b"), Value::Int(4)],
            bindings: Bindings::new(),
        };
        let file = tc.to_file();
        let json = serde_json::to_string(&file).unwrap();
        let back: TestCaseFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.args_as_values().unwrap(), tc.args);
        assert_eq!(back.provenance, tc.provenance);
    }
}
