//! Statement coverage instrumentation and exception findings.
//!
//! Coverage is counted on source statement spans, not bytecode indices: a
//! statement is covered when any bytecode mapped to its span executes.
//! The universe is the whole library (helpers included), so a function's
//! suite is measured against everything its calls can reach.

use crate::bytecode::CompiledProgram;
use crate::concolic::TestCase;
use crate::interp::{interpret_with, Observers, OutcomeKind, RunConfig};
use crate::util::Span;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Per-statement hit counts over a fixed statement universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageReport {
    /// (function, statement span) → hits. Zero-hit statements included.
    pub per_statement: BTreeMap<(String, Span), u64>,
    pub statements_total: usize,
    pub statements_covered: usize,
}

impl CoverageReport {
    pub fn empty(program: &CompiledProgram) -> Self {
        let per_statement =
            program.statement_universe().into_iter().map(|k| (k, 0)).collect();
        let mut r = CoverageReport { per_statement, statements_total: 0, statements_covered: 0 };
        r.recount();
        r
    }

    pub fn percent(&self) -> f64 {
        if self.statements_total == 0 {
            return 0.0;
        }
        100.0 * self.statements_covered as f64 / self.statements_total as f64
    }

    fn recount(&mut self) {
        self.statements_total = self.per_statement.len();
        self.statements_covered = self.per_statement.values().filter(|&&h| h > 0).count();
    }

    /// Add hits observed during one run. Hits outside the universe are
    /// ignored (spans only arise from the program's own statement maps).
    pub fn absorb(&mut self, hits: &BTreeMap<(String, Span), u64>) {
        for (key, h) in hits {
            if let Some(slot) = self.per_statement.get_mut(key) {
                *slot += h;
            }
        }
        self.recount();
    }

    /// Merge another report over the same universe.
    pub fn merge(&mut self, other: &CoverageReport) {
        for (key, h) in &other.per_statement {
            if let Some(slot) = self.per_statement.get_mut(key) {
                *slot += h;
            }
        }
        self.recount();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugFinding {
    pub function: String,
    /// "unhandled" or "handled".
    pub kind: String,
    pub message: String,
    pub span: Span,
    /// Test case id that reproduces this finding.
    pub witness: u32,
}

/// Replay `cases` through the reference interpreter with statement-hit
/// counting. Exceptions become findings, one per distinct
/// (span, message, kind).
pub fn instrument_and_run(
    program: &CompiledProgram,
    function: &str,
    cases: &[TestCase],
) -> (CoverageReport, Vec<BugFinding>) {
    let mut coverage = CoverageReport::empty(program);
    let mut findings: Vec<BugFinding> = Vec::new();
    let Some(func) = program.get(function) else {
        return (coverage, findings);
    };
    let cfg = RunConfig::default();
    for case in cases {
        let mut hits = BTreeMap::new();
        let outcome = {
            let mut obs = Observers { coverage: Some(&mut hits), registers: None };
            interpret_with(func, &case.args, program, &cfg, &mut obs)
        };
        let Ok(outcome) = outcome else {
            continue;
        };
        coverage.absorb(&hits);
        let (kind, message, span) = match outcome.kind {
            OutcomeKind::Returned(_) => continue,
            OutcomeKind::HandledException { message, catch_span } => {
                ("handled", message, catch_span)
            }
            OutcomeKind::UnhandledException { message, span } => ("unhandled", message, span),
        };
        let duplicate = findings
            .iter()
            .any(|f| f.span == span && f.message == message && f.kind == kind);
        if !duplicate {
            findings.push(BugFinding {
                function: function.to_string(),
                kind: kind.to_string(),
                message,
                span,
                witness: case.id,
            });
        }
    }
    (coverage, findings)
}
