//! Corpus campaign: discover libraries, drive generation for every
//! exported string-taking function, replay with instrumentation, and
//! aggregate coverage and findings.

use super::coverage::{instrument_and_run, BugFinding, CoverageReport};
use super::LibraryManifest;
use crate::bytecode::compile_program;
use crate::concolic::{generate, TestCase};
use crate::config::Config;
use crate::frontend::{self, ParamType, SourceProgram};
use crate::util::fnv1a64;
use serde::Serialize;
use std::path::Path;

/// One (library, function) campaign result.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionRow {
    pub library: String,
    pub function: String,
    #[serde(rename = "coveragePercent")]
    pub coverage_percent: f64,
    pub iterations: usize,
    #[serde(rename = "meanIterationMs")]
    pub mean_iteration_ms: f64,
    pub findings: Vec<BugFinding>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LibrarySummary {
    pub library: String,
    #[serde(rename = "coveragePercent")]
    pub coverage_percent: f64,
    #[serde(rename = "statementsTotal")]
    pub statements_total: usize,
    #[serde(rename = "statementsCovered")]
    pub statements_covered: usize,
    #[serde(rename = "findingsTotal")]
    pub findings_total: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CampaignError {
    pub library: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct CampaignReport {
    pub rows: Vec<FunctionRow>,
    pub libraries: Vec<LibrarySummary>,
    pub errors: Vec<CampaignError>,
    /// Everything each function's run generated, for replay tooling.
    pub cases: Vec<(String, String, Vec<TestCase>)>,
}

impl CampaignReport {
    /// The primary artifact: a JSON array of function rows.
    pub fn rows_json(&self) -> String {
        serde_json::to_string_pretty(&self.rows).expect("serializable rows")
    }

    pub fn libraries_json(&self) -> String {
        #[derive(Serialize)]
        struct Wrapper<'a> {
            libraries: &'a [LibrarySummary],
            errors: &'a [CampaignError],
        }
        serde_json::to_string_pretty(&Wrapper { libraries: &self.libraries, errors: &self.errors })
            .expect("serializable summary")
    }

    /// CSV of the coverage column, one row per function.
    pub fn coverage_csv(&self) -> String {
        let mut out = String::from("library,function,coveragePercent\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{:.2}\n", r.library, r.function, r.coverage_percent));
        }
        out
    }

    pub fn total_findings(&self) -> usize {
        self.rows.iter().map(|r| r.findings.len()).sum()
    }
}

/// Result of one library's campaign, before aggregation.
struct LibraryOutcome {
    rows: Vec<FunctionRow>,
    summary: Option<LibrarySummary>,
    error: Option<CampaignError>,
    cases: Vec<(String, String, Vec<TestCase>)>,
}

/// Run the campaign over `manifests`, fanning libraries out over
/// `jobs` worker threads. Results are deterministic for a fixed config:
/// per-function RNG seeds derive from the config seed and the
/// library/function names, independent of scheduling.
pub fn run_campaign(manifests: &[LibraryManifest], config: &Config, jobs: usize) -> CampaignReport {
    let jobs = jobs.max(1);
    let mut outcomes: Vec<Option<LibraryOutcome>> = Vec::new();
    outcomes.resize_with(manifests.len(), || None);

    {
        let counter = std::sync::atomic::AtomicUsize::new(0);
        let slots = std::sync::Mutex::new(&mut outcomes);
        std::thread::scope(|scope| {
            for _ in 0..jobs.min(manifests.len().max(1)) {
                scope.spawn(|| loop {
                    let i = counter.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= manifests.len() {
                        break;
                    }
                    let outcome = run_library(&manifests[i], config);
                    slots.lock().unwrap()[i] = Some(outcome);
                });
            }
        });
    }

    let mut report = CampaignReport::default();
    for outcome in outcomes.into_iter().flatten() {
        report.rows.extend(outcome.rows);
        report.libraries.extend(outcome.summary);
        report.errors.extend(outcome.error);
        report.cases.extend(outcome.cases);
    }
    report
}

fn run_library(manifest: &LibraryManifest, config: &Config) -> LibraryOutcome {
    let mut outcome =
        LibraryOutcome { rows: Vec::new(), summary: None, error: None, cases: Vec::new() };
    let fail = |message: String| CampaignError { library: manifest.name.clone(), message };

    let text = match std::fs::read_to_string(&manifest.source_path) {
        Ok(t) => t,
        Err(e) => {
            outcome.error = Some(fail(format!("read failed: {e}")));
            return outcome;
        }
    };
    let source = SourceProgram::new(manifest.source_path.clone(), text);
    let ast = match frontend::parse(&source) {
        Ok(ast) => ast,
        Err(e) => {
            outcome.error = Some(fail(e.to_string()));
            return outcome;
        }
    };
    let program = match compile_program(&ast) {
        Ok(p) => p,
        Err(e) => {
            outcome.error = Some(fail(e.to_string()));
            return outcome;
        }
    };

    let mut library_coverage = CoverageReport::empty(&program);
    let mut findings_total = 0;
    for export in &program.exports {
        let string_params: Vec<usize> = export
            .param_types
            .iter()
            .enumerate()
            .filter(|(_, t)| **t == ParamType::Str)
            .map(|(i, _)| i)
            .collect();
        if string_params.is_empty() {
            continue;
        }
        let symbolic: Vec<usize> = if config.symbolize_all_strings {
            string_params
        } else {
            vec![string_params[0]]
        };
        // Independent, reproducible randomness per (library, function).
        let mut fn_config = config.clone();
        fn_config.rng_seed = config
            .rng_seed
            .wrapping_add(fnv1a64(format!("{}/{}", manifest.name, export.name).as_bytes()));
        let generated = match generate(&program, &export.name, &symbolic, &fn_config) {
            Ok(g) => g,
            Err(e) => {
                outcome.error = Some(fail(format!("{}: {e}", export.name)));
                continue;
            }
        };
        let (coverage, findings) =
            instrument_and_run(&program, &export.name, &generated.test_cases);
        library_coverage.merge(&coverage);
        findings_total += findings.len();
        outcome.rows.push(FunctionRow {
            library: manifest.name.clone(),
            function: export.name.clone(),
            coverage_percent: coverage.percent(),
            iterations: generated.iterations,
            mean_iteration_ms: generated.mean_iteration_ms,
            findings,
        });
        outcome.cases.push((
            manifest.name.clone(),
            export.name.clone(),
            generated.test_cases,
        ));
    }

    outcome.summary = Some(LibrarySummary {
        library: manifest.name.clone(),
        coverage_percent: library_coverage.percent(),
        statements_total: library_coverage.statements_total,
        statements_covered: library_coverage.statements_covered,
        findings_total,
    });
    outcome
}

/// Scan a corpus directory for `.mjs-mini` sources, in name order.
pub fn discover_corpus(dir: &Path) -> Result<Vec<LibraryManifest>, String> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| format!("cannot read {}: {e}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|x| x == "mjs-mini").unwrap_or(false))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        out.push(LibraryManifest::from_path(&p)?);
    }
    if out.is_empty() {
        return Err(format!("no .mjs-mini libraries under {}", dir.display()));
    }
    Ok(out)
}
