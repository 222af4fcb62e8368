//! Library test harness: random seeds, statement coverage, bug findings,
//! and the corpus campaign driver.

pub mod campaign;
pub mod coverage;
pub mod seeds;

pub use campaign::{
    discover_corpus, run_campaign, CampaignError, CampaignReport, FunctionRow, LibrarySummary,
};
pub use coverage::{instrument_and_run, BugFinding, CoverageReport};
pub use seeds::random_seeds;

use std::path::Path;

/// Corpus metadata for one library under test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LibraryManifest {
    pub name: String,
    pub source_path: String,
    /// Non-blank source lines.
    pub loc: usize,
    pub notes: String,
}

impl LibraryManifest {
    pub fn from_path(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let loc = text.lines().filter(|l| !l.trim().is_empty()).count();
        if loc == 0 {
            return Err(format!("{} is empty", path.display()));
        }
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| format!("bad file name {}", path.display()))?
            .to_string();
        Ok(LibraryManifest {
            name,
            source_path: path.to_string_lossy().into_owned(),
            loc,
            notes: String::new(),
        })
    }
}
