//! Pipeline configuration.
//!
//! Precedence is defaults < config file < explicit overrides. The config
//! file is flat `key = value` text (one pair per line, `#` comments), so
//! campaign runs can be pinned to a reviewable file.

use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    /// Bytes new test inputs may use. Defaults to printable ASCII.
    pub alphabet: Vec<u8>,
    /// Hard cap on runtime string length.
    pub max_string_len: usize,
    /// Largest string length the solver enumerates per symbol.
    pub max_solve_len: usize,
    /// Largest length of randomly generated seed strings.
    pub max_seed_len: usize,
    /// Number of random seeds that start a generation run.
    pub seed_count: usize,
    /// Concolic iterations (traced seeds) per function.
    pub max_iterations: usize,
    /// Wall-clock budget per function, in milliseconds.
    pub per_function_time_budget_ms: u64,
    /// Micro-op cap per traced run; exceeding it aborts that seed.
    pub trace_op_cap: usize,
    /// Seed for all randomness in the pipeline.
    pub rng_seed: u64,
    /// Symbolize every inferred String parameter (vs. only the first).
    pub symbolize_all_strings: bool,
    /// Where CLI commands write artifacts.
    pub output_dir: String,
    /// Report timing fields as zero so reports are byte-identical across
    /// runs; used by determinism checks.
    pub zero_timings: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            alphabet: (0x20u8..0x7f).collect(),
            max_string_len: 4096,
            max_solve_len: 8,
            max_seed_len: 8,
            seed_count: 1,
            max_iterations: 50,
            per_function_time_budget_ms: 60_000,
            trace_op_cap: 1_000_000,
            rng_seed: 42,
            symbolize_all_strings: true,
            output_dir: "sparktrace-out".into(),
            zero_timings: false,
        }
    }
}

impl Config {
    /// Apply `key = value` lines from a config file on top of `self`.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        self.apply_text(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", lineno + 1))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| format!("line {}: {e}", lineno + 1))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("bad number `{v}`"))
        }
        match key {
            "alphabet" => {
                if value.is_empty() {
                    return Err("alphabet must be nonempty".into());
                }
                self.alphabet = value.as_bytes().to_vec();
                self.alphabet.sort_unstable();
                self.alphabet.dedup();
            }
            "max_string_len" => self.max_string_len = num(value)?,
            "max_solve_len" => self.max_solve_len = num(value)?,
            "max_seed_len" => self.max_seed_len = num(value)?,
            "seed_count" => self.seed_count = num(value)?,
            "max_iterations" => self.max_iterations = num(value)?,
            "per_function_time_budget_ms" => self.per_function_time_budget_ms = num(value)?,
            "trace_op_cap" => self.trace_op_cap = num(value)?,
            "rng_seed" => self.rng_seed = num(value)?,
            "symbolize_all_strings" => {
                self.symbolize_all_strings = value.parse().map_err(|_| "bad bool")?
            }
            "output_dir" => self.output_dir = value.to_string(),
            "zero_timings" => self.zero_timings = value.parse().map_err(|_| "bad bool")?,
            other => return Err(format!("unknown config key `{other}`")),
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.alphabet.is_empty() {
            return Err("alphabet must be nonempty".into());
        }
        for (name, v) in [
            ("max_string_len", self.max_string_len),
            ("max_solve_len", self.max_solve_len),
            ("max_iterations", self.max_iterations),
            ("trace_op_cap", self.trace_op_cap),
            ("seed_count", self.seed_count),
        ] {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        if self.per_function_time_budget_ms == 0 {
            return Err("per_function_time_budget_ms must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_defaults() {
        let mut c = Config::default();
        c.apply_text("# comment\nmax_iterations = 7\nalphabet = abcd\n").unwrap();
        assert_eq!(c.max_iterations, 7);
        assert_eq!(c.alphabet, b"abcd".to_vec());
    }

    #[test]
    fn rejects_unknown_keys_and_zero_bounds() {
        let mut c = Config::default();
        assert!(c.apply_text("nope = 1").is_err());
        assert!(c.apply_text("max_iterations = 0").is_err());
        assert!(c.apply_text("alphabet =").is_err());
    }
}
