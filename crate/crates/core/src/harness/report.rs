use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use super::ExperimentConfig;
use crate::measure::HypothesisReport;
use crate::{Error, Result};

/// One acceptance decision.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable pass condition, e.g. `>= 0.9`.
    pub threshold: String,
    pub passed: bool,
}

impl Check {
    pub fn at_least(name: &str, value: f64, min: f64) -> Self {
        Check { name: name.into(), value, threshold: format!(">= {min}"), passed: value >= min }
    }

    pub fn at_most(name: &str, value: f64, max: f64) -> Self {
        Check { name: name.into(), value, threshold: format!("<= {max}"), passed: value <= max }
    }

    pub fn below(name: &str, value: f64, max: f64) -> Self {
        Check { name: name.into(), value, threshold: format!("< {max}"), passed: value < max }
    }

    pub fn within(name: &str, value: f64, target: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            value,
            threshold: format!("{target} +- {tol}"),
            passed: (value - target).abs() <= tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub csv: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    StatisticalFailure,
    HypothesisGate,
    PrecisionFailure,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::StatisticalFailure => 1,
            Outcome::HypothesisGate => 2,
            Outcome::PrecisionFailure => 3,
        }
    }

    /// Outcome for a run that stopped with `err`, if it has a dedicated code.
    pub fn of_error(err: &Error) -> Option<Self> {
        match err {
            Error::InsufficientPrecision { .. } | Error::PrecisionBudget { .. } => Some(Outcome::PrecisionFailure),
            Error::Hypothesis(_) => Some(Outcome::HypothesisGate),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub hypotheses: HypothesisReport,
    pub hypotheses_ok: bool,
    /// The run went ahead despite failed hypotheses.
    pub forced: bool,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub fitted: Vec<(String, f64)>,
    /// Indeterminate `(point, m)` memberships left out of the statistics.
    pub excluded: u64,
    /// All `(point, m)` memberships examined.
    pub evaluated: u64,
    pub warnings: Vec<String>,
    pub elapsed: Duration,
}

impl ExperimentReport {
    pub(crate) fn new(config: ExperimentConfig, hypotheses: HypothesisReport, hypotheses_ok: bool, forced: bool) -> Self {
        let mut warnings = vec![];
        if !hypotheses_ok && forced {
            warnings.push(format!("hypotheses of {} fail on [{}, {}]; run forced", config.preset.name(), config.m_lo, config.max_m));
        }
        ExperimentReport {
            config,
            hypotheses,
            hypotheses_ok,
            forced,
            tables: vec![],
            checks: vec![],
            fitted: vec![],
            excluded: 0,
            evaluated: 0,
            warnings,
            elapsed: Duration::ZERO,
        }
    }

    /// Whether the preset ran at all (the gate lets it through or it was forced).
    pub fn ran(&self) -> bool {
        self.hypotheses_ok || self.forced
    }

    pub fn checks_passed(&self) -> bool {
        self.ran() && self.checks.iter().all(|c| c.passed)
    }

    /// Only runs whose hypotheses held can verify the theorem.
    pub fn verified(&self) -> bool {
        self.hypotheses_ok && self.checks_passed()
    }

    pub fn outcome(&self) -> Outcome {
        if !self.hypotheses_ok {
            Outcome::HypothesisGate
        } else if self.checks_passed() {
            Outcome::Pass
        } else {
            Outcome::StatisticalFailure
        }
    }

    pub fn table(&self, name: &str) -> Option<&str> {
        self.tables.iter().find(|t| t.name == name).map(|t| t.csv.as_str())
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// `key=value` summary; deterministic, so wall-clock lives elsewhere.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let cfg = &self.config;
        writeln!(out, "preset={}", cfg.preset.name()).unwrap();
        writeln!(out, "config_hash={}", cfg.hash()).unwrap();
        writeln!(out, "outcome={:?}", self.outcome()).unwrap();
        writeln!(out, "exit_code={}", self.outcome().exit_code()).unwrap();
        writeln!(out, "verified={}", self.verified()).unwrap();
        writeln!(out, "hypotheses_ok={}", self.hypotheses_ok).unwrap();
        writeln!(out, "forced={}", self.forced).unwrap();
        writeln!(out, "hypothesis.range={},{}", self.hypotheses.m_lo, self.hypotheses.m_hi).unwrap();
        writeln!(out, "hypothesis.epsilon={}", self.hypotheses.epsilon).unwrap();
        for (name, c) in self.hypotheses.rows() {
            let from = c.holds_from.map_or("never".to_string(), |m| m.to_string());
            writeln!(out, "hypothesis.{name}={} holds_from={from} violations={}", c.passed, c.violations).unwrap();
        }
        for c in &self.checks {
            writeln!(out, "check.{}={} value={} threshold={}", c.name, if c.passed { "pass" } else { "fail" }, c.value, c.threshold).unwrap();
        }
        for (name, v) in &self.fitted {
            writeln!(out, "fit.{name}={v}").unwrap();
        }
        writeln!(out, "excluded={}", self.excluded).unwrap();
        writeln!(out, "evaluated={}", self.evaluated).unwrap();
        let frac = if self.evaluated == 0 { 0.0 } else { self.excluded as f64 / self.evaluated as f64 };
        writeln!(out, "excluded_fraction={frac}").unwrap();
        for w in &self.warnings {
            writeln!(out, "warning={w}").unwrap();
        }
        for t in &self.tables {
            writeln!(out, "table={}.csv", t.name).unwrap();
        }
        out
    }
}

/// Writes every table as `<name>.csv`, the configuration as `config.txt`
/// (replayable with `--config`), `summary.txt` and `timing.txt`.
pub fn emit(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = vec![];
    let mut write = |name: &str, text: &str| -> Result<()> {
        let path = dir.join(name);
        let mut text = text.to_string();
        if !text.ends_with('\n') {
            text.push('\n');
        }
        fs::write(&path, text)?;
        written.push(path);
        Ok(())
    };
    for t in &report.tables {
        write(&format!("{}.csv", t.name), &t.csv)?;
    }
    write("config.txt", &report.config.to_record().to_text())?;
    write("summary.txt", &report.summary())?;
    write("timing.txt", &format!("elapsed_seconds={:.3}", report.elapsed.as_secs_f64()))?;
    Ok(written)
}
