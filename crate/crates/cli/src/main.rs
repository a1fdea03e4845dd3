//! `shrink`: runs the shrinking-target experiment presets.
//!
//! Exit status: 0 pass, 1 statistical failure, 2 hypothesis gate,
//! 3 precision failure, 4 usage, configuration or I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use shrinking_targets::harness::{default_center, emit, rule_from_text, run_preset, ExperimentConfig, Outcome, Preset};
use shrinking_targets::measure::Center;
use shrinking_targets::orbit::MapKind;
use shrinking_targets::record::Record;

const USAGE_ERROR: u8 = 4;

#[derive(Parser)]
#[command(name = "shrink", version, about = "Shrinking-target hitting statistics on certified orbits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset and write its tables and summary.
    Run {
        /// bv1, bv2, holder1, holder2, corollary or correlation
        preset: String,
        #[command(flatten)]
        params: Params,
        /// Run even if the hypothesis check fails (recorded as a warning).
        #[arg(long)]
        force: bool,
    },
    /// Print the hypothesis report of a preset's schedule.
    CheckHypotheses {
        preset: String,
        #[command(flatten)]
        params: Params,
    },
    /// Exact and Monte Carlo decay of correlations.
    Correlate {
        #[command(flatten)]
        params: Params,
        /// Level of the dyadic target interval.
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        max_lag: Option<u64>,
    },
}

#[derive(Args)]
struct Params {
    /// Key-value configuration file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ensemble: Option<usize>,
    #[arg(long)]
    max_m: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// doubling, gauss or cat
    #[arg(long)]
    map: Option<String>,
    /// Target center, `x` or `x,y`.
    #[arg(long)]
    center: Option<String>,
    /// Explicit schedule such as `reciprocal:0.5` or `logpower1:1:1`.
    #[arg(long)]
    measure: Option<String>,
    /// Seed payload bits (0 = automatic).
    #[arg(long)]
    bits: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Params {
    fn resolve(&self, preset: Option<Preset>) -> anyhow::Result<ExperimentConfig> {
        let fallback = preset.unwrap_or(Preset::Correlation);
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let rec = Record::from_text(&text)?;
                if let (Some(p), Some(named)) = (preset, rec.get("preset")) {
                    anyhow::ensure!(p.name() == named, "config file is for preset `{named}`, not `{}`", p.name());
                }
                ExperimentConfig::from_record(&rec, fallback)?
            }
            None => ExperimentConfig::for_preset(fallback),
        };
        if let Some(m) = &self.map {
            cfg.map = MapKind::from_name(m)?;
            if self.center.is_none() {
                cfg.center = default_center(cfg.map);
            }
        }
        if let Some(c) = &self.center {
            cfg.center = Center::parse(c)?;
        }
        if let Some(m) = &self.measure {
            cfg.measure = Some(rule_from_text(m)?);
        }
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { cfg.$field = v; })* };
        }
        set!(seed, ensemble, max_m, epsilon, t, beta, alpha, bits);
        if let Some(d) = &self.out_dir {
            cfg.out_dir = d.display().to_string();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cfg: &ExperimentConfig, force: bool) -> anyhow::Result<Outcome> {
    let report = match run_preset(cfg, force) {
        Ok(r) => r,
        Err(e) => {
            if let Some(outcome) = Outcome::of_error(&e) {
                eprintln!("shrink: {e}");
                return Ok(outcome);
            }
            return Err(e.into());
        }
    };
    if !report.ran() {
        eprintln!("shrink: hypotheses of {} fail on [{}, {}]; use --force to run anyway", cfg.preset.name(), cfg.m_lo, cfg.max_m);
    }
    let dir = Path::new(&cfg.out_dir);
    emit(&report, dir).with_context(|| format!("writing reports to {}", dir.display()))?;
    print!("{}", report.summary());
    Ok(report.outcome())
}

fn execute(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Run { preset, params, force } => {
            let cfg = params.resolve(Some(Preset::from_name(&preset)?))?;
            run(&cfg, force)
        }
        Command::CheckHypotheses { preset, params } => {
            let cfg = params.resolve(Some(Preset::from_name(&preset)?))?;
            let (report, ok) = cfg.gate()?;
            println!("preset={} range={},{} epsilon={}", cfg.preset.name(), report.m_lo, report.m_hi, report.epsilon);
            for (name, c) in report.rows() {
                let from = c.holds_from.map_or("never".to_string(), |m| m.to_string());
                println!("{name}={} holds_from={from} violations={}", c.passed, c.violations);
            }
            println!("applies={ok}");
            Ok(if ok { Outcome::Pass } else { Outcome::HypothesisGate })
        }
        Command::Correlate { params, level, max_lag } => {
            let mut cfg = params.resolve(None)?;
            anyhow::ensure!(cfg.preset == Preset::Correlation, "correlate runs the correlation preset only");
            if let Some(l) = level {
                cfg.level = l;
            }
            if let Some(n) = max_lag {
                cfg.max_lag = n;
            }
            run(&cfg, false)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE_ERROR } else { 0 });
        }
    };
    match execute(cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("shrink: {e:#}");
            ExitCode::from(USAGE_ERROR)
        }
    }
}
