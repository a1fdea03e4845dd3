use std::f64::consts::LN_2;
use std::fmt::Write as _;
use std::time::Instant;

use super::report::{Check, ExperimentReport, Table};
use super::{ExperimentConfig, Preset};
use crate::approx::{approx_counts, holder_quotient, pair_for, ApproximantPair, Side};
use crate::cf::extract_digits_certified;
use crate::correlation::{
    exact_doubling_correlation, fit_decay, per_seed, CorrelationSeries, DecayFit, DyadicInterval, Observable, SnRateReport,
    SnRow, VarianceReport,
};
use crate::hits::{block_stats, ea_failure_time, geometric_grid, hit_counts, sandwich_bounds, subsequence, HitCountSeries, SandwichInput};
use crate::measure::{BallSchedule, Rounding};
use crate::orbit::{MapKind, OrbitStream};
use crate::rng::{CounterRng, SeedSpec};
use crate::stats::{ci95_half_width, mean};
use crate::{Error, Result};

const SANDWICH_SLACK: f64 = 1e-9;

/// Runs the configured preset. A failed hypothesis gate returns a report
/// with no tables unless `force` is set.
pub fn run_preset(cfg: &ExperimentConfig, force: bool) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let (hyp, ok) = cfg.gate()?;
    let mut report = ExperimentReport::new(cfg.clone(), hyp, ok, force);
    if !report.ran() {
        return Ok(report);
    }
    let steps = orbit_steps(cfg)?;
    let needed = cfg.map.bits_for_steps(steps);
    if cfg.bits != 0 && cfg.bits < needed {
        return Err(Error::PrecisionBudget { bits: cfg.bits, needed });
    }
    match cfg.preset {
        Preset::Bv1 | Preset::Bv2 => bounded_variation(cfg, steps, &mut report)?,
        Preset::Holder1 | Preset::Holder2 => holder(cfg, &mut report)?,
        Preset::Corollary => corollary(cfg, &mut report)?,
        Preset::Correlation => correlation(cfg, &mut report)?,
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

fn block_rate_enabled(cfg: &ExperimentConfig) -> bool {
    cfg.preset == Preset::Bv2 && cfg.subsequence.rate_constant(cfg.epsilon).is_some()
}

/// Orbit length the preset consumes per point.
fn orbit_steps(cfg: &ExperimentConfig) -> Result<u64> {
    Ok(match cfg.preset {
        Preset::Correlation => cfg.max_lag,
        _ if block_rate_enabled(cfg) => cfg.max_m.max(subsequence(cfg.subsequence, cfg.epsilon, cfg.block_hi + 1)?),
        _ => cfg.max_m,
    })
}

fn orbit(cfg: &ExperimentConfig, point: u64, steps: u64) -> Result<OrbitStream> {
    let bits = if cfg.bits == 0 { cfg.map.bits_for_steps(steps) } else { cfg.bits };
    let orbit = OrbitStream::generate(cfg.map, SeedSpec::new(cfg.seed, point, bits), steps)?;
    if orbit.horizon() < steps {
        return Err(Error::InsufficientPrecision { needed: steps, horizon: orbit.horizon() });
    }
    Ok(orbit)
}

/// `M / 100, M / 10, M`, as far as they are in range.
fn decades(cfg: &ExperimentConfig) -> Vec<u64> {
    let mut d: Vec<u64> = [cfg.max_m / 100, cfg.max_m / 10, cfg.max_m].into_iter().filter(|&m| m >= cfg.m_lo).collect();
    d.dedup();
    d
}

/// Quarter-decade grid over `[M / 1000, M]`.
fn variance_grid(cfg: &ExperimentConfig) -> Vec<u64> {
    let lo = (cfg.max_m / 1000).max(cfg.m_lo);
    geometric_grid(cfg.max_m, 10f64.powf(0.25)).into_iter().filter(|&m| m >= lo).collect()
}

fn determinate_y(s: &HitCountSeries, m: u64) -> Option<f64> {
    let i = s.index_of(m)?;
    s.is_determinate(i).then(|| s.y[i])
}

fn increases(xs: &[f64]) -> usize {
    xs.windows(2).filter(|w| w[1] > w[0]).count()
}

fn fraction(hits: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

struct SandwichRow {
    n: u64,
    m_n: u64,
    m: u64,
    m_next: u64,
    lower: f64,
    y: f64,
    upper: f64,
}

impl SandwichRow {
    fn ok(&self) -> bool {
        self.lower - SANDWICH_SLACK <= self.y && self.y <= self.upper + SANDWICH_SLACK
    }
}

/// Blocks `(n, m_n, m_{n+1})` below `M` whose balls are nested throughout,
/// the setting of the two-sided block bound.
fn sandwich_blocks(cfg: &ExperimentConfig, schedule: &BallSchedule) -> Result<Vec<(u64, u64, u64)>> {
    let mut blocks = vec![];
    for n in 1.. {
        let (m_n, m_next) = (subsequence(cfg.subsequence, cfg.epsilon, n)?, subsequence(cfg.subsequence, cfg.epsilon, n + 1)?);
        if m_next > cfg.max_m {
            break;
        }
        if m_n >= cfg.m_lo && m_next - m_n >= 2 && schedule.check_nested(m_n, m_next).is_ok() {
            blocks.push((n, m_n, m_next));
        }
    }
    Ok(blocks)
}

/// Two-sided block bounds at the geometric midpoint of every block;
/// blocks with undecided memberships are skipped.
fn sandwich_rows(
    cfg: &ExperimentConfig,
    orbit: &OrbitStream,
    schedule: &BallSchedule,
    dense: &HitCountSeries,
    blocks: &[(u64, u64, u64)],
) -> Result<Vec<SandwichRow>> {
    let mut rows = vec![];
    for &(n, m_n, m_next) in blocks {
        let m = (((m_n as f64) * (m_next as f64)).sqrt().round() as u64).clamp(m_n + 1, m_next - 1);
        let block = block_stats(orbit, schedule, cfg.subsequence, cfg.epsilon, n, &[])?;
        let (i_n, i_m, i_next) = ((m_n - 1) as usize, (m - 1) as usize, (m_next - 1) as usize);
        if block.indeterminate > 0 || [i_n, i_m, i_next].iter().any(|&i| !dense.is_determinate(i)) {
            continue;
        }
        let input = SandwichInput {
            m_n,
            m_next,
            m,
            z_n: dense.z[i_n],
            z_next: dense.z[i_next],
            s_n: block.s_n,
            ez_n: dense.ez[i_n],
            ez_next: dense.ez[i_next],
            ez_m: dense.ez[i_m],
        };
        let bounds = match sandwich_bounds(&input) {
            Ok(b) => b,
            Err(Error::Hypothesis(_)) => continue,
            Err(e) => return Err(e),
        };
        rows.push(SandwichRow { n, m_n, m, m_next, lower: bounds.lower, y: dense.y[i_m], upper: bounds.upper });
    }
    Ok(rows)
}

struct BvPoint {
    grid_y: Vec<Option<f64>>,
    z_final: u64,
    y_final: Option<f64>,
    /// `None` when the failure time is not certified.
    failure: Option<(u64, bool)>,
    sandwich: Vec<SandwichRow>,
    blocks: Vec<(f64, u64)>,
}

fn bounded_variation(cfg: &ExperimentConfig, steps: u64, report: &mut ExperimentReport) -> Result<()> {
    let schedule = cfg.schedule()?;
    let dec = decades(cfg);
    let var_grid = variance_grid(cfg);
    let mut grid: Vec<u64> = dec.iter().chain(&var_grid).copied().collect();
    grid.sort_unstable();
    grid.dedup();
    let dense_ms: Vec<u64> = (1..=cfg.max_m).collect();
    let nested = sandwich_blocks(cfg, &schedule)?;
    let block_ns: Vec<u64> = if block_rate_enabled(cfg) { (cfg.block_lo..=cfg.block_hi).collect() } else { vec![] };

    let points = per_seed(cfg.ensemble, |p| {
        let orbit = orbit(cfg, p, steps)?;
        let dense = hit_counts(&orbit, &schedule, &dense_ms)?;
        let failure = match ea_failure_time(&dense) {
            Ok(f) => Some((f.time, f.censored)),
            Err(Error::Indeterminate(_)) => None,
            Err(e) => return Err(e),
        };
        let blocks = block_ns
            .iter()
            .map(|&n| block_stats(&orbit, &schedule, cfg.subsequence, cfg.epsilon, n, &[]).map(|b| (b.s_ratio(), b.indeterminate)))
            .collect::<Result<_>>()?;
        Ok(BvPoint {
            grid_y: grid.iter().map(|&m| determinate_y(&dense, m)).collect(),
            z_final: dense.z[dense.len() - 1],
            y_final: determinate_y(&dense, cfg.max_m),
            failure,
            sandwich: sandwich_rows(cfg, &orbit, &schedule, &dense, &nested)?,
            blocks,
        })
    })?;

    report.evaluated = (points.len() * grid.len()) as u64;
    report.excluded = points.iter().map(|p| p.grid_y.iter().filter(|y| y.is_none()).count() as u64).sum();

    let ez_at = |m: u64| -> Result<f64> { Ok(m as f64 * schedule.measure(m)?) };
    let mut fin = String::from("point,Z,EZ,Y,failure_time,censored,flag\n");
    let ez_final = ez_at(cfg.max_m)?;
    for (p, pt) in points.iter().enumerate() {
        let (time, censored, flag) = match (pt.failure, pt.y_final) {
            (Some((t, c)), Some(_)) => (t.to_string(), c.to_string(), "ok"),
            (Some((t, c)), None) => (t.to_string(), c.to_string(), "indeterminate"),
            (None, _) => (String::new(), String::new(), "indeterminate"),
        };
        let y = pt.y_final.map_or(String::new(), |y| y.to_string());
        writeln!(fin, "{p},{},{ez_final},{y},{time},{censored},{flag}", pt.z_final).unwrap();
    }

    let mut dev = String::from("m,EZ,mean_abs_Y,EY2,frac_small,excluded\n");
    let mut mean_abs = vec![];
    for (i, &m) in grid.iter().enumerate() {
        let ys: Vec<f64> = points.iter().filter_map(|p| p.grid_y[i]).collect();
        let abs: Vec<f64> = ys.iter().map(|y| y.abs()).collect();
        let sq: Vec<f64> = ys.iter().map(|y| y * y).collect();
        let small = fraction(abs.iter().filter(|&&a| a < cfg.tol_y).count(), points.len());
        writeln!(dev, "{m},{},{},{},{small},{}", ez_at(m)?, mean(&abs), mean(&sq), points.len() - ys.len()).unwrap();
        if dec.contains(&m) {
            mean_abs.push(mean(&abs));
        }
    }

    let var_idx: Vec<usize> = var_grid.iter().map(|m| grid.binary_search(m).unwrap()).collect();
    let rows: Vec<Vec<Option<f64>>> = points.iter().map(|p| var_idx.iter().map(|&i| p.grid_y[i]).collect()).collect();
    let emu = var_grid.iter().map(|&m| ez_at(m)).collect::<Result<Vec<f64>>>()?;
    let variance = VarianceReport::from_rows(&var_grid, &emu, rows);

    let mut sand = String::from("point,n,m_n,m,m_next,lower,Y,upper,ok\n");
    let mut violations = 0;
    for (p, pt) in points.iter().enumerate() {
        for r in &pt.sandwich {
            violations += !r.ok() as usize;
            writeln!(sand, "{p},{},{},{},{},{},{},{},{}", r.n, r.m_n, r.m, r.m_next, r.lower, r.y, r.upper, r.ok()).unwrap();
        }
    }

    let failures: Vec<(u64, bool)> = points.iter().filter_map(|p| p.failure).collect();
    let censored = fraction(failures.iter().filter(|f| f.1).count(), points.len());
    let uncertified = points.len() - failures.len();

    if cfg.preset == Preset::Bv2 {
        let small = points.iter().filter(|p| p.y_final.is_some_and(|y| y.abs() < cfg.tol_y)).count();
        report.checks.push(Check::at_least("y_small_fraction", fraction(small, points.len()), cfg.pass_fraction));
    }
    report.checks.push(Check::at_most("mean_abs_y_increases", increases(&mean_abs) as f64, 0.0));
    if cfg.preset == Preset::Bv2 {
        report.checks.push(Check::within("variance_slope", variance.slope.unwrap_or(f64::NAN), -1.0, cfg.slope_tol));
    }
    report.checks.push(Check::at_most("sandwich_violations", violations as f64, 0.0));
    if cfg.preset == Preset::Bv1 {
        report.checks.push(Check::below("censored_fraction", censored + fraction(uncertified, points.len()), cfg.max_censored));
    }

    report.fitted.push(("c1".into(), variance.c1));
    report.fitted.push(("variance_slope".into(), variance.slope.unwrap_or(f64::NAN)));
    report.fitted.push(("variance_slope_se".into(), variance.slope_se.unwrap_or(f64::NAN)));
    report.fitted.push(("censored_fraction".into(), censored));
    report.fitted.push(("uncertified_failure_times".into(), uncertified as f64));

    report.tables.push(Table { name: "final".into(), csv: fin });
    report.tables.push(Table { name: "deviation".into(), csv: dev });
    report.tables.push(Table { name: "variance".into(), csv: variance.to_csv() });
    report.tables.push(Table { name: "sandwich".into(), csv: sand });

    if !block_ns.is_empty() {
        let rate = cfg.subsequence.rate_constant(cfg.epsilon).unwrap();
        let mut rows = vec![];
        for (i, &n) in block_ns.iter().enumerate() {
            let xs: Vec<f64> = points.iter().map(|p| p.blocks[i].0).collect();
            let (m_n, m_next) = (subsequence(cfg.subsequence, cfg.epsilon, n)?, subsequence(cfg.subsequence, cfg.epsilon, n + 1)?);
            let mean = mean(&xs);
            let predicted = rate / n as f64;
            rows.push(SnRow {
                n,
                m_n,
                m_next,
                mean,
                half_width: ci95_half_width(&xs),
                predicted,
                exact: (m_next - m_n) as f64 / m_n as f64,
                rel_dev: (mean - predicted) / predicted,
                excluded: points.iter().map(|p| p.blocks[i].1).sum(),
            });
        }
        let worst = rows.iter().map(|r| r.rel_dev.abs()).fold(0.0, f64::max);
        report.checks.push(Check::at_most("block_rate_max_rel_dev", worst, cfg.rel_tol));
        report.tables.push(Table { name: "blocks".into(), csv: SnRateReport { rows }.to_csv() });
    }
    Ok(())
}

struct HolderPoint {
    y_minus: Vec<f64>,
    y_plus: Vec<f64>,
    y: Vec<Option<f64>>,
    indeterminate: usize,
    violations: Vec<usize>,
    bracket_ok: bool,
    failure: Option<(u64, bool)>,
}

fn holder(cfg: &ExperimentConfig, report: &mut ExperimentReport) -> Result<()> {
    let schedule = cfg.schedule()?;
    let mut grid = vec![];
    for m in geometric_grid(cfg.max_m, 10f64.powf(0.1)).into_iter().filter(|&m| m >= cfg.m_lo) {
        match pair_for(&schedule, m, cfg.beta, cfg.alpha) {
            Ok(_) => grid.push(m),
            Err(Error::CollarTooWide { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if grid.last() != Some(&cfg.max_m) {
        return Err(Error::Config(format!("the collar at M = {} is wider than the ball", cfg.max_m)));
    }
    let dense_ms: Vec<u64> = (1..=cfg.max_m).collect();

    let points = per_seed(cfg.ensemble, |p| {
        let orbit = orbit(cfg, p, cfg.max_m)?;
        let s = approx_counts(&orbit, &schedule, cfg.beta, &grid)?;
        let failure = if cfg.preset == Preset::Holder1 {
            match ea_failure_time(&hit_counts(&orbit, &schedule, &dense_ms)?) {
                Ok(f) => Some((f.time, f.censored)),
                Err(Error::Indeterminate(_)) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let violations = (0..s.len())
            .map(|i| !(s.z_minus[i] <= s.z_upper[i] as f64 && s.z[i] as f64 <= s.z_plus[i]) as usize)
            .collect();
        Ok(HolderPoint {
            y: (0..s.len()).map(|i| (s.z[i] == s.z_upper[i]).then(|| s.z[i] as f64 / s.ez[i] - 1.0)).collect(),
            indeterminate: s.indeterminate_count(),
            bracket_ok: s.bracket_ok.iter().all(|&b| b),
            y_minus: s.y_minus,
            y_plus: s.y_plus,
            violations,
            failure,
        })
    })?;

    report.evaluated = (points.len() * grid.len()) as u64;
    report.excluded = points.iter().map(|p| p.indeterminate as u64).sum();
    let last = grid.len() - 1;

    let mut fin = String::from("point,Yminus,Y,Yplus,failure_time,censored\n");
    for (p, pt) in points.iter().enumerate() {
        let y = pt.y[last].map_or(String::new(), |y| y.to_string());
        let (time, censored) = pt.failure.map_or((String::new(), String::new()), |(t, c)| (t.to_string(), c.to_string()));
        writeln!(fin, "{p},{},{y},{},{time},{censored}", pt.y_minus[last], pt.y_plus[last]).unwrap();
    }

    let mut tab = String::from("m,rho,EZ,mean_Yminus,mean_Yplus,mean_abs_Yminus,mean_abs_Yplus,sandwich_violations,excluded\n");
    let mut violations = 0;
    for (i, &m) in grid.iter().enumerate() {
        let ym: Vec<f64> = points.iter().map(|p| p.y_minus[i]).collect();
        let yp: Vec<f64> = points.iter().map(|p| p.y_plus[i]).collect();
        let abs = |v: &[f64]| mean(&v.iter().map(|y| y.abs()).collect::<Vec<_>>());
        let v: usize = points.iter().map(|p| p.violations[i]).sum();
        violations += v;
        let excluded = points.iter().filter(|p| p.y[i].is_none()).count();
        let pair = pair_for(&schedule, m, cfg.beta, cfg.alpha)?;
        writeln!(tab, "{m},{},{},{},{},{},{},{v},{excluded}", pair.rho, m as f64 * schedule.measure(m)?, mean(&ym), mean(&yp), abs(&ym), abs(&yp)).unwrap();
    }

    let emu = grid.iter().map(|&m| Ok(m as f64 * schedule.measure(m)?)).collect::<Result<Vec<f64>>>()?;
    let variance = VarianceReport::from_rows(&grid, &emu, points.iter().map(|p| p.y.clone()).collect());

    let small = points.iter().filter(|p| p.y_minus[last].abs() < cfg.tol_y && p.y_plus[last].abs() < cfg.tol_y).count();
    report.checks.push(Check::at_least("y_pm_small_fraction", fraction(small, points.len()), cfg.pass_fraction));
    report.checks.push(Check::below("indeterminate_fraction", fraction(report.excluded as usize, report.evaluated as usize), cfg.max_indeterminate));
    report.checks.push(Check::at_most("sandwich_violations", violations as f64, 0.0));
    report.checks.push(Check::at_most("bracket_violations", points.iter().filter(|p| !p.bracket_ok).count() as f64, 0.0));
    if cfg.preset == Preset::Holder1 {
        let certified = points.iter().filter_map(|p| p.failure).count();
        let censored = points.iter().filter(|p| p.failure.is_none_or(|f| f.1)).count();
        report.fitted.push(("uncertified_failure_times".into(), (points.len() - certified) as f64));
        report.checks.push(Check::below("censored_fraction", fraction(censored, points.len()), cfg.max_censored));
    }

    let pair = pair_for(&schedule, cfg.max_m, cfg.beta, cfg.alpha)?;
    let mut rng = CounterRng::new(cfg.seed, u64::MAX, 0);
    let upper = holder_quotient(&pair, Side::Upper, 4096, &mut rng)?;
    report.fitted.push(("holder_seminorm_upper".into(), upper.seminorm));
    report.fitted.push(("holder_norm_upper".into(), upper.norm()));
    report.fitted.push(("annulus_c".into(), schedule.model.annulus_constant(schedule.center(cfg.max_m))));
    report.fitted.push(("c1".into(), variance.c1));
    report.fitted.push(("variance_slope".into(), variance.slope.unwrap_or(f64::NAN)));

    report.tables.push(Table { name: "final".into(), csv: fin });
    report.tables.push(Table { name: "approximants".into(), csv: tab });
    report.tables.push(Table { name: "variance".into(), csv: variance.to_csv() });
    Ok(())
}

fn corollary(cfg: &ExperimentConfig, report: &mut ExperimentReport) -> Result<()> {
    let grid: Vec<usize> = geometric_grid(cfg.max_m, 10f64.powf(0.25)).into_iter().filter(|&m| m >= cfg.m_lo).map(|m| m as usize).collect();
    let bits = if cfg.bits == 0 { MapKind::Gauss.bits_for_steps(cfg.max_m) } else { cfg.bits };
    if !report.hypotheses.m_measure_nondecreasing.passed {
        report.warnings.push("m mu(B_m) drops at every jump of the rounded threshold; not used by this preset".into());
    }
    let m = cfg.max_m as usize;
    let points = per_seed(cfg.ensemble, |p| {
        let digits = extract_digits_certified(SeedSpec::new(cfg.seed, p, bits), m, 2 * bits)?;
        if digits.certified() < m {
            return Err(Error::InsufficientPrecision { needed: m as u64, horizon: digits.certified() as u64 });
        }
        let floor = digits.corollary_statistics(&grid, cfg.t, Rounding::Floor)?;
        let ceil = digits.corollary_statistics(&grid, cfg.t, Rounding::Ceil)?;
        Ok((floor, ceil, digits.seed().map_or(0, |s| s.bits)))
    })?;
    report.evaluated = (points.len() * grid.len()) as u64;

    let limit = 1.0 / LN_2;
    let last = grid.len() - 1;
    let mut fin = String::from("point,floor,ceil,bits\n");
    for (p, (f, c, b)) in points.iter().enumerate() {
        writeln!(fin, "{p},{},{},{b}", f[last], c[last]).unwrap();
    }
    let mut tab = String::from("m,mean_floor,ci_floor,mean_ceil,ci_ceil,limit\n");
    for (i, &m) in grid.iter().enumerate() {
        let f: Vec<f64> = points.iter().map(|p| p.0[i]).collect();
        let c: Vec<f64> = points.iter().map(|p| p.1[i]).collect();
        writeln!(tab, "{m},{},{},{},{},{limit}", mean(&f), ci95_half_width(&f), mean(&c), ci95_half_width(&c)).unwrap();
    }
    let f: Vec<f64> = points.iter().map(|p| p.0[last]).collect();
    let c: Vec<f64> = points.iter().map(|p| p.1[last]).collect();
    let (mf, mc) = (mean(&f), mean(&c));
    report.checks.push(Check::within("mean_floor", mf, limit, cfg.rel_tol * limit));
    report.checks.push(Check::at_most("floor_ceil_rel_gap", ((mf - mc) / mc).abs(), cfg.agree_tol));
    report.fitted.push(("mean_floor".into(), mf));
    report.fitted.push(("mean_ceil".into(), mc));
    report.fitted.push(("ci_floor".into(), ci95_half_width(&f)));
    report.tables.push(Table { name: "final".into(), csv: fin });
    report.tables.push(Table { name: "corollary".into(), csv: tab });
    Ok(())
}

fn decay_fit(name: &str, fit: DecayFit, report: &mut ExperimentReport) {
    match fit {
        DecayFit::Fitted { tau, c, tau_se, r_squared, lags } => {
            report.fitted.push((format!("{name}_tau"), tau + 0.0));
            report.fitted.push((format!("{name}_tau_se"), tau_se));
            report.fitted.push((format!("{name}_c"), c));
            report.fitted.push((format!("{name}_r_squared"), r_squared));
            report.fitted.push((format!("{name}_lags"), lags as f64));
        }
        DecayFit::BelowNoiseFloor => report.warnings.push(format!("{name}: every lag is below the noise floor")),
        DecayFit::TooFewLags { usable } => report.warnings.push(format!("{name}: only {usable} resolvable lags, no decay fitted")),
    }
}

fn correlation(cfg: &ExperimentConfig, report: &mut ExperimentReport) -> Result<()> {
    let i = DyadicInterval::new(1, 0)?;
    let j = DyadicInterval::new(cfg.level, 0)?;
    let lags = 0..=cfg.max_lag;
    let exact = CorrelationSeries::exact_doubling(i, j, lags.clone().map(|n| n as u32))?;
    let mc = CorrelationSeries::monte_carlo(MapKind::Doubling, &Observable::dyadic(i), &Observable::dyadic(j), lags.clone(), cfg.ensemble, cfg.seed)?;

    let nonzero = lags
        .clone()
        .filter(|&n| n >= cfg.level as u64)
        .map(|n| exact_doubling_correlation(i, j, n as u32))
        .collect::<Result<Vec<_>>>()?
        .iter()
        .filter(|v| !v.is_zero())
        .count();
    let covered = exact
        .entries
        .iter()
        .zip(&mc.entries)
        .filter(|(e, m)| (m.value - e.value).abs() <= m.half_width)
        .count();
    report.checks.push(Check::at_most("exact_nonzero_beyond_level", nonzero as f64, 0.0));
    report.checks.push(Check::at_least("mc_coverage", fraction(covered, exact.entries.len()), cfg.coverage));

    let resolvable = CorrelationSeries { entries: exact.entries.iter().copied().filter(|e| e.n < cfg.level as u64).collect() };
    decay_fit("exact", fit_decay(&resolvable), report);

    let (r, rho) = (0.25, 0.05);
    let pair = ApproximantPair::new(cfg.center, r, rho, cfg.alpha)?;
    let obs = Observable::Approximant { pair, side: Side::Upper };
    let decay = CorrelationSeries::monte_carlo(cfg.map, &obs, &obs, lags, cfg.ensemble, cfg.seed)?;
    decay_fit(cfg.map.name(), fit_decay(&decay), report);
    report.evaluated = (cfg.ensemble as u64) * (cfg.max_lag + 1) * 2;
    report.excluded = mc.entries.iter().chain(&decay.entries).map(|e| e.excluded as u64).sum();

    report.tables.push(Table { name: "exact".into(), csv: exact.to_csv() });
    report.tables.push(Table { name: "monte_carlo".into(), csv: mc.to_csv() });
    report.tables.push(Table { name: "decay".into(), csv: decay.to_csv() });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Outcome;
    use crate::measure::MeasureRule;

    fn small(preset: Preset) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::for_preset(preset);
        cfg.max_m = 4000;
        cfg.ensemble = 6;
        cfg.block_lo = 4;
        cfg.block_hi = 7;
        cfg
    }

    #[test]
    fn every_preset_runs_small() {
        for p in Preset::ALL {
            let mut cfg = small(p);
            if p == Preset::Correlation {
                cfg.ensemble = 500;
                cfg.max_lag = 8;
            }
            let r = run_preset(&cfg, false).unwrap();
            assert!(r.hypotheses_ok && !r.tables.is_empty() && !r.checks.is_empty(), "{}", p.name());
            for t in &r.tables {
                assert!(t.csv.ends_with('\n'));
                let cols = t.csv.lines().next().unwrap().split(',').count();
                assert!(t.csv.lines().all(|l| l.split(',').count() == cols), "{} {}", p.name(), t.name);
            }
        }
    }

    #[test]
    fn full_space_sandwich_and_zero_variance() {
        let mut cfg = small(Preset::Bv2);
        cfg.measure = Some(MeasureRule::Constant { value: 1.0 });
        let r = run_preset(&cfg, true).unwrap();
        assert_eq!(r.check("sandwich_violations").unwrap().value, 0.0);
        assert!(r.table("variance").unwrap().lines().skip(1).all(|l| l.split(',').nth(1) == Some("0")));
        let blocks = r.table("blocks").unwrap();
        for l in blocks.lines().skip(1) {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            assert_eq!(f[3], f[6]);
        }
    }

    #[test]
    fn gate_refuses_without_force() {
        let mut cfg = small(Preset::Bv1);
        cfg.measure = Some(MeasureRule::Reciprocal { c: 0.5 });
        let r = run_preset(&cfg, false).unwrap();
        assert!(r.tables.is_empty());
        assert_eq!(r.outcome(), Outcome::HypothesisGate);
        let r = run_preset(&cfg, true).unwrap();
        assert!(!r.tables.is_empty() && !r.verified() && !r.warnings.is_empty());
        assert_eq!(r.outcome(), Outcome::HypothesisGate);
    }

    #[test]
    fn precision_budget_fails_fast() {
        let mut cfg = small(Preset::Holder2);
        cfg.bits = 1000;
        match run_preset(&cfg, false) {
            Err(Error::PrecisionBudget { bits: 1000, needed }) => assert_eq!(needed, MapKind::Cat.bits_for_steps(4000)),
            other => panic!("{other:?}"),
        }
    }
}
