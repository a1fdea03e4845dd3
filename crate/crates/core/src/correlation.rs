//! Decay of correlations: exact dyadic values for the doubling map, Monte
//! Carlo estimates for every map, exponential fits, and ensemble checks of
//! the variance bound and block rates.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::approx::{ApproximantPair, Side};
use crate::fixed;
use crate::hits::{block_stats, hit_counts, subsequence, SubsequenceKind};
use crate::measure::{BallSchedule, Center, MeasureModel};
use crate::orbit::{FixedCenter, MapKind, Membership, OrbitStream};
use crate::rng::SeedSpec;
use crate::stats::{ci95_half_width, fit_line, mean};
use crate::{Error, Result};

/// Values below this magnitude count as exact zeros in fits.
pub const NOISE_FLOOR: f64 = 9.094_947_017_729_282e-13; // 2^-40

const MAX_LEVEL: u32 = 30;
const MAX_COPIES: u64 = 1 << 22;

/// `[index / 2^level, (index + 1) / 2^level)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DyadicInterval {
    pub level: u32,
    pub index: u64,
}

impl DyadicInterval {
    pub fn new(level: u32, index: u64) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::Budget(format!("dyadic level {level} exceeds {MAX_LEVEL}")));
        }
        if index >= 1 << level {
            return Err(Error::Domain(format!("index {index} out of range at level {level}")));
        }
        Ok(Self { level, index })
    }

    pub fn measure(&self) -> f64 {
        0.5f64.powi(self.level as i32)
    }
}

/// An exact dyadic rational `num / 2^exp` in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dyadic {
    pub num: i128,
    pub exp: u32,
}

impl Dyadic {
    pub fn new(mut num: i128, mut exp: u32) -> Self {
        if num == 0 {
            return Self { num: 0, exp: 0 };
        }
        while exp > 0 && num % 2 == 0 {
            num /= 2;
            exp -= 1;
        }
        Self { num, exp }
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 * 0.5f64.powi(self.exp as i32)
    }
}

impl std::fmt::Display for Dyadic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/2^{}", self.num, self.exp)
    }
}

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if a % b != 0 && (a < 0) != (b < 0) {
        q - 1
    } else {
        q
    }
}

/// `mu(T^-n I ∩ J) - mu(I) mu(J)` for the doubling map, exactly.
///
/// `T^-n I` is the union of the `2^n` copies of `I` scaled by `2^-n`; only
/// the copies meeting `J` are visited. Past the work budget (which needs
/// `n > level(J)`), `J` is a union of whole periods of `T^-n I` and the
/// value is exactly zero. Levels above 30 are refused.
pub fn exact_doubling_correlation(i: DyadicInterval, j: DyadicInterval, n: u32) -> Result<Dyadic> {
    let (l, k) = (i.level, j.level);
    if l > MAX_LEVEL || k > MAX_LEVEL {
        return Err(Error::Budget(format!("dyadic levels above {MAX_LEVEL}")));
    }
    let copies = 1i128 << n.min(100);
    let estimate = (copies >> k).max(1) + 2;
    if n > 64 || estimate > MAX_COPIES as i128 {
        // only reachable with n > k
        return Ok(Dyadic::new(0, 0));
    }

    let e = (l + n).max(l + k);
    let w: i128 = 1 << (e - l - n); // copy width
    let period: i128 = w << l; // spacing between copies
    let start = i.index as i128 * w;
    let (jb, je) = ((j.index as i128) << (e - k), (j.index as i128 + 1) << (e - k));
    let lo = (floor_div(jb - w - start, period) + 1).max(0);
    let hi = (floor_div(je - start - 1, period)).min(copies - 1);
    let mut overlap: i128 = 0;
    for c in lo..=hi {
        let s = start + c * period;
        overlap += ((s + w).min(je) - s.max(jb)).max(0);
    }
    let product = 1i128 << (e - l - k);
    Ok(Dyadic::new(overlap - product, e))
}

/// A radial observable evaluated on certified orbit points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Observable {
    Constant(f64),
    /// Indicator of the half-open ball `d < r`.
    Ball { center: Center, r: f64 },
    Approximant { pair: ApproximantPair, side: Side },
}

impl Observable {
    /// The ball with the same interior as a dyadic interval.
    pub fn dyadic(i: DyadicInterval) -> Self {
        let half = 0.5f64.powi(i.level as i32 + 1);
        Observable::Ball { center: Center::Unit((2 * i.index + 1) as f64 * half), r: half }
    }

    pub fn integral(&self, model: MeasureModel) -> f64 {
        match *self {
            Observable::Constant(c) => c,
            Observable::Ball { center, r } => model.ball_measure(center, r),
            Observable::Approximant { pair, side: Side::Upper } => pair.upper_integral(model),
            Observable::Approximant { pair, side: Side::Lower } => pair.lower_integral(model),
        }
    }

    /// Value at `T^k x`, or `None` when the enclosure does not pin it down.
    pub fn value(&self, orbit: &OrbitStream, k: u64) -> Result<Option<f64>> {
        let (center, tol) = match *self {
            Observable::Constant(c) => return Ok(Some(c)),
            Observable::Ball { center, .. } => (center, 0.0),
            Observable::Approximant { pair, .. } => (pair.center, 1e-12),
        };
        let span = orbit.distance(k, FixedCenter::from(center))?;
        Ok(match *self {
            Observable::Ball { r, .. } => match span.membership(fixed::units(r)) {
                Membership::Inside => Some(1.0),
                Membership::Outside => Some(0.0),
                Membership::Indeterminate => None,
            },
            Observable::Approximant { pair, side } => {
                let (a, b) = (pair.eval_at(side, span.lo), pair.eval_at(side, span.hi));
                if (a - b).abs() <= tol {
                    Some(a)
                } else {
                    None
                }
            }
            Observable::Constant(_) => unreachable!(),
        })
    }
}

pub fn invariant_measure(kind: MapKind) -> MeasureModel {
    match kind {
        MapKind::Doubling => MeasureModel::LebesgueUnit,
        MapKind::Gauss => MeasureModel::Gauss,
        MapKind::Cat => MeasureModel::LebesgueTorus,
    }
}

/// Orbit of the `index`-th sample from the invariant measure: Lebesgue seeds
/// are used directly, Gauss seeds are drawn by rejection against the
/// density `1 / ((1 + x) ln 2)`.
pub fn sample_orbit(kind: MapKind, master: u64, index: u64, steps: u64) -> Result<OrbitStream> {
    let bits = kind.bits_for_steps(steps);
    if kind != MapKind::Gauss {
        return OrbitStream::generate(kind, SeedSpec::new(master, index, bits), steps);
    }
    for attempt in 0..64 {
        let seed = SeedSpec::new(master, index * 64 + attempt, bits);
        let x = seed.payload()[0] as f64 / 18_446_744_073_709_551_616.0;
        if seed.sampler(0).next_f64() * (1.0 + x) < 1.0 {
            if let Ok(o) = OrbitStream::generate(kind, seed, steps) {
                return Ok(o);
            }
        }
    }
    Err(Error::DegenerateSeed(format!("no Gauss sample accepted for index {index}")))
}

/// Monte Carlo estimate with a normal 95% interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub half_width: f64,
    pub samples: usize,
    /// Samples dropped because an observable was not certified.
    pub excluded: usize,
}

/// Estimates `int f∘T^n g dmu - int f dmu int g dmu`.
pub fn mc_correlation(kind: MapKind, f: &Observable, g: &Observable, n: u64, ensemble: usize, master: u64) -> Result<McEstimate> {
    let model = invariant_measure(kind);
    let draws: Vec<Result<Option<f64>>> = (0..ensemble as u64)
        .into_par_iter()
        .map(|i| {
            let orbit = sample_orbit(kind, master, i, n)?;
            if orbit.horizon() < n {
                return Err(Error::InsufficientPrecision { needed: n, horizon: orbit.horizon() });
            }
            Ok(match (f.value(&orbit, n)?, g.value(&orbit, 0)?) {
                (Some(a), Some(b)) => Some(a * b),
                _ => None,
            })
        })
        .collect();
    let mut xs = Vec::with_capacity(ensemble);
    let mut excluded = 0;
    for d in draws {
        match d? {
            Some(v) => xs.push(v),
            None => excluded += 1,
        }
    }
    let product = f.integral(model) * g.integral(model);
    let half_width = if xs.iter().all(|&x| x == xs[0]) { 0.0 } else { ci95_half_width(&xs) };
    Ok(McEstimate { value: mean(&xs) - product, half_width, samples: xs.len(), excluded })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationEntry {
    pub n: u64,
    pub value: f64,
    pub exact: bool,
    /// Zero for exact entries.
    pub half_width: f64,
    /// Samples dropped as uncertified.
    pub excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CorrelationSeries {
    pub entries: Vec<CorrelationEntry>,
}

impl CorrelationSeries {
    pub fn exact_doubling(i: DyadicInterval, j: DyadicInterval, lags: impl IntoIterator<Item = u32>) -> Result<Self> {
        let entries = lags
            .into_iter()
            .map(|n| {
                let v = exact_doubling_correlation(i, j, n)?;
                Ok(CorrelationEntry { n: n as u64, value: v.to_f64(), exact: true, half_width: 0.0, excluded: 0 })
            })
            .collect::<Result<_>>()?;
        Ok(Self { entries })
    }

    pub fn monte_carlo(
        kind: MapKind,
        f: &Observable,
        g: &Observable,
        lags: impl IntoIterator<Item = u64>,
        ensemble: usize,
        master: u64,
    ) -> Result<Self> {
        let entries = lags
            .into_iter()
            .map(|n| {
                let e = mc_correlation(kind, f, g, n, ensemble, master)?;
                Ok(CorrelationEntry { n, value: e.value, exact: false, half_width: e.half_width, excluded: e.excluded })
            })
            .collect::<Result<_>>()?;
        Ok(Self { entries })
    }

    /// Columns `n,value,exact,ci`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,value,exact,ci\n");
        for e in &self.entries {
            writeln!(out, "{},{},{},{}", e.n, e.value, e.exact, e.half_width).unwrap();
        }
        out
    }
}

/// Outcome of fitting `|value| ~ C e^(-tau n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecayFit {
    Fitted { tau: f64, c: f64, tau_se: f64, r_squared: f64, lags: usize },
    /// Every value is below the noise floor.
    BelowNoiseFloor,
    /// Fewer than five resolvable lags.
    TooFewLags { usable: usize },
}

/// Least squares of `ln |value|` on `n` over lags that are resolvable:
/// above the noise floor and, for estimates, outside their own interval.
pub fn fit_decay(series: &CorrelationSeries) -> DecayFit {
    let usable: Vec<&CorrelationEntry> = series
        .entries
        .iter()
        .filter(|e| e.value.abs() >= NOISE_FLOOR && e.value.abs() > e.half_width)
        .collect();
    if usable.is_empty() {
        return DecayFit::BelowNoiseFloor;
    }
    if usable.len() < 5 {
        return DecayFit::TooFewLags { usable: usable.len() };
    }
    let xs: Vec<f64> = usable.iter().map(|e| e.n as f64).collect();
    let ys: Vec<f64> = usable.iter().map(|e| e.value.abs().ln()).collect();
    match fit_line(&xs, &ys) {
        Some(f) => DecayFit::Fitted { tau: -f.slope, c: f.intercept.exp(), tau_se: f.slope_se, r_squared: f.r_squared, lags: usable.len() },
        None => DecayFit::TooFewLags { usable: usable.len() },
    }
}

/// Ensemble second moments of `Y_m` against the predictor `1 / (m mu(B_m))`.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceReport {
    pub ms: Vec<u64>,
    pub ey2: Vec<f64>,
    pub predictor: Vec<f64>,
    /// `E(Y_m^2) m mu(B_m)`.
    pub ratio: Vec<f64>,
    /// Seeds excluded at each `m` for indeterminate membership.
    pub excluded: Vec<usize>,
    /// `max ratio`, the smallest `C_1` consistent with the grid.
    pub c1: f64,
    /// Log-log slope of `E(Y_m^2)` against `m mu(B_m)`; absent when some
    /// second moment vanishes.
    pub slope: Option<f64>,
    pub slope_se: Option<f64>,
    /// Per-seed `Y_m` rows in seed order.
    pub y: Vec<Vec<f64>>,
}

impl VarianceReport {
    /// Columns `m,EY2,predictor,ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,EY2,predictor,ratio\n");
        for i in 0..self.ms.len() {
            writeln!(out, "{},{},{},{}", self.ms[i], self.ey2[i], self.predictor[i], self.ratio[i]).unwrap();
        }
        out
    }
}

/// Orbits for seeds `0 .. ensemble`, built and processed in parallel,
/// returned in seed order.
pub(crate) fn per_seed<T: Send>(ensemble: usize, work: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..ensemble as u64).into_par_iter().map(work).collect::<Vec<_>>().into_iter().collect()
}

pub fn variance_scan(kind: MapKind, schedule: &BallSchedule, ensemble: usize, master: u64, grid: &[u64]) -> Result<VarianceReport> {
    let max = grid.last().copied().unwrap_or(1);
    let rows = per_seed(ensemble, |p| {
        let orbit = OrbitStream::with_budget(kind, master, p, max)?;
        let s = hit_counts(&orbit, schedule, grid)?;
        Ok((0..s.len()).map(|i| if s.is_determinate(i) { Some(s.y[i]) } else { None }).collect::<Vec<_>>())
    })?;
    let emu = grid.iter().map(|&m| Ok(m as f64 * schedule.measure(m)?)).collect::<Result<Vec<f64>>>()?;
    Ok(VarianceReport::from_rows(grid, &emu, rows))
}

impl VarianceReport {
    /// Reduces per-seed `Y_m` rows (`None` for indeterminate entries) in
    /// seed order; `emu[i]` is `m mu(B_m)` at `grid[i]`.
    pub fn from_rows(grid: &[u64], emu: &[f64], rows: Vec<Vec<Option<f64>>>) -> Self {
        let mut ey2 = vec![];
        let mut excluded = vec![];
        let mut predictor = vec![];
        let mut ratio = vec![];
        for (i, &e_mu) in emu.iter().enumerate() {
            let ys: Vec<f64> = rows.iter().filter_map(|r| r[i]).map(|y| y * y).collect();
            let e = mean(&ys);
            ey2.push(e);
            excluded.push(rows.len() - ys.len());
            predictor.push(1.0 / e_mu);
            ratio.push(e * e_mu);
        }
        let c1 = ratio.iter().cloned().fold(0.0, f64::max);
        let fit = if !ey2.is_empty() && ey2.iter().all(|&e| e > 0.0) {
            let xs: Vec<f64> = emu.iter().map(|v| v.ln()).collect();
            let ys: Vec<f64> = ey2.iter().map(|e| e.ln()).collect();
            fit_line(&xs, &ys)
        } else {
            None
        };
        let y = rows.into_iter().map(|r| r.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect()).collect();
        VarianceReport {
            ms: grid.to_vec(),
            ey2,
            predictor,
            ratio,
            excluded,
            c1,
            slope: fit.map(|f| f.slope),
            slope_se: fit.map(|f| f.slope_se),
            y,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnRow {
    pub n: u64,
    pub m_n: u64,
    pub m_next: u64,
    /// Ensemble mean of `S_n / E Z_{m_n}` and its 95% half width.
    pub mean: f64,
    pub half_width: f64,
    /// Leading-order rate `c / n`.
    pub predicted: f64,
    /// `(m_{n+1} - m_n) / m_n`, the exact expectation.
    pub exact: f64,
    pub rel_dev: f64,
    pub excluded: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnRateReport {
    pub rows: Vec<SnRow>,
}

impl SnRateReport {
    /// Columns `n,m_n,m_next,mean,ci,predicted,exact,rel_dev,excluded`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,m_n,m_next,mean,ci,predicted,exact,rel_dev,excluded\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.n, r.m_n, r.m_next, r.mean, r.half_width, r.predicted, r.exact, r.rel_dev, r.excluded
            )
            .unwrap();
        }
        out
    }
}

/// Block ratios `S_n / E Z_{m_n}` for `n` in `ns` over an ensemble,
/// compared with the predicted `c / n`.
pub fn sn_rate_check(
    kind: MapKind,
    schedule: &BallSchedule,
    eps: f64,
    sub: SubsequenceKind,
    ns: std::ops::RangeInclusive<u64>,
    ensemble: usize,
    master: u64,
) -> Result<SnRateReport> {
    let rate = sub
        .rate_constant(eps)
        .ok_or_else(|| Error::Domain(format!("no rate formula for the {} subsequence", sub.name())))?;
    let ns: Vec<u64> = ns.collect();
    let last = match ns.last() {
        Some(&n) => subsequence(sub, eps, n + 1)?,
        None => return Ok(SnRateReport { rows: vec![] }),
    };
    let rows = per_seed(ensemble, |p| {
        let orbit = OrbitStream::with_budget(kind, master, p, last)?;
        ns.iter().map(|&n| block_stats(&orbit, schedule, sub, eps, n, &[]).map(|b| (b.s_ratio(), b.indeterminate))).collect::<Result<Vec<_>>>()
    })?;
    let mut out = vec![];
    for (i, &n) in ns.iter().enumerate() {
        let xs: Vec<f64> = rows.iter().map(|r| r[i].0).collect();
        let excluded = rows.iter().map(|r| r[i].1).sum();
        let (m_n, m_next) = (subsequence(sub, eps, n)?, subsequence(sub, eps, n + 1)?);
        let mean = mean(&xs);
        let predicted = rate / n as f64;
        out.push(SnRow {
            n,
            m_n,
            m_next,
            mean,
            half_width: ci95_half_width(&xs),
            predicted,
            exact: (m_next - m_n) as f64 / m_n as f64,
            rel_dev: (mean - predicted) / predicted,
            excluded,
        });
    }
    Ok(SnRateReport { rows: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(level: u32, index: u64) -> DyadicInterval {
        DyadicInterval::new(level, index).unwrap()
    }

    #[test]
    fn hand_values() {
        let half = iv(1, 0);
        assert_eq!(exact_doubling_correlation(half, half, 0).unwrap(), Dyadic::new(1, 2));
        assert_eq!(exact_doubling_correlation(half, iv(2, 0), 1).unwrap(), Dyadic::new(1, 3));
        assert_eq!(exact_doubling_correlation(iv(3, 5), iv(2, 1), 2).unwrap(), Dyadic::new(0, 0));
        assert_eq!(Dyadic::new(4, 5), Dyadic::new(1, 3));
        assert_eq!(Dyadic::new(1, 3).to_string(), "1/2^3");
    }

    #[test]
    fn structural_zero_past_the_level_of_j() {
        let i = iv(30, 123_456_789);
        let j = iv(20, 77);
        for n in 20..=40 {
            assert!(exact_doubling_correlation(i, j, n).unwrap().is_zero());
        }
        assert!(exact_doubling_correlation(i, j, 19).unwrap().num != 0);
        assert!(exact_doubling_correlation(iv(3, 1), iv(25, 0), 24).unwrap().num != 0);
        assert!(exact_doubling_correlation(iv(3, 1), iv(25, 0), 1000).unwrap().is_zero());
        assert!(DyadicInterval::new(31, 0).is_err());
        assert!(DyadicInterval::new(2, 4).is_err());
    }

    #[test]
    fn constant_observables_decorrelate_exactly() {
        for kind in [MapKind::Doubling, MapKind::Gauss, MapKind::Cat] {
            let one = Observable::Constant(1.0);
            let e = mc_correlation(kind, &one, &one, 3, 50, 1).unwrap();
            assert_eq!(e.value, 0.0);
            assert_eq!(e.half_width, 0.0);
            assert_eq!(e.samples, 50);
        }
    }

    #[test]
    fn gauss_sampling_follows_density() {
        // mu([0, 1/2)) = log2(3/2) under the Gauss measure
        let ball = Observable::Ball { center: Center::Unit(0.25), r: 0.25 };
        let e = mc_correlation(MapKind::Gauss, &Observable::Constant(1.0), &ball, 0, 4000, 3).unwrap();
        let fraction = e.value + (1.5f64).log2();
        assert!((fraction - (1.5f64).log2()).abs() < 0.03, "{fraction}");
    }

    #[test]
    fn synthetic_decay_fit() {
        let entries = (0..20)
            .map(|n| CorrelationEntry { n, value: 3.0 * (-0.7 * n as f64).exp(), exact: true, half_width: 0.0, excluded: 0 })
            .collect();
        match fit_decay(&CorrelationSeries { entries }) {
            DecayFit::Fitted { tau, c, .. } => {
                assert!((tau - 0.7).abs() < 0.01);
                assert!((c - 3.0).abs() < 0.05);
            }
            other => panic!("{other:?}"),
        }
        let zeros = CorrelationSeries {
            entries: (0..10).map(|n| CorrelationEntry { n, value: 0.0, exact: true, half_width: 0.0, excluded: 0 }).collect(),
        };
        assert_eq!(fit_decay(&zeros), DecayFit::BelowNoiseFloor);
        let s = CorrelationSeries::exact_doubling(iv(1, 0), iv(3, 2), 0..12).unwrap();
        assert!(matches!(fit_decay(&s), DecayFit::TooFewLags { usable } if usable <= 3));
        assert!(s.to_csv().starts_with("n,value,exact,ci\n0,"));
    }
}
