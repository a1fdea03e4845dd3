//! Hit counts `Z_m`, normalized deviations `Y_m`, failure times and block
//! sums over theorem subsequences.
//!
//! Counts use the convention `Z_m = #{0 <= k < m : T^k x in B_m}`.

use std::fmt::Write as _;

use crate::fenwick::offline_prefix_rank;
use crate::measure::{rounded_power, BallSchedule, Rounding};
use crate::orbit::{FixedCenter, Membership, OrbitStream, Span};
use crate::{Error, Result};

/// Which prefix of the orbit a count ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Convention {
    /// `0 <= k < m`
    Before,
    /// `1 <= k <= m`
    Through,
}

impl Convention {
    pub fn tag(&self) -> &'static str {
        match self {
            Convention::Before => "k<m",
            Convention::Through => "k<=m",
        }
    }
}

/// `Z_m`, `E Z_m = m mu(B_m)` and `Y_m = Z_m / E Z_m - 1` over a query set.
///
/// `z` counts certain hits and `z_upper` certain-or-undecided ones; an
/// entry is indeterminate when they differ, and `y` is then computed from
/// `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct HitCountSeries {
    pub ms: Vec<u64>,
    pub z: Vec<u64>,
    pub z_upper: Vec<u64>,
    pub ez: Vec<f64>,
    pub y: Vec<f64>,
    pub convention: Convention,
}

impl HitCountSeries {
    pub fn len(&self) -> usize {
        self.ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ms.is_empty()
    }

    pub fn is_determinate(&self, i: usize) -> bool {
        self.z[i] == self.z_upper[i]
    }

    pub fn indeterminate_count(&self) -> usize {
        (0..self.len()).filter(|&i| !self.is_determinate(i)).count()
    }

    pub fn index_of(&self, m: u64) -> Option<usize> {
        self.ms.binary_search(&m).ok()
    }

    pub fn y_at(&self, m: u64) -> Option<f64> {
        self.index_of(m).map(|i| self.y[i])
    }

    /// Columns `m,Z,EZ,Y,flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,Z,EZ,Y,flag\n");
        for i in 0..self.len() {
            let flag = if self.is_determinate(i) { "ok" } else { "indeterminate" };
            writeln!(out, "{},{},{},{},{}", self.ms[i], self.z[i], self.ez[i], self.y[i], flag).unwrap();
        }
        out
    }
}

fn check_queries(orbit: &OrbitStream, queries: &[u64]) -> Result<()> {
    if queries.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("queries must be strictly increasing".into()));
    }
    if queries.first() == Some(&0) {
        return Err(Error::Domain("queries must be at least 1".into()));
    }
    if let Some(&max) = queries.last() {
        if max - 1 > orbit.horizon() {
            return Err(Error::InsufficientPrecision { needed: max - 1, horizon: orbit.horizon() });
        }
    }
    Ok(())
}

/// Enclosures that decide every integer radius, as exact doubling spans do.
fn always_decisive(spans: &[Span]) -> bool {
    spans.iter().all(|s| s.hi == s.lo || (s.hi == s.lo + 1 && s.hi_open))
}

/// `Z_m` for each query `m`.
///
/// Fixed-center schedules compute each distance once and answer all
/// queries offline in `O((M + Q) log M)`; per-`m` centers scan the prefix
/// for every query.
pub fn hit_counts(orbit: &OrbitStream, schedule: &BallSchedule, queries: &[u64]) -> Result<HitCountSeries> {
    check_queries(orbit, queries)?;
    let max = queries.last().copied().unwrap_or(0);
    let mut radii = Vec::with_capacity(queries.len());
    let mut ez = Vec::with_capacity(queries.len());
    for &m in queries {
        radii.push(schedule.radius_units(m)?);
        ez.push(m as f64 * schedule.measure(m)?);
    }

    let (z, z_upper) = if schedule.has_fixed_center() {
        let spans = orbit.distances(max, schedule.center(1).into())?;
        let inside_keys: Vec<u128> = spans.iter().map(Span::inside_key).collect();
        let q: Vec<(usize, u128)> = queries.iter().zip(&radii).map(|(&m, &r)| (m as usize, 2 * r)).collect();
        let z = offline_prefix_rank(&inside_keys, &q);
        let z_upper = if always_decisive(&spans) {
            z.clone()
        } else {
            let lo_keys: Vec<u128> = spans.iter().map(|s| s.lo).collect();
            let q: Vec<(usize, u128)> = queries.iter().zip(&radii).map(|(&m, &r)| (m as usize, r)).collect();
            offline_prefix_rank(&lo_keys, &q)
        };
        (z, z_upper)
    } else {
        let mut z = Vec::with_capacity(queries.len());
        let mut z_upper = Vec::with_capacity(queries.len());
        for (&m, &r) in queries.iter().zip(&radii) {
            let center: FixedCenter = schedule.center(m).into();
            let (mut hit, mut maybe) = (0, 0);
            for k in 0..m {
                match orbit.distance(k, center)?.membership(r) {
                    Membership::Inside => hit += 1,
                    Membership::Indeterminate => maybe += 1,
                    Membership::Outside => {}
                }
            }
            z.push(hit);
            z_upper.push(hit + maybe);
        }
        (z, z_upper)
    };

    let y = z.iter().zip(&ez).map(|(&z, &e)| z as f64 / e - 1.0).collect();
    Ok(HitCountSeries { ms: queries.to_vec(), z, z_upper, ez, y, convention: Convention::Before })
}

/// Last `m <= M` with `Z_m = 0` (0 if none), and whether `Z_M = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FailureTime {
    pub time: u64,
    pub censored: bool,
}

/// Eventually-always failure time on a dense series `m = 1 ..= M`.
pub fn ea_failure_time(series: &HitCountSeries) -> Result<FailureTime> {
    if series.ms.iter().enumerate().any(|(i, &m)| m != i as u64 + 1) {
        return Err(Error::Domain("failure times need the dense range 1..=M".into()));
    }
    let certain = series.z_upper.iter().rposition(|&z| z == 0);
    let unsure = (0..series.len()).rposition(|i| series.z[i] == 0 && series.z_upper[i] > 0);
    if let Some(u) = unsure {
        if certain.is_none_or(|c| u > c) {
            return Err(Error::Indeterminate(series.ms[u]));
        }
    }
    let time = certain.map_or(0, |i| series.ms[i]);
    let censored = !series.is_empty() && time == *series.ms.last().unwrap();
    Ok(FailureTime { time, censored })
}

/// Block subsequences `m_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubsequenceKind {
    /// `2^n`
    Dyadic,
    /// `ceil(n^(2 / eps))`
    CeilPow,
    /// `floor(n^(1 / eps + 1))`
    FloorPow,
}

impl SubsequenceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SubsequenceKind::Dyadic => "dyadic",
            SubsequenceKind::CeilPow => "ceil-pow",
            SubsequenceKind::FloorPow => "floor-pow",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "dyadic" => Ok(SubsequenceKind::Dyadic),
            "ceil-pow" => Ok(SubsequenceKind::CeilPow),
            "floor-pow" => Ok(SubsequenceKind::FloorPow),
            _ => Err(Error::Config(format!("unknown subsequence `{s}`"))),
        }
    }

    /// Leading-order rate of `E S_n / E Z_{m_n}`, i.e. `c / n`.
    pub fn rate_constant(&self, eps: f64) -> Option<f64> {
        match self {
            SubsequenceKind::Dyadic => None,
            SubsequenceKind::CeilPow => Some(2.0 / eps),
            SubsequenceKind::FloorPow => Some(1.0 + 1.0 / eps),
        }
    }
}

pub fn subsequence(kind: SubsequenceKind, eps: f64, n: u64) -> Result<u64> {
    if n == 0 {
        return Err(Error::Domain("subsequence index starts at 1".into()));
    }
    if kind != SubsequenceKind::Dyadic && !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps = {eps} is not in (0, 1)")));
    }
    let (exp, rounding) = match kind {
        SubsequenceKind::Dyadic => {
            return if n < 64 { Ok(1 << n) } else { Err(Error::Domain(format!("2^{n} overflows"))) };
        }
        SubsequenceKind::CeilPow => (2.0 / eps, Rounding::Ceil),
        SubsequenceKind::FloorPow => (1.0 / eps + 1.0, Rounding::Floor),
    };
    if (n as f64).powf(exp) > 9.0e15 {
        return Err(Error::Domain(format!("m_{n} exceeds the exact integer range")));
    }
    Ok(rounded_power(n, exp, rounding))
}

/// Block sum `S_n` over `[m_n, m_{n+1})` in the fixed ball `B_{m_n}` and
/// the ratios `Q_{n,m} = E Z_{m_n} / E Z_m`, `Q_{n+1,m}` at probe indices.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockStats {
    pub n: u64,
    pub m_n: u64,
    pub m_next: u64,
    pub s_n: u64,
    /// Undecided memberships inside the block (not counted in `s_n`).
    pub indeterminate: u64,
    pub ez_n: f64,
    pub ez_next: f64,
    /// `(m, Q_{n,m}, Q_{n+1,m})`
    pub q: Vec<(u64, f64, f64)>,
}

impl BlockStats {
    pub fn s_ratio(&self) -> f64 {
        self.s_n as f64 / self.ez_n
    }
}

pub fn block_stats(
    orbit: &OrbitStream,
    schedule: &BallSchedule,
    kind: SubsequenceKind,
    eps: f64,
    n: u64,
    probes: &[u64],
) -> Result<BlockStats> {
    let m_n = subsequence(kind, eps, n)?;
    let m_next = subsequence(kind, eps, n + 1)?;
    if m_next - 1 > orbit.horizon() {
        return Err(Error::InsufficientPrecision { needed: m_next - 1, horizon: orbit.horizon() });
    }
    let center: FixedCenter = schedule.center(m_n).into();
    let r = schedule.radius_units(m_n)?;
    let (mut s_n, mut indeterminate) = (0, 0);
    for k in m_n..m_next {
        match orbit.distance(k, center)?.membership(r) {
            Membership::Inside => s_n += 1,
            Membership::Indeterminate => indeterminate += 1,
            Membership::Outside => {}
        }
    }
    let ez = |m: u64| -> Result<f64> { Ok(m as f64 * schedule.measure(m)?) };
    let (ez_n, ez_next) = (ez(m_n)?, ez(m_next)?);
    let q = probes
        .iter()
        .filter(|&&m| m > m_n && m < m_next)
        .map(|&m| Ok((m, ez_n / ez(m)?, ez_next / ez(m)?)))
        .collect::<Result<_>>()?;
    Ok(BlockStats { n, m_n, m_next, s_n, indeterminate, ez_n, ez_next, q })
}

/// Inputs of the two-sided bound on `Y_m` for `m_n < m < m_{n+1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SandwichInput {
    pub m_n: u64,
    pub m_next: u64,
    pub m: u64,
    pub z_n: u64,
    pub z_next: u64,
    pub s_n: u64,
    pub ez_n: f64,
    pub ez_next: f64,
    pub ez_m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SandwichBounds {
    pub lower: f64,
    pub upper: f64,
}

impl SandwichBounds {
    pub fn contains(&self, y: f64, slack: f64) -> bool {
        self.lower - slack <= y && y <= self.upper + slack
    }
}

/// ```text
/// Y_{m_{n+1}} Q_{n+1,m} - S_n / E Z_{m_{n+1}} Q_{n+1,m} + Q_{n+1,m} - 1
///     <= Y_m <=
/// Y_{m_n} Q_{n,m} + S_n / E Z_{m_n} Q_{n,m} + Q_{n,m} - 1
/// ```
///
/// Refuses when `m` is outside the block or `m mu(B_m)` is not monotone
/// across it (`Q_{n,m} > 1` or `Q_{n+1,m} < 1`).
pub fn sandwich_bounds(inp: &SandwichInput) -> Result<SandwichBounds> {
    if !(inp.m_n < inp.m && inp.m < inp.m_next) {
        return Err(Error::Hypothesis(format!("m = {} is not strictly inside ({}, {})", inp.m, inp.m_n, inp.m_next)));
    }
    let q_n = inp.ez_n / inp.ez_m;
    let q_next = inp.ez_next / inp.ez_m;
    if q_n > 1.0 {
        return Err(Error::Hypothesis(format!("Q_(n,m) = {q_n} exceeds 1: m mu(B_m) decreases")));
    }
    if q_next < 1.0 {
        return Err(Error::Hypothesis(format!("Q_(n+1,m) = {q_next} is below 1: m mu(B_m) decreases")));
    }
    let y_n = inp.z_n as f64 / inp.ez_n - 1.0;
    let y_next = inp.z_next as f64 / inp.ez_next - 1.0;
    let s = inp.s_n as f64;
    Ok(SandwichBounds {
        lower: y_next * q_next - s / inp.ez_next * q_next + q_next - 1.0,
        upper: y_n * q_n + s / inp.ez_n * q_n + q_n - 1.0,
    })
}

/// `floor(ratio^j)` for all `j` with value in `[1, max]`, deduplicated, with
/// `max` appended. Ratios not above 1 give just `max`.
pub fn geometric_grid(max: u64, ratio: f64) -> Vec<u64> {
    let mut out = vec![];
    if !(ratio > 1.0) {
        return if max >= 1 { vec![max] } else { out };
    }
    for j in 0.. {
        // absorb rounding so that powers like 10^(4/4) land on integers
        let v = (ratio.powi(j) * (1.0 + 1e-12)).floor();
        if v > max as f64 {
            break;
        }
        out.push(v as u64);
    }
    out.push(max);
    out.sort_unstable();
    out.dedup();
    out.retain(|&m| m >= 1);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Center, CenterRule, MeasureModel, MeasureRule};
    use crate::orbit::{DoublingOrbit, MapKind};
    use crate::rng::SeedSpec;

    fn left_half(m_hi: u64) -> BallSchedule {
        BallSchedule::new(
            MeasureModel::LebesgueUnit,
            CenterRule::LeftEndpointZero,
            MeasureRule::Constant { value: 0.5 },
            1,
            m_hi,
        )
        .unwrap()
    }

    fn full(model: MeasureModel, center: Center) -> BallSchedule {
        BallSchedule::new(model, CenterRule::Fixed(center), MeasureRule::Constant { value: 1.0 }, 1, 1000).unwrap()
    }

    #[test]
    fn hand_orbit_three_quarters() {
        let orbit = OrbitStream::Doubling(DoublingOrbit::from_bit_string("1100"));
        let s = hit_counts(&orbit, &left_half(4), &[1, 2, 3, 4]).unwrap();
        assert_eq!(s.z, vec![0, 0, 1, 2]);
        assert_eq!(s.ez, vec![0.5, 1.0, 1.5, 2.0]);
        assert_eq!(s.indeterminate_count(), 0);
        assert_eq!(ea_failure_time(&s).unwrap(), FailureTime { time: 2, censored: false });
        assert!(s.to_csv().starts_with("m,Z,EZ,Y,flag\n1,0,0.5,-1,ok\n"));
    }

    #[test]
    fn full_space() {
        let seed = SeedSpec::new(1, 1, 400);
        for (kind, model, center) in [
            (MapKind::Doubling, MeasureModel::LebesgueUnit, Center::Unit(0.3)),
            (MapKind::Gauss, MeasureModel::Gauss, Center::Unit(0.3)),
            (MapKind::Cat, MeasureModel::LebesgueTorus, Center::Torus(0.3, 0.6)),
        ] {
            let orbit = OrbitStream::generate(kind, seed, 100).unwrap();
            let qs: Vec<u64> = (1..=50).collect();
            let s = hit_counts(&orbit, &full(model, center), &qs).unwrap();
            assert_eq!(s.z, qs, "{kind:?}");
            assert!(s.y.iter().all(|&y| y == 0.0));
            assert_eq!(ea_failure_time(&s).unwrap(), FailureTime { time: 0, censored: false });
            let b = block_stats(&orbit, &full(model, center), SubsequenceKind::Dyadic, 0.5, 3, &[9, 12]).unwrap();
            assert_eq!(b.s_n, 8);
            assert_eq!(b.q, vec![(9, 8.0 / 9.0, 16.0 / 9.0), (12, 8.0 / 12.0, 16.0 / 12.0)]);
        }
    }

    #[test]
    fn queries_past_horizon() {
        let orbit = OrbitStream::Doubling(DoublingOrbit::from_bit_string("1011"));
        let err = hit_counts(&orbit, &left_half(100), &[1, 70]).unwrap_err();
        assert_eq!(err, Error::InsufficientPrecision { needed: 69, horizon: 4 });
        assert!(hit_counts(&orbit, &left_half(100), &[3, 2]).is_err());
    }

    #[test]
    fn subsequences() {
        assert_eq!(subsequence(SubsequenceKind::Dyadic, 0.5, 5).unwrap(), 32);
        assert_eq!(subsequence(SubsequenceKind::CeilPow, 0.5, 3).unwrap(), 81);
        assert_eq!(subsequence(SubsequenceKind::FloorPow, 0.5, 3).unwrap(), 27);
        assert_eq!(subsequence(SubsequenceKind::CeilPow, 0.3, 2).unwrap(), 102);
        assert!(subsequence(SubsequenceKind::CeilPow, 1.5, 2).is_err());
        assert!(subsequence(SubsequenceKind::Dyadic, 0.5, 0).is_err());
    }

    #[test]
    fn failure_time_reading() {
        let mk = |z: Vec<u64>| HitCountSeries {
            ms: (1..=z.len() as u64).collect(),
            z_upper: z.clone(),
            ez: vec![1.0; z.len()],
            y: vec![0.0; z.len()],
            z,
            convention: Convention::Before,
        };
        assert_eq!(ea_failure_time(&mk(vec![0, 0, 1, 2])).unwrap(), FailureTime { time: 2, censored: false });
        assert_eq!(ea_failure_time(&mk(vec![1, 0, 1, 0])).unwrap(), FailureTime { time: 4, censored: true });
        assert_eq!(ea_failure_time(&mk(vec![1, 1])).unwrap(), FailureTime { time: 0, censored: false });
        let mut s = mk(vec![0, 0, 1, 2]);
        s.z_upper[3] = 3;
        s.z[3] = 0;
        assert_eq!(ea_failure_time(&s), Err(Error::Indeterminate(4)));
        s.ms[0] = 7;
        assert!(ea_failure_time(&s).is_err());
    }

    #[test]
    fn full_space_sandwich_is_not_degenerate() {
        let inp = SandwichInput {
            m_n: 8,
            m_next: 16,
            m: 10,
            z_n: 8,
            z_next: 16,
            s_n: 8,
            ez_n: 8.0,
            ez_next: 16.0,
            ez_m: 10.0,
        };
        let b = sandwich_bounds(&inp).unwrap();
        assert_eq!(b, SandwichBounds { lower: 8.0 / 10.0 - 1.0, upper: 16.0 / 10.0 - 1.0 });
        assert!(b.contains(0.0, 0.0));
        assert!(sandwich_bounds(&SandwichInput { m: 8, ..inp }).is_err());
        assert!(sandwich_bounds(&SandwichInput { ez_m: 7.0, ..inp }).is_err());
        assert!(sandwich_bounds(&SandwichInput { ez_m: 17.0, ..inp }).is_err());
    }

    #[test]
    fn grid() {
        let g = geometric_grid(100, 1.5);
        assert_eq!(g, vec![1, 2, 3, 5, 7, 11, 17, 25, 38, 57, 86, 100]);
        assert_eq!(geometric_grid(1, 1.05), vec![1]);
        let q = geometric_grid(1_000_000, 10f64.powf(0.25));
        for m in [1000, 10_000, 100_000, 1_000_000] {
            assert!(q.contains(&m));
        }
        assert!(!q.contains(&9999));
    }
}
