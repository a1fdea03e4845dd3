//! Invariant measures, target-ball schedules and hypothesis checks.
//!
//! Balls are half-open, `B(x, r) = { y : d(x, y) < r }`, intersected with the
//! phase space. The unit interval uses `|x - y|`; the torus uses the sup
//! metric built from circle distances, so its balls are squares.

use std::f64::consts::LN_2;
use std::fmt;

use crate::fixed;
use crate::record::Record;
use crate::{Error, Result};

/// Absolute tolerance on measures returned by radius inversion.
pub const RADIUS_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MeasureModel {
    /// Lebesgue measure on `[0, 1)`; invariant for the doubling map.
    LebesgueUnit,
    /// Gauss measure `dx / ((1 + x) log 2)` on `[0, 1)`.
    Gauss,
    /// Lebesgue measure on the 2-torus; invariant for the cat map.
    LebesgueTorus,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Center {
    Unit(f64),
    Torus(f64, f64),
}

impl Center {
    pub fn unit(&self) -> Option<f64> {
        match *self {
            Center::Unit(c) => Some(c),
            Center::Torus(..) => None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let coords: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("bad center `{text}`")))?;
        match coords[..] {
            [c] => Ok(Center::Unit(c)),
            [x, y] => Ok(Center::Torus(x, y)),
            _ => Err(Error::Config(format!("bad center `{text}`"))),
        }
    }
}

impl fmt::Display for Center {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Center::Unit(c) => write!(f, "{c}"),
            Center::Torus(x, y) => write!(f, "{x},{y}"),
        }
    }
}

impl MeasureModel {
    pub fn name(&self) -> &'static str {
        match self {
            MeasureModel::LebesgueUnit => "lebesgue-unit",
            MeasureModel::Gauss => "gauss",
            MeasureModel::LebesgueTorus => "lebesgue-torus2",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "lebesgue-unit" | "lebesgue" => Ok(MeasureModel::LebesgueUnit),
            "gauss" => Ok(MeasureModel::Gauss),
            "lebesgue-torus2" | "torus" => Ok(MeasureModel::LebesgueTorus),
            _ => Err(Error::Config(format!("unknown measure model `{name}`"))),
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, MeasureModel::LebesgueTorus)
    }

    /// Closed-form measure of `[a, b)` for the unit-interval models.
    pub fn interval_measure(&self, a: f64, b: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
            return Err(Error::Domain(format!("interval [{a}, {b}) is not inside [0, 1]")));
        }
        match self {
            MeasureModel::LebesgueUnit => Ok(b - a),
            MeasureModel::Gauss => Ok(gauss_segment(a, b)),
            MeasureModel::LebesgueTorus => {
                Err(Error::Domain("the torus model measures boxes, not intervals".into()))
            }
        }
    }

    /// Area of the box `[x0, x1) x [y0, y1)` inside the unit square.
    pub fn box_measure(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> Result<f64> {
        if !self.is_torus() {
            return Err(Error::Domain("box measure needs the torus model".into()));
        }
        for (a, b) in [(x0, x1), (y0, y1)] {
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
                return Err(Error::Domain(format!("side [{a}, {b}) is not inside [0, 1]")));
            }
        }
        Ok((x1 - x0) * (y1 - y0))
    }

    fn check_center(&self, center: Center) -> Result<()> {
        let ok = match (self.is_torus(), center) {
            (false, Center::Unit(c)) => (0.0..1.0).contains(&c),
            (true, Center::Torus(x, y)) => (0.0..1.0).contains(&x) && (0.0..1.0).contains(&y),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("center {center} does not fit model {}", self.name())))
        }
    }

    /// `mu(B(center, r))`, the distance distribution function of the model
    /// seen from `center`.
    pub fn ball_measure(&self, center: Center, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match (self, center) {
            (MeasureModel::LebesgueUnit, Center::Unit(c)) => (c + r).min(1.0) - (c - r).max(0.0),
            (MeasureModel::Gauss, Center::Unit(c)) => gauss_segment((c - r).max(0.0), (c + r).min(1.0)),
            (MeasureModel::LebesgueTorus, Center::Torus(..)) => {
                let side = (2.0 * r).min(1.0);
                side * side
            }
            _ => f64::NAN,
        }
    }

    /// Measure of the annulus `B(center, r + rho) \ B(center, r)`.
    pub fn annulus_measure(&self, center: Center, r: f64, rho: f64) -> f64 {
        match (self, center) {
            (MeasureModel::Gauss, Center::Unit(c)) => {
                let right = gauss_segment((c + r).min(1.0), (c + r + rho).min(1.0));
                let left = gauss_segment((c - r - rho).max(0.0), (c - r).max(0.0));
                right + left
            }
            (MeasureModel::LebesgueTorus, Center::Torus(..)) => {
                let outer = (2.0 * (r + rho)).min(1.0);
                let inner = (2.0 * r).min(1.0);
                (outer - inner) * (outer + inner)
            }
            _ => (self.ball_measure(center, r + rho) - self.ball_measure(center, r)).max(0.0),
        }
    }

    /// Constant `C` with `annulus_measure(center, r, rho) <= C * rho` for all
    /// admissible `r` and `rho <= 1/2` (exponent one for all three models).
    pub fn annulus_constant(&self, center: Center) -> f64 {
        match (self, center) {
            (MeasureModel::LebesgueUnit, Center::Unit(c)) => {
                if c == 0.0 {
                    1.0
                } else {
                    2.0
                }
            }
            (MeasureModel::Gauss, Center::Unit(c)) => {
                if c == 0.0 {
                    1.0 / LN_2
                } else {
                    (1.0 + 1.0 / (1.0 + c)) / LN_2
                }
            }
            // 8 r rho + 4 rho^2 with r, rho <= 1/2
            (MeasureModel::LebesgueTorus, _) => 6.0,
            _ => f64::NAN,
        }
    }

    /// `int_{s1}^{s2} (alpha + beta s) dF(s)` where `F(s) = mu(B(center, s))`.
    /// Closed form for every model; used to integrate piecewise-affine
    /// radial profiles.
    pub fn integrate_linear(&self, center: Center, s1: f64, s2: f64, alpha: f64, beta: f64) -> f64 {
        if s2 <= s1 {
            return 0.0;
        }
        let poly = |a: f64, b: f64, dens: f64| -> f64 {
            // int_a^b (alpha + beta s) * dens ds
            dens * (alpha * (b - a) + beta * (b * b - a * a) / 2.0)
        };
        match (self, center) {
            (MeasureModel::LebesgueUnit, Center::Unit(c)) => {
                let mut total = 0.0;
                for side in [1.0 - c, c] {
                    let hi = s2.min(side);
                    if hi > s1 {
                        total += poly(s1, hi, 1.0);
                    }
                }
                total
            }
            (MeasureModel::Gauss, Center::Unit(c)) => {
                let mut total = 0.0;
                // right side x = c + s, s < 1 - c
                let hi = s2.min(1.0 - c);
                if hi > s1 {
                    let ds = hi - s1;
                    total += beta * ds + (alpha - beta * (1.0 + c)) * (ds / (1.0 + c + s1)).ln_1p();
                }
                // left side x = c - s, s <= c
                let hi = s2.min(c);
                if hi > s1 {
                    let ds = hi - s1;
                    total += -beta * ds + (alpha + beta * (1.0 + c)) * (ds / (1.0 + c - hi)).ln_1p();
                }
                total / LN_2
            }
            (MeasureModel::LebesgueTorus, Center::Torus(..)) => {
                let hi = s2.min(0.5);
                if hi <= s1 {
                    return 0.0;
                }
                let cube = |s: f64| 4.0 * alpha * s * s + 8.0 * beta * s * s * s / 3.0;
                cube(hi) - cube(s1)
            }
            _ => f64::NAN,
        }
    }

    /// Smallest radius `r` with `mu(B(center, r)) = s`.
    pub fn radius_for_measure(&self, center: Center, s: f64) -> Result<f64> {
        self.check_center(center)?;
        if !(s > 0.0) {
            return Err(Error::Domain(format!("target measure {s} must be positive")));
        }
        if s > 1.0 + RADIUS_TOLERANCE {
            return Err(Error::Infeasible { measure: s, max: 1.0 });
        }
        let s = s.min(1.0);
        let r = match (self, center) {
            (MeasureModel::LebesgueUnit, Center::Unit(c)) => {
                let near = c.min(1.0 - c);
                if s <= 2.0 * near {
                    s / 2.0
                } else {
                    s - near
                }
            }
            (MeasureModel::Gauss, Center::Unit(c)) => {
                // both sides inside: (1 + c + r) / (1 + c - r) = 2^s
                let e = (s * LN_2).exp_m1(); // 2^s - 1
                let r = (1.0 + c) * e / (2.0 + e);
                if r <= c.min(1.0 - c) {
                    r
                } else if c <= 1.0 - c {
                    // left side clipped at 0: log2(1 + c + r) = s
                    e - c
                } else {
                    // right side clipped at 1: 1 - log2(1 + c - r) = s
                    1.0 + c - ((1.0 - s) * LN_2).exp()
                }
            }
            (MeasureModel::LebesgueTorus, Center::Torus(..)) => s.sqrt() / 2.0,
            _ => unreachable!("center checked above"),
        };
        Ok(r)
    }
}

/// Gauss measure of `[a, b)`, accurate for short intervals.
fn gauss_segment(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    ((b - a) / (1.0 + a)).ln_1p() / LN_2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rounding {
    Floor,
    Ceil,
}

impl Rounding {
    pub fn name(&self) -> &'static str {
        match self {
            Rounding::Floor => "floor",
            Rounding::Ceil => "ceil",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "floor" => Ok(Rounding::Floor),
            "ceil" => Ok(Rounding::Ceil),
            _ => Err(Error::Config(format!("unknown rounding `{s}`"))),
        }
    }
}

/// `floor(m^t)` or `ceil(m^t)`. Powers within `1e-9` relative of an integer
/// are snapped to it so that perfect powers come out exact.
pub fn rounded_power(m: u64, t: f64, rounding: Rounding) -> u64 {
    let v = (m as f64).powf(t);
    let nearest = v.round();
    if (v - nearest).abs() <= 1e-9 * v.max(1.0) {
        return nearest as u64;
    }
    match rounding {
        Rounding::Floor => v.floor() as u64,
        Rounding::Ceil => v.ceil() as u64,
    }
}

/// How `mu(B_m)` depends on `m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeasureRule {
    Constant { value: f64 },
    /// `c / m`
    Reciprocal { c: f64 },
    /// `m^(-1 + eps)`
    Power { eps: f64 },
    /// `c m^-1 (log m)^(1 + eps)`
    LogPower1 { eps: f64, c: f64 },
    /// `c m^-1 (log m)^(2 + eps)`
    LogPower2 { eps: f64, c: f64 },
    /// `log(1 + 1/b_m) / log 2` with `b_m = round(m^t)`
    CfThreshold { t: f64, rounding: Rounding },
}

impl MeasureRule {
    pub fn kind(&self) -> &'static str {
        match self {
            MeasureRule::Constant { .. } => "constant",
            MeasureRule::Reciprocal { .. } => "reciprocal",
            MeasureRule::Power { .. } => "power",
            MeasureRule::LogPower1 { .. } => "logpower1",
            MeasureRule::LogPower2 { .. } => "logpower2",
            MeasureRule::CfThreshold { .. } => "cf-threshold",
        }
    }

    /// Target measure at index `m`.
    pub fn eval(&self, m: u64) -> Result<f64> {
        if m == 0 {
            return Err(Error::Domain("schedule index must be at least 1".into()));
        }
        let mf = m as f64;
        let value = match *self {
            MeasureRule::Constant { value } => value,
            MeasureRule::Reciprocal { c } => c / mf,
            MeasureRule::Power { eps } => mf.powf(eps - 1.0),
            MeasureRule::LogPower1 { eps, c } | MeasureRule::LogPower2 { eps, c } => {
                if m < 2 {
                    return Err(Error::Domain(format!("{} needs m >= 2", self.kind())));
                }
                let p = if matches!(self, MeasureRule::LogPower1 { .. }) { 1.0 } else { 2.0 };
                c * mf.ln().powf(p + eps) / mf
            }
            MeasureRule::CfThreshold { t, rounding } => {
                let b = rounded_power(m, t, rounding);
                if b == 0 {
                    return Err(Error::Domain(format!("threshold round(m^t) vanishes at m = {m}")));
                }
                (1.0 / b as f64).ln_1p() / LN_2
            }
        };
        if !(value > 0.0 && value <= 1.0 + RADIUS_TOLERANCE) {
            return Err(Error::Domain(format!(
                "{} schedule gives measure {value} at m = {m}, outside (0, 1]",
                self.kind()
            )));
        }
        Ok(value.min(1.0))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CenterRule {
    Fixed(Center),
    /// Intervals `[0, r_m)`, i.e. balls about the left endpoint.
    LeftEndpointZero,
    /// One center per index `m_lo, m_lo + 1, ...`.
    PerM(Vec<Center>),
}

/// Nested targets `B_m = B(center_m, r_m)` specified through `mu(B_m)`.
///
/// Indices below `m_lo` reuse the ball at `m_lo`; `m_hi` bounds the range
/// over which hypotheses are checked and per-`m` centers are defined.
#[derive(Clone, Debug, PartialEq)]
pub struct BallSchedule {
    pub model: MeasureModel,
    pub center_rule: CenterRule,
    pub rule: MeasureRule,
    pub m_lo: u64,
    pub m_hi: u64,
}

impl BallSchedule {
    pub fn new(model: MeasureModel, center_rule: CenterRule, rule: MeasureRule, m_lo: u64, m_hi: u64) -> Result<Self> {
        if m_lo == 0 || m_lo > m_hi {
            return Err(Error::Domain(format!("bad index range [{m_lo}, {m_hi}]")));
        }
        if let CenterRule::PerM(centers) = &center_rule {
            if centers.len() as u64 != m_hi - m_lo + 1 {
                return Err(Error::Domain("per-m centers must cover [m_lo, m_hi]".into()));
            }
        }
        if matches!(center_rule, CenterRule::LeftEndpointZero) && model.is_torus() {
            return Err(Error::Domain("left-endpoint intervals need a unit-interval model".into()));
        }
        let s = Self { model, center_rule, rule, m_lo, m_hi };
        s.model.check_center(s.center(m_lo))?;
        s.rule.eval(m_lo)?;
        Ok(s)
    }

    fn index(&self, m: u64) -> u64 {
        m.max(self.m_lo)
    }

    pub fn has_fixed_center(&self) -> bool {
        !matches!(self.center_rule, CenterRule::PerM(_))
    }

    pub fn center(&self, m: u64) -> Center {
        match &self.center_rule {
            CenterRule::Fixed(c) => *c,
            CenterRule::LeftEndpointZero => Center::Unit(0.0),
            CenterRule::PerM(cs) => {
                let i = (self.index(m).min(self.m_hi) - self.m_lo) as usize;
                cs[i]
            }
        }
    }

    pub fn measure(&self, m: u64) -> Result<f64> {
        self.rule.eval(self.index(m))
    }

    pub fn radius(&self, m: u64) -> Result<f64> {
        self.model.radius_for_measure(self.center(m), self.measure(m)?)
    }

    pub fn radius_units(&self, m: u64) -> Result<u128> {
        Ok(fixed::units(self.radius(m)?))
    }

    /// Checks `B_{m+1} ⊆ B_m` on `[lo, hi]`. For fixed centers this is
    /// `r_{m+1} <= r_m`; for moving centers the sufficient condition
    /// `d(c_m, c_{m+1}) + r_{m+1} <= r_m` is used.
    pub fn check_nested(&self, lo: u64, hi: u64) -> Result<()> {
        let mut prev = self.radius(lo)?;
        for m in lo + 1..=hi {
            let r = self.radius(m)?;
            let shift = match (self.center(m - 1), self.center(m)) {
                (Center::Unit(a), Center::Unit(b)) => (a - b).abs(),
                (Center::Torus(a, b), Center::Torus(c, d)) => {
                    let cd = |u: f64, v: f64| {
                        let t = (u - v).abs();
                        t.min(1.0 - t)
                    };
                    cd(a, c).max(cd(b, d))
                }
                _ => f64::INFINITY,
            };
            if r + shift > prev {
                return Err(Error::Hypothesis(format!("balls are not nested at m = {m}")));
            }
            prev = r;
        }
        Ok(())
    }

    pub fn to_record(&self) -> Record {
        let mut rec = Record::new();
        rec.push("kind", self.rule.kind());
        match self.rule {
            MeasureRule::Constant { value } => rec.push("value", value),
            MeasureRule::Reciprocal { c } => rec.push("c", c),
            MeasureRule::Power { eps } => rec.push("epsilon", eps),
            MeasureRule::LogPower1 { eps, c } | MeasureRule::LogPower2 { eps, c } => {
                rec.push("epsilon", eps);
                rec.push("c", c);
            }
            MeasureRule::CfThreshold { t, rounding } => {
                rec.push("t", t);
                rec.push("rounding", rounding.name());
            }
        }
        rec.push("model", self.model.name());
        match &self.center_rule {
            CenterRule::Fixed(c) => {
                rec.push("center_rule", "fixed");
                rec.push("center", c);
            }
            CenterRule::LeftEndpointZero => rec.push("center_rule", "left-endpoint-0"),
            CenterRule::PerM(cs) => {
                rec.push("center_rule", "per-m");
                let list: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
                rec.push("centers", list.join(";"));
            }
        }
        rec.push("m_lo", self.m_lo);
        rec.push("m_hi", self.m_hi);
        rec
    }

    pub fn from_record(rec: &Record) -> Result<Self> {
        let kind = rec.require("kind")?;
        let eps = || -> Result<f64> { rec.parse("epsilon")?.ok_or_else(|| Error::Config("missing epsilon".into())) };
        let c = rec.parse_or("c", 1.0)?;
        let rule = match kind {
            "constant" => MeasureRule::Constant { value: rec.parse_or("value", 1.0)? },
            "reciprocal" => MeasureRule::Reciprocal { c },
            "power" => MeasureRule::Power { eps: eps()? },
            "logpower1" => MeasureRule::LogPower1 { eps: eps()?, c },
            "logpower2" => MeasureRule::LogPower2 { eps: eps()?, c },
            "cf-threshold" => MeasureRule::CfThreshold {
                t: rec.parse("t")?.ok_or_else(|| Error::Config("missing t".into()))?,
                rounding: Rounding::from_name(rec.get("rounding").unwrap_or("floor"))?,
            },
            other => return Err(Error::Config(format!("unknown schedule kind `{other}`"))),
        };
        let model = MeasureModel::from_name(rec.require("model")?)?;
        let center_rule = match rec.require("center_rule")? {
            "fixed" => CenterRule::Fixed(Center::parse(rec.require("center")?)?),
            "left-endpoint-0" => CenterRule::LeftEndpointZero,
            "per-m" => CenterRule::PerM(
                rec.require("centers")?.split(';').map(Center::parse).collect::<Result<_>>()?,
            ),
            other => return Err(Error::Config(format!("unknown center rule `{other}`"))),
        };
        let m_lo = rec.parse("m_lo")?.ok_or_else(|| Error::Config("missing m_lo".into()))?;
        let m_hi = rec.parse("m_hi")?.ok_or_else(|| Error::Config("missing m_hi".into()))?;
        BallSchedule::new(model, center_rule, rule, m_lo, m_hi)
    }
}

/// Outcome of one monotonicity or lower-bound condition over a range.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Condition {
    /// First index from which the condition holds through the end of the
    /// range; `None` when it fails at the last index.
    pub holds_from: Option<u64>,
    /// Number of indices in the range where it fails.
    pub violations: u64,
    /// The condition holds on a tail starting no later than the geometric
    /// midpoint of the range.
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisReport {
    pub m_lo: u64,
    pub m_hi: u64,
    pub epsilon: f64,
    /// `mu(B_{m+1}) <= mu(B_m)`
    pub measure_nonincreasing: Condition,
    /// `(m+1) mu(B_{m+1}) >= m mu(B_m)`
    pub m_measure_nondecreasing: Condition,
    /// `mu(B_m) >= m^-1 (log m)^(1+eps)`
    pub lower_bound_log1: Condition,
    /// `mu(B_m) >= m^-1 (log m)^(2+eps)`
    pub lower_bound_log2: Condition,
    /// `mu(B_m) >= m^(-1+eps)`
    pub lower_bound_power: Condition,
}

impl HypothesisReport {
    pub fn rows(&self) -> [(&'static str, Condition); 5] {
        [
            ("measure-nonincreasing", self.measure_nonincreasing),
            ("m-measure-nondecreasing", self.m_measure_nondecreasing),
            ("lower-bound-log1", self.lower_bound_log1),
            ("lower-bound-log2", self.lower_bound_log2),
            ("lower-bound-power", self.lower_bound_power),
        ]
    }

    /// Hypotheses of the bounded-variation theorem with logarithmic targets.
    pub fn bv1(&self) -> bool {
        self.measure_nonincreasing.passed && self.lower_bound_log1.passed
    }

    /// Hypotheses of the bounded-variation theorem with power targets.
    pub fn bv2(&self) -> bool {
        self.measure_nonincreasing.passed && self.m_measure_nondecreasing.passed && self.lower_bound_power.passed
    }

    pub fn holder1(&self) -> bool {
        self.measure_nonincreasing.passed && self.lower_bound_log2.passed
    }

    pub fn holder2(&self) -> bool {
        self.bv2()
    }
}

fn tail_condition(lo: u64, hi: u64, holds: impl Fn(u64) -> bool) -> Condition {
    let mut holds_from = Some(lo);
    let mut violations = 0;
    for m in lo..=hi {
        if !holds(m) {
            violations += 1;
            holds_from = if m < hi { Some(m + 1) } else { None };
        }
    }
    let midpoint = ((lo as f64) * (hi as f64)).sqrt().round() as u64;
    Condition { holds_from, violations, passed: holds_from.is_some_and(|m0| m0 <= midpoint.max(lo)) }
}

/// Evaluates every hypothesis condition pointwise on `[lo, hi]`.
pub fn check_hypotheses(schedule: &BallSchedule, lo: u64, hi: u64, epsilon: f64) -> Result<HypothesisReport> {
    if lo == 0 || lo > hi {
        return Err(Error::Domain(format!("empty range [{lo}, {hi}]")));
    }
    let mu: Vec<f64> = (lo..=hi + 1).map(|m| schedule.measure(m)).collect::<Result<_>>()?;
    let at = |m: u64| mu[(m - lo) as usize];
    let log_bound = |m: u64, p: f64| {
        let mf = m as f64;
        m >= 2 && at(m) >= mf.ln().powf(p + epsilon) / mf
    };
    // pairwise conditions compare m with m + 1; the last pair is (hi, hi + 1)
    Ok(HypothesisReport {
        m_lo: lo,
        m_hi: hi,
        epsilon,
        measure_nonincreasing: tail_condition(lo, hi, |m| at(m + 1) <= at(m)),
        m_measure_nondecreasing: tail_condition(lo, hi, |m| (m + 1) as f64 * at(m + 1) >= m as f64 * at(m)),
        lower_bound_log1: tail_condition(lo, hi, |m| log_bound(m, 1.0)),
        lower_bound_log2: tail_condition(lo, hi, |m| log_bound(m, 2.0)),
        lower_bound_power: tail_condition(lo, hi, |m| at(m) >= (m as f64).powf(epsilon - 1.0)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite 5-point Gauss-Legendre; never samples panel endpoints.
    fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        const NODES: [f64; 5] = [0.0, -0.538_469_310_105_683, 0.538_469_310_105_683, -0.906_179_845_938_664, 0.906_179_845_938_664];
        const WEIGHTS: [f64; 5] = [0.568_888_888_888_889, 0.478_628_670_499_366, 0.478_628_670_499_366, 0.236_926_885_056_189, 0.236_926_885_056_189];
        let n = 4096;
        let h = (b - a) / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let mid = a + (i as f64 + 0.5) * h;
            for (x, w) in NODES.iter().zip(WEIGHTS) {
                s += w * f(mid + 0.5 * h * x);
            }
        }
        s * h / 2.0
    }

    #[test]
    fn interval_measures() {
        let g = MeasureModel::Gauss;
        assert_eq!(g.interval_measure(0.0, 1.0).unwrap(), 1.0);
        let half = g.interval_measure(0.0, 0.5).unwrap();
        let oracle = quad(|x| 1.0 / ((1.0 + x) * LN_2), 0.0, 0.5);
        assert!((half - oracle).abs() < 1e-12);
        assert!((half - 0.584_962_500_721_156).abs() < 1e-12);
        assert_eq!(MeasureModel::LebesgueUnit.interval_measure(0.25, 0.75).unwrap(), 0.5);
        assert!(g.interval_measure(0.6, 0.5).is_err());
        assert!(g.interval_measure(-0.1, 0.5).is_err());
        assert!(MeasureModel::LebesgueTorus.interval_measure(0.0, 0.5).is_err());
        assert_eq!(MeasureModel::LebesgueTorus.box_measure(0.0, 0.5, 0.25, 0.75).unwrap(), 0.25);
    }

    #[test]
    fn radius_examples() {
        let g = MeasureModel::Gauss;
        let zero = Center::Unit(0.0);
        assert_eq!(g.radius_for_measure(zero, 1.0).unwrap(), 1.0);
        let r = g.radius_for_measure(zero, 0.5).unwrap();
        // bisection oracle on the interval measure
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g.interval_measure(0.0, mid).unwrap() < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((r - lo).abs() < 1e-14);
        assert!((r - 0.414_213_562_373_095).abs() < 1e-12);
        let l = MeasureModel::LebesgueUnit;
        assert!((l.radius_for_measure(Center::Unit(0.5), 0.2).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(l.radius_for_measure(Center::Unit(0.5), 1.5), Err(Error::Infeasible { .. })));
        assert!(l.radius_for_measure(Center::Unit(0.5), 0.0).is_err());
    }

    #[test]
    fn radius_inversion_all_branches() {
        for model in [MeasureModel::LebesgueUnit, MeasureModel::Gauss] {
            for c in [0.0, 0.1, 0.5, 0.9] {
                for s in [1e-6, 0.01, 0.3, 0.7, 0.95, 1.0] {
                    let r = model.radius_for_measure(Center::Unit(c), s).unwrap();
                    let back = model.ball_measure(Center::Unit(c), r);
                    assert!((back - s).abs() <= RADIUS_TOLERANCE, "{model:?} c={c} s={s}: {back}");
                }
            }
        }
        let t = MeasureModel::LebesgueTorus;
        let r = t.radius_for_measure(Center::Torus(0.3, 0.3), 0.04).unwrap();
        assert!((r - 0.1).abs() < 1e-15);
    }

    #[test]
    fn integrate_linear_matches_quadrature() {
        let cases = [
            (MeasureModel::LebesgueUnit, Center::Unit(0.3)),
            (MeasureModel::Gauss, Center::Unit(0.3)),
            (MeasureModel::Gauss, Center::Unit(0.0)),
            (MeasureModel::Gauss, Center::Unit(0.8)),
        ];
        for (model, center) in cases {
            let c = center.unit().unwrap();
            let density = |x: f64| match model {
                MeasureModel::Gauss => 1.0 / ((1.0 + x) * LN_2),
                _ => 1.0,
            };
            let (s1, s2, a, b) = (0.05, 0.45, 0.7, -1.3);
            let got = model.integrate_linear(center, s1, s2, a, b);
            // integrate over x directly
            let g = |x: f64| {
                let d = (x - c).abs();
                if d >= s1 && d < s2 {
                    (a + b * d) * density(x)
                } else {
                    0.0
                }
            };
            // split at the kinks for Simpson
            let mut pts = vec![0.0, 1.0];
            for p in [c - s2, c - s1, c + s1, c + s2] {
                if p > 0.0 && p < 1.0 {
                    pts.push(p);
                }
            }
            pts.sort_by(f64::total_cmp);
            let oracle: f64 = pts.windows(2).map(|w| quad(g, w[0], w[1])).sum();
            assert!((got - oracle).abs() < 1e-9, "{model:?} {center}: {got} vs {oracle}");
        }
        let t = MeasureModel::LebesgueTorus;
        let got = t.integrate_linear(Center::Torus(0.1, 0.2), 0.0, 0.25, 1.0, 0.0);
        assert!((got - 0.25).abs() < 1e-15);
    }

    #[test]
    fn schedule_measure_examples() {
        assert!((MeasureRule::Power { eps: 0.5 }.eval(100).unwrap() - 0.1).abs() < 1e-15);
        let cf = MeasureRule::CfThreshold { t: 0.5, rounding: Rounding::Floor }.eval(100).unwrap();
        // ln(1.1)/ln(2) to 15 digits
        assert!((cf - 0.137_503_523_749_935).abs() < 1e-14);
        let lp = MeasureRule::LogPower1 { eps: 1.0, c: 1.0 }.eval(8).unwrap();
        assert!((lp - 8f64.ln().powi(2) / 8.0).abs() < 1e-15);
        assert!((lp - 0.540_509_640_657_976).abs() < 1e-12);
        assert!(MeasureRule::LogPower1 { eps: 1.0, c: 1.0 }.eval(1).is_err());
        assert!(MeasureRule::Reciprocal { c: 0.5 }.eval(0).is_err());
    }

    #[test]
    fn rounded_powers() {
        assert_eq!(rounded_power(100, 0.5, Rounding::Floor), 10);
        assert_eq!(rounded_power(100, 0.5, Rounding::Ceil), 10);
        assert_eq!(rounded_power(101, 0.5, Rounding::Floor), 10);
        assert_eq!(rounded_power(101, 0.5, Rounding::Ceil), 11);
        assert_eq!(rounded_power(1_000_000, 0.5, Rounding::Floor), 1000);
    }

    #[test]
    fn hypotheses_power_schedule() {
        let s = BallSchedule::new(
            MeasureModel::LebesgueUnit,
            CenterRule::LeftEndpointZero,
            MeasureRule::Power { eps: 0.5 },
            2,
            10_000,
        )
        .unwrap();
        let rep = check_hypotheses(&s, 2, 10_000, 0.5).unwrap();
        assert!(rep.measure_nonincreasing.passed);
        assert!(rep.m_measure_nondecreasing.passed);
        assert_eq!(rep.lower_bound_power.holds_from, Some(2));
        assert!(rep.bv2());
    }

    #[test]
    fn hypotheses_reciprocal_schedule_fails() {
        let s = BallSchedule::new(
            MeasureModel::LebesgueUnit,
            CenterRule::LeftEndpointZero,
            MeasureRule::Reciprocal { c: 0.5 },
            2,
            10_000,
        )
        .unwrap();
        for eps in [1e-6, 0.01, 0.5] {
            let rep = check_hypotheses(&s, 2, 10_000, eps).unwrap();
            assert_eq!(rep.lower_bound_power.holds_from, None);
            assert!(!rep.bv2());
            assert!(!rep.bv1());
        }
    }

    #[test]
    fn hypotheses_cf_threshold() {
        let s = BallSchedule::new(
            MeasureModel::Gauss,
            CenterRule::LeftEndpointZero,
            MeasureRule::CfThreshold { t: 0.5, rounding: Rounding::Floor },
            2,
            1_000_000,
        )
        .unwrap();
        let rep = check_hypotheses(&s, 2, 1_000_000, 0.25).unwrap();
        assert!(rep.measure_nonincreasing.passed);
        assert!(rep.lower_bound_power.passed);
        // m mu(B_m) drops by about 1/log 2 each time floor(sqrt m) jumps, so
        // it is not non-decreasing on any long tail
        assert!(!rep.m_measure_nondecreasing.passed);
        assert_eq!(rep.m_measure_nondecreasing.holds_from, Some(1_000_000));
        assert_eq!(rep.m_measure_nondecreasing.violations, 999);
        // the normalized ratio still converges to 1/log 2
        let m = 1_000_000u64;
        let ratio = m as f64 * s.measure(m).unwrap() / (m as f64).sqrt();
        assert!((ratio * LN_2 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn nestedness() {
        let s = BallSchedule::new(
            MeasureModel::LebesgueTorus,
            CenterRule::Fixed(Center::Torus(0.3, 0.6)),
            MeasureRule::Power { eps: 0.5 },
            1,
            1000,
        )
        .unwrap();
        s.check_nested(1, 1000).unwrap();
        let grow = BallSchedule::new(
            MeasureModel::LebesgueUnit,
            CenterRule::LeftEndpointZero,
            MeasureRule::LogPower1 { eps: 1.0, c: 1.0 },
            2,
            100,
        )
        .unwrap();
        assert!(grow.check_nested(2, 100).is_err());
        grow.check_nested(8, 100).unwrap();
        let moving = BallSchedule::new(
            MeasureModel::LebesgueUnit,
            CenterRule::PerM(vec![Center::Unit(0.5), Center::Unit(0.5), Center::Unit(0.9)]),
            MeasureRule::Power { eps: 0.5 },
            1,
            3,
        )
        .unwrap();
        assert!(moving.check_nested(1, 3).is_err());
    }

    #[test]
    fn record_round_trip() {
        let s = BallSchedule::new(
            MeasureModel::Gauss,
            CenterRule::LeftEndpointZero,
            MeasureRule::CfThreshold { t: 0.5, rounding: Rounding::Ceil },
            2,
            1000,
        )
        .unwrap();
        let text = s.to_record().to_text();
        let back = BallSchedule::from_record(&Record::from_text(&text).unwrap()).unwrap();
        assert_eq!(back, s);
        let t = BallSchedule::new(
            MeasureModel::LebesgueTorus,
            CenterRule::Fixed(Center::Torus(0.1, 0.7)),
            MeasureRule::LogPower2 { eps: 0.25, c: 3.0 },
            100,
            999,
        )
        .unwrap();
        let back = BallSchedule::from_record(&t.to_record()).unwrap();
        assert_eq!(back, t);
    }
}
