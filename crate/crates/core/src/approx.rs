//! Piecewise-affine sandwich approximants of ball indicators.
//!
//! For a ball `B(c, r)` and a collar width `rho`,
//!
//! ```text
//! f+(d) = 1 on d <= r,        1 - (d - r) / rho on (r, r + rho),  0 beyond
//! f-(d) = 1 on d <= r - rho,  (r - d) / rho on (r - rho, r),      0 beyond
//! ```
//!
//! as functions of the distance `d` to the center, so that
//! `f- <= 1_B <= f+`. Case splits are made on fixed-point distances; only
//! the affine value itself is a float.

use crate::fixed;
use crate::measure::{BallSchedule, Center, MeasureModel};
use crate::orbit::{FixedCenter, Membership, OrbitStream, Span};
use crate::rng::CounterRng;
use crate::stats::fit_line;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApproximantPair {
    pub center: Center,
    pub r: f64,
    pub rho: f64,
    pub alpha: f64,
    r_units: u128,
    rho_units: u128,
}

impl ApproximantPair {
    pub fn new(center: Center, r: f64, rho: f64, alpha: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < r) {
            return Err(Error::Domain(format!("collar {rho} must lie in (0, r = {r})")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain(format!("Hölder exponent {alpha} is not in (0, 1]")));
        }
        Ok(Self { center, r, rho, alpha, r_units: fixed::units(r), rho_units: fixed::units(rho).max(1) })
    }

    /// `f+` at a distance of `d` units.
    pub fn upper_at(&self, d: u128) -> f64 {
        let (r, p) = (self.r_units, self.rho_units);
        if d <= r {
            1.0
        } else if d >= r + p {
            0.0
        } else {
            1.0 - (d - r) as f64 / p as f64
        }
    }

    /// `f-` at a distance of `d` units.
    pub fn lower_at(&self, d: u128) -> f64 {
        let (r, p) = (self.r_units, self.rho_units);
        if d >= r {
            0.0
        } else if d + p <= r {
            1.0
        } else {
            (r - d) as f64 / p as f64
        }
    }

    /// The indicator of the half-open ball.
    pub fn indicator_at(&self, d: u128) -> f64 {
        if d < self.r_units {
            1.0
        } else {
            0.0
        }
    }

    pub fn eval_at(&self, side: Side, d: u128) -> f64 {
        match side {
            Side::Lower => self.lower_at(d),
            Side::Upper => self.upper_at(d),
        }
    }

    pub fn distance_units(&self, point: Center) -> Result<u128> {
        distance_units(self.center, point)
    }

    pub fn eval_upper(&self, point: Center) -> Result<f64> {
        Ok(self.upper_at(self.distance_units(point)?))
    }

    pub fn eval_lower(&self, point: Center) -> Result<f64> {
        Ok(self.lower_at(self.distance_units(point)?))
    }

    /// `int f+ dmu`.
    pub fn upper_integral(&self, model: MeasureModel) -> f64 {
        let (c, r, p) = (self.center, self.r, self.rho);
        model.ball_measure(c, r) + model.integrate_linear(c, r, r + p, 1.0 + r / p, -1.0 / p)
    }

    /// `int f- dmu`.
    pub fn lower_integral(&self, model: MeasureModel) -> f64 {
        let (c, r, p) = (self.center, self.r, self.rho);
        model.ball_measure(c, r) - model.integrate_linear(c, r - p, r, 1.0 - r / p, 1.0 / p)
    }
}

/// Distance on `[0, 1)` (absolute difference) or the torus (sup of circle
/// distances), in units of `2^-64`.
pub fn distance_units(center: Center, point: Center) -> Result<u128> {
    match (FixedCenter::from(center), FixedCenter::from(point)) {
        (FixedCenter::Unit(c), FixedCenter::Unit(x)) => Ok(c.abs_diff(x) as u128),
        (FixedCenter::Torus(cx, cy), FixedCenter::Torus(x, y)) => {
            Ok(fixed::circle_distance(cx, x).max(fixed::circle_distance(cy, y)))
        }
        _ => Err(Error::Domain("point and center live in different spaces".into())),
    }
}

/// `rho_m = m^(-1 / beta)`.
pub fn rho_schedule(m: u64, beta: f64) -> Result<f64> {
    if m == 0 || !(beta > 0.0) {
        return Err(Error::Domain(format!("need m >= 1 and beta > 0, got m = {m}, beta = {beta}")));
    }
    Ok((m as f64).powf(-1.0 / beta))
}

/// The approximant pair of `B_m` with collar `rho_m`, refusing collars at
/// least as wide as the ball.
pub fn pair_for(schedule: &BallSchedule, m: u64, beta: f64, alpha: f64) -> Result<ApproximantPair> {
    let r = schedule.radius(m)?;
    let rho = rho_schedule(m, beta)?;
    if rho >= r {
        return Err(Error::CollarTooWide { m, rho, r });
    }
    ApproximantPair::new(schedule.center(m), r, rho, alpha)
}

/// `m mu(B_m) -+ C m rho^b` with the model's annulus constant and exponent one.
pub fn ez_bracket(model: MeasureModel, center: Center, m: u64, measure: f64, rho: f64) -> (f64, f64) {
    let slack = model.annulus_constant(center) * m as f64 * rho;
    let ez = m as f64 * measure;
    (ez - slack, ez + slack)
}

/// Sandwich counts `Z-_m <= Z_m <= Z+_m` with their expectations.
///
/// `z_minus` evaluates `f-` at the upper end of each distance enclosure and
/// `z_plus` evaluates `f+` at the lower end, so both remain valid bounds for
/// the true point. `z` and `z_upper` are the certain and possible hits of
/// the sharp ball.
#[derive(Clone, Debug, PartialEq)]
pub struct ApproxSeries {
    pub ms: Vec<u64>,
    pub rho: Vec<f64>,
    pub z_minus: Vec<f64>,
    pub z_plus: Vec<f64>,
    pub z: Vec<u64>,
    pub z_upper: Vec<u64>,
    pub ez: Vec<f64>,
    pub ez_minus: Vec<f64>,
    pub ez_plus: Vec<f64>,
    pub y_minus: Vec<f64>,
    pub y_plus: Vec<f64>,
    /// Whether `EZ-` and `EZ+` sit inside `m mu(B_m) -+ C m rho`.
    pub bracket_ok: Vec<bool>,
}

impl ApproxSeries {
    pub fn len(&self) -> usize {
        self.ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ms.is_empty()
    }

    pub fn indeterminate_count(&self) -> usize {
        self.z.iter().zip(&self.z_upper).filter(|(a, b)| a != b).count()
    }

    /// Columns `m,rho,Zminus,Z,Zplus,EZminus,EZ,EZplus,Yminus,Yplus,flag`.
    pub fn to_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("m,rho,Zminus,Z,Zplus,EZminus,EZ,EZplus,Yminus,Yplus,flag\n");
        for i in 0..self.len() {
            let flag = if self.z[i] == self.z_upper[i] { "ok" } else { "indeterminate" };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                self.ms[i],
                self.rho[i],
                self.z_minus[i],
                self.z[i],
                self.z_plus[i],
                self.ez_minus[i],
                self.ez[i],
                self.ez_plus[i],
                self.y_minus[i],
                self.y_plus[i],
                flag
            )
            .unwrap();
        }
        out
    }
}

pub fn approx_counts(orbit: &OrbitStream, schedule: &BallSchedule, beta: f64, queries: &[u64]) -> Result<ApproxSeries> {
    if queries.windows(2).any(|w| w[0] >= w[1]) || queries.first() == Some(&0) {
        return Err(Error::Domain("queries must be strictly increasing and positive".into()));
    }
    let max = queries.last().copied().unwrap_or(0);
    if max > 0 && max - 1 > orbit.horizon() {
        return Err(Error::InsufficientPrecision { needed: max - 1, horizon: orbit.horizon() });
    }
    let shared: Option<Vec<Span>> = if schedule.has_fixed_center() {
        Some(orbit.distances(max, schedule.center(1).into())?)
    } else {
        None
    };

    let n = queries.len();
    let mut s = ApproxSeries {
        ms: queries.to_vec(),
        rho: Vec::with_capacity(n),
        z_minus: Vec::with_capacity(n),
        z_plus: Vec::with_capacity(n),
        z: Vec::with_capacity(n),
        z_upper: Vec::with_capacity(n),
        ez: Vec::with_capacity(n),
        ez_minus: Vec::with_capacity(n),
        ez_plus: Vec::with_capacity(n),
        y_minus: Vec::with_capacity(n),
        y_plus: Vec::with_capacity(n),
        bracket_ok: Vec::with_capacity(n),
    };
    for &m in queries {
        let pair = pair_for(schedule, m, beta, 1.0)?;
        let r = schedule.radius_units(m)?;
        let own;
        let spans: &[Span] = match &shared {
            Some(v) => &v[..m as usize],
            None => {
                own = orbit.distances(m, pair.center.into())?;
                &own
            }
        };
        let (mut zm, mut zp) = (0.0, 0.0);
        let (mut hit, mut maybe) = (0u64, 0u64);
        for span in spans {
            zm += pair.lower_at(span.hi);
            zp += pair.upper_at(span.lo);
            match span.membership(r) {
                Membership::Inside => hit += 1,
                Membership::Indeterminate => maybe += 1,
                Membership::Outside => {}
            }
        }
        let measure = schedule.measure(m)?;
        let em = m as f64 * pair.lower_integral(schedule.model);
        let ep = m as f64 * pair.upper_integral(schedule.model);
        let (lo, hi) = ez_bracket(schedule.model, pair.center, m, measure, pair.rho);
        s.rho.push(pair.rho);
        s.z_minus.push(zm);
        s.z_plus.push(zp);
        s.z.push(hit);
        s.z_upper.push(hit + maybe);
        s.ez.push(m as f64 * measure);
        s.ez_minus.push(em);
        s.ez_plus.push(ep);
        s.y_minus.push(zm / em - 1.0);
        s.y_plus.push(zp / ep - 1.0);
        s.bracket_ok.push(lo <= em && ep <= hi);
    }
    Ok(s)
}

/// Annulus condition `mu(B(c, r + rho) \ B(c, r)) <= C rho^beta` on a grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnulusReport {
    /// Smallest `C` that works on the grid for the given exponent.
    pub fitted_c: f64,
    /// Log-log slope of the annulus measure against `rho`.
    pub fitted_beta: f64,
    /// Largest `annulus / (C_model rho^beta)`; at most 1 when the model's
    /// constant is valid.
    pub worst_ratio: f64,
}

pub fn annulus_check(model: MeasureModel, center: Center, r_grid: &[f64], rho_grid: &[f64], beta: f64) -> AnnulusReport {
    let c_model = model.annulus_constant(center);
    let (mut fitted_c, mut worst) = (0.0f64, 0.0f64);
    let (mut xs, mut ys) = (vec![], vec![]);
    for &r in r_grid {
        for &rho in rho_grid {
            let a = model.annulus_measure(center, r, rho);
            fitted_c = fitted_c.max(a / rho.powf(beta));
            worst = worst.max(a / (c_model * rho.powf(beta)));
            if a > 0.0 {
                xs.push(rho.ln());
                ys.push(a.ln());
            }
        }
    }
    let fitted_beta = fit_line(&xs, &ys).map_or(f64::NAN, |f| f.slope);
    AnnulusReport { fitted_c, fitted_beta, worst_ratio: worst }
}

/// Sampled lower estimate of `sup|f| + sup |f(x) - f(y)| / d(x, y)^alpha`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolderEstimate {
    pub sup: f64,
    pub seminorm: f64,
}

impl HolderEstimate {
    pub fn norm(&self) -> f64 {
        self.sup + self.seminorm
    }
}

/// Estimates the Hölder norm of `f` from the given point pairs.
pub fn holder_estimate<F>(points: &[(Center, Center)], alpha: f64, f: F) -> Result<HolderEstimate>
where
    F: Fn(Center) -> Result<f64>,
{
    let (mut sup, mut semi) = (0.0f64, 0.0f64);
    for &(x, y) in points {
        let (fx, fy) = (f(x)?, f(y)?);
        sup = sup.max(fx.abs()).max(fy.abs());
        let d = fixed::units_to_f64(distance_units(x, y)?);
        if d > 0.0 {
            semi = semi.max((fx - fy).abs() / d.powf(alpha));
        }
    }
    Ok(HolderEstimate { sup, seminorm: semi })
}

/// Samples `budget` pairs: half uniform over the space, half on one ray
/// through the collar, where the quotient is largest.
pub fn holder_quotient(pair: &ApproximantPair, side: Side, budget: usize, rng: &mut CounterRng) -> Result<HolderEstimate> {
    let (inner, outer) = match side {
        Side::Upper => (pair.r, pair.r + pair.rho),
        Side::Lower => (pair.r - pair.rho, pair.r),
    };
    let along = |s: f64| -> Center {
        match pair.center {
            Center::Unit(c) => {
                if c + s < 1.0 {
                    Center::Unit(c + s)
                } else {
                    Center::Unit((c - s).max(0.0))
                }
            }
            Center::Torus(x, y) => Center::Torus((x + s.min(0.5)).rem_euclid(1.0), y),
        }
    };
    let uniform = |rng: &mut CounterRng| -> Center {
        match pair.center {
            Center::Unit(_) => Center::Unit(rng.next_f64()),
            Center::Torus(..) => Center::Torus(rng.next_f64(), rng.next_f64()),
        }
    };
    let width = outer - inner;
    let mut points = Vec::with_capacity(budget);
    for i in 0..budget {
        if i % 2 == 0 {
            points.push((uniform(rng), uniform(rng)));
        } else {
            let a = inner - 0.5 * width + 2.0 * width * rng.next_f64();
            let b = inner - 0.5 * width + 2.0 * width * rng.next_f64();
            points.push((along(a.max(0.0)), along(b.max(0.0))));
        }
    }
    holder_estimate(&points, pair.alpha, |p| {
        let d = pair.distance_units(p)?;
        Ok(pair.eval_at(side, d))
    })
}
