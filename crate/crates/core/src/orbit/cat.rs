use super::{Span, CAT_LOG2_LAMBDA};
use crate::fixed::{circle_distance_bounds, ONE};
use crate::rng::SeedSpec;
use crate::{Error, Result};

/// Upper bounds `(ex, ey) * 2^exp` on the coordinate errors. All errors are
/// non-negative offsets, so they propagate through the non-negative matrix
/// `[[2, 1], [1, 1]]` by the same recurrence, rounded up.
#[derive(Clone, Copy, Debug)]
struct ErrorBound {
    ex: f64,
    ey: f64,
    exp: i64,
}

impl ErrorBound {
    fn step(&mut self) {
        let up = |v: f64| if v == 0.0 { 0.0 } else { v.next_up() };
        let ex = up(2.0 * self.ex + self.ey);
        let ey = up(self.ex + self.ey);
        self.ex = ex;
        self.ey = ey;
        if self.ex > 1e100 {
            // 2^300 scaling is exact
            self.ex *= 2f64.powi(-300);
            self.ey *= 2f64.powi(-300);
            self.exp += 300;
        }
    }

    /// Adds `2^e` to both coordinates.
    fn add_pow2(&mut self, e: i64) {
        let shift = e - self.exp;
        let t = if shift < -1070 { 0.0 } else { 2f64.powi(shift.min(1000) as i32) };
        self.ex = (self.ex + t).next_up();
        self.ey = (self.ey + t).next_up();
    }

    /// Bound in units of `2^-64`, rounded up, saturating at `2^64`.
    fn units(&self, v: f64) -> u128 {
        let e = self.exp + 64;
        if v == 0.0 {
            return 0;
        }
        if e + v.log2().ceil() as i64 >= 64 {
            return ONE;
        }
        let scaled = if e < -1070 { 0.0 } else { v * 2f64.powi(e as i32) };
        scaled.ceil() as u128 + 1
    }

    fn log2_max(&self) -> f64 {
        let m = self.ex.max(self.ey);
        if m == 0.0 {
            f64::NEG_INFINITY
        } else {
            m.log2() + self.exp as f64
        }
    }
}

/// One certified iterate: `x` lies in `[x, x + ex]` and `y` in
/// `[y, y + ey]` (units of `2^-64`, wrapping on the circle).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CatPoint {
    pub x: u64,
    pub y: u64,
    pub ex: u128,
    pub ey: u128,
}

/// Orbit of the cat map `(x, y) -> (2x + y, x + y) mod 1` on the torus.
///
/// Coordinates are fixed-point integers modulo `2^(64 n)`. The seed cell
/// and every truncation of low limbs contribute non-negative errors whose
/// bounds are carried alongside. Low limbs are dropped once they cannot
/// influence the top 128 bits before the last requested step.
#[derive(Clone, Debug)]
pub struct CatOrbit {
    seed: Option<SeedSpec>,
    points: Vec<CatPoint>,
    /// `log2` of the real enclosure width per step.
    log2_width: Vec<f64>,
    horizon: u64,
}

impl CatOrbit {
    /// Splits the budget evenly between the coordinates (lanes 0 and 1 of the
    /// seed stream).
    pub fn from_seed(seed: SeedSpec, steps: u64) -> Result<Self> {
        if seed.bits < 128 {
            return Err(Error::Domain("cat seeds need at least 128 payload bits".into()));
        }
        let per = seed.bits / 2;
        let half = SeedSpec { bits: per, ..seed };
        let mut orbit = Self::from_words(&half.payload_stream(0), &half.payload_stream(1), per, false, steps);
        orbit.seed = Some(seed);
        Ok(orbit)
    }

    /// Orbit from MSB-first coordinate words with `bits` binary digits each.
    /// With `exact`, the seed is the dyadic point itself rather than its cell.
    pub fn from_words(xw: &[u64], yw: &[u64], bits: u64, exact: bool, steps: u64) -> Self {
        let n = bits.div_ceil(64).max(1) as usize;
        let limbs = |w: &[u64]| -> Vec<u64> {
            let mut v: Vec<u64> = (0..n).map(|i| w.get(i).copied().unwrap_or(0)).collect();
            if bits % 64 != 0 {
                v[n - 1] &= !0u64 << (64 - bits % 64);
            }
            v.reverse(); // little-endian limbs
            v
        };
        let mut x = limbs(xw);
        let mut y = limbs(yw);
        let mut err = if exact {
            ErrorBound { ex: 0.0, ey: 0.0, exp: -(bits as i64) }
        } else {
            ErrorBound { ex: 1.0, ey: 1.0, exp: -(bits as i64) }
        };

        let mut low = 0usize; // limbs below `low` have been dropped
        let mut points = Vec::with_capacity(steps as usize + 1);
        let mut log2_width = Vec::with_capacity(steps as usize + 1);
        let record = |points: &mut Vec<CatPoint>, widths: &mut Vec<f64>, x: &[u64], y: &[u64], err: &ErrorBound| {
            points.push(CatPoint { x: x[n - 1], y: y[n - 1], ex: err.units(err.ex), ey: err.units(err.ey) });
            // truncating to the top limb adds one unit
            widths.push(err.log2_max().max(-64.0 - 1e-9));
        };
        // the exact top limb of an exact seed has zero width
        record(&mut points, &mut log2_width, &x, &y, &err);
        if exact && n == 1 {
            log2_width[0] = f64::NEG_INFINITY;
        }

        for k in 0..steps {
            let remaining = (steps - k) as f64;
            let keep_bits = 192.0 + CAT_LOG2_LAMBDA * remaining;
            let keep = (keep_bits / 64.0).ceil() as usize + 1;
            while n - low > keep {
                if x[low] != 0 || y[low] != 0 {
                    // floor truncation: the dropped value lies in [0, 2^-(64 (n - low - 1)))
                    err.add_pow2(-64 * (n - low - 1) as i64);
                }
                low += 1;
            }
            cat_step(&mut x[low..], &mut y[low..]);
            err.step();
            record(&mut points, &mut log2_width, &x, &y, &err);
            if exact && n == 1 && err.ex == 0.0 {
                *log2_width.last_mut().unwrap() = f64::NEG_INFINITY;
            }
        }
        let mut orbit = CatOrbit { seed: None, points, log2_width, horizon: 0 };
        orbit.horizon = orbit.precision_horizon(2f64.powi(-64));
        orbit
    }

    pub fn seed(&self) -> Option<SeedSpec> {
        self.seed
    }

    pub fn len(&self) -> u64 {
        self.points.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, k: u64) -> CatPoint {
        self.points[k as usize]
    }

    /// Certified while the enclosure stays narrower than `2^-64`.
    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn precision_horizon(&self, width: f64) -> u64 {
        let limit = width.log2();
        match self.log2_width.iter().position(|&w| w >= limit) {
            Some(0) => 0,
            Some(k) => k as u64 - 1,
            None => self.len() - 1,
        }
    }

    /// Sup-metric distance enclosure to the center `(cx, cy)`.
    pub fn distance(&self, k: u64, cx: u64, cy: u64) -> Span {
        let p = self.point(k);
        let half = 1u128 << 63;
        let bounds = |c: u64, v: u64, e: u128| {
            if e >= half {
                (0, half)
            } else {
                circle_distance_bounds(c, v, e)
            }
        };
        let (xl, xh) = bounds(cx, p.x, p.ex);
        let (yl, yh) = bounds(cy, p.y, p.ey);
        Span { lo: xl.max(yl), hi: xh.max(yh), hi_open: false }
    }
}

/// `(x, y) <- (2x + y, x + y)` on little-endian limbs, modulo the top.
fn cat_step(x: &mut [u64], y: &mut [u64]) {
    let mut c1 = false;
    let mut c2 = false;
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let (s, o1) = xi.overflowing_add(*yi);
        let (s, o2) = s.overflowing_add(c1 as u64);
        c1 = o1 | o2;
        let (t, o3) = xi.overflowing_add(s);
        let (t, o4) = t.overflowing_add(c2 as u64);
        c2 = o3 | o4;
        *xi = t;
        *yi = s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_origin() {
        let o = CatOrbit::from_words(&[0], &[0], 64, true, 100);
        for k in 0..=100 {
            assert_eq!(o.point(k), CatPoint { x: 0, y: 0, ex: 0, ey: 0 });
        }
        assert_eq!(o.horizon(), 100);
    }

    #[test]
    fn half_half_has_period_three() {
        let h = 1u64 << 63;
        let o = CatOrbit::from_words(&[h], &[h], 64, true, 9);
        let coords: Vec<(u64, u64)> = (0..=9).map(|k| (o.point(k).x, o.point(k).y)).collect();
        for k in 0..=9 {
            let expect = [(h, h), (h, 0), (0, h)][k % 3];
            assert_eq!(coords[k], expect);
        }
        assert_eq!(o.horizon(), 9);
    }

    #[test]
    fn multi_limb_step_matches_u128() {
        let x = [0xDEAD_BEEF_0123_4567u64, 0x89AB_CDEF_FEDC_BA98];
        let y = [0x0F0F_0F0F_F0F0_F0F0u64, 0x1234_5678_9ABC_DEF0];
        let o = CatOrbit::from_words(&x, &y, 128, true, 50);
        let mut a = ((x[0] as u128) << 64) | x[1] as u128;
        let mut b = ((y[0] as u128) << 64) | y[1] as u128;
        for k in 1..=50 {
            let s = a.wrapping_add(b);
            a = a.wrapping_add(s);
            b = s;
            assert_eq!(o.point(k).x, (a >> 64) as u64);
            assert_eq!(o.point(k).y, (b >> 64) as u64);
        }
    }

    #[test]
    fn horizon_for_4096_bits() {
        let o = CatOrbit::from_seed(SeedSpec::new(4, 2, 4096), 1600).unwrap();
        let h = o.horizon();
        // (2048 - 64) / log2(lambda) ~ 1429
        assert!(h >= 1400 && h <= 1432, "{h}");
        // monotone in the requested width
        assert!(o.precision_horizon(1e-3) >= h);
        assert!(o.precision_horizon(2f64.powi(-100)) <= h);
        assert!(o.precision_horizon(1.0) >= o.precision_horizon(1e-3));
    }
}
