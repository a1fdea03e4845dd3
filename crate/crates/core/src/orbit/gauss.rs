use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use super::Span;
use crate::rng::SeedSpec;
use crate::{Error, Result};

/// An exact rational point `num / den` of `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaussState {
    pub num: BigUint,
    pub den: BigUint,
}

impl GaussState {
    pub fn new(num: BigUint, den: BigUint) -> Result<Self> {
        if den.is_zero() || num > den {
            return Err(Error::Domain("Gauss state must lie in [0, 1]".into()));
        }
        Ok(Self { num, den })
    }

    /// The dyadic `payload / 2^bits`.
    pub fn dyadic(payload: BigUint, bits: u64) -> Result<Self> {
        Self::new(payload, BigUint::from(1u8) << bits)
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Applies `G(x) = 1/x mod 1` and returns the partial quotient
    /// `floor(1/x)`, or `None` at `x = 0`.
    pub fn step(&mut self) -> Option<BigUint> {
        if self.num.is_zero() {
            return None;
        }
        let q = &self.den / &self.num;
        let r = &self.den % &self.num;
        self.den = std::mem::replace(&mut self.num, r);
        Some(q)
    }

    /// `floor(2^64 x)` and `ceil(2^64 x)`.
    pub fn positions(&self) -> (u128, u128) {
        let scaled = &self.num << 64u32;
        let q = &scaled / &self.den;
        let exact = (&q * &self.den) == scaled;
        let q = q.to_u128().expect("x <= 1");
        (q, if exact { q } else { q + 1 })
    }
}

/// Orbit of the Gauss map computed with exact integer arithmetic.
///
/// A dyadic seed with `b` payload bits stands for the cell
/// `[x, x + 2^-b)`. Both cell endpoints are iterated; iterate `k` is
/// certified while the endpoints share their first `k` partial quotients and
/// neither expansion has terminated, in which case `G^k` is monotone on the
/// cell and the enclosure is the interval between the two images.
#[derive(Clone, Debug)]
pub struct GaussOrbit {
    seed: Option<SeedSpec>,
    /// Enclosure `[lo, hi]` of `G^k x` in units of `2^-64`.
    lo: Vec<u128>,
    hi: Vec<u128>,
    /// Certified partial quotients `a_1, a_2, ...` (saturated at `u64::MAX`).
    digits: Vec<u64>,
    exact: bool,
    terminated: bool,
}

fn saturate(q: &BigUint) -> u64 {
    q.to_u64().unwrap_or(u64::MAX)
}

impl GaussOrbit {
    pub fn from_seed(seed: SeedSpec, steps: u64) -> Result<Self> {
        if seed.bits < 64 {
            return Err(Error::Domain("Gauss seeds need at least 64 payload bits".into()));
        }
        let payload = payload_integer(&seed.payload(), seed.bits);
        if payload.is_zero() {
            return Err(Error::DegenerateSeed(format!("payload of {seed} is zero")));
        }
        let upper = &payload + 1u8;
        let mut orbit = Self::from_cell(
            GaussState::dyadic(payload, seed.bits)?,
            GaussState::dyadic(upper, seed.bits)?,
            steps,
        );
        orbit.seed = Some(seed);
        Ok(orbit)
    }

    /// Exact orbit of the rational `num / den` in `(0, 1)`. Iterates continue
    /// up to and including the first zero.
    pub fn from_rational(num: u64, den: u64, steps: u64) -> Result<Self> {
        let mut state = GaussState::new(num.into(), den.into())?;
        if state.is_zero() {
            return Err(Error::DegenerateSeed("x = 0".into()));
        }
        let (p, q) = state.positions();
        let mut orbit = GaussOrbit { seed: None, lo: vec![p], hi: vec![q], digits: vec![], exact: true, terminated: false };
        while (orbit.digits.len() as u64) < steps {
            match state.step() {
                Some(a) => {
                    orbit.digits.push(saturate(&a));
                    let (p, q) = state.positions();
                    orbit.lo.push(p);
                    orbit.hi.push(q);
                }
                None => break,
            }
            if state.is_zero() {
                orbit.terminated = true;
                break;
            }
        }
        Ok(orbit)
    }

    fn from_cell(mut lower: GaussState, mut upper: GaussState, steps: u64) -> Self {
        let mut orbit = GaussOrbit { seed: None, lo: vec![], hi: vec![], digits: vec![], exact: false, terminated: false };
        let push = |orbit: &mut GaussOrbit, a: &GaussState, b: &GaussState| {
            let (a0, a1) = a.positions();
            let (b0, b1) = b.positions();
            orbit.lo.push(a0.min(b0));
            orbit.hi.push(a1.max(b1));
        };
        push(&mut orbit, &lower, &upper);
        while (orbit.digits.len() as u64) < steps {
            let (Some(a), Some(b)) = (lower.step(), upper.step()) else { break };
            if a != b || lower.is_zero() || upper.is_zero() {
                break;
            }
            orbit.digits.push(saturate(&a));
            push(&mut orbit, &lower, &upper);
        }
        orbit
    }

    pub fn seed(&self) -> Option<SeedSpec> {
        self.seed
    }

    pub fn horizon(&self) -> u64 {
        self.lo.len() as u64 - 1
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// The exact orbit reached zero (rational seeds only).
    pub fn terminated(&self) -> bool {
        self.terminated
    }

    pub fn digits(&self) -> &[u64] {
        &self.digits
    }

    /// Enclosure `[lo, hi]` of `G^k x` in units of `2^-64`.
    pub fn enclosure(&self, k: u64) -> (u128, u128) {
        (self.lo[k as usize], self.hi[k as usize])
    }

    pub fn precision_horizon(&self, width: f64) -> u64 {
        let limit = width * 18_446_744_073_709_551_616.0;
        let bad = self.lo.iter().zip(&self.hi).position(|(&l, &h)| (h - l) as f64 >= limit);
        match bad {
            Some(0) => 0,
            Some(k) => k as u64 - 1,
            None => self.horizon(),
        }
    }

    pub fn distance(&self, k: u64, c: u64) -> Span {
        let (lo, hi) = self.enclosure(k);
        let c = c as u128;
        let min = if c < lo {
            lo - c
        } else if c > hi {
            c - hi
        } else {
            0
        };
        let max = c.abs_diff(lo).max(c.abs_diff(hi));
        Span { lo: min, hi: max, hi_open: false }
    }
}

/// The payload read as the integer `2^bits x`.
pub(crate) fn payload_integer(words: &[u64], bits: u64) -> BigUint {
    let nwords = bits.div_ceil(64) as usize;
    let mut digits: Vec<u32> = Vec::with_capacity(nwords * 2);
    for w in words[..nwords].iter().rev() {
        digits.push(*w as u32);
        digits.push((*w >> 32) as u32);
    }
    let full = BigUint::new(digits);
    full >> (nwords as u64 * 64 - bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;

    #[test]
    fn hand_rational_orbit() {
        let o = GaussOrbit::from_rational(5, 8, 10).unwrap();
        assert_eq!(o.digits(), &[1, 1, 1, 2]);
        // 5/8 -> 3/5 -> 2/3
        let pos = |n: u128, d: u128| ((n << 64) / d, ((n << 64) + d - 1) / d);
        assert_eq!(o.enclosure(1), pos(3, 5));
        assert_eq!(o.enclosure(2), pos(2, 3));
        assert!(o.terminated());
        assert_eq!(o.horizon(), 4);
        assert_eq!(o.enclosure(4), (0, 0));
    }

    #[test]
    fn one_third_terminates() {
        let o = GaussOrbit::from_rational(1, 3, 10).unwrap();
        assert_eq!(o.digits(), &[3]);
        assert_eq!(o.horizon(), 1);
        assert_eq!(o.enclosure(1), (0, 0));
        assert!(GaussOrbit::from_rational(0, 3, 10).is_err());
    }

    #[test]
    fn payload_integer_reads_msb_first() {
        let words = vec![0xA000_0000_0000_0000u64];
        assert_eq!(payload_integer(&words, 3), BigUint::from(5u8));
        let words = vec![1u64, 0x8000_0000_0000_0000];
        assert_eq!(payload_integer(&words, 65), BigUint::from(3u8));
    }

    #[test]
    fn degenerate_and_short_seeds() {
        assert!(GaussOrbit::from_seed(SeedSpec::new(0, 0, 32), 10).is_err());
        let o = GaussOrbit::from_seed(SeedSpec::new(0, 0, 512), 1000).unwrap();
        // about 512 / 3.42 certified digits
        assert!(o.horizon() > 100 && o.horizon() < 200, "{}", o.horizon());
        assert_eq!(o.digits().len() as u64, o.horizon());
    }
}
