//! Continued-fraction digits of dyadic seeds and threshold counts.
//!
//! Digits are produced by the integer Euclid recurrence on both endpoints
//! of the seed's cell `[P / 2^b, (P + 1) / 2^b)`. Digit `k` is certified
//! when the endpoints agree on `a_1 .. a_k` and neither expansion has ended
//! by step `k`; every point of the cell then has the same first `k` digits.
//!
//! Counting uses the 1-based convention `#{1 <= k <= m : a_k >= T}`.

use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use crate::fenwick::offline_prefix_rank;
use crate::measure::{rounded_power, Rounding};
use crate::orbit::payload_integer;
use crate::rng::SeedSpec;
use crate::{Error, Result};

/// Partial quotients `a_1, a_2, ...` with a certified prefix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigitStream {
    /// Digits of the lower cell endpoint, saturated at `u64::MAX`.
    digits: Vec<u64>,
    certified: usize,
    requested: usize,
    seed: Option<SeedSpec>,
    terminated: bool,
}

impl DigitStream {
    /// All digits certified, as for a hand-constructed or exact expansion.
    pub fn from_digits(digits: Vec<u64>) -> Result<Self> {
        if digits.contains(&0) {
            return Err(Error::Domain("partial quotients must be positive".into()));
        }
        let n = digits.len();
        Ok(Self { digits, certified: n, requested: n, seed: None, terminated: false })
    }

    /// Exact expansion of `num / den` in `(0, 1)`, truncated at `count`.
    pub fn from_rational(num: u64, den: u64, count: usize) -> Result<Self> {
        if num == 0 || num >= den {
            return Err(Error::Domain(format!("{num}/{den} is not in (0, 1)")));
        }
        let (digits, terminated) = partial_quotients(vec![num], vec![den], count);
        let n = digits.len();
        Ok(Self { digits, certified: n, requested: count, seed: None, terminated: terminated && n < count })
    }

    pub fn digits(&self) -> &[u64] {
        &self.digits
    }

    /// Certified digits `a_1 .. a_c`.
    pub fn certified_digits(&self) -> &[u64] {
        &self.digits[..self.certified]
    }

    pub fn certified(&self) -> usize {
        self.certified
    }

    /// Whether `a_k` (1-based) is certified.
    pub fn is_certified(&self, k: usize) -> bool {
        k >= 1 && k <= self.certified
    }

    pub fn requested(&self) -> usize {
        self.requested
    }

    /// Fewer certified digits than requested.
    pub fn truncated(&self) -> bool {
        self.certified < self.requested
    }

    /// The exact rational expansion ended before the requested length.
    pub fn terminated(&self) -> bool {
        self.terminated
    }

    pub fn seed(&self) -> Option<SeedSpec> {
        self.seed
    }

    /// `#{1 <= k <= m : a_k >= threshold}`.
    pub fn count_geq(&self, m: usize, threshold: u64) -> Result<u64> {
        Ok(self.count_geq_many(&[(m, threshold)])?[0])
    }

    /// Answers many `(m, threshold)` queries offline in
    /// `O((M + Q) log M)`.
    pub fn count_geq_many(&self, queries: &[(usize, u64)]) -> Result<Vec<u64>> {
        for &(m, t) in queries {
            if m > self.certified {
                return Err(Error::InsufficientPrecision { needed: m as u64, horizon: self.certified as u64 });
            }
            if t == 0 {
                return Err(Error::Domain("threshold must be at least 1".into()));
            }
        }
        let below = offline_prefix_rank(self.certified_digits(), queries);
        Ok(queries.iter().zip(below).map(|(&(m, _), b)| m as u64 - b).collect())
    }

    /// `#{k <= m : a_k >= round(m^t)} / m^(1 - t)`.
    pub fn corollary_statistic(&self, m: usize, t: f64, rounding: Rounding) -> Result<f64> {
        Ok(self.corollary_statistics(&[m], t, rounding)?[0])
    }

    pub fn corollary_statistics(&self, ms: &[usize], t: f64, rounding: Rounding) -> Result<Vec<f64>> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Domain(format!("t = {t} is not in (0, 1)")));
        }
        let queries: Vec<(usize, u64)> = ms.iter().map(|&m| (m, rounded_power(m as u64, t, rounding))).collect();
        if let Some(&(m, _)) = queries.iter().find(|q| q.1 == 0) {
            return Err(Error::Domain(format!("rounded threshold vanishes at m = {m}")));
        }
        let counts = self.count_geq_many(&queries)?;
        Ok(ms.iter().zip(counts).map(|(&m, c)| c as f64 / (m as f64).powf(1.0 - t)).collect())
    }

    /// Header line with the seed, then one certified digit per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self.seed {
            Some(s) => writeln!(out, "# {s} certified={}", self.certified),
            None => writeln!(out, "# exact certified={}", self.certified),
        }
        .unwrap();
        for d in self.certified_digits() {
            writeln!(out, "{d}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().and_then(|h| h.strip_prefix("# ")).ok_or_else(|| Error::Config("missing digit header".into()))?;
        let mut fields = std::collections::HashMap::new();
        for tok in header.split_whitespace() {
            if let Some((k, v)) = tok.split_once('=') {
                fields.insert(k, v);
            }
        }
        let num = |k: &str| -> Result<u64> {
            fields
                .get(k)
                .ok_or_else(|| Error::Config(format!("digit header lacks `{k}`")))?
                .parse()
                .map_err(|_| Error::Config(format!("bad `{k}` in digit header")))
        };
        let seed = if header.starts_with("exact") {
            None
        } else {
            Some(SeedSpec::new(num("master")?, num("point")?, num("bits")?))
        };
        let digits = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<u64>().map_err(|_| Error::Config(format!("bad digit `{l}`"))))
            .collect::<Result<Vec<u64>>>()?;
        if digits.len() as u64 != num("certified")? {
            return Err(Error::Config("digit count does not match header".into()));
        }
        let mut s = Self::from_digits(digits)?;
        s.seed = seed;
        Ok(s)
    }
}

/// Certified digits of the seed's cell, at most `count`.
pub fn extract_digits(seed: SeedSpec, count: usize) -> Result<DigitStream> {
    if count == 0 {
        return Err(Error::Domain("count must be at least 1".into()));
    }
    let p = payload_integer(&seed.payload(), seed.bits);
    if p.is_zero() {
        return Err(Error::DegenerateSeed(format!("payload of {seed} is zero")));
    }
    let den = limbs(&(BigUint::from(1u8) << seed.bits));
    let upper = limbs(&(&p + 1u8));
    let (lo, lo_end) = partial_quotients(limbs(&p), den.clone(), count + 1);
    let (hi, hi_end) = partial_quotients(upper, den, count + 1);

    let mut certified = lo.iter().zip(&hi).take_while(|(a, b)| a == b).count().min(count);
    if lo_end {
        certified = certified.min(lo.len() - 1);
    }
    if hi_end {
        certified = certified.min(hi.len() - 1);
    }
    let mut digits = lo;
    digits.truncate(count);
    Ok(DigitStream { digits, certified, requested: count, seed: Some(seed), terminated: false })
}

/// Like [`extract_digits`], raising the seed precision (prefix-stably) by
/// quarters until `count` digits are certified or `max_bits` is exceeded.
pub fn extract_digits_certified(seed: SeedSpec, count: usize, max_bits: u64) -> Result<DigitStream> {
    let mut seed = seed;
    loop {
        let s = extract_digits(seed, count)?;
        if !s.truncated() || seed.bits >= max_bits {
            return Ok(s);
        }
        seed = seed.with_bits((seed.bits + seed.bits / 4).min(max_bits));
    }
}

fn limbs(x: &BigUint) -> Vec<u64> {
    x.to_u64_digits()
}

fn bit_len(x: &[u64]) -> u64 {
    match x.last() {
        Some(&top) => 64 * (x.len() as u64 - 1) + 64 - top.leading_zeros() as u64,
        None => 0,
    }
}

/// 62 bits of `x` starting at bit `shift`.
fn bits_at(x: &[u64], shift: u64) -> i128 {
    let i = (shift / 64) as usize;
    let s = shift % 64;
    let lo = x.get(i).copied().unwrap_or(0) as u128;
    let hi = x.get(i + 1).copied().unwrap_or(0) as u128;
    ((((hi << 64) | lo) >> s) & ((1u128 << 62) - 1)) as i128
}

fn trim(x: &mut Vec<u64>) {
    while x.last() == Some(&0) {
        x.pop();
    }
}

/// `a u + b v` for cofactors below `2^62` in magnitude and a non-negative
/// result.
fn combine(a: i128, u: &[u64], b: i128, v: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(u.len());
    let mut carry: i128 = 0;
    for i in 0..u.len() {
        let t = a * u[i] as i128 + b * v.get(i).copied().unwrap_or(0) as i128 + carry;
        out.push(t as u64);
        carry = t >> 64;
    }
    debug_assert_eq!(carry, 0);
    trim(&mut out);
    out
}

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

/// Partial quotients of `num / den` (little-endian limbs, `0 < num <= den`)
/// by Lehmer's algorithm with single-word quotient simulation. Returns up to
/// `limit` digits and whether the expansion ended.
pub(crate) fn partial_quotients(num: Vec<u64>, den: Vec<u64>, limit: usize) -> (Vec<u64>, bool) {
    let mut u = den;
    let mut v = num;
    trim(&mut u);
    trim(&mut v);
    let mut out = Vec::new();
    while out.len() < limit && !v.is_empty() {
        if u.len() <= 2 {
            let word = |x: &[u64]| x.iter().rev().fold(0u128, |acc, &w| (acc << 64) | w as u128);
            let (mut a, mut b) = (word(&u), word(&v));
            while out.len() < limit && b != 0 {
                out.push(u64::try_from(a / b).unwrap_or(u64::MAX));
                (a, b) = (b, a % b);
            }
            return (out, b == 0);
        }

        let shift = bit_len(&u) - 62;
        let (mut x, mut y) = (bits_at(&u, shift), bits_at(&v, shift));
        let (mut a, mut b, mut c, mut d) = (1i128, 0i128, 0i128, 1i128);
        while out.len() < limit && y + c != 0 && y + d != 0 {
            let q = floor_div(x + a, y + c);
            if q <= 0 || q != floor_div(x + b, y + d) {
                break;
            }
            (a, c) = (c, a - q * c);
            (b, d) = (d, b - q * d);
            (x, y) = (y, x - q * y);
            out.push(q as u64);
        }

        if b == 0 {
            let (bu, bv) = (BigUint::from_slice_u64(&u), BigUint::from_slice_u64(&v));
            let (q, r) = (&bu / &bv, &bu % &bv);
            out.push(q.to_u64().unwrap_or(u64::MAX));
            u = v;
            v = limbs(&r);
        } else {
            let nu = combine(a, &u, b, &v);
            let nv = combine(c, &u, d, &v);
            u = nu;
            v = nv;
        }
    }
    (out, v.is_empty())
}

trait FromSliceU64 {
    fn from_slice_u64(x: &[u64]) -> Self;
}

impl FromSliceU64 for BigUint {
    fn from_slice_u64(x: &[u64]) -> Self {
        let mut digits = Vec::with_capacity(2 * x.len());
        for &w in x {
            digits.push(w as u32);
            digits.push((w >> 32) as u32);
        }
        BigUint::new(digits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use proptest::prelude::*;

    fn naive(num: &BigUint, den: &BigUint, limit: usize) -> (Vec<u64>, bool) {
        let (mut u, mut v) = (den.clone(), num.clone());
        let mut out = vec![];
        while out.len() < limit && !v.is_zero() {
            out.push((&u / &v).to_u64().unwrap_or(u64::MAX));
            let r = &u % &v;
            u = std::mem::replace(&mut v, r);
        }
        (out, v.is_zero())
    }

    #[test]
    fn hand_expansions() {
        let s = DigitStream::from_rational(5, 8, 10).unwrap();
        assert_eq!(s.digits(), &[1, 1, 1, 2]);
        assert!(s.terminated());
        let s = DigitStream::from_rational(1, 3, 10).unwrap();
        assert_eq!(s.digits(), &[3]);
        assert!(s.terminated() && s.truncated());
        assert!(!DigitStream::from_rational(5, 8, 4).unwrap().terminated());
    }

    #[test]
    fn hand_counts() {
        let s = DigitStream::from_rational(5, 8, 10).unwrap();
        assert_eq!(s.count_geq(4, 2).unwrap(), 1);
        for m in 0..=4 {
            assert_eq!(s.count_geq(m, 1).unwrap(), m as u64);
        }
        assert_eq!(s.count_geq(5, 1), Err(Error::InsufficientPrecision { needed: 5, horizon: 4 }));
        assert!(s.count_geq(4, 0).is_err());
    }

    #[test]
    fn golden_ratio_has_no_large_digits() {
        let ones = DigitStream::from_digits(vec![1; 100]).unwrap();
        assert_eq!(ones.corollary_statistic(100, 0.5, Rounding::Floor).unwrap(), 0.0);
        // F_n / F_{n+1} -> 1/phi
        let (mut a, mut b) = (1u64, 1u64);
        for _ in 0..80 {
            (a, b) = (b, a + b);
        }
        let s = DigitStream::from_rational(a, b, 100).unwrap();
        assert!(s.digits()[..70].iter().all(|&d| d == 1));
    }

    #[test]
    fn three_large_digits_in_sixteen() {
        let mut d = vec![1u64; 16];
        d[2] = 4;
        d[7] = 9;
        d[15] = 100;
        d[10] = 3;
        let s = DigitStream::from_digits(d).unwrap();
        assert_eq!(s.corollary_statistic(16, 0.5, Rounding::Floor).unwrap(), 0.75);
        assert_eq!(s.corollary_statistic(16, 0.5, Rounding::Ceil).unwrap(), 0.75);
    }

    #[test]
    fn offline_matches_naive_loop() {
        let s = extract_digits(SeedSpec::new(11, 3, 40_000), 10_000).unwrap();
        assert_eq!(s.certified(), 10_000);
        let naive = s.certified_digits().iter().filter(|&&a| a >= 100).count() as u64;
        assert_eq!(s.count_geq(10_000, 100).unwrap(), naive);
        let mut rng = CounterRng::new(5, 0, 0);
        let queries: Vec<(usize, u64)> = (0..200).map(|_| (rng.below(10_001) as usize, 1 + rng.below(50))).collect();
        let answers = s.count_geq_many(&queries).unwrap();
        for (&(m, t), got) in queries.iter().zip(answers) {
            assert_eq!(got, s.certified_digits()[..m].iter().filter(|&&a| a >= t).count() as u64);
        }
    }

    #[test]
    fn seed_digits_match_bigint_oracle() {
        let seed = SeedSpec::new(2, 9, 3000);
        let s = extract_digits(seed, 2000).unwrap();
        let p = payload_integer(&seed.payload(), seed.bits);
        let den = BigUint::from(1u8) << seed.bits;
        let (lo, _) = naive(&p, &den, 2000);
        let (hi, _) = naive(&(&p + 1u8), &den, 2000);
        let common = lo.iter().zip(&hi).take_while(|(a, b)| a == b).count();
        assert_eq!(s.certified(), common.min(2000));
        assert_eq!(s.certified_digits(), &lo[..s.certified()]);
        // roughly 3000 / 3.42 digits
        assert!((800..950).contains(&s.certified()), "{}", s.certified());
    }

    #[test]
    fn certification_grows_with_bits() {
        let seed = SeedSpec::new(3, 1, 1000);
        let s = extract_digits_certified(seed, 1000, 100_000).unwrap();
        assert_eq!(s.certified(), 1000);
        let short = extract_digits(seed, 1000).unwrap();
        assert_eq!(short.certified_digits(), &s.certified_digits()[..short.certified()]);
    }

    #[test]
    fn degenerate_seed() {
        // a 1-bit payload is zero about half the time
        let zero = (0..64).map(|p| SeedSpec::new(0, p, 1)).find(|s| s.payload()[0] == 0).unwrap();
        assert!(matches!(extract_digits(zero, 3), Err(Error::DegenerateSeed(_))));
        assert!(extract_digits(SeedSpec::new(0, 0, 64), 0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let s = extract_digits(SeedSpec::new(1, 2, 512), 100).unwrap();
        let back = DigitStream::from_text(&s.to_text()).unwrap();
        assert_eq!(back.certified_digits(), s.certified_digits());
        assert_eq!(back.seed(), s.seed());
        assert!(s.to_text().starts_with("# master=1 point=2 bits=512 certified="));
        let e = DigitStream::from_rational(5, 8, 10).unwrap();
        assert_eq!(DigitStream::from_text(&e.to_text()).unwrap().digits(), e.digits());
    }

    proptest! {
        #[test]
        fn lehmer_matches_euclid(num in proptest::collection::vec(any::<u64>(), 1..12),
                                 extra in proptest::collection::vec(any::<u64>(), 0..4),
                                 top in 1u64..) {
            let n = BigUint::from_slice_u64(&num);
            let mut d = num.clone();
            d.extend(extra);
            d.push(top);
            let d = BigUint::from_slice_u64(&d);
            prop_assume!(!n.is_zero() && n <= d);
            let expected = naive(&n, &d, usize::MAX);
            prop_assert_eq!(partial_quotients(limbs(&n), limbs(&d), usize::MAX), expected.clone());
            let cut = expected.0.len() / 2;
            let (part, _) = partial_quotients(limbs(&n), limbs(&d), cut);
            prop_assert_eq!(&part[..], &expected.0[..cut]);
        }

        #[test]
        fn counts_are_monotone(seed in 0u64..1000, m1 in 0usize..300, m2 in 0usize..300, t1 in 1u64..20, t2 in 1u64..20) {
            let s = extract_digits_certified(SeedSpec::new(seed, 0, 1500), 300, 10_000).unwrap();
            let (ma, mb) = (m1.min(m2), m1.max(m2));
            let (ta, tb) = (t1.min(t2), t1.max(t2));
            prop_assert!(s.count_geq(mb, ta).unwrap() >= s.count_geq(ma, ta).unwrap());
            prop_assert!(s.count_geq(ma, ta).unwrap() >= s.count_geq(ma, tb).unwrap());
        }
    }
}
