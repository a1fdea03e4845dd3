use super::Span;
use crate::rng::SeedSpec;

/// Orbit of the doubling map `x -> 2x mod 1` on a dyadic seed.
///
/// `T^k x` is the payload shifted left by `k` bits, so every iterate is exact
/// and nothing is stored besides the payload.
#[derive(Clone, Debug)]
pub struct DoublingOrbit {
    seed: Option<SeedSpec>,
    words: Vec<u64>,
    bits: u64,
    /// 1-based position of the last set payload bit, 0 for the zero seed.
    last_one: u64,
}

impl DoublingOrbit {
    pub fn from_seed(seed: SeedSpec) -> Self {
        let mut orbit = Self::from_words(seed.payload(), seed.bits);
        orbit.seed = Some(seed);
        orbit
    }

    /// Seed from MSB-first payload words holding `bits` binary digits.
    pub fn from_words(mut words: Vec<u64>, bits: u64) -> Self {
        words.resize(bits.div_ceil(64) as usize, 0);
        if bits % 64 != 0 {
            if let Some(w) = words.last_mut() {
                *w &= !0u64 << (64 - bits % 64);
            }
        }
        let last_one = words
            .iter()
            .enumerate()
            .rev()
            .find(|(_, &w)| w != 0)
            .map_or(0, |(i, w)| i as u64 * 64 + 64 - w.trailing_zeros() as u64);
        Self { seed: None, words, bits, last_one }
    }

    /// Seed from a binary string such as `"101"` (= 5/8).
    pub fn from_bit_string(s: &str) -> Self {
        let bits = s.len() as u64;
        let mut words = vec![0u64; s.len().div_ceil(64)];
        for (i, ch) in s.bytes().enumerate() {
            if ch == b'1' {
                words[i / 64] |= 1 << (63 - i % 64);
            }
        }
        Self::from_words(words, bits)
    }

    pub fn seed(&self) -> Option<SeedSpec> {
        self.seed
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Every iterate is exact; past the payload length the orbit sits at 0.
    pub fn horizon(&self) -> u64 {
        self.bits
    }

    /// Reading the seed as an unknown real in its dyadic cell of width
    /// `2^-bits`, `T^k x` is known to within `2^(k - bits)`.
    pub fn precision_horizon(&self, width: f64) -> u64 {
        if width >= 1.0 {
            return self.bits;
        }
        // smallest n with 2^-n < width
        let needed = (-width.log2()).floor() as u64 + 1;
        self.bits.saturating_sub(needed)
    }

    #[inline]
    fn word(&self, i: usize) -> u64 {
        self.words.get(i).copied().unwrap_or(0)
    }

    /// Binary digits `k+1 ..= k+64` of `x`, i.e. `floor(2^64 T^k x)`.
    #[inline]
    pub fn prefix(&self, k: u64) -> u64 {
        let w = (k / 64) as usize;
        let s = (k % 64) as u32;
        if s == 0 {
            self.word(w)
        } else {
            (self.word(w) << s) | (self.word(w + 1) >> (64 - s))
        }
    }

    /// Whether `T^k x` has binary digits beyond the 64-bit prefix.
    #[inline]
    pub fn has_tail(&self, k: u64) -> bool {
        self.last_one > k + 64
    }

    /// Exact distance enclosure of `T^k x` to the center `c` on `[0, 1)`.
    #[inline]
    pub fn distance(&self, k: u64, c: u64) -> Span {
        let p = self.prefix(k);
        let d = p.abs_diff(c) as u128;
        if !self.has_tail(k) {
            Span::exact(d)
        } else if p >= c {
            // value in (p, p + 1)
            Span { lo: d, hi: d + 1, hi_open: true }
        } else {
            // c - value in (d - 1, d)
            Span { lo: d - 1, hi: d, hi_open: true }
        }
    }
}
