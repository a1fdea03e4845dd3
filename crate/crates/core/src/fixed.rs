//! 64-bit fixed-point helpers. A `u64` position `p` stands for `p / 2^64`;
//! distances and radii use `u128` in the same units so that radii of one or
//! more (full-space balls) are representable.

pub const ONE: u128 = 1 << 64;
const SCALE: f64 = 18_446_744_073_709_551_616.0; // 2^64

/// Largest radius we bother representing; anything above covers every space.
const RADIUS_CAP: u128 = 4 << 64;

/// `floor(x * 2^64)` for `x` in `[0, 1)`; values outside are clamped.
pub fn position(x: f64) -> u64 {
    if x <= 0.0 {
        0
    } else if x >= 1.0 {
        u64::MAX
    } else {
        // scaling by a power of two is exact; the cast truncates
        (x * SCALE) as u64
    }
}

/// `floor(r * 2^64)` for a non-negative radius, capped well above one.
pub fn units(r: f64) -> u128 {
    if r <= 0.0 {
        0
    } else if r >= 4.0 {
        RADIUS_CAP
    } else {
        ((r * SCALE) as u128).min(RADIUS_CAP)
    }
}

pub fn to_f64(p: u64) -> f64 {
    p as f64 / SCALE
}

pub fn units_to_f64(u: u128) -> f64 {
    u as f64 / SCALE
}

/// Distance on the circle `R/Z` between two positions, in units.
pub fn circle_distance(a: u64, b: u64) -> u128 {
    let d = a.wrapping_sub(b);
    let e = b.wrapping_sub(a);
    d.min(e) as u128
}

/// Bounds on the circle distance to `center` over the closed arc of
/// positions `[lo, lo + len]` (wrapping). `len` must be below `2^64`.
pub fn circle_distance_bounds(center: u64, lo: u64, len: u128) -> (u128, u128) {
    debug_assert!(len < ONE);
    let half = 1u128 << 63;
    // offset of the arc start relative to the center, in [0, 2^64)
    let start = lo.wrapping_sub(center) as u128;
    let end = start + len; // may exceed 2^64 (wraps through the center)
    let dist = |t: u128| {
        let t = t % ONE;
        t.min(ONE - t) % ONE
    };
    let min = if end >= ONE { 0 } else { dist(start).min(dist(end)) };
    let max = if start <= half && end >= half {
        half
    } else if end >= ONE + half {
        half
    } else {
        dist(start).max(dist(end))
    };
    (min, max)
}

/// Bounds on `|y - center|` over the closed interval `[lo, hi]` of the unit
/// interval (no wrapping).
pub fn line_distance_bounds(center: u64, lo: u64, hi: u64) -> (u128, u128) {
    debug_assert!(lo <= hi);
    let c = center as u128;
    let (lo, hi) = (lo as u128, hi as u128);
    let min = if c < lo {
        lo - c
    } else if c > hi {
        c - hi
    } else {
        0
    };
    let max = (c.abs_diff(lo)).max(c.abs_diff(hi));
    (min, max)
}
