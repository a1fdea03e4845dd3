//! Certified orbit prefixes.
//!
//! Each stream answers, for every index up to its horizon, a certified
//! enclosure of the distance from `T^k x` to a target center. Doubling
//! orbits are exact; Gauss and cat orbits carry outward error bounds
//! derived from the uncertainty of the dyadic seed.

mod cat;
mod doubling;
mod gauss;

pub use cat::CatOrbit;
pub use doubling::DoublingOrbit;
pub use gauss::{GaussOrbit, GaussState};
pub(crate) use gauss::payload_integer;

use crate::fixed;
use crate::measure::Center;
use crate::rng::SeedSpec;
use crate::{Error, Result};

/// `log2((3 + sqrt 5) / 2)`, the expansion rate of the cat map in bits per step.
pub const CAT_LOG2_LAMBDA: f64 = 1.388_483_827_261_234_5;

/// Bits per certified Gauss digit: each digit shrinks the seed's cylinder by
/// a factor `q_k^-2`, i.e. twice the Lévy rate `pi^2 / (6 ln 2^2)`.
pub const GAUSS_BITS_PER_DIGIT: f64 = 3.423_714_742_537_303_6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MapKind {
    Doubling,
    Gauss,
    Cat,
}

impl MapKind {
    pub fn name(&self) -> &'static str {
        match self {
            MapKind::Doubling => "doubling",
            MapKind::Gauss => "gauss",
            MapKind::Cat => "cat",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "doubling" => Ok(MapKind::Doubling),
            "gauss" => Ok(MapKind::Gauss),
            "cat" => Ok(MapKind::Cat),
            _ => Err(Error::Config(format!("unknown map `{s}`"))),
        }
    }

    /// Payload bits needed for `steps` certified iterates: exact shifts for
    /// the doubling map, a safety factor over the asymptotic rates otherwise.
    pub fn bits_for_steps(&self, steps: u64) -> u64 {
        match self {
            MapKind::Doubling => steps + 64,
            MapKind::Gauss => (steps as f64 * 3.5).ceil() as u64 + 256,
            MapKind::Cat => 2 * ((1.5 * CAT_LOG2_LAMBDA * steps as f64).ceil() as u64 + 128),
        }
    }
}

/// A center in fixed-point coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixedCenter {
    Unit(u64),
    Torus(u64, u64),
}

impl From<Center> for FixedCenter {
    fn from(c: Center) -> Self {
        match c {
            Center::Unit(x) => FixedCenter::Unit(fixed::position(x)),
            Center::Torus(x, y) => FixedCenter::Torus(fixed::position(x), fixed::position(y)),
        }
    }
}

/// Enclosure of a distance in units of `2^-64`: the true distance `d`
/// satisfies `lo <= d` and `d <= hi` (`d < hi` when `hi_open`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub lo: u128,
    pub hi: u128,
    pub hi_open: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Membership {
    Inside,
    Outside,
    Indeterminate,
}

impl Span {
    pub fn exact(d: u128) -> Self {
        Span { lo: d, hi: d, hi_open: false }
    }

    /// Decides `d < r` for the half-open ball of radius `r` units.
    pub fn membership(&self, r: u128) -> Membership {
        if self.hi < r || (self.hi == r && self.hi_open) {
            Membership::Inside
        } else if self.lo >= r {
            Membership::Outside
        } else {
            Membership::Indeterminate
        }
    }

    /// Sort key `k` with `k < 2r` exactly when the span is certainly inside.
    pub fn inside_key(&self) -> u128 {
        2 * self.hi - self.hi_open as u128
    }
}

#[derive(Clone, Debug)]
pub enum OrbitStream {
    Doubling(DoublingOrbit),
    Gauss(GaussOrbit),
    Cat(CatOrbit),
}

impl OrbitStream {
    /// Generates the orbit of `seed` under `kind`, with `steps` iterates for
    /// the maps that are precomputed.
    pub fn generate(kind: MapKind, seed: SeedSpec, steps: u64) -> Result<Self> {
        Ok(match kind {
            MapKind::Doubling => OrbitStream::Doubling(DoublingOrbit::from_seed(seed)),
            MapKind::Gauss => OrbitStream::Gauss(GaussOrbit::from_seed(seed, steps)?),
            MapKind::Cat => OrbitStream::Cat(CatOrbit::from_seed(seed, steps)?),
        })
    }

    /// Orbit of ensemble point `point` with the default bit budget for
    /// `steps`, failing if the certified horizon still falls short.
    pub fn with_budget(kind: MapKind, master: u64, point: u64, steps: u64) -> Result<Self> {
        let seed = SeedSpec::new(master, point, kind.bits_for_steps(steps));
        let orbit = Self::generate(kind, seed, steps)?;
        if orbit.horizon() < steps {
            return Err(Error::InsufficientPrecision { needed: steps, horizon: orbit.horizon() });
        }
        Ok(orbit)
    }

    pub fn kind(&self) -> MapKind {
        match self {
            OrbitStream::Doubling(_) => MapKind::Doubling,
            OrbitStream::Gauss(_) => MapKind::Gauss,
            OrbitStream::Cat(_) => MapKind::Cat,
        }
    }

    pub fn seed(&self) -> Option<SeedSpec> {
        match self {
            OrbitStream::Doubling(o) => o.seed(),
            OrbitStream::Gauss(o) => o.seed(),
            OrbitStream::Cat(o) => o.seed(),
        }
    }

    /// Largest index `k` for which `T^k x` is certified.
    pub fn horizon(&self) -> u64 {
        match self {
            OrbitStream::Doubling(o) => o.horizon(),
            OrbitStream::Gauss(o) => o.horizon(),
            OrbitStream::Cat(o) => o.horizon(),
        }
    }

    /// Largest `k` such that every enclosure up to `k` is narrower than
    /// `width`, reading the seed as an unknown real in its dyadic cell.
    pub fn precision_horizon(&self, width: f64) -> u64 {
        match self {
            OrbitStream::Doubling(o) => o.precision_horizon(width),
            OrbitStream::Gauss(o) => o.precision_horizon(width),
            OrbitStream::Cat(o) => o.precision_horizon(width),
        }
    }

    pub fn distance(&self, k: u64, center: FixedCenter) -> Result<Span> {
        if k > self.horizon() {
            return Err(Error::InsufficientPrecision { needed: k, horizon: self.horizon() });
        }
        match (self, center) {
            (OrbitStream::Doubling(o), FixedCenter::Unit(c)) => Ok(o.distance(k, c)),
            (OrbitStream::Gauss(o), FixedCenter::Unit(c)) => Ok(o.distance(k, c)),
            (OrbitStream::Cat(o), FixedCenter::Torus(cx, cy)) => Ok(o.distance(k, cx, cy)),
            _ => Err(Error::Domain(format!("center {center:?} does not match the {} map", self.kind().name()))),
        }
    }

    /// Distances for `k = 0 .. count`, failing if `count - 1` is past the
    /// horizon.
    pub fn distances(&self, count: u64, center: FixedCenter) -> Result<Vec<Span>> {
        if count > 0 && count - 1 > self.horizon() {
            return Err(Error::InsufficientPrecision { needed: count - 1, horizon: self.horizon() });
        }
        (0..count).map(|k| self.distance(k, center)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn span_membership() {
        assert_eq!(Span::exact(5).membership(6), Membership::Inside);
        assert_eq!(Span::exact(6).membership(6), Membership::Outside);
        let open = Span { lo: 5, hi: 6, hi_open: true };
        assert_eq!(open.membership(6), Membership::Inside);
        assert_eq!(open.membership(5), Membership::Outside);
        let closed = Span { lo: 5, hi: 7, hi_open: false };
        assert_eq!(closed.membership(6), Membership::Indeterminate);
        for r in 0..10u128 {
            for s in [Span::exact(4), open, closed] {
                assert_eq!(s.inside_key() < 2 * r, s.membership(r) == Membership::Inside);
            }
        }
    }

    #[test]
    fn budgets() {
        assert_eq!(MapKind::Doubling.bits_for_steps(1000), 1064);
        assert!(MapKind::Gauss.bits_for_steps(100_000) >= 342_400);
        let cat = MapKind::Cat.bits_for_steps(100_000);
        assert!(cat / 2 >= 64 + (CAT_LOG2_LAMBDA * 100_000.0) as u64);
    }
}
