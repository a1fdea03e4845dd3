//! Shrinking-target hitting statistics for concrete measure-preserving
//! systems.
//!
//! The crate computes, on certified orbit prefixes, the hit counts
//!
//! ```text
//! Z_m(x) = #{ 0 <= k < m : T^k x in B_m }
//! ```
//!
//! against nested target balls `B_m`, the normalized deviations
//! `Y_m = Z_m / (m mu(B_m)) - 1`, eventually-always failure times, block
//! sums over theorem subsequences, Hölder sandwich approximants and
//! decay-of-correlation measurements. Three systems are supported:
//!
//! * the doubling map on `[0, 1)` with Lebesgue measure (exact dyadic orbits),
//! * the Gauss map `x -> 1/x mod 1` with the Gauss measure (exact integer
//!   Euclid iteration with endpoint certification),
//! * the cat map `(x, y) -> (2x + y, x + y) mod 1` on the 2-torus
//!   (integer interval arithmetic with outward error bounds).
//!
//! Positions and distances inside the phase space are handled as 64-bit
//! fixed-point numbers (units of `2^-64`), so every membership decision is an
//! integer comparison.

pub mod approx;
pub mod cf;
pub mod correlation;
pub mod error;
pub mod fenwick;
pub mod fixed;
pub mod harness;
pub mod hits;
pub mod measure;
pub mod orbit;
pub mod record;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
