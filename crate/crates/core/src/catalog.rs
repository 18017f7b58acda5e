//! Ready-made families.

use crate::error::Result;
use crate::family::{AdmissibleFamily, Piece};
use crate::generators::GeneratorKind;
use crate::measure::Interval;

/// `π_p` on `[0, ½)` and `π_q` on `[½, 1]`.
pub fn power_pair(lo: f64, hi: f64, p: f64, q: f64) -> Result<AdmissibleFamily> {
    AdmissibleFamily::new(
        Interval::new(lo, hi)?,
        vec![
            Piece::new(0.0, 0.5, GeneratorKind::power(p)),
            Piece::new(0.5, 1.0, GeneratorKind::power(q)),
        ],
    )
}

/// Arithmetic and geometric means with equal weight. On two atoms its
/// invariant mean is Gauss's arithmetic-geometric mean.
pub fn arithmetic_geometric(lo: f64, hi: f64) -> Result<AdmissibleFamily> {
    power_pair(lo, hi, 1.0, 0.0)
}

/// Arithmetic and harmonic means with equal weight. On two equally weighted
/// atoms `a, b` its invariant mean is `√(ab)`.
pub fn arithmetic_harmonic(lo: f64, hi: f64) -> Result<AdmissibleFamily> {
    power_pair(lo, hi, 1.0, -1.0)
}

/// `f_x = π_{a x + b}`.
pub fn power_sweep(lo: f64, hi: f64, a: f64, b: f64) -> Result<AdmissibleFamily> {
    AdmissibleFamily::power_sweep(Interval::new(lo, hi)?, a, b)
}
