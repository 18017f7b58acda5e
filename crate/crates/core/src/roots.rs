//! Bracketed root finding for monotone continuous functions.
//!
//! The solver keeps a sign-changing bracket at all times and mixes secant
//! (false position) steps with bisection: a bisection step is forced whenever
//! the secant point leaves the open bracket or the previous step shrank the
//! bracket by less than a quarter.

use crate::error::{Error, Result};

/// Iteration cap for [`solve_bracketed`].
pub const MAX_ITERATIONS: usize = 200;

/// Outcome of a successful solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    /// `|g(x)|` at the returned point.
    pub residual: f64,
    pub iterations: usize,
}

/// Finds `x ∈ [lo, hi]` with `|g(x)| <= tol`, where `g(lo)` and `g(hi)` have
/// opposite signs (or one of them is zero).
///
/// Terminates early, returning the endpoint with the smaller residual, once
/// the bracket cannot be split any further in floating point.
pub fn solve_bracketed<G>(g: G, lo: f64, hi: f64, tol: f64) -> Result<Root>
where
    G: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (mut ga, mut gb) = (g(a), g(b));
    if !ga.is_finite() || !gb.is_finite() {
        return Err(Error::NonFiniteValue {
            value: if ga.is_finite() { gb } else { ga },
            at: if ga.is_finite() { b } else { a },
        });
    }
    if ga.abs() <= tol || ga == 0.0 {
        return Ok(Root {
            x: a,
            residual: ga.abs(),
            iterations: 0,
        });
    }
    if gb.abs() <= tol || gb == 0.0 {
        return Ok(Root {
            x: b,
            residual: gb.abs(),
            iterations: 0,
        });
    }
    if ga.signum() == gb.signum() {
        return Err(Error::InvalidArgument(format!(
            "no sign change on [{a}, {b}]: g(a) = {ga}, g(b) = {gb}"
        )));
    }

    let mut force_bisect = false;
    for it in 1..=MAX_ITERATIONS {
        let width = b - a;
        let mid = a + 0.5 * width;
        if mid <= a || mid >= b {
            // Adjacent floats: nothing left to split.
            let (x, r) = if ga.abs() <= gb.abs() {
                (a, ga)
            } else {
                (b, gb)
            };
            return Ok(Root {
                x,
                residual: r.abs(),
                iterations: it,
            });
        }
        let secant = a - ga * (b - a) / (gb - ga);
        let x = if force_bisect || !(secant > a && secant < b) {
            mid
        } else {
            secant
        };
        let gx = g(x);
        if !gx.is_finite() {
            return Err(Error::NonFiniteValue { value: gx, at: x });
        }
        if gx.abs() <= tol || gx == 0.0 {
            return Ok(Root {
                x,
                residual: gx.abs(),
                iterations: it,
            });
        }
        if gx.signum() == ga.signum() {
            a = x;
            ga = gx;
        } else {
            b = x;
            gb = gx;
        }
        force_bisect = b - a > 0.75 * width;
    }
    Err(Error::ConvergenceFailure {
        iterations: MAX_ITERATIONS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_simple_roots() {
        let r = solve_bracketed(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-14);
        let r = solve_bracketed(|x| 3.0 - x, 0.0, 10.0, 0.0).unwrap();
        assert_eq!(r.x, 3.0);
    }

    #[test]
    fn decreasing_and_endpoint_roots() {
        let r = solve_bracketed(|x| (-x).exp() - 0.5, 0.0, 5.0, 1e-15).unwrap();
        assert!((r.x - 2f64.ln()).abs() < 1e-14);
        let r = solve_bracketed(|x| x - 1.0, 1.0, 2.0, 0.0).unwrap();
        assert_eq!((r.x, r.iterations), (1.0, 0));
    }

    #[test]
    fn steep_function_terminates_at_float_resolution() {
        // x^101 has no representable root residual below tol near x = 1.5.
        let y = 1.5f64.powi(101) * (1.0 + 1e-15);
        let r = solve_bracketed(|x| x.powi(101) - y, 1.0, 2.0, 0.0).unwrap();
        assert!((r.x - 1.5).abs() < 1e-14);
    }

    #[test]
    fn rejects_missing_sign_change() {
        assert!(matches!(
            solve_bracketed(|x| x * x + 1.0, -1.0, 1.0, 1e-12),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn flat_secant_is_rescued_by_bisection() {
        // Regula falsi alone stalls on this one-sided curvature.
        let r = solve_bracketed(|x| x.powi(9) - 1e-3, 0.0, 10.0, 1e-15).unwrap();
        assert!((r.x - 1e-3f64.powf(1.0 / 9.0)).abs() < 1e-12);
        assert!(r.iterations < MAX_ITERATIONS);
    }
}
