//! Working coordinates for evaluating quasiarithmetic means.
//!
//! A quasiarithmetic mean does not change when its generator is replaced by
//! `a f + b` (a ≠ 0). The kernel picks, for each generator, an affinely
//! equivalent form that is well conditioned on the generator's domain:
//! `(t^p - 1)/p` for small exponents, `(t/s)^p` with a domain scale `s` for
//! ordinary ones, `exp(c (t - s))` for exponentials. Power generators with
//! `|p|` above [`LOG_SPACE_EXPONENT`] work with `p ln t` and combine by
//! log-sum-exp. Composite generators reuse the kernel of their outer rule.

use crate::error::{Error, Result};
use crate::generators::{Generator, GeneratorKind, LOG_SPACE_EXPONENT};
use crate::measure::Interval;

#[derive(Debug, Clone)]
enum Base {
    Identity,
    Log,
    BoxCox { p: f64 },
    ScaledPower { p: f64, scale: f64 },
    LogPower { p: f64 },
    ScaledExp { c: f64, shift: f64 },
    Raw(Generator),
}

#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    base: Base,
    /// Applied first to last before `base`; `chain[0]` is the innermost map.
    chain: Vec<Generator>,
}

impl Kernel {
    pub(crate) fn new(f: &Generator) -> Result<Self> {
        Self::build(f.kind(), f.domain(), Some(f))
    }

    fn build(kind: &GeneratorKind, domain: Interval, whole: Option<&Generator>) -> Result<Self> {
        let base = match kind {
            GeneratorKind::Affine { .. } => Base::Identity,
            GeneratorKind::Log => Base::Log,
            GeneratorKind::Power { p } if *p == 0.0 => Base::Log,
            GeneratorKind::Power { p } if *p == 1.0 => Base::Identity,
            GeneratorKind::Power { p } if p.abs() < 1.0 => Base::BoxCox { p: *p },
            GeneratorKind::Power { p } if p.abs() > LOG_SPACE_EXPONENT && domain.lo() > 0.0 => {
                Base::LogPower { p: *p }
            }
            GeneratorKind::Power { p } => {
                let scale = if *p > 0.0 { domain.hi() } else { domain.lo() };
                Base::ScaledPower {
                    p: *p,
                    scale: if scale > 0.0 { scale } else { 1.0 },
                }
            }
            GeneratorKind::Exp { c } => Base::ScaledExp {
                c: *c,
                shift: if *c > 0.0 { domain.hi() } else { domain.lo() },
            },
            GeneratorKind::Composite { outer, inner } => {
                let inner = Generator::new((**inner).clone(), domain)?;
                let mut k = Self::build(outer, inner.image()?, None)?;
                k.chain.insert(0, inner);
                return Ok(k);
            }
            GeneratorKind::Tabulated { .. } => Base::Raw(match whole {
                Some(g) => g.clone(),
                None => Generator::new(kind.clone(), domain)?,
            }),
        };
        Ok(Kernel {
            base,
            chain: Vec::new(),
        })
    }

    pub(crate) fn is_log_space(&self) -> bool {
        matches!(self.base, Base::LogPower { .. })
    }

    pub(crate) fn eval(&self, t: f64) -> f64 {
        let mut v = t;
        for g in &self.chain {
            v = g.raw_eval(v);
        }
        match &self.base {
            Base::Identity => v,
            Base::Log => v.ln(),
            Base::BoxCox { p } => (p * v.ln()).exp_m1() / p,
            Base::ScaledPower { p, scale } => (v / scale).powf(*p),
            Base::LogPower { p } => p * v.ln(),
            Base::ScaledExp { c, shift } => (c * (v - shift)).exp(),
            Base::Raw(g) => g.raw_eval(v),
        }
    }

    pub(crate) fn invert(&self, y: f64) -> Result<f64> {
        let mut v = match &self.base {
            Base::Identity => y,
            Base::Log => y.exp(),
            Base::BoxCox { p } => ((p * y).ln_1p() / p).exp(),
            Base::ScaledPower { p, scale } => scale * y.max(0.0).powf(1.0 / p),
            Base::LogPower { p } => (y / p).exp(),
            Base::ScaledExp { c, shift } => shift + y.ln() / c,
            Base::Raw(g) => g.invert_clamped(y)?,
        };
        for g in self.chain.iter().rev() {
            v = g.invert_clamped(v)?;
        }
        Ok(v)
    }

    /// `Σ w_i v_i` in working coordinates (log-sum-exp in log space), clamped
    /// to the range of the inputs.
    pub(crate) fn combine(&self, values: &[f64], weights: &[f64]) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (&v, &w) in values.iter().zip(weights) {
            if w > 0.0 {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let y = if self.is_log_space() {
            let shift = hi;
            let s: f64 = values
                .iter()
                .zip(weights)
                .filter(|(_, &w)| w > 0.0)
                .map(|(&v, &w)| w * (v - shift).exp())
                .sum();
            shift + s.ln()
        } else {
            values.iter().zip(weights).map(|(&v, &w)| w * v).sum()
        };
        y.max(lo).min(hi)
    }

    /// Two-atom specialization of [`Kernel::combine`]: weight `theta` on `a`.
    #[inline]
    pub(crate) fn combine2(&self, a: f64, b: f64, theta: f64) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let y = if self.is_log_space() {
            hi + (theta * (a - hi).exp() + (1.0 - theta) * (b - hi).exp()).ln()
        } else {
            theta * a + (1.0 - theta) * b
        };
        y.max(lo).min(hi)
    }
}

/// Mean of atoms `(points[i], weights[i])`, points ascending.
///
/// Returns the mean clamped into `[points[0], points[last]]` and the working
/// coordinate residual `|k(mean) - y|`.
pub(crate) fn mean_of_atoms(k: &Kernel, points: &[f64], weights: &[f64]) -> Result<(f64, f64)> {
    let values: Vec<f64> = points.iter().map(|&x| k.eval(x)).collect();
    for (&v, &x) in values.iter().zip(points) {
        if !v.is_finite() {
            return Err(Error::NonFiniteValue { value: v, at: x });
        }
    }
    let y = k.combine(&values, weights);
    let t = k.invert(y)?;
    let residual = (k.eval(t) - y).abs();
    let (lo, hi) = (points[0], points[points.len() - 1]);
    Ok((clamp_to_hull(t, lo, hi)?, residual))
}

/// Values closer than this to the hull are treated as rounding noise.
pub const HULL_TOLERANCE: f64 = 1e-10;

pub(crate) fn clamp_to_hull(t: f64, lo: f64, hi: f64) -> Result<f64> {
    if t.is_nan() || t < lo - HULL_TOLERANCE || t > hi + HULL_TOLERANCE {
        return Err(Error::MeanOutOfBounds { value: t, lo, hi });
    }
    Ok(t.max(lo).min(hi))
}
