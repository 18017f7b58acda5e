//! Integral quasiarithmetic means, power means and conjugation of means.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::kernel::{self, Kernel};
use crate::measure::Measure;

/// A mean value together with the inversion residual measured in the
/// generator's working coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanValue {
    pub value: f64,
    pub residual: f64,
}

/// `f⁻¹(∫ f dP)`.
///
/// The result always lies in the support hull of `p`. Values that numerical
/// error pushes outside by at most [`kernel::HULL_TOLERANCE`] are clamped;
/// anything further out is reported as [`Error::MeanOutOfBounds`].
pub fn qa_mean(f: &Generator, p: &Measure) -> Result<MeanValue> {
    check_support(f, p)?;
    let k = Kernel::new(f)?;
    let (value, residual) = kernel::mean_of_atoms(&k, p.points(), p.weights())?;
    Ok(MeanValue { value, residual })
}

/// `𝒫_p(P)`, the quasiarithmetic mean generated by `t^p` (`ln t` at `p = 0`).
pub fn power_mean(exponent: f64, p: &Measure) -> Result<MeanValue> {
    let f = Generator::power(exponent, p.gamma())?;
    qa_mean(&f, p)
}

fn check_support(f: &Generator, p: &Measure) -> Result<()> {
    if f.domain().contains_interval(&p.gamma()) {
        Ok(())
    } else {
        Err(Error::DomainMismatch(format!(
            "support hull {} not inside generator domain {}",
            p.gamma(),
            f.domain()
        )))
    }
}

/// Image measure `u_* P`: atoms `(u(x_i), w_i)` on the image of `u`'s domain.
pub fn pushforward(u: &Generator, p: &Measure) -> Result<Measure> {
    check_support(u, p)?;
    let image = u.image()?;
    let atoms: Vec<(f64, f64)> = p
        .atoms()
        .map(|(x, w)| (image.clamp(u.raw_eval(x)), w))
        .collect();
    Measure::new(atoms, image)
}

type MeanFn = dyn Fn(&Measure) -> Result<f64> + Send + Sync;

/// A mean as a value: anything mapping measures to points of their hull.
///
/// Functionals compose through [`MeanFunctional::conjugate`]; they are never
/// compared, only evaluated.
#[derive(Clone)]
pub struct MeanFunctional {
    label: String,
    eval: Arc<MeanFn>,
}

impl fmt::Debug for MeanFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("MeanFunctional").field(&self.label).finish()
    }
}

impl MeanFunctional {
    pub fn new<F>(label: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&Measure) -> Result<f64> + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            eval: Arc::new(eval),
        }
    }

    /// The expected value.
    pub fn arithmetic() -> Self {
        Self::new("arithmetic", |p: &Measure| {
            let (mean, _) = p.mean_and_variance();
            let g = p.gamma();
            kernel::clamp_to_hull(mean, g.lo(), g.hi())
        })
    }

    pub fn quasi_arithmetic(f: Generator) -> Self {
        let label = format!("qa[{}]", f.label());
        Self::new(label, move |p: &Measure| Ok(qa_mean(&f, p)?.value))
    }

    pub fn power(exponent: f64) -> Self {
        Self::new(format!("power[{exponent}]"), move |p: &Measure| {
            Ok(power_mean(exponent, p)?.value)
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, p: &Measure) -> Result<f64> {
        (self.eval)(p)
    }

    /// `M^{[u]}(P) = u⁻¹(M(u_* P))` for measures on `u`'s domain.
    pub fn conjugate(&self, u: &Generator) -> Self {
        let inner = self.clone();
        let u = u.clone();
        let label = format!("{}^[{}]", self.label, u.label());
        Self::new(label, move |p: &Measure| {
            let image = pushforward(&u, p)?;
            let m = inner.eval(&image)?;
            let t = u.invert_clamped(m)?;
            let g = p.gamma();
            kernel::clamp_to_hull(t, g.lo(), g.hi())
        })
    }
}

/// Free-function form of [`MeanFunctional::conjugate`].
pub fn conjugate_mean(m: &MeanFunctional, u: &Generator) -> MeanFunctional {
    m.conjugate(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::GeneratorKind;
    use crate::measure::Interval;
    use std::f64::consts::E;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    fn uniform(points: &[f64], lo: f64, hi: f64) -> Measure {
        Measure::uniform_atoms(points, iv(lo, hi)).unwrap()
    }

    #[test]
    fn qa_mean_examples() {
        let d = iv(1.0, 10.0);
        let m = |p: f64, pts: &[f64]| {
            qa_mean(&Generator::power(p, d).unwrap(), &uniform(pts, 1.0, 10.0))
                .unwrap()
                .value
        };
        assert_eq!(m(1.0, &[1.0, 3.0]), 2.0);
        assert!((m(0.0, &[1.0, 4.0]) - 2.0).abs() < 1e-15);
        assert!((m(-1.0, &[1.0, 3.0]) - 1.5).abs() < 1e-15);
        assert!((m(2.0, &[1.0, 7.0]) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn power_mean_examples() {
        let m = |p: f64, pts: &[f64]| power_mean(p, &uniform(pts, 0.0, 10.0)).unwrap().value;
        assert_eq!(m(1.0, &[2.0, 4.0]), 3.0);
        assert!((m(0.0, &[2.0, 8.0]) - 4.0).abs() < 1e-14);
        assert!((m(-1.0, &[2.0, 6.0]) - 3.0).abs() < 1e-14);
        // p <= 0 needs a positive support.
        assert!(power_mean(0.0, &uniform(&[0.0, 1.0], 0.0, 1.0)).is_err());
    }

    #[test]
    fn qa_mean_rejects_support_outside_domain() {
        let f = Generator::power(2.0, iv(1.0, 2.0)).unwrap();
        let p = uniform(&[1.0, 3.0], 0.0, 5.0);
        assert!(matches!(qa_mean(&f, &p), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn pushforward_examples() {
        let p = uniform(&[1.0, 2.0], 0.0, 3.0);
        let sq = pushforward(&Generator::power(2.0, iv(0.0, 3.0)).unwrap(), &p).unwrap();
        assert_eq!(sq.atoms().collect::<Vec<_>>(), vec![(1.0, 0.5), (4.0, 0.5)]);
        let neg = pushforward(&Generator::affine(-1.0, 0.0, iv(0.0, 3.0)).unwrap(), &p).unwrap();
        assert_eq!(
            neg.atoms().collect::<Vec<_>>(),
            vec![(-2.0, 0.5), (-1.0, 0.5)]
        );
        assert_eq!(neg.domain(), iv(-3.0, 0.0));
        let p = uniform(&[1.0, E], 1.0, E);
        let ln = pushforward(&Generator::power(0.0, iv(1.0, E)).unwrap(), &p).unwrap();
        assert_eq!(ln.points()[0], 0.0);
        assert!((ln.points()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pushforward_merges_collisions() {
        // A tabulated generator that is strictly monotone but whose float
        // evaluation maps two atoms to one value is hard to build; affine
        // scaling by a tiny factor does it.
        let p = Measure::new([(1.0, 0.5), (1.0 + f64::EPSILON, 0.5)], iv(0.0, 2.0)).unwrap();
        let u = Generator::affine(1e-300, 0.0, iv(0.0, 2.0)).unwrap();
        let q = pushforward(&u, &p).unwrap();
        assert!(q.len() <= 2);
        assert!((q.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn conjugate_examples() {
        let p = uniform(&[1.0, 4.0], 1.0, 4.0);
        let u = Generator::power(0.0, iv(1.0, 4.0)).unwrap();
        let geo = conjugate_mean(&MeanFunctional::arithmetic(), &u);
        assert!((geo.eval(&p).unwrap() - 2.0).abs() < 1e-15);

        let p = uniform(&[1.0, 3.0], 1.0, 3.0);
        let u = Generator::affine(2.0, 3.0, iv(1.0, 3.0)).unwrap();
        let m = MeanFunctional::arithmetic().conjugate(&u);
        assert_eq!(m.eval(&p).unwrap(), 2.0);
    }

    #[test]
    fn conjugation_by_inverse_is_identity() {
        let u = Generator::power(2.0, iv(1.0, 2.0)).unwrap();
        let u_inv = u.inverse().unwrap();
        let m = MeanFunctional::power(-1.0);
        let back = m.conjugate(&u).conjugate(&u_inv);
        let q = uniform(&[1.0, 2.5, 4.0], 1.0, 4.0);
        assert!((back.eval(&q).unwrap() - m.eval(&q).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn dirac_is_a_fixed_point_for_every_kind() {
        let d = iv(0.5, 3.0);
        let kinds = [
            GeneratorKind::power(2.0),
            GeneratorKind::power(-3.0),
            GeneratorKind::power(0.3),
            GeneratorKind::power(0.0),
            GeneratorKind::power(500.0),
            GeneratorKind::Log,
            GeneratorKind::exp(2.0),
            GeneratorKind::affine(-1.0, 4.0),
            GeneratorKind::composite(GeneratorKind::power(2.0), GeneratorKind::exp(-1.0)),
            GeneratorKind::Tabulated {
                knots: vec![(0.0, 0.0), (1.0, 3.0), (3.0, 4.0)],
            },
        ];
        for kind in kinds {
            let f = kind.on(d).unwrap();
            for x in [0.5, 1.1, 2.0, 3.0] {
                let v = qa_mean(&f, &Measure::dirac(x, d).unwrap()).unwrap().value;
                assert!((v - x).abs() <= 1e-12, "{} at {x}: {v}", f.label());
            }
        }
    }

    #[test]
    fn huge_exponents_go_through_log_space() {
        let p = uniform(&[1.0, 2.0], 1.0, 2.0);
        // (½ 2^1000)^(1/1000) = 2 · 2^(-1/1000) to leading order.
        let v = power_mean(1000.0, &p).unwrap().value;
        let expected = 2.0 * (0.5f64 + 0.5 * 0.5f64.powi(1000)).powf(1e-3);
        assert!((v - expected).abs() < 1e-14, "{v} vs {expected}");
        let v = power_mean(-1000.0, &p).unwrap().value;
        assert!((v - 0.5f64.powf(-1e-3)).abs() < 1e-14);
    }

    #[test]
    fn small_exponents_stay_accurate() {
        let p = uniform(&[1.0, 4.0], 1.0, 4.0);
        let v = power_mean(1e-9, &p).unwrap().value;
        assert!((v - 2.0).abs() < 1e-8);
        let v = power_mean(1e-300, &p).unwrap().value;
        assert!((v - 2.0).abs() < 1e-15);
    }
}
