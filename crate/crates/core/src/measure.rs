//! Finite atomic probability measures on a compact interval.
//!
//! A [`Measure`] is a list of support points in strictly increasing order with
//! strictly positive weights summing to one. Every constructor canonicalizes
//! its input (sort, merge exact duplicates, renormalize); the JSON parser does
//! not, and rejects anything that is not already canonical.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass accepted by the strict (ingest) constructor.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// A closed interval `[lo, hi]` with finite endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn point(x: f64) -> Result<Self> {
        Self::new(x, x)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Length `hi - lo`.
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        self.lo + 0.5 * (self.hi - self.lo)
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lo).min(self.hi)
    }

    pub(crate) fn check_contains(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                value: x,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// A finite atomic probability measure on `domain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct Measure {
    points: Vec<f64>,
    weights: Vec<f64>,
    domain: Interval,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureRepr {
    domain: Interval,
    atoms: Vec<(f64, f64)>,
}

impl TryFrom<MeasureRepr> for Measure {
    type Error = Error;

    fn try_from(r: MeasureRepr) -> Result<Self> {
        Measure::from_canonical(r.atoms, r.domain)
    }
}

impl From<Measure> for MeasureRepr {
    fn from(m: Measure) -> Self {
        MeasureRepr {
            domain: m.domain,
            atoms: m.atoms().collect(),
        }
    }
}

impl Measure {
    /// Builds a measure from arbitrary `(point, weight)` pairs.
    ///
    /// Points are sorted, exact duplicates merged and the weights divided by
    /// their total. Weights only need to be positive and finite.
    pub fn new<I>(atoms: I, domain: Interval) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        if atoms.is_empty() {
            return Err(Error::EmptySupport);
        }
        for &(x, w) in &atoms {
            if !x.is_finite() {
                return Err(Error::InvalidAtoms(format!("non-finite point {x}")));
            }
            domain.check_contains(x)?;
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidAtoms(format!(
                    "weight {w} at point {x} must be positive and finite"
                )));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self::merge_sorted(&atoms, 0.0, domain))
    }

    /// Strict constructor used on ingest: atoms must already be strictly
    /// increasing, positive and normalized to within [`MASS_TOLERANCE`].
    pub fn from_canonical(atoms: Vec<(f64, f64)>, domain: Interval) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptySupport);
        }
        let mut total = 0.0;
        for (i, &(x, w)) in atoms.iter().enumerate() {
            if !x.is_finite() || !domain.contains(x) {
                return Err(Error::InvalidAtoms(format!(
                    "atom {i}: point {x} outside domain {domain}"
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidAtoms(format!(
                    "atom {i}: weight {w} must be positive and finite"
                )));
            }
            if i > 0 && atoms[i - 1].0 >= x {
                return Err(Error::InvalidAtoms(format!(
                    "atom {i}: points must be strictly increasing ({} then {x})",
                    atoms[i - 1].0
                )));
            }
            total += w;
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidAtoms(format!(
                "weights sum to {total}, expected 1 within {MASS_TOLERANCE:e}"
            )));
        }
        let (points, weights) = atoms.into_iter().unzip();
        Ok(Self {
            points,
            weights,
            domain,
        })
    }

    /// The Dirac measure at `x`.
    pub fn dirac(x: f64, domain: Interval) -> Result<Self> {
        domain.check_contains(x)?;
        Ok(Self {
            points: vec![x],
            weights: vec![1.0],
            domain,
        })
    }

    /// The discrete measure `(1/k)(δ_{x_1} + ... + δ_{x_k})`.
    pub fn uniform_atoms(points: &[f64], domain: Interval) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptySupport);
        }
        let w = 1.0 / points.len() as f64;
        Self::new(points.iter().map(|&x| (x, w)), domain)
    }

    /// Sorted atoms, merged when within `eps` of the first point of their run.
    ///
    /// Merged points are weight-averaged; the weights are renormalized to sum
    /// to one afterwards.
    pub(crate) fn merge_sorted(sorted: &[(f64, f64)], eps: f64, domain: Interval) -> Self {
        debug_assert!(!sorted.is_empty());
        let mut points = Vec::with_capacity(sorted.len());
        let mut weights = Vec::with_capacity(sorted.len());
        let mut i = 0;
        while i < sorted.len() {
            let anchor = sorted[i].0;
            let mut j = i + 1;
            while j < sorted.len() && sorted[j].0 - anchor <= eps {
                j += 1;
            }
            let run = &sorted[i..j];
            let w: f64 = run.iter().map(|a| a.1).sum();
            let x = if run.len() == 1 || run.iter().all(|a| a.0 == anchor) {
                anchor
            } else {
                let avg = run.iter().map(|a| a.0 * a.1).sum::<f64>() / w;
                avg.max(anchor).min(run[run.len() - 1].0)
            };
            points.push(x);
            weights.push(w);
            i = j;
        }
        let total: f64 = weights.iter().sum();
        if total != 1.0 {
            weights.iter_mut().for_each(|w| *w /= total);
        }
        Self {
            points,
            weights,
            domain,
        }
    }

    /// Merges atoms closer than `eps` by weight-weighted averaging.
    pub fn coalesce(&self, eps: f64) -> Self {
        let atoms: Vec<_> = self.atoms().collect();
        Self::merge_sorted(&atoms, eps.max(0.0), self.domain)
    }

    /// The same atoms viewed on a different domain.
    pub fn with_domain(&self, domain: Interval) -> Result<Self> {
        if !domain.contains_interval(&self.gamma()) {
            return Err(Error::DomainMismatch(format!(
                "support hull {} not inside {domain}",
                self.gamma()
            )));
        }
        Ok(Self {
            points: self.points.clone(),
            weights: self.weights.clone(),
            domain,
        })
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_dirac(&self) -> bool {
        self.points.len() == 1
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }

    /// Convex hull of the support, `[min supp, max supp]`.
    pub fn gamma(&self) -> Interval {
        Interval {
            lo: self.points[0],
            hi: self.points[self.points.len() - 1],
        }
    }

    /// `Σ w_i f(x_i)`, summed in ascending point order.
    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(f64) -> f64,
    {
        let mut acc = 0.0;
        for (x, w) in self.atoms() {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { value: v, at: x });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Mean and variance. The variance is accumulated around the mean, which
    /// keeps it accurate down to the squared spread of nearly collapsed
    /// measures; it is never negative.
    pub fn mean_and_variance(&self) -> (f64, f64) {
        if self.is_dirac() {
            return (self.points[0], 0.0);
        }
        let mean: f64 = self.atoms().map(|(x, w)| w * x).sum();
        let var: f64 = self
            .atoms()
            .map(|(x, w)| {
                let d = x - mean;
                w * d * d
            })
            .sum();
        (mean, var.max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn dirac_examples() {
        let m = Measure::dirac(2.0, iv(1.0, 3.0)).unwrap();
        assert_eq!(m.atoms().collect::<Vec<_>>(), vec![(2.0, 1.0)]);
        let m = Measure::dirac(1.0, iv(1.0, 3.0)).unwrap();
        assert_eq!(m.atoms().collect::<Vec<_>>(), vec![(1.0, 1.0)]);
        assert!(matches!(
            Measure::dirac(0.0, iv(1.0, 3.0)),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn uniform_atoms_examples() {
        let d = iv(0.0, 10.0);
        let m = Measure::uniform_atoms(&[1.0, 3.0], d).unwrap();
        assert_eq!(m.atoms().collect::<Vec<_>>(), vec![(1.0, 0.5), (3.0, 0.5)]);
        let m = Measure::uniform_atoms(&[2.0, 2.0, 2.0], d).unwrap();
        assert_eq!(m.points(), &[2.0]);
        assert!((m.weights()[0] - 1.0).abs() < 1e-15);
        let m = Measure::uniform_atoms(&[1.0, 2.0, 3.0, 4.0], d).unwrap();
        assert_eq!(m.weights(), &[0.25; 4]);
        assert_eq!(
            Measure::uniform_atoms(&[], d).unwrap_err(),
            Error::EmptySupport
        );
        assert!(matches!(
            Measure::uniform_atoms(&[11.0], d),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn gamma_examples() {
        let d = iv(0.0, 10.0);
        assert_eq!(Measure::dirac(2.0, d).unwrap().gamma(), iv(2.0, 2.0));
        assert_eq!(
            Measure::uniform_atoms(&[3.0, 1.0], d).unwrap().gamma(),
            iv(1.0, 3.0)
        );
        assert_eq!(
            Measure::uniform_atoms(&[1.0, 2.0, 3.0], d).unwrap().gamma(),
            iv(1.0, 3.0)
        );
    }

    #[test]
    fn integrate_examples() {
        let d = iv(0.0, 10.0);
        let m = Measure::uniform_atoms(&[1.0, 3.0], d).unwrap();
        assert_eq!(m.integrate(|x| x).unwrap(), 2.0);
        assert_eq!(m.integrate(|x| x * x).unwrap(), 5.0);
        let e = Measure::dirac(std::f64::consts::E, d).unwrap();
        assert!((e.integrate(f64::ln).unwrap() - 1.0).abs() < 1e-15);
        let z = Measure::uniform_atoms(&[0.0, 1.0], d).unwrap();
        assert!(matches!(
            z.integrate(f64::ln),
            Err(Error::NonFiniteValue { .. })
        ));
    }

    #[test]
    fn mean_and_variance_examples() {
        let d = iv(0.0, 10.0);
        let m = Measure::uniform_atoms(&[1.0, 3.0], d).unwrap();
        assert_eq!(m.mean_and_variance(), (2.0, 1.0));
        assert_eq!(
            Measure::dirac(5.0, d).unwrap().mean_and_variance(),
            (5.0, 0.0)
        );
        // E = 2, E[X^2] = 12, Var = 12 - 4.
        let m = Measure::uniform_atoms(&[0.0, 0.0, 6.0], iv(0.0, 6.0)).unwrap();
        let (mean, var) = m.mean_and_variance();
        assert!((mean - 2.0).abs() < 1e-15);
        assert!((var - 8.0).abs() < 1e-14);
    }

    #[test]
    fn new_merges_and_renormalizes() {
        let m = Measure::new([(2.0, 3.0), (1.0, 1.0), (2.0, 4.0)], iv(0.0, 3.0)).unwrap();
        assert_eq!(m.points(), &[1.0, 2.0]);
        assert_eq!(m.weights(), &[0.125, 0.875]);
        assert!(Measure::new([(1.0, 0.0)], iv(0.0, 3.0)).is_err());
        assert!(Measure::new([(1.0, -1.0)], iv(0.0, 3.0)).is_err());
    }

    #[test]
    fn coalesce_averages_by_weight() {
        let m = Measure::new([(1.0, 0.25), (1.0 + 1e-9, 0.25), (2.0, 0.5)], iv(0.0, 3.0)).unwrap();
        let c = m.coalesce(1e-6);
        assert_eq!(c.len(), 2);
        assert!((c.points()[0] - (1.0 + 0.5e-9)).abs() < 1e-15);
        assert_eq!(c.weights(), &[0.5, 0.5]);
        assert_eq!(m.coalesce(0.0), m);
    }

    #[test]
    fn json_round_trip_and_strict_ingest() {
        let m = Measure::uniform_atoms(&[1.0, 3.0], iv(1.0, 3.0)).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"domain":[1.0,3.0],"atoms":[[1.0,0.5],[3.0,0.5]]}"#);
        let back: Measure = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);

        let unsorted = r#"{"domain":[1,3],"atoms":[[3,0.5],[1,0.5]]}"#;
        let err = serde_json::from_str::<Measure>(unsorted).unwrap_err();
        assert!(err.to_string().contains("strictly increasing"), "{err}");

        let short = r#"{"domain":[1,3],"atoms":[[1,0.5],[3,0.4]]}"#;
        let err = serde_json::from_str::<Measure>(short).unwrap_err();
        assert!(err.to_string().contains("atoms"), "{err}");

        let bad_domain = r#"{"domain":[3,1],"atoms":[[2,1]]}"#;
        assert!(serde_json::from_str::<Measure>(bad_domain).is_err());

        let extra = r#"{"domain":[1,3],"atoms":[[2,1]],"x":1}"#;
        assert!(serde_json::from_str::<Measure>(extra).is_err());
    }

    #[test]
    fn with_domain_requires_containment() {
        let m = Measure::uniform_atoms(&[1.0, 2.0], iv(0.0, 3.0)).unwrap();
        assert_eq!(m.with_domain(iv(1.0, 2.0)).unwrap().domain(), iv(1.0, 2.0));
        assert!(matches!(
            m.with_domain(iv(1.5, 2.0)),
            Err(Error::DomainMismatch(_))
        ));
    }
}
