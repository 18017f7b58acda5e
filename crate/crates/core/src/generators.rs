//! Continuous strictly monotone generators and their inverses.
//!
//! A [`Generator`] pairs a [`GeneratorKind`] (the rule) with the interval it
//! is defined on. Construction validates the pair, so every `Generator` in
//! circulation is finite and strictly monotone on its domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::Interval;
use crate::roots;

/// Default number of grid points used to certify monotonicity.
pub const MONOTONE_GRID: usize = 1024;

/// Beyond this exponent magnitude power generators are handled in log space.
pub const LOG_SPACE_EXPONENT: f64 = 300.0;

/// Target residual `|f(t) - y| <= INVERSE_RTOL * (1 + |y|)` for inversion.
pub const INVERSE_RTOL: f64 = 1e-13;

/// Generator rules. JSON form: `{"kind":"power","p":0.5}`,
/// `{"kind":"tabulated","knots":[[1,0],[2,1.3]]}`; composites nest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorKind {
    /// `t^p`, or `ln t` when `p = 0`.
    Power {
        p: f64,
    },
    Log,
    /// `exp(c t)`.
    Exp {
        c: f64,
    },
    /// `a t + b`.
    Affine {
        a: f64,
        b: f64,
    },
    /// `outer(inner(t))`.
    Composite {
        outer: Box<GeneratorKind>,
        inner: Box<GeneratorKind>,
    },
    /// Piecewise-linear interpolation through `(t, y)` knots.
    Tabulated {
        knots: Vec<(f64, f64)>,
    },
}

impl GeneratorKind {
    pub fn power(p: f64) -> Self {
        GeneratorKind::Power { p }
    }

    pub fn exp(c: f64) -> Self {
        GeneratorKind::Exp { c }
    }

    pub fn affine(a: f64, b: f64) -> Self {
        GeneratorKind::Affine { a, b }
    }

    pub fn composite(outer: GeneratorKind, inner: GeneratorKind) -> Self {
        GeneratorKind::Composite {
            outer: Box::new(outer),
            inner: Box::new(inner),
        }
    }

    pub fn on(self, domain: Interval) -> Result<Generator> {
        Generator::new(self, domain)
    }

    /// Short label used in CSV headers.
    pub fn label(&self) -> String {
        match self {
            GeneratorKind::Power { p } => format!("power({p})"),
            GeneratorKind::Log => "log".to_string(),
            GeneratorKind::Exp { c } => format!("exp({c})"),
            GeneratorKind::Affine { a, b } => format!("affine({a};{b})"),
            GeneratorKind::Composite { outer, inner } => {
                format!("compose({};{})", outer.label(), inner.label())
            }
            GeneratorKind::Tabulated { knots } => format!("tabulated({})", knots.len()),
        }
    }

    fn increasing(&self) -> bool {
        match self {
            GeneratorKind::Power { p } => *p >= 0.0,
            GeneratorKind::Log => true,
            GeneratorKind::Exp { c } => *c > 0.0,
            GeneratorKind::Affine { a, .. } => *a > 0.0,
            GeneratorKind::Composite { outer, inner } => outer.increasing() == inner.increasing(),
            GeneratorKind::Tabulated { knots } => knots[knots.len() - 1].1 > knots[0].1,
        }
    }

    fn raw_eval(&self, t: f64) -> f64 {
        match self {
            GeneratorKind::Power { p } if *p == 0.0 => t.ln(),
            GeneratorKind::Power { p } => t.powf(*p),
            GeneratorKind::Log => t.ln(),
            GeneratorKind::Exp { c } => (c * t).exp(),
            GeneratorKind::Affine { a, b } => a * t + b,
            GeneratorKind::Composite { outer, inner } => outer.raw_eval(inner.raw_eval(t)),
            GeneratorKind::Tabulated { knots } => interpolate(knots, t),
        }
    }
}

fn interpolate(knots: &[(f64, f64)], t: f64) -> f64 {
    // Index of the first knot strictly to the right of t, kept inside 1..len-1.
    let k = knots
        .partition_point(|&(x, _)| x <= t)
        .clamp(1, knots.len() - 1);
    let (x0, y0) = knots[k - 1];
    let (x1, y1) = knots[k];
    if t == x0 {
        return y0;
    }
    if t == x1 {
        return y1;
    }
    y0 + (y1 - y0) * ((t - x0) / (x1 - x0))
}

/// A continuous, strictly monotone function on a closed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    kind: GeneratorKind,
    domain: Interval,
    increasing: bool,
    at_lo: f64,
    at_hi: f64,
}

impl Generator {
    /// Validates `kind` on `domain`.
    ///
    /// Power, log, exponential and affine rules are checked from their
    /// parameters; tabulated and composite rules are additionally certified
    /// on a [`MONOTONE_GRID`]-point grid.
    pub fn new(kind: GeneratorKind, domain: Interval) -> Result<Self> {
        let (lo, hi) = (domain.lo(), domain.hi());
        let mut needs_grid = false;
        match &kind {
            GeneratorKind::Power { p } => {
                if !p.is_finite() {
                    return Err(Error::InvalidGenerator(format!("power exponent {p}")));
                }
                if *p > 0.0 && lo < 0.0 {
                    return Err(not_monotone(domain, format!("power({p}) requires lo >= 0")));
                }
                if *p <= 0.0 && lo <= 0.0 {
                    return Err(not_monotone(domain, format!("power({p}) requires lo > 0")));
                }
            }
            GeneratorKind::Log => {
                if lo <= 0.0 {
                    return Err(not_monotone(domain, "log requires lo > 0".into()));
                }
            }
            GeneratorKind::Exp { c } => {
                if !c.is_finite() || *c == 0.0 {
                    return Err(Error::InvalidGenerator(format!(
                        "exp rate must be finite and nonzero, got {c}"
                    )));
                }
            }
            GeneratorKind::Affine { a, b } => {
                if !a.is_finite() || !b.is_finite() || *a == 0.0 {
                    return Err(Error::InvalidGenerator(format!(
                        "affine needs finite a != 0 and finite b, got a = {a}, b = {b}"
                    )));
                }
            }
            GeneratorKind::Composite { outer, inner } => {
                let inner = Generator::new((**inner).clone(), domain)?;
                let image = inner.image()?;
                Generator::new((**outer).clone(), image).map_err(|e| {
                    Error::DomainMismatch(format!(
                        "outer generator {} invalid on inner image {image}: {e}",
                        outer.label()
                    ))
                })?;
                needs_grid = true;
            }
            GeneratorKind::Tabulated { knots } => {
                validate_knots(knots)?;
                let (t0, tn) = (knots[0].0, knots[knots.len() - 1].0);
                if lo < t0 || hi > tn {
                    return Err(Error::DomainMismatch(format!(
                        "domain {domain} exceeds tabulated range [{t0}, {tn}]"
                    )));
                }
                needs_grid = true;
            }
        }

        let at_lo = kind.raw_eval(lo);
        let at_hi = kind.raw_eval(hi);
        let log_space = matches!(kind, GeneratorKind::Power { p } if p.abs() > LOG_SPACE_EXPONENT);
        for (v, t) in [(at_lo, lo), (at_hi, hi)] {
            if v.is_nan() || (!v.is_finite() && !log_space) {
                return Err(Error::NonFiniteValue { value: v, at: t });
            }
        }
        let g = Generator {
            increasing: kind.increasing(),
            kind,
            domain,
            at_lo,
            at_hi,
        };
        if needs_grid {
            g.check_monotone_grid(MONOTONE_GRID)?;
        }
        Ok(g)
    }

    pub fn power(p: f64, domain: Interval) -> Result<Self> {
        Self::new(GeneratorKind::Power { p }, domain)
    }

    pub fn log(domain: Interval) -> Result<Self> {
        Self::new(GeneratorKind::Log, domain)
    }

    pub fn exp(c: f64, domain: Interval) -> Result<Self> {
        Self::new(GeneratorKind::Exp { c }, domain)
    }

    pub fn affine(a: f64, b: f64, domain: Interval) -> Result<Self> {
        Self::new(GeneratorKind::Affine { a, b }, domain)
    }

    pub fn kind(&self) -> &GeneratorKind {
        &self.kind
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn is_increasing(&self) -> bool {
        self.increasing
    }

    pub fn label(&self) -> String {
        self.kind.label()
    }

    /// Image of the domain, `[min(f(lo), f(hi)), max(f(lo), f(hi))]`.
    pub fn image(&self) -> Result<Interval> {
        let (a, b) = (self.at_lo, self.at_hi);
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonFiniteValue {
                value: if a.is_finite() { b } else { a },
                at: if a.is_finite() {
                    self.domain.hi()
                } else {
                    self.domain.lo()
                },
            });
        }
        Interval::new(a.min(b), a.max(b))
    }

    /// Samples `points` equispaced values over the domain and checks they are
    /// finite and strictly ordered in one direction.
    pub fn check_monotone_grid(&self, points: usize) -> Result<()> {
        if self.domain.is_degenerate() {
            let v = self.kind.raw_eval(self.domain.lo());
            return if v.is_finite() {
                Ok(())
            } else {
                Err(Error::NonFiniteValue {
                    value: v,
                    at: self.domain.lo(),
                })
            };
        }
        let n = points.max(2);
        let (lo, w) = (self.domain.lo(), self.domain.width());
        let mut prev = f64::NAN;
        for i in 0..n {
            let t = if i == n - 1 {
                self.domain.hi()
            } else {
                lo + w * (i as f64 / (n - 1) as f64)
            };
            let v = self.kind.raw_eval(t);
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { value: v, at: t });
            }
            if i > 0 {
                let ordered = if self.increasing { v > prev } else { v < prev };
                if !ordered {
                    return Err(not_monotone(
                        self.domain,
                        format!("grid values {prev} then {v} at t = {t}"),
                    ));
                }
            }
            prev = v;
        }
        Ok(())
    }

    /// `f(t)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        self.domain.check_contains(t)?;
        let v = self.kind.raw_eval(t);
        if !v.is_finite() {
            return Err(Error::NonFiniteValue { value: v, at: t });
        }
        Ok(v)
    }

    pub(crate) fn raw_eval(&self, t: f64) -> f64 {
        self.kind.raw_eval(t)
    }

    /// `f⁻¹(y)` for `y` in the image of the domain.
    pub fn invert(&self, y: f64) -> Result<f64> {
        let image = self.image()?;
        if !image.contains(y) {
            return Err(Error::OutOfRange {
                value: y,
                lo: image.lo(),
                hi: image.hi(),
            });
        }
        self.invert_in_range(y)
    }

    /// Inverse for callers that have already produced `y` from values of `f`;
    /// `y` is clamped into the image first.
    pub(crate) fn invert_clamped(&self, y: f64) -> Result<f64> {
        let (a, b) = (self.at_lo.min(self.at_hi), self.at_lo.max(self.at_hi));
        self.invert_in_range(y.max(a).min(b))
    }

    fn invert_in_range(&self, y: f64) -> Result<f64> {
        let tol = INVERSE_RTOL * (1.0 + y.abs());
        let guess = match &self.kind {
            GeneratorKind::Tabulated { .. } => None,
            GeneratorKind::Composite { outer, inner } => {
                let inner = Generator::new((**inner).clone(), self.domain)?;
                let outer = Generator::new((**outer).clone(), inner.image()?)?;
                Some(inner.invert_clamped(outer.invert_clamped(y)?)?)
            }
            kind => Some(closed_form_inverse(kind, y)),
        };
        if let Some(t) = guess {
            let t = self.domain.clamp(t);
            if t.is_finite() && (self.kind.raw_eval(t) - y).abs() <= tol {
                return Ok(t);
            }
            return Ok(self.polish(y, tol).map(|r| r.x).unwrap_or(t));
        }
        Ok(self.polish(y, tol)?.x)
    }

    fn polish(&self, y: f64, tol: f64) -> Result<roots::Root> {
        if self.domain.is_degenerate() {
            let t = self.domain.lo();
            return Ok(roots::Root {
                x: t,
                residual: (self.kind.raw_eval(t) - y).abs(),
                iterations: 0,
            });
        }
        roots::solve_bracketed(
            |t| self.kind.raw_eval(t) - y,
            self.domain.lo(),
            self.domain.hi(),
            tol,
        )
    }

    /// The inverse function as a generator on the image interval.
    pub fn inverse(&self) -> Result<Generator> {
        let image = self.image()?;
        let kind = inverse_kind(&self.kind, self.domain)?;
        Generator::new(kind, image)
    }

    /// `self ∘ inner`, defined on `inner`'s domain.
    pub fn compose_with(&self, inner: &Generator) -> Result<Generator> {
        let image = inner.image()?;
        if !self.domain.contains_interval(&image) {
            return Err(Error::DomainMismatch(format!(
                "image {image} of {} exceeds domain {} of {}",
                inner.label(),
                self.domain,
                self.label()
            )));
        }
        Generator::new(
            GeneratorKind::composite(self.kind.clone(), inner.kind.clone()),
            inner.domain,
        )
    }

    /// The same rule on a different interval.
    pub fn restrict(&self, domain: Interval) -> Result<Generator> {
        Generator::new(self.kind.clone(), domain)
    }
}

fn not_monotone(domain: Interval, reason: String) -> Error {
    Error::NotMonotone {
        lo: domain.lo(),
        hi: domain.hi(),
        reason,
    }
}

fn validate_knots(knots: &[(f64, f64)]) -> Result<()> {
    if knots.len() < 2 {
        return Err(Error::InvalidGenerator(
            "tabulated generator needs at least two knots".into(),
        ));
    }
    if knots.iter().any(|(t, y)| !t.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidGenerator("non-finite knot".into()));
    }
    let up = knots[1].1 > knots[0].1;
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.0 <= a.0 {
            return Err(Error::InvalidGenerator(format!(
                "knot abscissae must strictly increase ({} then {})",
                a.0, b.0
            )));
        }
        if (up && b.1 <= a.1) || (!up && b.1 >= a.1) {
            return Err(Error::InvalidGenerator(format!(
                "knot values must be strictly monotone ({} then {})",
                a.1, b.1
            )));
        }
    }
    Ok(())
}

fn closed_form_inverse(kind: &GeneratorKind, y: f64) -> f64 {
    match kind {
        GeneratorKind::Power { p } if *p == 0.0 => y.exp(),
        GeneratorKind::Power { p } => y.powf(1.0 / p),
        GeneratorKind::Log => y.exp(),
        GeneratorKind::Exp { c } => y.ln() / c,
        GeneratorKind::Affine { a, b } => (y - b) / a,
        GeneratorKind::Composite { .. } | GeneratorKind::Tabulated { .. } => {
            unreachable!("no closed form")
        }
    }
}

fn inverse_kind(kind: &GeneratorKind, domain: Interval) -> Result<GeneratorKind> {
    Ok(match kind {
        GeneratorKind::Power { p } if *p == 0.0 => GeneratorKind::Exp { c: 1.0 },
        GeneratorKind::Power { p } => GeneratorKind::Power { p: 1.0 / p },
        GeneratorKind::Log => GeneratorKind::Exp { c: 1.0 },
        GeneratorKind::Exp { c } => {
            GeneratorKind::composite(GeneratorKind::affine(1.0 / c, 0.0), GeneratorKind::Log)
        }
        GeneratorKind::Affine { a, b } => GeneratorKind::affine(1.0 / a, -b / a),
        GeneratorKind::Composite { outer, inner } => {
            let inner_gen = Generator::new((**inner).clone(), domain)?;
            let inner_inv = inverse_kind(inner, domain)?;
            let outer_inv = inverse_kind(outer, inner_gen.image()?)?;
            GeneratorKind::composite(inner_inv, outer_inv)
        }
        GeneratorKind::Tabulated { knots } => {
            let mut swapped: Vec<(f64, f64)> = knots.iter().map(|&(t, y)| (y, t)).collect();
            if swapped[0].0 > swapped[swapped.len() - 1].0 {
                swapped.reverse();
            }
            GeneratorKind::Tabulated { knots: swapped }
        }
    })
}
