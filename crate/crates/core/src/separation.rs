//! Separation functions `d_{f,g}(t)` and contraction bounds.
//!
//! `d_{f,g}(t)` is the largest gap `|QA_f(P) - QA_g(P)|` over measures whose
//! support has diameter at most `t`. The supremum is attained on two-atom
//! measures `θδ_x + (1-θ)δ_y`, so it is estimated by a lattice search over
//! `(x, y, θ)` followed by one local refinement at ten times the density.
//! Every estimate is a lower bound of the true value.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::kernel::Kernel;
use crate::measure::Interval;

/// Density factor of the refinement pass.
pub const REFINE_FACTOR: usize = 10;
/// Cap on [`predict_iterations`].
pub const PREDICTION_CAP: usize = 1_000_000;
/// Number of `t` samples in the curve behind [`predict_iterations`].
pub const PREDICTION_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeparationOptions {
    /// Lattice has `grid + 1` points per axis.
    pub grid: usize,
    pub refine: bool,
}

impl SeparationOptions {
    pub fn new(grid: usize) -> Self {
        Self { grid, refine: true }
    }

    pub fn coarse(grid: usize) -> Self {
        Self {
            grid,
            refine: false,
        }
    }

    /// Effective density of the search.
    pub fn refinement(&self) -> usize {
        if self.refine {
            self.grid * REFINE_FACTOR
        } else {
            self.grid
        }
    }
}

impl Default for SeparationOptions {
    fn default() -> Self {
        Self::new(64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationEstimate {
    pub value: f64,
    /// `(x, y, θ)` of the best two-atom measure; `None` when no measure of the
    /// search beats `0`.
    pub argmax: Option<(f64, f64, f64)>,
    pub refinement: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationCurve {
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub refinement: usize,
}

impl SeparationCurve {
    /// Linear interpolation through `(0, 0)` and the samples; constant past the
    /// last sample.
    pub fn interpolate(&self, t: f64) -> f64 {
        if t <= 0.0 || self.t_grid.is_empty() {
            return 0.0;
        }
        let i = self.t_grid.partition_point(|&s| s < t);
        if i == self.t_grid.len() {
            return self.values[i - 1];
        }
        let (t0, d0) = if i == 0 {
            (0.0, 0.0)
        } else {
            (self.t_grid[i - 1], self.values[i - 1])
        };
        let (t1, d1) = (self.t_grid[i], self.values[i]);
        if t1 == t0 {
            return d1;
        }
        d0 + (d1 - d0) * (t - t0) / (t1 - t0)
    }

    /// `t,d` rows with 17 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "d"]).expect("in-memory write");
        for (&t, &d) in self.t_grid.iter().zip(&self.values) {
            w.write_record([format!("{t:.16e}"), format!("{d:.16e}")])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

/// `t_k = width·k/n` for `k = 1..=n`, with the last point exactly `width`.
pub fn even_t_grid(width: f64, n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| {
            if k == n {
                width
            } else {
                width * k as f64 / n as f64
            }
        })
        .collect()
}

struct Pair {
    f: Kernel,
    g: Kernel,
    domain: Interval,
}

impl Pair {
    fn new(f: &Generator, g: &Generator) -> Result<Self> {
        if f.domain() != g.domain() {
            return Err(Error::DomainMismatch(format!(
                "generators live on {} and {}",
                f.domain(),
                g.domain()
            )));
        }
        if f.domain().is_degenerate() {
            return Err(Error::DomainMismatch(format!(
                "domain {} has no interior",
                f.domain()
            )));
        }
        Ok(Self {
            f: Kernel::new(f)?,
            g: Kernel::new(g)?,
            domain: f.domain(),
        })
    }

    #[inline]
    fn mean(k: &Kernel, kx: f64, ky: f64, theta: f64, lo: f64, hi: f64) -> Result<f64> {
        Ok(k.invert(k.combine2(kx, ky, theta))?.max(lo).min(hi))
    }

    /// `m(x, y, θ)` from precomputed working values.
    #[inline]
    fn gap_from(
        &self,
        x: f64,
        y: f64,
        fx: f64,
        fy: f64,
        gx: f64,
        gy: f64,
        theta: f64,
    ) -> Result<f64> {
        if x == y {
            return Ok(0.0);
        }
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        let a = Self::mean(&self.f, fx, fy, theta, lo, hi)?;
        let b = Self::mean(&self.g, gx, gy, theta, lo, hi)?;
        Ok((a - b).abs())
    }
}

struct Lattice {
    g: usize,
    h: f64,
    xs: Vec<f64>,
    thetas: Vec<f64>,
    fx: Vec<f64>,
    gx: Vec<f64>,
}

impl Lattice {
    fn new(pair: &Pair, g: usize) -> Self {
        let (lo, w) = (pair.domain.lo(), pair.domain.width());
        let xs: Vec<f64> = (0..=g)
            .map(|j| {
                if j == g {
                    pair.domain.hi()
                } else {
                    lo + w * (j as f64 / g as f64)
                }
            })
            .collect();
        let thetas = (0..=g).map(|i| i as f64 / g as f64).collect();
        let fx = xs.iter().map(|&x| pair.f.eval(x)).collect();
        let gx = xs.iter().map(|&x| pair.g.eval(x)).collect();
        Self {
            g,
            h: w / g as f64,
            xs,
            thetas,
            fx,
            gx,
        }
    }

    /// Largest index offset `k` with `k·h ≤ t`.
    fn max_offset(&self, t: f64, width: f64) -> usize {
        let k = ((t / width) * self.g as f64 * (1.0 + 1e-12)).floor();
        (k.max(0.0) as usize).min(self.g)
    }

    /// Best `θ` for the lattice pair `(i, j)`: `(value, θ index)`.
    fn best_theta(&self, pair: &Pair, i: usize, j: usize) -> Result<(f64, usize)> {
        let mut best = (0.0, 0);
        for (ti, &theta) in self.thetas.iter().enumerate() {
            let v = pair.gap_from(
                self.xs[i], self.xs[j], self.fx[i], self.fx[j], self.gx[i], self.gx[j], theta,
            )?;
            if v > best.0 {
                best = (v, ti);
            }
        }
        Ok(best)
    }

    /// For every offset `k ≤ kmax`, the best lattice measure with atoms
    /// `k` steps apart: `(value, i, θ index)`, first maximizer in index order.
    fn offset_table(&self, pair: &Pair, kmax: usize) -> Result<Vec<(f64, usize, usize)>> {
        let row = |i: usize| -> Result<Vec<(f64, usize)>> {
            (1..=kmax.min(self.g - i))
                .map(|k| self.best_theta(pair, i, i + k))
                .collect()
        };
        let rows: Vec<Result<Vec<(f64, usize)>>> = (0..self.g).into_par_iter().map(row).collect();
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        let mut table = vec![(0.0, 0, 0); kmax + 1];
        for (i, r) in rows.iter().enumerate() {
            for (k0, &(v, ti)) in r.iter().enumerate() {
                let slot = &mut table[k0 + 1];
                if v > slot.0 {
                    *slot = (v, i, ti);
                }
            }
        }
        Ok(table)
    }
}

/// Estimate at `t` given the offset table of `lattice`.
fn estimate_at(
    pair: &Pair,
    lattice: &Lattice,
    table: &[(f64, usize, usize)],
    t: f64,
    refine: bool,
) -> Result<SeparationEstimate> {
    let width = pair.domain.width();
    let kmax = lattice.max_offset(t, width).min(table.len() - 1);
    let mut best = 0.0;
    let mut arg: Option<(f64, f64, f64)> = None;
    for (k, &(v, i, ti)) in table.iter().enumerate().take(kmax + 1).skip(1) {
        if v > best {
            best = v;
            arg = Some((lattice.xs[i], lattice.xs[i + k], lattice.thetas[ti]));
        }
    }
    // Atoms exactly `t` apart: the widest measures allowed.
    let hi = pair.domain.hi();
    for &x in &lattice.xs {
        let y = x + t;
        if y > hi {
            break;
        }
        let (fx, fy, gx, gy) = (
            pair.f.eval(x),
            pair.f.eval(y),
            pair.g.eval(x),
            pair.g.eval(y),
        );
        for &theta in &lattice.thetas {
            let v = pair.gap_from(x, y, fx, fy, gx, gy, theta)?;
            if v > best {
                best = v;
                arg = Some((x, y, theta));
            }
        }
    }
    if refine {
        if let Some((x0, y0, th0)) = arg {
            let hx = lattice.h / REFINE_FACTOR as f64;
            let ht = 1.0 / (lattice.g * REFINE_FACTOR) as f64;
            let r = REFINE_FACTOR as i64;
            for a in -r..=r {
                let x = x0 + a as f64 * hx;
                if !pair.domain.contains(x) {
                    continue;
                }
                for b in -r..=r {
                    let y = y0 + b as f64 * hx;
                    if !pair.domain.contains(y) || (x - y).abs() > t {
                        continue;
                    }
                    let (fx, fy, gx, gy) = (
                        pair.f.eval(x),
                        pair.f.eval(y),
                        pair.g.eval(x),
                        pair.g.eval(y),
                    );
                    for c in -r..=r {
                        let theta = th0 + c as f64 * ht;
                        if !(0.0..=1.0).contains(&theta) {
                            continue;
                        }
                        let v = pair.gap_from(x, y, fx, fy, gx, gy, theta)?;
                        if v > best {
                            best = v;
                            arg = Some((x, y, theta));
                        }
                    }
                }
            }
        }
    }
    Ok(SeparationEstimate {
        value: best,
        argmax: arg,
        refinement: if refine {
            lattice.g * REFINE_FACTOR
        } else {
            lattice.g
        },
    })
}

fn check_t(domain: Interval, t: f64) -> Result<()> {
    if !(t > 0.0 && t <= domain.width()) {
        return Err(Error::InvalidArgument(format!(
            "t = {t} must lie in (0, {}]",
            domain.width()
        )));
    }
    Ok(())
}

fn check_grid(grid: usize) -> Result<()> {
    if grid < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid must be at least 2, got {grid}"
        )));
    }
    Ok(())
}

/// Estimate of `d_{f,g}(t)` with the default refinement pass.
pub fn separation(f: &Generator, g: &Generator, t: f64, grid: usize) -> Result<f64> {
    Ok(separation_with(f, g, t, &SeparationOptions::new(grid))?.value)
}

pub fn separation_with(
    f: &Generator,
    g: &Generator,
    t: f64,
    opts: &SeparationOptions,
) -> Result<SeparationEstimate> {
    check_grid(opts.grid)?;
    let pair = Pair::new(f, g)?;
    check_t(pair.domain, t)?;
    let lattice = Lattice::new(&pair, opts.grid);
    let kmax = lattice.max_offset(t, pair.domain.width());
    let table = lattice.offset_table(&pair, kmax)?;
    estimate_at(&pair, &lattice, &table, t, opts.refine)
}

fn pair_values(
    f: &Generator,
    g: &Generator,
    t_grid: &[f64],
    opts: &SeparationOptions,
) -> Result<Vec<f64>> {
    let pair = Pair::new(f, g)?;
    for &t in t_grid {
        check_t(pair.domain, t)?;
    }
    let lattice = Lattice::new(&pair, opts.grid);
    let tmax = t_grid.iter().copied().fold(0.0, f64::max);
    let table = lattice.offset_table(&pair, lattice.max_offset(tmax, pair.domain.width()))?;
    t_grid
        .iter()
        .map(|&t| Ok(estimate_at(&pair, &lattice, &table, t, opts.refine)?.value))
        .collect()
}

fn check_t_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "t_grid must be a nonempty increasing list".into(),
        ));
    }
    Ok(())
}

fn running_max(values: &mut [f64]) {
    let mut m = 0.0f64;
    for v in values {
        m = m.max(*v);
        *v = m;
    }
}

/// `d_{f,g}` sampled on `t_grid`.
///
/// Each refined sample is a lower bound of `d_{f,g}`; since `d_{f,g}` is
/// nondecreasing, so is their running maximum, which is what is stored.
pub fn separation_curve(
    f: &Generator,
    g: &Generator,
    t_grid: &[f64],
    opts: &SeparationOptions,
) -> Result<SeparationCurve> {
    check_grid(opts.grid)?;
    check_t_grid(t_grid)?;
    let mut values = pair_values(f, g, t_grid, opts)?;
    running_max(&mut values);
    Ok(SeparationCurve {
        t_grid: t_grid.to_vec(),
        values,
        refinement: opts.refinement(),
    })
}

fn check_set(set: &[Generator]) -> Result<()> {
    let first = set
        .first()
        .ok_or_else(|| Error::InvalidArgument("generator set is empty".into()))?;
    if let Some(other) = set.iter().find(|k| k.domain() != first.domain()) {
        return Err(Error::DomainMismatch(format!(
            "generators live on {} and {}",
            first.domain(),
            other.domain()
        )));
    }
    Ok(())
}

/// `max_{l,u ∈ T} d_{l,u}(t)`.
pub fn contraction_bound(set: &[Generator], t: f64, grid: usize) -> Result<f64> {
    check_set(set)?;
    check_grid(grid)?;
    check_t(set[0].domain(), t)?;
    let mut best = 0.0f64;
    for (i, f) in set.iter().enumerate() {
        for g in &set[i + 1..] {
            best = best.max(separation(f, g, t, grid)?);
        }
    }
    Ok(best)
}

/// [`contraction_bound`] sampled on `t_grid`, stored as a running maximum.
pub fn contraction_curve(
    set: &[Generator],
    t_grid: &[f64],
    opts: &SeparationOptions,
) -> Result<SeparationCurve> {
    check_set(set)?;
    check_grid(opts.grid)?;
    check_t_grid(t_grid)?;
    for &t in t_grid {
        check_t(set[0].domain(), t)?;
    }
    let mut values = vec![0.0f64; t_grid.len()];
    for (i, f) in set.iter().enumerate() {
        for g in &set[i + 1..] {
            for (v, d) in values.iter_mut().zip(pair_values(f, g, t_grid, opts)?) {
                *v = v.max(d);
            }
        }
    }
    running_max(&mut values);
    Ok(SeparationCurve {
        t_grid: t_grid.to_vec(),
        values,
        refinement: opts.refinement(),
    })
}

/// Smallest `n` with `d̂ⁿ(t0) < tol`, where `d̂` interpolates the contraction
/// curve of `set` on [`PREDICTION_SAMPLES`] evenly spaced points.
pub fn predict_iterations(set: &[Generator], t0: f64, tol: f64, grid: usize) -> Result<usize> {
    check_set(set)?;
    let width = set[0].domain().width();
    check_t(set[0].domain(), t0)?;
    check_tol(tol)?;
    if t0 <= tol {
        return Ok(0);
    }
    let curve = contraction_curve(
        set,
        &even_t_grid(width, PREDICTION_SAMPLES),
        &SeparationOptions::new(grid),
    )?;
    predict_from_curve(&curve, t0, tol)
}

/// [`predict_iterations`] on an already sampled contraction curve.
pub fn predict_from_curve(curve: &SeparationCurve, t0: f64, tol: f64) -> Result<usize> {
    check_tol(tol)?;
    if t0 <= tol {
        return Ok(0);
    }
    let mut t = t0;
    for n in 1..=PREDICTION_CAP {
        t = curve.interpolate(t);
        if t < tol {
            return Ok(n);
        }
    }
    Err(Error::CapExceeded {
        cap: PREDICTION_CAP,
    })
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    Ok(())
}
