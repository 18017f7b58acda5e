//! Fixed-point iteration of `A_F` and the lower/upper invariant means.
//!
//! The support hulls `γ(A_F^n(P))` are nested, so their endpoints converge to
//! `L_F(P) ≤ U_F(P)`. The iteration stops once the hull is narrower than the
//! tolerance; `K_F(P)` is then reported as the midpoint with the final width
//! as its certificate.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{apply_family, AdmissibleFamily, Discretization};
use crate::generators::{Generator, GeneratorKind};
use crate::kernel::{self, Kernel};
use crate::measure::Measure;
use crate::qa::pushforward;

/// Window (in steps) of the stall detector.
pub const STALL_WINDOW: usize = 50;
/// Minimal relative decrease of the hull width over [`STALL_WINDOW`] steps.
pub const STALL_FACTOR: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxIterations,
    Stalled,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Status::Converged => "Converged",
            Status::MaxIterations => "MaxIterations",
            Status::Stalled => "Stalled",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationOptions {
    /// Absolute hull-width tolerance; `None` means `1e-12·|I|`.
    pub tol: Option<f64>,
    pub max_iter: usize,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self {
            tol: None,
            max_iter: 10_000,
        }
    }
}

impl IterationOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol: Some(tol),
            ..Self::default()
        }
    }

    pub fn max_iter(mut self, n: usize) -> Self {
        self.max_iter = n;
        self
    }

    pub fn resolved_tol(&self, family: &AdmissibleFamily) -> f64 {
        self.tol.unwrap_or(1e-12 * family.domain().width())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub n: usize,
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub variance: f64,
    pub atom_count: usize,
    /// One value per probe, in the order of [`IterationTrace::probe_labels`].
    pub probes: Vec<f64>,
}

impl TraceStep {
    pub fn gap(&self) -> f64 {
        self.gamma_hi - self.gamma_lo
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace {
    pub probe_labels: Vec<String>,
    pub steps: Vec<TraceStep>,
}

impl IterationTrace {
    /// CSV with header `n,gamma_lo,gamma_hi,gap,variance,atoms,probe:<label>...`;
    /// reals are written with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["n", "gamma_lo", "gamma_hi", "gap", "variance", "atoms"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(self.probe_labels.iter().map(|l| format!("probe:{l}")));
        w.write_record(&header)?;
        for s in &self.steps {
            let mut row = vec![
                s.n.to_string(),
                fmt_real(s.gamma_lo),
                fmt_real(s.gamma_hi),
                fmt_real(s.gap()),
                fmt_real(s.variance),
                s.atom_count.to_string(),
            ];
            row.extend(s.probes.iter().map(|&v| fmt_real(v)));
            w.write_record(&row)?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}

/// A real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantResult {
    /// Estimate of `L_F(P)`: lower end of the final hull.
    pub lower: f64,
    /// Estimate of `U_F(P)`.
    pub upper: f64,
    pub k_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub status: Status,
}

fn record(n: usize, m: &Measure, probes: &[Kernel]) -> Result<TraceStep> {
    let g = m.gamma();
    let (_, variance) = m.mean_and_variance();
    let probes = probes
        .iter()
        .map(|k| kernel::mean_of_atoms(k, m.points(), m.weights()).map(|(v, _)| v))
        .collect::<Result<Vec<_>>>()?;
    Ok(TraceStep {
        n,
        gamma_lo: g.lo(),
        gamma_hi: g.hi(),
        variance,
        atom_count: m.len(),
        probes,
    })
}

/// Iterates `A_F` from `P` until the support hull is narrower than the
/// tolerance, recording every step.
pub fn compute_invariant(
    family: &AdmissibleFamily,
    p: &Measure,
    disc: &Discretization,
    opts: &IterationOptions,
) -> Result<(InvariantResult, IterationTrace)> {
    compute_invariant_with_probes(family, p, disc, opts, &[])
}

/// [`compute_invariant`] that also tracks `QA_k(A_F^n(P))` for each probe `k`.
pub fn compute_invariant_with_probes(
    family: &AdmissibleFamily,
    p: &Measure,
    disc: &Discretization,
    opts: &IterationOptions,
    probes: &[Generator],
) -> Result<(InvariantResult, IterationTrace)> {
    let tol = opts.resolved_tol(family);
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    if opts.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    if !family.domain().contains_interval(&p.gamma()) {
        return Err(Error::DomainMismatch(format!(
            "support hull {} not inside family domain {}",
            p.gamma(),
            family.domain()
        )));
    }
    for k in probes {
        if !k.domain().contains_interval(&p.gamma()) {
            return Err(Error::DomainMismatch(format!(
                "probe {} is defined on {}, which misses the support hull {}",
                k.label(),
                k.domain(),
                p.gamma()
            )));
        }
    }
    let kernels = probes.iter().map(Kernel::new).collect::<Result<Vec<_>>>()?;
    let mut trace = IterationTrace {
        probe_labels: probes.iter().map(|k| k.label()).collect(),
        steps: vec![record(0, p, &kernels)?],
    };

    let mut current = p.clone();
    let mut status = Status::MaxIterations;
    let mut n = 0;
    if current.gamma().width() < tol {
        status = Status::Converged;
    } else {
        while n < opts.max_iter {
            let next = apply_family(family, &current, disc)?;
            n += 1;
            let (prev, now) = (current.gamma(), next.gamma());
            if !prev.contains_interval(&now) {
                return Err(Error::InvariantViolation(format!(
                    "hull {now} at step {n} not nested in {prev}"
                )));
            }
            trace.steps.push(record(n, &next, &kernels)?);
            current = next;
            let gap = now.width();
            if gap < tol {
                status = Status::Converged;
                break;
            }
            if n >= STALL_WINDOW {
                let earlier = trace.steps[n - STALL_WINDOW].gap();
                if gap >= STALL_FACTOR * earlier {
                    status = Status::Stalled;
                    break;
                }
            }
        }
    }

    let g = current.gamma();
    let result = InvariantResult {
        lower: g.lo(),
        upper: g.hi(),
        k_value: g.midpoint(),
        gap: g.width(),
        iterations: n,
        status,
    };
    Ok((result, trace))
}

/// Per-probe sequences `QA_k(P_n)` and whether they end up agreeing.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub labels: Vec<String>,
    pub sequences: Vec<Vec<f64>>,
    pub finals: Vec<f64>,
    /// `max(finals) - min(finals)`.
    pub spread: f64,
    /// `spread <= 10·tol`.
    pub agree: bool,
    pub result: InvariantResult,
}

/// Runs the iteration and checks that every probe mean converges to the same
/// value, the signature of a weakly unique invariant mean.
pub fn probe_convergence(
    family: &AdmissibleFamily,
    p: &Measure,
    disc: &Discretization,
    probes: &[GeneratorKind],
    opts: &IterationOptions,
) -> Result<(ProbeReport, IterationTrace)> {
    let gens = probes
        .iter()
        .map(|k| Generator::new(k.clone(), family.domain()))
        .collect::<Result<Vec<_>>>()?;
    let (result, trace) = compute_invariant_with_probes(family, p, disc, opts, &gens)?;
    let sequences: Vec<Vec<f64>> = (0..gens.len())
        .map(|i| trace.steps.iter().map(|s| s.probes[i]).collect())
        .collect();
    let finals: Vec<f64> = sequences.iter().map(|s| s[s.len() - 1]).collect();
    let spread = if finals.is_empty() {
        0.0
    } else {
        let hi = finals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = finals.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo
    };
    let tol = opts.resolved_tol(family);
    let report = ProbeReport {
        labels: trace.probe_labels.clone(),
        sequences,
        finals,
        spread,
        agree: spread <= 10.0 * tol,
        result,
    };
    Ok((report, trace))
}

/// The variance column of a trace.
pub fn variance_decay(trace: &IterationTrace) -> Vec<f64> {
    trace.steps.iter().map(|s| s.variance).collect()
}

/// Both sides of the conjugacy identity `K_G(P) = u⁻¹(K_F(u_* P))` with
/// `G = (f_x ∘ u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugacyCheck {
    pub conjugated: f64,
    pub transported: f64,
    pub difference: f64,
}

pub fn conjugacy_check(
    family: &AdmissibleFamily,
    u: &Generator,
    p: &Measure,
    disc: &Discretization,
    opts: &IterationOptions,
) -> Result<ConjugacyCheck> {
    let g_family = family.compose_with(u)?;
    let p_on_j = p.with_domain(u.domain())?;
    let (k_g, _) = compute_invariant(&g_family, &p_on_j, disc, opts)?;
    let image = pushforward(u, &p_on_j)?.with_domain(family.domain())?;
    let (k_f, _) = compute_invariant(family, &image, disc, opts)?;
    let transported = u.invert_clamped(k_f.k_value)?;
    Ok(ConjugacyCheck {
        conjugated: k_g.k_value,
        transported,
        difference: (k_g.k_value - transported).abs(),
    })
}

/// Whether `K_G(P)` and `u⁻¹(K_F(u_* P))` agree within `tol`.
pub fn check_conjugacy_equivalence(
    family: &AdmissibleFamily,
    u: &Generator,
    p: &Measure,
    disc: &Discretization,
    tol: f64,
) -> Result<bool> {
    let c = conjugacy_check(family, u, p, disc, &IterationOptions::default())?;
    Ok(c.difference <= tol)
}
