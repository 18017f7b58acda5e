//! Invariant means of families of integral quasiarithmetic means.
//!
//! For a family `(f_x)_{x∈[0,1]}` of generators the operator `A_F` maps a
//! probability measure `P` to the law of `x ↦ QA_{f_x}(P)` with `x` uniform on
//! `[0,1]`. Iterating it shrinks the support hull of `P` onto the invariant
//! mean `K_F(P)`; this crate computes that limit for finite atomic measures,
//! reports the envelope `[L_F(P), U_F(P)]` it was bracketed by, and estimates
//! the separation functions that control the contraction rate.
//!
//! ```
//! use invmean::{catalog, Discretization, IterationOptions, Measure, compute_invariant};
//!
//! let family = catalog::arithmetic_geometric(1.0, 2.0).unwrap();
//! let p = Measure::uniform_atoms(&[1.0, 2.0], family.domain()).unwrap();
//! let (result, _trace) =
//!     compute_invariant(&family, &p, &Discretization::new(2).unwrap(), &IterationOptions::default())
//!         .unwrap();
//! assert!((result.k_value - 1.4567910310469068).abs() < 1e-12);
//! ```

pub mod catalog;
pub mod error;
pub mod experiment;
pub mod family;
pub mod generators;
pub mod invariance;
mod kernel;
pub mod measure;
pub mod qa;
pub mod roots;
pub mod separation;

pub use error::{Error, Result};
pub use family::{
    apply_family, iterate_family, AdmissibleFamily, Discretization, ParamMap, Piece, PieceRule,
};
pub use generators::{Generator, GeneratorKind};
pub use invariance::{
    check_conjugacy_equivalence, compute_invariant, compute_invariant_with_probes, conjugacy_check,
    probe_convergence, variance_decay, ConjugacyCheck, InvariantResult, IterationOptions,
    IterationTrace, ProbeReport, Status, TraceStep,
};
pub use measure::{Interval, Measure};
pub use qa::{conjugate_mean, power_mean, pushforward, qa_mean, MeanFunctional, MeanValue};
pub use separation::{
    contraction_bound, contraction_curve, predict_from_curve, predict_iterations, separation,
    separation_curve, separation_with, SeparationCurve, SeparationEstimate, SeparationOptions,
};
