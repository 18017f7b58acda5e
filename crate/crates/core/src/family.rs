//! Admissible families `(f_x)_{x∈[0,1]}` and the operator `A_F`.
//!
//! A family is a finite list of pieces partitioning `[0,1]` into half-open
//! spans (the last one closed at 1). Each piece holds a rule `x ↦ f_x` that is
//! either constant or continuous in `x`, which makes the family jointly
//! measurable by construction.
//!
//! `A_F(P)` is the law of `QA_{f_x}(P)` under Lebesgue measure on `[0,1]`. It
//! is discretized with the midpoint rule, nodes allocated piece by piece so
//! that families made of constant pieces are represented exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{Generator, GeneratorKind};
use crate::kernel::{self, Kernel};
use crate::measure::{Interval, Measure};

/// Relative width (with respect to the family domain) under which atoms of
/// `A_F(P)` are merged.
pub const MERGE_EPS: f64 = 1e-14;

/// How a sweep parameter depends on the family index `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ParamMap {
    /// `a x + b`.
    Affine { a: f64, b: f64 },
}

impl ParamMap {
    pub fn at(&self, x: f64) -> f64 {
        match self {
            ParamMap::Affine { a, b } => a * x + b,
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            ParamMap::Affine { a, .. } => *a == 0.0,
        }
    }
}

/// The rule `x ↦ f_x` on one piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RuleRepr", into = "RuleRepr")]
pub enum PieceRule {
    Fixed(GeneratorKind),
    /// `f_x = π_{p(x)}`.
    PowerSweep {
        p_of_x: ParamMap,
    },
    /// `f_x = outer_x ∘ inner`.
    Composed {
        outer: Box<PieceRule>,
        inner: GeneratorKind,
    },
}

impl PieceRule {
    pub fn kind_at(&self, x: f64) -> GeneratorKind {
        match self {
            PieceRule::Fixed(k) => k.clone(),
            PieceRule::PowerSweep { p_of_x } => GeneratorKind::Power { p: p_of_x.at(x) },
            PieceRule::Composed { outer, inner } => {
                GeneratorKind::composite(outer.kind_at(x), inner.clone())
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            PieceRule::Fixed(_) => true,
            PieceRule::PowerSweep { p_of_x } => p_of_x.is_constant(),
            PieceRule::Composed { outer, .. } => outer.is_constant(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            PieceRule::Fixed(k) => k.label(),
            PieceRule::PowerSweep {
                p_of_x: ParamMap::Affine { a, b },
            } => format!("power-sweep({a}x+{b})"),
            PieceRule::Composed { outer, inner } => {
                format!("compose({};{})", outer.label(), inner.label())
            }
        }
    }
}

impl From<GeneratorKind> for PieceRule {
    fn from(k: GeneratorKind) -> Self {
        PieceRule::Fixed(k)
    }
}

// Flat JSON form: every generator kind plus the two sweep kinds share one
// "kind" tag, which keeps serde's error messages specific.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum RuleRepr {
    Power {
        p: f64,
    },
    Log,
    Exp {
        c: f64,
    },
    Affine {
        a: f64,
        b: f64,
    },
    Composite {
        outer: Box<GeneratorKind>,
        inner: Box<GeneratorKind>,
    },
    Tabulated {
        knots: Vec<(f64, f64)>,
    },
    PowerSweep {
        p_of_x: ParamMap,
    },
    Composed {
        outer: Box<PieceRule>,
        inner: GeneratorKind,
    },
}

impl TryFrom<RuleRepr> for PieceRule {
    type Error = Error;

    fn try_from(r: RuleRepr) -> Result<Self> {
        Ok(match r {
            RuleRepr::Power { p } => PieceRule::Fixed(GeneratorKind::Power { p }),
            RuleRepr::Log => PieceRule::Fixed(GeneratorKind::Log),
            RuleRepr::Exp { c } => PieceRule::Fixed(GeneratorKind::Exp { c }),
            RuleRepr::Affine { a, b } => PieceRule::Fixed(GeneratorKind::Affine { a, b }),
            RuleRepr::Composite { outer, inner } => {
                PieceRule::Fixed(GeneratorKind::Composite { outer, inner })
            }
            RuleRepr::Tabulated { knots } => PieceRule::Fixed(GeneratorKind::Tabulated { knots }),
            RuleRepr::PowerSweep { p_of_x } => PieceRule::PowerSweep { p_of_x },
            RuleRepr::Composed { outer, inner } => PieceRule::Composed { outer, inner },
        })
    }
}

impl From<PieceRule> for RuleRepr {
    fn from(r: PieceRule) -> Self {
        match r {
            PieceRule::Fixed(k) => match k {
                GeneratorKind::Power { p } => RuleRepr::Power { p },
                GeneratorKind::Log => RuleRepr::Log,
                GeneratorKind::Exp { c } => RuleRepr::Exp { c },
                GeneratorKind::Affine { a, b } => RuleRepr::Affine { a, b },
                GeneratorKind::Composite { outer, inner } => RuleRepr::Composite { outer, inner },
                GeneratorKind::Tabulated { knots } => RuleRepr::Tabulated { knots },
            },
            PieceRule::PowerSweep { p_of_x } => RuleRepr::PowerSweep { p_of_x },
            PieceRule::Composed { outer, inner } => RuleRepr::Composed { outer, inner },
        }
    }
}

/// One piece: the rule applies for `x` in `[span.0, span.1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub span: (f64, f64),
    #[serde(rename = "gen")]
    pub rule: PieceRule,
}

impl Piece {
    pub fn new(start: f64, end: f64, rule: impl Into<PieceRule>) -> Self {
        Piece {
            span: (start, end),
            rule: rule.into(),
        }
    }

    pub fn len(&self) -> f64 {
        self.span.1 - self.span.0
    }

    pub fn is_empty(&self) -> bool {
        self.len() <= 0.0
    }
}

/// A validated family on a shared compact domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilyRepr", into = "FamilyRepr")]
pub struct AdmissibleFamily {
    domain: Interval,
    pieces: Vec<Piece>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyRepr {
    domain: Interval,
    pieces: Vec<Piece>,
}

impl TryFrom<FamilyRepr> for AdmissibleFamily {
    type Error = Error;

    fn try_from(r: FamilyRepr) -> Result<Self> {
        AdmissibleFamily::new(r.domain, r.pieces)
    }
}

impl From<AdmissibleFamily> for FamilyRepr {
    fn from(f: AdmissibleFamily) -> Self {
        FamilyRepr {
            domain: f.domain,
            pieces: f.pieces,
        }
    }
}

impl AdmissibleFamily {
    /// Checks that the spans partition `[0,1]` and that every rule yields a
    /// valid generator on `domain` at the ends and midpoint of its span.
    pub fn new(domain: Interval, pieces: Vec<Piece>) -> Result<Self> {
        if domain.is_degenerate() {
            return Err(Error::InvalidFamily(format!(
                "domain {domain} must have positive length"
            )));
        }
        if pieces.is_empty() {
            return Err(Error::InvalidFamily("no pieces".into()));
        }
        let mut cursor = 0.0;
        for (i, piece) in pieces.iter().enumerate() {
            let (a, b) = piece.span;
            if a != cursor {
                return Err(Error::InvalidFamily(format!(
                    "pieces[{i}].span starts at {a}, expected {cursor}"
                )));
            }
            if !(b > a) || !b.is_finite() {
                return Err(Error::InvalidFamily(format!(
                    "pieces[{i}].span [{a}, {b}] is empty"
                )));
            }
            cursor = b;
            for x in [a, a + 0.5 * (b - a), b] {
                let g = Generator::new(piece.rule.kind_at(x), domain).map_err(|e| {
                    Error::InvalidFamily(format!("pieces[{i}].gen at x = {x}: {e}"))
                })?;
                g.check_monotone_grid(crate::generators::MONOTONE_GRID)
                    .map_err(|e| {
                        Error::InvalidFamily(format!("pieces[{i}].gen at x = {x}: {e}"))
                    })?;
            }
        }
        if cursor != 1.0 {
            return Err(Error::InvalidFamily(format!(
                "pieces end at {cursor}, expected 1"
            )));
        }
        Ok(Self { domain, pieces })
    }

    /// `k` equal-length constant pieces, one per kind.
    pub fn from_kinds(domain: Interval, kinds: Vec<GeneratorKind>) -> Result<Self> {
        let k = kinds.len();
        let pieces = kinds
            .into_iter()
            .enumerate()
            .map(|(i, kind)| {
                let end = if i + 1 == k {
                    1.0
                } else {
                    (i + 1) as f64 / k as f64
                };
                Piece::new(i as f64 / k as f64, end, kind)
            })
            .collect();
        Self::new(domain, pieces)
    }

    pub fn constant(domain: Interval, kind: GeneratorKind) -> Result<Self> {
        Self::from_kinds(domain, vec![kind])
    }

    /// `f_x = π_{a x + b}` over all of `[0,1]`.
    pub fn power_sweep(domain: Interval, a: f64, b: f64) -> Result<Self> {
        Self::new(
            domain,
            vec![Piece::new(
                0.0,
                1.0,
                PieceRule::PowerSweep {
                    p_of_x: ParamMap::Affine { a, b },
                },
            )],
        )
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// True when every piece is constant in `x`.
    pub fn is_piecewise_constant(&self) -> bool {
        self.pieces.iter().all(|p| p.rule.is_constant())
    }

    /// The distinct generator kinds of a piecewise-constant family.
    pub fn constant_kinds(&self) -> Option<Vec<GeneratorKind>> {
        if !self.is_piecewise_constant() {
            return None;
        }
        let mut kinds: Vec<GeneratorKind> = Vec::new();
        for p in &self.pieces {
            let k = p.rule.kind_at(p.span.0);
            if !kinds.contains(&k) {
                kinds.push(k);
            }
        }
        Some(kinds)
    }

    fn piece_index(&self, x: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain {
                value: x,
                lo: 0.0,
                hi: 1.0,
            });
        }
        let idx = self.pieces.partition_point(|p| p.span.0 <= x);
        Ok(idx.saturating_sub(1).min(self.pieces.len() - 1))
    }

    /// `f_x`, from the unique piece whose half-open span contains `x`.
    pub fn generator_at(&self, x: f64) -> Result<Generator> {
        let i = self.piece_index(x)?;
        Generator::new(self.pieces[i].rule.kind_at(x), self.domain)
    }

    /// The family `(f_x ∘ u)_x` on `u`'s domain.
    pub fn compose_with(&self, u: &Generator) -> Result<AdmissibleFamily> {
        let image = u.image()?;
        if !self.domain.contains_interval(&image) {
            return Err(Error::DomainMismatch(format!(
                "image {image} of {} exceeds family domain {}",
                u.label(),
                self.domain
            )));
        }
        let pieces = self
            .pieces
            .iter()
            .map(|p| Piece {
                span: p.span,
                rule: PieceRule::Composed {
                    outer: Box::new(p.rule.clone()),
                    inner: u.kind().clone(),
                },
            })
            .collect();
        AdmissibleFamily::new(u.domain(), pieces)
    }
}

/// Midpoint discretization of the index measure on `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Discretization {
    nodes: usize,
    parallel: bool,
}

impl Discretization {
    pub fn new(nodes: usize) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::InvalidArgument(
                "discretization needs at least one node".into(),
            ));
        }
        Ok(Self {
            nodes,
            parallel: false,
        })
    }

    /// Evaluate nodes on the current rayon pool. Results do not depend on it.
    pub fn parallel(mut self, on: bool) -> Self {
        self.parallel = on;
        self
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn is_parallel(&self) -> bool {
        self.parallel
    }

    /// Nodes per piece: largest-remainder apportionment of `N` by span length
    /// with at least one node per piece. Pieces of length `L` get exactly
    /// `L·N` nodes whenever that is an integer for every piece.
    pub fn allocate(&self, family: &AdmissibleFamily) -> Result<Vec<usize>> {
        let pieces = family.pieces();
        let n = self.nodes;
        if n < pieces.len() {
            return Err(Error::InvalidArgument(format!(
                "{n} nodes cannot cover {} pieces",
                pieces.len()
            )));
        }
        let quotas: Vec<f64> = pieces.iter().map(|p| p.len() * n as f64).collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| (q.floor() as usize).max(1)).collect();
        let mut order: Vec<usize> = (0..pieces.len()).collect();
        let frac = |i: usize| quotas[i] - quotas[i].floor();
        loop {
            let total: usize = counts.iter().sum();
            if total == n {
                break;
            }
            if total < n {
                order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
                let deficit = n - total;
                for &i in order.iter().take(deficit) {
                    counts[i] += 1;
                }
            } else {
                // Only reachable when minimum-one bumps overshoot.
                let i = (0..counts.len())
                    .filter(|&i| counts[i] > 1)
                    .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
                    .expect("n >= pieces leaves a piece with more than one node");
                counts[i] -= 1;
            }
        }
        Ok(counts)
    }

    /// `(piece, x_j, weight_j)` for every node, in index order.
    pub fn nodes_for(&self, family: &AdmissibleFamily) -> Result<Vec<(usize, f64, f64)>> {
        let counts = self.allocate(family)?;
        let mut out = Vec::with_capacity(self.nodes);
        for (i, (piece, &c)) in family.pieces().iter().zip(&counts).enumerate() {
            let (a, b) = piece.span;
            let w = (b - a) / c as f64;
            for j in 0..c {
                out.push((i, a + (b - a) * ((j as f64 + 0.5) / c as f64), w));
            }
        }
        Ok(out)
    }
}

enum Job {
    /// A constant piece: one mean, total weight of the piece.
    Piece {
        piece: usize,
        weight: f64,
    },
    Node {
        piece: usize,
        x: f64,
        weight: f64,
    },
}

/// Discretized `A_F(P)`.
///
/// Constant pieces are evaluated once; continuous pieces once per node. The
/// resulting atoms are sorted by value (ties keep node order), merged within
/// `MERGE_EPS·|I|` and renormalized, so the output does not depend on whether
/// nodes ran in parallel.
pub fn apply_family(
    family: &AdmissibleFamily,
    p: &Measure,
    disc: &Discretization,
) -> Result<Measure> {
    let hull = p.gamma();
    if !family.domain().contains_interval(&hull) {
        return Err(Error::DomainMismatch(format!(
            "support hull {hull} not inside family domain {}",
            family.domain()
        )));
    }
    let counts = disc.allocate(family)?;
    let mut jobs = Vec::with_capacity(disc.nodes());
    for (i, (piece, &c)) in family.pieces().iter().zip(&counts).enumerate() {
        let (a, b) = piece.span;
        if piece.rule.is_constant() {
            jobs.push(Job::Piece {
                piece: i,
                weight: b - a,
            });
        } else {
            let w = (b - a) / c as f64;
            for j in 0..c {
                jobs.push(Job::Node {
                    piece: i,
                    x: a + (b - a) * ((j as f64 + 0.5) / c as f64),
                    weight: w,
                });
            }
        }
    }

    let eval = |job: &Job| -> Result<(f64, f64)> {
        let (piece, x, weight) = match *job {
            Job::Piece { piece, weight } => {
                let s = family.pieces()[piece].span;
                (piece, s.0 + 0.5 * (s.1 - s.0), weight)
            }
            Job::Node { piece, x, weight } => (piece, x, weight),
        };
        let g = Generator::new(family.pieces()[piece].rule.kind_at(x), family.domain())?;
        let k = Kernel::new(&g)?;
        let (value, _) = kernel::mean_of_atoms(&k, p.points(), p.weights())?;
        Ok((value, weight))
    };
    let results: Vec<Result<(f64, f64)>> = if disc.is_parallel() && jobs.len() > 1 {
        jobs.par_iter().map(eval).collect()
    } else {
        jobs.iter().map(eval).collect()
    };
    let mut atoms = results.into_iter().collect::<Result<Vec<_>>>()?;
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let eps = MERGE_EPS * family.domain().width();
    let out = Measure::merge_sorted(&atoms, eps, p.domain());
    if !hull.contains_interval(&out.gamma()) {
        return Err(Error::InvariantViolation(format!(
            "A_F(P) hull {} escapes {hull}",
            out.gamma()
        )));
    }
    Ok(out)
}

/// `A_F^n(P)`; `n = 0` returns `P` unchanged.
pub fn iterate_family(
    family: &AdmissibleFamily,
    p: &Measure,
    disc: &Discretization,
    n: usize,
) -> Result<Measure> {
    let mut m = p.clone();
    for _ in 0..n {
        m = apply_family(family, &m, disc)?;
    }
    Ok(m)
}
