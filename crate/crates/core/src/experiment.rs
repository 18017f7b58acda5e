//! JSON-driven experiments behind the `invmean` binary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::catalog;
use crate::error::Error;
use crate::family::{AdmissibleFamily, Discretization};
use crate::generators::{Generator, GeneratorKind};
use crate::invariance::{self, InvariantResult, IterationOptions, Status};
use crate::measure::{Interval, Measure};
use crate::separation::{self, SeparationCurve, SeparationOptions};

pub const DEFAULT_NODES: usize = 64;
pub const CURVE_SAMPLES: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    /// Malformed or inconsistent spec; the message names the field.
    #[error("{0}")]
    Spec(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Library(#[from] Error),
}

pub type ExperimentResult<T> = std::result::Result<T, ExperimentError>;

fn spec_err(field: &str, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Spec(format!("{field}: {e}"))
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub trace: Option<PathBuf>,
    pub result: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub family: AdmissibleFamily,
    pub measure: Measure,
    #[serde(default = "default_nodes", alias = "discretization")]
    pub nodes: usize,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub probes: Vec<GeneratorKind>,
    #[serde(default)]
    pub outputs: Outputs,
}

fn default_nodes() -> usize {
    DEFAULT_NODES
}

fn read(path: &Path) -> ExperimentResult<String> {
    fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> ExperimentResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> ExperimentResult<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| spec_err("spec", e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> ExperimentResult<Self> {
        Self::from_json(&read(path)?)
    }

    fn validate(&self) -> ExperimentResult<()> {
        if self.nodes == 0 {
            return Err(spec_err("nodes", "must be at least 1"));
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(spec_err("tol", format!("must be positive, got {tol}")));
            }
        }
        if self.max_iter == Some(0) {
            return Err(spec_err("max_iter", "must be at least 1"));
        }
        if !self
            .family
            .domain()
            .contains_interval(&self.measure.gamma())
        {
            return Err(spec_err(
                "measure",
                format!(
                    "support hull {} not inside family domain {}",
                    self.measure.gamma(),
                    self.family.domain()
                ),
            ));
        }
        for (i, k) in self.probes.iter().enumerate() {
            Generator::new(k.clone(), self.family.domain())
                .map_err(|e| spec_err(&format!("probes[{i}]"), e))?;
        }
        Ok(())
    }
}

/// Command-line values that take precedence over the spec.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub nodes: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    /// Directory for outputs; defaults to the spec's directory.
    pub out: Option<PathBuf>,
    pub parallel: bool,
}

#[derive(Debug, Clone)]
pub struct IterateOutcome {
    pub result: InvariantResult,
    pub trace_path: PathBuf,
    pub result_path: PathBuf,
}

impl IterateOutcome {
    /// `K=<value> gap=<gap> status=<status>`.
    pub fn summary(&self) -> String {
        format!(
            "K={:.16e} gap={:.16e} status={}",
            self.result.k_value, self.result.gap, self.result.status
        )
    }

    /// 0 on convergence, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.result.status {
            Status::Converged => 0,
            Status::MaxIterations | Status::Stalled => 2,
        }
    }
}

/// Runs an iteration spec and writes its trace CSV and result JSON.
pub fn run_iterate(spec_path: &Path, ov: &Overrides) -> ExperimentResult<IterateOutcome> {
    let spec = ExperimentSpec::load(spec_path)?;
    let nodes = ov.nodes.unwrap_or(spec.nodes);
    let disc = Discretization::new(nodes)
        .map_err(|e| spec_err("nodes", e))?
        .parallel(ov.parallel);
    let mut opts = IterationOptions::default();
    opts.tol = ov.tol.or(spec.tol);
    if let Some(n) = ov.max_iter.or(spec.max_iter) {
        opts.max_iter = n;
    }
    let (report, trace) =
        invariance::probe_convergence(&spec.family, &spec.measure, &disc, &spec.probes, &opts)?;

    let base = match &ov.out {
        Some(dir) => dir.clone(),
        None => spec_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
    };
    let trace_path = base.join(spec.outputs.trace.unwrap_or_else(|| "trace.csv".into()));
    let result_path = base.join(spec.outputs.result.unwrap_or_else(|| "result.json".into()));
    write(&trace_path, &trace.to_csv_string())?;
    let json = serde_json::to_string_pretty(&report.result).expect("result serializes");
    write(&result_path, &(json + "\n"))?;
    Ok(IterateOutcome {
        result: report.result,
        trace_path,
        result_path,
    })
}

/// Generator set for a separation run: an explicit list on a domain, or the
/// pieces of a piecewise-constant family.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationSpec {
    pub domain: Option<Interval>,
    pub generators: Option<Vec<GeneratorKind>>,
    pub family: Option<AdmissibleFamily>,
    /// `[t_min, t_max]`; defaults to `(0, |I|]`.
    pub t_range: Option<(f64, f64)>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_refine")]
    pub refine: bool,
    pub output: Option<PathBuf>,
}

fn default_grid() -> usize {
    64
}

fn default_refine() -> bool {
    true
}

impl SeparationSpec {
    pub fn from_json(text: &str) -> ExperimentResult<Self> {
        serde_json::from_str(text).map_err(|e| spec_err("spec", e))
    }

    /// The generator set and its common domain.
    pub fn generator_set(&self) -> ExperimentResult<Vec<Generator>> {
        let (domain, kinds) = match (&self.generators, &self.family) {
            (Some(_), Some(_)) => {
                return Err(spec_err(
                    "generators",
                    "give either generators or family, not both",
                ))
            }
            (Some(kinds), None) => {
                let domain = self
                    .domain
                    .ok_or_else(|| spec_err("domain", "required together with generators"))?;
                (domain, kinds.clone())
            }
            (None, Some(family)) => {
                if self.domain.is_some_and(|d| d != family.domain()) {
                    return Err(spec_err("domain", "differs from the family domain"));
                }
                let kinds = family.constant_kinds().ok_or_else(|| {
                    spec_err(
                        "family",
                        "only piecewise-constant families give a finite set",
                    )
                })?;
                (family.domain(), kinds)
            }
            (None, None) => return Err(spec_err("generators", "missing (or give family)")),
        };
        if kinds.is_empty() {
            return Err(spec_err("generators", "empty list"));
        }
        kinds
            .into_iter()
            .enumerate()
            .map(|(i, k)| {
                Generator::new(k, domain).map_err(|e| spec_err(&format!("generators[{i}]"), e))
            })
            .collect()
    }

    /// [`CURVE_SAMPLES`] evenly spaced values of `t`.
    pub fn t_grid(&self, width: f64) -> ExperimentResult<Vec<f64>> {
        match self.t_range {
            None => Ok(separation::even_t_grid(width, CURVE_SAMPLES)),
            Some((a, b)) => {
                if !(a > 0.0 && a < b && b <= width) {
                    return Err(spec_err(
                        "t_range",
                        format!("need 0 < t_min < t_max <= {width}, got [{a}, {b}]"),
                    ));
                }
                let n = CURVE_SAMPLES - 1;
                Ok((0..=n)
                    .map(|k| {
                        if k == n {
                            b
                        } else {
                            a + (b - a) * (k as f64 / n as f64)
                        }
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeparationOutcome {
    pub curve: SeparationCurve,
    pub path: PathBuf,
}

/// Writes the `t,d` contraction curve of a separation spec.
pub fn run_separation(spec_path: &Path, out: Option<&Path>) -> ExperimentResult<SeparationOutcome> {
    let spec = SeparationSpec::from_json(&read(spec_path)?)?;
    if spec.grid < 2 {
        return Err(spec_err("grid", "must be at least 2"));
    }
    let set = spec.generator_set()?;
    let t_grid = spec.t_grid(set[0].domain().width())?;
    let opts = SeparationOptions {
        grid: spec.grid,
        refine: spec.refine,
    };
    let curve = separation::contraction_curve(&set, &t_grid, &opts)?;
    let base = match out {
        Some(dir) => dir.to_path_buf(),
        None => spec_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
    };
    let path = base.join(spec.output.unwrap_or_else(|| "separation.csv".into()));
    write(&path, &curve.to_csv_string())?;
    Ok(SeparationOutcome { curve, path })
}

/// Gauss's iteration `a ← (a+b)/2, b ← √(ab)` run to a fixed point.
pub fn gauss_agm(a: f64, b: f64) -> f64 {
    let (mut a, mut b) = (a, b);
    for _ in 0..100 {
        let (na, nb) = (0.5 * (a + b), (a * b).sqrt());
        if (na == a && nb == b) || na == nb {
            return na;
        }
        a = na;
        b = nb;
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, Copy)]
pub struct DemoOutcome {
    pub k_value: f64,
    /// Gauss AGM, or `√(ab)` for the harmonic variant.
    pub reference: f64,
    pub result: InvariantResult,
}

/// Invariant mean of `½(δ_a + δ_b)` under the arithmetic-geometric (or
/// arithmetic-harmonic) family, next to its closed-form value.
pub fn demo_agm(
    a: f64,
    b: f64,
    harmonic: bool,
    disc: &Discretization,
) -> ExperimentResult<DemoOutcome> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(spec_err("a", format!("must be positive, got {a}")));
    }
    if !(b >= a && b.is_finite()) {
        return Err(spec_err(
            "b",
            format!("must satisfy a <= b, got a = {a}, b = {b}"),
        ));
    }
    // A family needs a domain with interior; for a = b any interval around a does.
    let hi = if b > a { b } else { 2.0 * a };
    let family = if harmonic {
        catalog::arithmetic_harmonic(a, hi)?
    } else {
        catalog::arithmetic_geometric(a, hi)?
    };
    let p = Measure::uniform_atoms(&[a, b], family.domain())?;
    let (result, _) =
        invariance::compute_invariant(&family, &p, disc, &IterationOptions::default())?;
    let reference = if harmonic {
        (a * b).sqrt()
    } else {
        gauss_agm(a, b)
    };
    Ok(DemoOutcome {
        k_value: result.k_value,
        reference,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const AGM_SPEC: &str = r#"{
        "family": {"domain": [1, 2], "pieces": [
            {"span": [0, 0.5], "gen": {"kind": "power", "p": 1}},
            {"span": [0.5, 1], "gen": {"kind": "power", "p": 0}}]},
        "measure": {"domain": [1, 2], "atoms": [[1, 0.5], [2, 0.5]]},
        "nodes": 2
    }"#;

    #[test]
    fn spec_parses_with_defaults() {
        let spec = ExperimentSpec::from_json(AGM_SPEC).unwrap();
        assert_eq!(spec.nodes, 2);
        assert!(spec.probes.is_empty() && spec.tol.is_none());
    }

    #[test]
    fn spec_errors_name_the_field() {
        let bad = AGM_SPEC.replace("[2, 0.5]", "[2, 0.4]");
        let msg = ExperimentSpec::from_json(&bad).unwrap_err().to_string();
        assert!(msg.contains("atoms"), "{msg}");

        let bad = AGM_SPEC.replace("\"nodes\": 2", "\"nodes\": 2, \"seed\": 1");
        let msg = ExperimentSpec::from_json(&bad).unwrap_err().to_string();
        assert!(msg.contains("seed"), "{msg}");

        let bad = AGM_SPEC.replace("\"nodes\": 2", "\"nodes\": 2, \"tol\": -1");
        let msg = ExperimentSpec::from_json(&bad).unwrap_err().to_string();
        assert!(msg.starts_with("tol"), "{msg}");

        let bad = AGM_SPEC
            .replace("[[1, 0.5], [2, 0.5]]", "[[1, 0.5], [3, 0.5]]")
            .replace(
                "\"domain\": [1, 2], \"atoms\"",
                "\"domain\": [1, 3], \"atoms\"",
            );
        let msg = ExperimentSpec::from_json(&bad).unwrap_err().to_string();
        assert!(msg.starts_with("measure"), "{msg}");
    }

    #[test]
    fn gauss_agm_oracle() {
        assert!((gauss_agm(1.0, 2.0) - 1.4567910310469068).abs() < 1e-15);
        assert_eq!(gauss_agm(3.0, 3.0), 3.0);
    }

    #[test]
    fn demo_examples() {
        let d = Discretization::new(2).unwrap();
        let r = demo_agm(1.0, 2.0, false, &d).unwrap();
        assert!((r.k_value - r.reference).abs() < 1e-9);
        assert_eq!(demo_agm(3.0, 3.0, false, &d).unwrap().k_value, 3.0);
        assert!((demo_agm(1.0, 4.0, true, &d).unwrap().k_value - 2.0).abs() < 1e-9);
        assert!(demo_agm(0.0, 1.0, false, &d).is_err());
        assert!(demo_agm(2.0, 1.0, false, &d).is_err());
    }

    #[test]
    fn separation_spec_sets() {
        let s = SeparationSpec::from_json(
            r#"{"domain":[1,2],"generators":[{"kind":"power","p":1},{"kind":"log"}],"grid":8}"#,
        )
        .unwrap();
        assert_eq!(s.generator_set().unwrap().len(), 2);
        let t = s.t_grid(1.0).unwrap();
        assert_eq!((t.len(), t[99]), (100, 1.0));

        let s = SeparationSpec::from_json(
            r#"{"family":{"domain":[1,2],"pieces":[{"span":[0,1],"gen":{"kind":"power-sweep","p_of_x":{"type":"affine","a":1,"b":0}}}]}}"#,
        )
        .unwrap();
        assert!(s
            .generator_set()
            .unwrap_err()
            .to_string()
            .starts_with("family"));
        assert!(SeparationSpec::from_json(r#"{"grid":8,"extra":1}"#).is_err());
    }
}
