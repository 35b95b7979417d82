//! Experiment configuration files: one JSON document per run.

use std::path::Path;

use corrdyn::model::{Cplx, ModelSpec};
use corrdyn::InitialState;
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub initial: Initial,
    pub times: Option<TimeGrid>,
    #[serde(default)]
    pub observables: Vec<Observable>,
    pub method: Option<String>,
    pub max_order: Option<usize>,
    pub parity: Option<String>,
    pub fcs: Option<FcsSpec>,
    pub cov_study: Option<CovStudySpec>,
    /// Free-form description; ignored by the runner.
    #[serde(default)]
    #[allow(dead_code)]
    pub description: String,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Initial {
    #[default]
    Vacuum,
    Full,
    Ghz,
    Gaussian(Vec<Vec<Cplx>>),
}

impl Initial {
    pub fn to_state(&self, l: usize) -> Result<InitialState, CliError> {
        Ok(match self {
            Initial::Vacuum => InitialState::Vacuum,
            Initial::Full => InitialState::FullyFilled,
            Initial::Ghz => InitialState::Ghz,
            Initial::Gaussian(rows) => {
                let n = 2 * l;
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(CliError::config(format!("gaussian T2 must be {n}x{n}")));
                }
                InitialState::GaussianCovariance(corrdyn::CMat::from_fn(n, n, |i, j| rows[i][j].into()))
            }
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum TimeGrid {
    List(Vec<f64>),
    Linspace { start: f64, stop: f64, count: usize },
}

impl TimeGrid {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        let pts = match self {
            TimeGrid::List(v) => v.clone(),
            TimeGrid::Linspace { start, stop, count } => match *count {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..n).map(|k| start + (stop - start) * k as f64 / (n - 1) as f64).collect(),
            },
        };
        if pts.is_empty() {
            return Err(CliError::config("time grid is empty"));
        }
        if pts.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(CliError::config("times must be finite and non-negative"));
        }
        Ok(pts)
    }
}

/// A scalar observable. Sites are 1-based; `corr` takes 0-based Majorana
/// labels.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observable {
    pub name: String,
    pub kind: ObservableKind,
    #[serde(default)]
    pub sites: Vec<usize>,
    #[serde(default)]
    pub labels: Vec<usize>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    N,
    Nn,
    Cov,
    Corr,
    /// ⟨n_a n_b⟩ with the quartic part replaced by its Wick factorization.
    NnWick,
    /// Cov(n_a, n_b) from the Wick factorization; zero for Gaussian states.
    CovWick,
}

impl ObservableKind {
    pub fn is_wick(self) -> bool {
        matches!(self, ObservableKind::NnWick | ObservableKind::CovWick)
    }
}

impl Observable {
    /// Checks site ranges and arity; returns 0-based sites.
    pub fn resolve(&self, l: usize) -> Result<Vec<usize>, CliError> {
        let want = match self.kind {
            ObservableKind::N => Some(1),
            ObservableKind::Nn | ObservableKind::Cov | ObservableKind::NnWick | ObservableKind::CovWick => Some(2),
            ObservableKind::Corr => None,
        };
        if let Some(k) = want {
            if self.sites.len() != k {
                return Err(CliError::config(format!("observable '{}' needs {k} sites", self.name)));
            }
            if self.sites.iter().any(|&s| s == 0 || s > l) {
                return Err(CliError::config(format!("observable '{}' has a site outside 1..={l}", self.name)));
            }
            if k == 2 && self.sites[0] == self.sites[1] {
                return Err(CliError::config(format!("observable '{}' needs distinct sites", self.name)));
            }
            return Ok(self.sites.iter().map(|s| s - 1).collect());
        }
        if self.labels.is_empty() || !self.labels.len().is_multiple_of(2) || self.labels.len() > 4 {
            return Err(CliError::config(format!("observable '{}' needs 2 or 4 labels", self.name)));
        }
        if self.labels.iter().any(|&p| p >= 2 * l) {
            return Err(CliError::config(format!("observable '{}' has a label outside 0..{}", self.name, 2 * l)));
        }
        Ok(self.labels.clone())
    }

    pub fn default_set(l: usize) -> Vec<Observable> {
        let ob = |name: &str, kind, sites: Vec<usize>| Observable {
            name: name.into(),
            kind,
            sites,
            labels: Vec::new(),
        };
        let mut v = vec![ob("n1", ObservableKind::N, vec![1])];
        if l > 1 {
            v.push(ob("nL", ObservableKind::N, vec![l]));
            v.push(ob("n1nL", ObservableKind::Nn, vec![1, l]));
            v.push(ob("cov1L", ObservableKind::Cov, vec![1, l]));
        }
        v
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcsSpec {
    /// 1-based sites; defaults to the left half of the chain.
    pub sites: Option<Vec<usize>>,
    /// Counting parameter c in exp(c Σ n_j); defaults to 2/L.
    pub coef: Option<f64>,
    /// Evaluation time; the steady state when absent.
    pub time: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovStudySpec {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "J")]
    pub j: f64,
    /// A rate, or "mean" for γ_t = (γ_l + γ_g)/2 at every point.
    pub gamma_t: GammaT,
    /// Mean linear rate for a δ sweep: γ_l = a(1+δ), γ_g = a(1−δ).
    pub a: Option<f64>,
    pub deltas: Option<Vec<f64>>,
    /// Axes of a full γ_l × γ_g grid; γ_g varies fastest.
    pub gamma_l: Option<Vec<f64>>,
    pub gamma_g: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum GammaT {
    Rate(f64),
    Rule(String),
}

/// One point of a covariance sweep.
pub struct SweepPoint {
    pub delta: Option<f64>,
    pub rates: [f64; 3],
}

impl CovStudySpec {
    pub fn points(&self) -> Result<Vec<SweepPoint>, CliError> {
        let gt = |gl: f64, gg: f64| match &self.gamma_t {
            GammaT::Rate(x) => Ok(*x),
            GammaT::Rule(s) if s == "mean" => Ok(0.5 * (gl + gg)),
            GammaT::Rule(s) => Err(CliError::config(format!("gamma_t must be a number or \"mean\", got '{s}'"))),
        };
        let pts: Vec<SweepPoint> = match (&self.a, &self.deltas, &self.gamma_l, &self.gamma_g) {
            (Some(a), Some(ds), None, None) => ds
                .iter()
                .map(|&d| {
                    let (gl, gg) = (a * (1.0 + d), a * (1.0 - d));
                    Ok(SweepPoint { delta: Some(d), rates: [gl, gg, gt(gl, gg)?] })
                })
                .collect::<Result<_, CliError>>()?,
            (None, None, Some(ls), Some(gs)) => {
                let mut v = Vec::with_capacity(ls.len() * gs.len());
                for &gl in ls {
                    for &gg in gs {
                        v.push(SweepPoint { delta: None, rates: [gl, gg, gt(gl, gg)?] });
                    }
                }
                v
            }
            _ => return Err(CliError::config("cov_study needs either a and deltas, or gamma_l and gamma_g")),
        };
        if pts.is_empty() {
            return Err(CliError::config("cov_study grid is empty"));
        }
        Ok(pts)
    }
}

/// Reads a config. A top-level `cases` array expands it into one run per
/// case: each entry carries a `name` and is applied to the rest of the
/// document as a JSON merge patch.
pub fn load(path: &Path) -> Result<Vec<(Option<String>, Config)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let bad = |e: serde_json::Error| CliError::config(format!("{}: {e}", path.display()));
    let mut doc: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
    let cases = match doc.as_object_mut().and_then(|o| o.remove("cases")) {
        None => return Ok(vec![(None, serde_json::from_value(doc).map_err(bad)?)]),
        Some(serde_json::Value::Array(v)) if !v.is_empty() => v,
        Some(_) => return Err(CliError::config("cases must be a non-empty array")),
    };
    let mut out = Vec::with_capacity(cases.len());
    for mut case in cases {
        let name = match case.as_object_mut().and_then(|o| o.remove("name")) {
            Some(serde_json::Value::String(s)) if !s.is_empty() && !s.contains([',', '\n']) => s,
            _ => return Err(CliError::config("every case needs a plain string name")),
        };
        let mut merged = doc.clone();
        json_patch::merge(&mut merged, &case);
        let cfg = serde_json::from_value(merged).map_err(|e| CliError::config(format!("case '{name}': {e}")))?;
        out.push((Some(name), cfg));
    }
    Ok(out)
}
