//! Experiment configuration, defaults and dot-path overrides.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::erm::{FitOptions, LossSpec, Method};
use crate::error::{Error, Result};
use crate::hermite::ActivationSpec;
use crate::models::{ChaosCoordinate, LinkSpec, ModelKind, OutputMap, TargetSpec};
use crate::seed::child_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Lossgrid,
    Marginal,
    Boundary,
    Phase,
    Descent,
    Diagnose,
    Selftest,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Lossgrid,
        ExperimentKind::Marginal,
        ExperimentKind::Boundary,
        ExperimentKind::Phase,
        ExperimentKind::Descent,
        ExperimentKind::Diagnose,
        ExperimentKind::Selftest,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Lossgrid => "lossgrid",
            ExperimentKind::Marginal => "marginal",
            ExperimentKind::Boundary => "boundary",
            ExperimentKind::Phase => "phase",
            ExperimentKind::Descent => "descent",
            ExperimentKind::Diagnose => "diagnose",
            ExperimentKind::Selftest => "selftest",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// One `Σ weight·ξ_order` term of a random-polynomial response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub order: usize,
    pub weight: f64,
}

/// How the response is generated from `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseKind {
    /// `Σ_k c_k He_k(⟨u, x⟩)`.
    SingleIndex { coeffs: Vec<f64> },
    /// `offset + Σ weight·⟨β_k, h_k(x)⟩` with each `β_k` uniform on the
    /// sphere, redrawn per trial.
    RandomPoly { offset: f64, terms: Vec<PolyTerm> },
    Custom { target: TargetSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ResponseKind,
    /// Output map used when the labels must be binary.
    #[serde(default = "default_binary_output")]
    pub binary_output: OutputMap,
}

fn default_binary_output() -> OutputMap {
    OutputMap::Sign
}

impl ResponseSpec {
    pub fn single_index(name: &str, coeffs: Vec<f64>) -> Self {
        ResponseSpec {
            name: name.into(),
            kind: ResponseKind::SingleIndex { coeffs },
            binary_output: OutputMap::Sign,
        }
    }

    pub fn random_poly(name: &str, offset: f64, terms: &[(usize, f64)]) -> Self {
        ResponseSpec {
            name: name.into(),
            kind: ResponseKind::RandomPoly {
                offset,
                terms: terms
                    .iter()
                    .map(|&(order, weight)| PolyTerm { order, weight })
                    .collect(),
            },
            binary_output: OutputMap::Sign,
        }
    }

    pub fn with_binary_output(mut self, output: OutputMap) -> Self {
        self.binary_output = output;
        self
    }

    /// Target for one trial; `binary` selects [`Self::binary_output`].
    pub fn target(&self, trial_seed: u64, binary: bool) -> TargetSpec {
        let output = if binary {
            self.binary_output
        } else {
            OutputMap::Identity
        };
        match &self.kind {
            ResponseKind::SingleIndex { coeffs } => TargetSpec::single_index(coeffs.clone(), output),
            ResponseKind::RandomPoly { offset, terms } => TargetSpec {
                s: 0,
                higher: terms
                    .iter()
                    .map(|t| ChaosCoordinate::sphere(t.order, child_seed(trial_seed, "beta", t.order as u64)))
                    .collect(),
                link: LinkSpec::identity_sum(*offset, terms.iter().map(|t| t.weight).collect())
                    .with_output(output),
                noise: Default::default(),
            },
            ResponseKind::Custom { target } => {
                let mut t = target.clone();
                if binary && !t.link.is_binary() {
                    t.link.output = output;
                }
                t
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            ResponseKind::SingleIndex { coeffs } if coeffs.is_empty() => {
                Err(Error::Config(format!("response `{}` has no coefficients", self.name)))
            }
            ResponseKind::RandomPoly { terms, .. } if terms.iter().any(|t| t.order < 2) => Err(
                Error::Config(format!("response `{}`: random-poly orders must be ≥ 2", self.name)),
            ),
            ResponseKind::Custom { target } => target.validate(),
            _ => Ok(()),
        }
    }
}

/// A (train loss, test loss) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossCell {
    pub train: LossSpec,
    pub test: LossSpec,
}

impl LossCell {
    pub fn new(train: LossSpec, test: LossSpec) -> Self {
        LossCell { train, test }
    }

    /// Whether the cell needs `±1` labels.
    pub fn is_classification(&self) -> bool {
        matches!(self.train, LossSpec::Logistic | LossSpec::SmoothedHinge { .. })
            || matches!(self.test, LossSpec::Logistic | LossSpec::SmoothedHinge { .. } | LossSpec::ZeroOne)
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.train.name(), self.test.name())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Lbfgs,
            tol: 1e-6,
            max_iter: 20_000,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> FitOptions {
        FitOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            method: self.method,
            trace: false,
        }
    }
}

/// Second sweep axis of the phase diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseAxis {
    /// Logistic label scale `s_*`.
    SStar,
    /// Constant Hermite coefficient `μ_{*,0}`.
    Mu0,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondAxis {
    pub param: PhaseAxis,
    pub values: Vec<f64>,
}

/// Which size is swept by the descent runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentSweep {
    /// `p/n` over `psi_grid` at `n = n_ratio·d²`.
    P,
    /// `n/d²` over `n_grid` at `p = p_ratios[0]·d²`.
    N,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    /// Coordinates of the square `(x₁, x₂)` grid.
    pub grid: Vec<f64>,
    /// Values of `t = (x₁ + x₂)/√2` on the diagonal `x₂ = x₁`.
    pub line: Vec<f64>,
    /// Draws of the remaining coordinates per point.
    pub n_mc: usize,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        BoundaryConfig {
            grid: linspace(-3.0, 3.0, 25),
            line: linspace(-3.0, 3.0, 61),
            n_mc: 200,
        }
    }
}

/// Caps used by the diagnose suite.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub p_cap: usize,
    pub gram_tol: f64,
    pub v2c_cap: f64,
    pub k3_cap: f64,
    pub k5_cap: f64,
    pub n_mc: usize,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        DiagnoseConfig {
            p_cap: crate::spectra::DEFAULT_P_CAP,
            gram_tol: 1e-10,
            v2c_cap: 5.0,
            k3_cap: 2.0,
            k5_cap: 1.0,
            n_mc: 100_000,
        }
    }
}

/// `n` evenly spaced points on `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub d: usize,
    /// `n/d²`.
    pub n_ratio: f64,
    /// `p/d²` values.
    pub p_ratios: Vec<f64>,
    /// `p/n` values.
    pub psi_grid: Vec<f64>,
    /// `n/d²` values for the `n` sweep.
    pub n_grid: Vec<f64>,
    pub sweep: DescentSweep,
    pub second_axis: Option<SecondAxis>,
    pub activation: ActivationSpec,
    pub responses: Vec<ResponseSpec>,
    pub cells: Vec<LossCell>,
    pub models: Vec<ModelKind>,
    pub lambda: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub n_test: usize,
    pub solver: SolverConfig,
    /// Iteration budget of the interpolation check.
    pub interp_max_iter: usize,
    pub boundary: BoundaryConfig,
    pub diagnose: DiagnoseConfig,
    /// Histogram bins for the marginal runner.
    pub bins: usize,
    pub out: Option<String>,
}

impl ExperimentConfig {
    /// Per-experiment defaults.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut c = ExperimentConfig {
            experiment: kind,
            d: 50,
            n_ratio: 0.5,
            p_ratios: vec![1.0],
            psi_grid: vec![0.25, 0.5, 1.0, 2.0],
            n_grid: vec![0.25, 0.5, 0.75, 1.0, 1.5, 2.0],
            sweep: DescentSweep::P,
            second_axis: None,
            activation: ActivationSpec::relu(),
            responses: vec![
                ResponseSpec::single_index("y_SI", vec![1.0, 0.0, 2.0, 1.0]),
                ResponseSpec::random_poly("y_R", 1.0, &[(2, 2.0), (3, 1.0)]),
            ],
            cells: vec![
                LossCell::new(LossSpec::Squared, LossSpec::Squared),
                LossCell::new(LossSpec::Squared, LossSpec::ZeroOne),
                LossCell::new(LossSpec::hinge(), LossSpec::Squared),
                LossCell::new(LossSpec::hinge(), LossSpec::ZeroOne),
            ],
            models: vec![ModelKind::Rf, ModelKind::Ge, ModelKind::Cge],
            lambda: 1e-3,
            trials: 10,
            master_seed: 2025,
            n_test: 5000,
            solver: SolverConfig::default(),
            interp_max_iter: 50_000,
            boundary: BoundaryConfig::default(),
            diagnose: DiagnoseConfig::default(),
            bins: 64,
            out: None,
        };
        let f_star_coeffs = vec![2.0, 1.0, 2.0, 0.6];
        match kind {
            ExperimentKind::Lossgrid => {}
            ExperimentKind::Marginal => {
                c.n_ratio = 1.0;
                c.p_ratios = vec![0.5];
                c.activation = ActivationSpec::square();
                c.responses = vec![
                    ResponseSpec::single_index("y_SI", vec![0.0, 0.0, 1.0]),
                    ResponseSpec::random_poly("y_R", 0.0, &[(2, 1.0)]),
                ];
                c.cells = vec![LossCell::new(LossSpec::Squared, LossSpec::Squared)];
                c.trials = 1;
                c.n_test = 20_000;
            }
            ExperimentKind::Boundary => {
                c.d = 30;
                c.n_ratio = 2.5;
                c.p_ratios = vec![0.25, 1.5];
                c.responses = vec![ResponseSpec::single_index("y_He2", vec![0.0, 0.0, 1.0])];
                c.cells = vec![LossCell::new(LossSpec::Logistic, LossSpec::ZeroOne)];
                c.models = vec![ModelKind::Rf];
                c.trials = 1;
            }
            ExperimentKind::Phase => {
                c.n_ratio = 0.45;
                c.psi_grid = vec![0.2, 0.35, 0.5, 0.65, 0.8, 1.0, 1.5, 2.0];
                c.second_axis = Some(SecondAxis {
                    param: PhaseAxis::SStar,
                    values: vec![0.0, 1.0, 2.0, 4.0, 8.0],
                });
                c.responses = vec![ResponseSpec::single_index("f_star", f_star_coeffs)
                    .with_binary_output(OutputMap::Logistic { scale: 1.0 })];
                c.cells = vec![LossCell::new(LossSpec::Logistic, LossSpec::ZeroOne)];
                c.models = vec![ModelKind::Rf];
                c.trials = 60;
            }
            ExperimentKind::Descent => {
                c.d = 40;
                c.n_ratio = 0.75;
                c.p_ratios = vec![1.0];
                c.psi_grid = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.85, 1.0, 1.5, 2.0, 3.0];
                c.lambda = 1e-4;
                c.responses = vec![ResponseSpec::single_index("f_star", f_star_coeffs)
                    .with_binary_output(OutputMap::Logistic { scale: 4.0 })];
                c.cells = vec![LossCell::new(LossSpec::Logistic, LossSpec::Logistic)];
                c.models = vec![ModelKind::Rf];
                c.trials = 10;
            }
            ExperimentKind::Diagnose => {
                c.d = 40;
                c.p_ratios = vec![0.25, 0.5];
                c.trials = 1;
            }
            ExperimentKind::Selftest => {
                c.trials = 1;
            }
        }
        c
    }

    /// Defaults for `kind` overlaid with a JSON document.
    pub fn from_json(kind: ExperimentKind, overlay: &Value) -> Result<Self> {
        let mut base = serde_json::to_value(ExperimentConfig::defaults(kind))?;
        merge(&mut base, overlay);
        base["experiment"] = serde_json::to_value(kind)?;
        let c: ExperimentConfig =
            serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Apply `key=value` overrides; the value is parsed as JSON and falls back
    /// to a string.
    pub fn with_overrides(&self, sets: &[String]) -> Result<Self> {
        let mut v = serde_json::to_value(self)?;
        for s in sets {
            let (key, raw) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
            let val = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
            set_path(&mut v, key, val)?;
        }
        let c: ExperimentConfig =
            serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d == 0 {
            return bad("d must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be ≥ 1".into());
        }
        if !(self.lambda > 0.0) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.n_ratio > 0.0) {
            return bad(format!("n_ratio must be positive, got {}", self.n_ratio));
        }
        for (name, grid) in [
            ("p_ratios", &self.p_ratios),
            ("psi_grid", &self.psi_grid),
            ("n_grid", &self.n_grid),
        ] {
            if grid.is_empty() {
                return bad(format!("{name} must be nonempty"));
            }
            if let Some(v) = grid.iter().find(|v| !(**v > 0.0)) {
                return bad(format!("{name} contains non-positive value {v}"));
            }
        }
        if let Some(ax) = &self.second_axis {
            if ax.values.is_empty() {
                return bad("second_axis.values must be nonempty".into());
            }
        }
        if self.responses.is_empty() {
            return bad("responses must be nonempty".into());
        }
        for r in &self.responses {
            r.validate()?;
        }
        if self.cells.is_empty() {
            return bad("cells must be nonempty".into());
        }
        for c in &self.cells {
            c.train.ensure_trainable()?;
        }
        if self.models.is_empty() {
            return bad("models must be nonempty".into());
        }
        if self.n_test < crate::erm::eval::MIN_TEST {
            return bad(format!("n_test must be ≥ {}", crate::erm::eval::MIN_TEST));
        }
        if self.boundary.grid.is_empty() || self.boundary.line.is_empty() || self.boundary.n_mc == 0 {
            return bad("boundary grid, line and n_mc must be nonempty".into());
        }
        if self.bins == 0 {
            return bad("bins must be positive".into());
        }
        self.activation.validate()?;
        Ok(())
    }

    /// `round(r·d²)`, at least 1.
    pub fn scaled(&self, ratio: f64) -> usize {
        ((ratio * (self.d * self.d) as f64).round() as usize).max(1)
    }

    pub fn n(&self) -> usize {
        self.scaled(self.n_ratio)
    }

    /// First 8 bytes of the SHA-256 of the canonical JSON, ignoring `out`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn merge(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

/// Set `a.b.0.c` inside a JSON value; numeric segments index arrays.
pub fn set_path(root: &mut Value, path: &str, val: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert((*part).to_string(), val);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert(Value::Object(Default::default()))
            }
            Value::Array(arr) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("`{part}` in `{path}` is not an index")))?;
                let len = arr.len();
                let slot = arr.get_mut(idx).ok_or_else(|| {
                    Error::Config(format!("index {idx} out of range (len {len}) in `{path}`"))
                })?;
                if last {
                    *slot = val;
                    return Ok(());
                }
                slot
            }
            Value::Null if !last => {
                *cur = Value::Object(Default::default());
                match cur {
                    Value::Object(map) => map
                        .entry(part.to_string())
                        .or_insert(Value::Object(Default::default())),
                    _ => unreachable!(),
                }
            }
            _ => return Err(Error::Config(format!("cannot descend into `{part}` of `{path}`"))),
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        for kind in ExperimentKind::ALL {
            let c = ExperimentConfig::defaults(kind);
            c.validate().unwrap();
            let v = serde_json::to_value(&c).unwrap();
            let back = ExperimentConfig::from_json(kind, &v).unwrap();
            assert_eq!(back.hash(), c.hash());
        }
    }

    #[test]
    fn overrides_follow_dot_paths() {
        let c = ExperimentConfig::defaults(ExperimentKind::Lossgrid)
            .with_overrides(&[
                "d=12".into(),
                "solver.tol=1e-5".into(),
                "psi_grid.1=0.75".into(),
                "cells.0.train.kind=logistic".into(),
            ])
            .unwrap();
        assert_eq!(c.d, 12);
        assert_eq!(c.solver.tol, 1e-5);
        assert_eq!(c.psi_grid[1], 0.75);
        assert_eq!(c.cells[0].train, LossSpec::Logistic);
        let e = ExperimentConfig::defaults(ExperimentKind::Lossgrid).with_overrides(&["trials=0".into()]);
        assert!(matches!(e, Err(Error::Config(_))));
        assert!(ExperimentConfig::defaults(ExperimentKind::Lossgrid)
            .with_overrides(&["psi_grid=[]".into()])
            .is_err());
    }

    #[test]
    fn partial_overlay_keeps_defaults() {
        let v: Value = serde_json::from_str(r#"{"d": 8, "solver": {"tol": 1e-4}}"#).unwrap();
        let c = ExperimentConfig::from_json(ExperimentKind::Descent, &v).unwrap();
        assert_eq!(c.d, 8);
        assert_eq!(c.solver.tol, 1e-4);
        assert_eq!(c.solver.method, Method::Lbfgs);
        assert_eq!(c.lambda, 1e-4);
    }

    #[test]
    fn hinge_cells_are_classification() {
        assert!(LossCell::new(LossSpec::hinge(), LossSpec::Squared).is_classification());
        assert!(LossCell::new(LossSpec::Squared, LossSpec::ZeroOne).is_classification());
        assert!(!LossCell::new(LossSpec::Squared, LossSpec::Squared).is_classification());
    }
}
