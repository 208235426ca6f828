//! Experiment runners.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{
    DescentSweep, ExperimentConfig, LossCell, PhaseAxis, ResponseKind, ResponseSpec,
};
use super::table::{aggregate, CellKey, Obs, ResultTable};
use crate::erm::eval::{empirical_loss, test_predictions};
use crate::erm::{fit_ridge_erm_with, interpolation_check, test_error, FitResult, LossSpec};
use crate::error::{Error, Result};
use crate::hermite::ActivationSpec;
use crate::models::{
    sample_weights, sign, ModelKind, OutputMap, PreparedTarget, Sampler, TargetSpec, WeightEnsemble,
};
use crate::seed::{child_seed, rng_from_seed};
use crate::stats::{
    excess_kurtosis_se, histogram, ks_distance, mean, skewness_se, variance,
};

/// Table plus free-form diagnostics of one run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: ResultTable,
    pub diagnostics: Value,
    /// `false` only for a failing self-test.
    pub passed: bool,
}

/// Convergence bookkeeping over many fits.
#[derive(Debug, Clone, Default, Serialize)]
pub struct FitStats {
    pub fits: usize,
    pub not_converged: usize,
    pub max_grad_norm: f64,
    pub max_iterations: usize,
}

impl FitStats {
    fn record(&mut self, r: &FitResult) {
        self.fits += 1;
        if !r.converged {
            self.not_converged += 1;
        }
        self.max_grad_norm = self.max_grad_norm.max(r.grad_norm);
        self.max_iterations = self.max_iterations.max(r.iterations);
    }

    fn merge(&mut self, o: &FitStats) {
        self.fits += o.fits;
        self.not_converged += o.not_converged;
        self.max_grad_norm = self.max_grad_norm.max(o.max_grad_norm);
        self.max_iterations = self.max_iterations.max(o.max_iterations);
    }
}

struct TaskOut {
    obs: Vec<Obs>,
    stats: FitStats,
    extra: Vec<Value>,
}

impl TaskOut {
    fn new() -> Self {
        TaskOut {
            obs: Vec::new(),
            stats: FitStats::default(),
            extra: Vec::new(),
        }
    }
}

fn run_tasks<T: Sync>(
    cfg: &ExperimentConfig,
    tasks: &[T],
    f: impl Fn(&T) -> Result<TaskOut> + Sync + Send,
) -> Result<(ResultTable, FitStats, Vec<Value>)> {
    let outs: Vec<TaskOut> = tasks.par_iter().map(f).collect::<Result<_>>()?;
    let mut stats = FitStats::default();
    let mut extra = Vec::new();
    let mut obs = Vec::new();
    for o in outs {
        stats.merge(&o.stats);
        extra.extend(o.extra);
        obs.extend(o.obs);
    }
    let mut table = ResultTable::new(cfg);
    aggregate(cfg.experiment.name(), &mut table, obs);
    Ok((table, stats, extra))
}

fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    child_seed(cfg.master_seed, "trial", trial as u64)
}

fn key(
    group: &str,
    model: &str,
    x_name: &'static str,
    x: f64,
    y_name: &'static str,
    y: Option<f64>,
    metric: &'static str,
) -> CellKey {
    CellKey {
        group: group.into(),
        model: model.into(),
        x_name,
        x,
        y_name,
        y,
        metric,
    }
}

/// Targets for one trial: the single-index form for RF/PGE/CGE and the
/// chaos-expanded form for GE.
struct Targets {
    direct: Arc<PreparedTarget>,
    expanded: Arc<PreparedTarget>,
}

impl Targets {
    fn new(t: &TargetSpec, d: usize) -> Result<Self> {
        let direct = Arc::new(t.prepare(d)?);
        let expanded = Arc::new(t.chaos_expanded().prepare(d)?);
        Ok(Targets { direct, expanded })
    }

    fn sampler(
        &self,
        kind: ModelKind,
        we: &Arc<WeightEnsemble>,
        sigma: &ActivationSpec,
    ) -> Result<Sampler> {
        let t = match kind {
            ModelKind::Ge => self.expanded.clone(),
            _ => self.direct.clone(),
        };
        Sampler::with_prepared(kind, we.clone(), t, sigma.clone())
    }
}

fn fit(cfg: &ExperimentConfig, batch: &crate::SampleBatch, loss: LossSpec) -> Result<FitResult> {
    fit_ridge_erm_with(batch, loss, cfg.lambda, &cfg.solver.options())
}

/// Test errors on RF/GE/CGE (or the configured models) for every
/// response and loss cell over a `p/n` grid.
pub fn run_lossgrid(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let d = cfg.d;
    let n = cfg.n();
    let tasks: Vec<(usize, usize)> = (0..cfg.psi_grid.len())
        .flat_map(|g| (0..cfg.trials).map(move |t| (g, t)))
        .collect();
    let (table, stats, _) = run_tasks(cfg, &tasks, |&(g, trial)| {
        let psi = cfg.psi_grid[g];
        let ts = trial_seed(cfg, trial);
        let p = ((psi * n as f64).round() as usize).max(1);
        let we = Arc::new(sample_weights(d, p, child_seed(ts, "weights", g as u64))?);
        let train_seed = child_seed(ts, "train", 0);
        let test_seed = child_seed(ts, "test", 0);
        let mut out = TaskOut::new();
        for resp in &cfg.responses {
            for binary in [false, true] {
                let cells: Vec<&LossCell> = cfg
                    .cells
                    .iter()
                    .filter(|c| c.is_classification() == binary)
                    .collect();
                if cells.is_empty() {
                    continue;
                }
                let targets = Targets::new(&resp.target(ts, binary), d)?;
                for &model in &cfg.models {
                    let sampler = targets.sampler(model, &we, &cfg.activation)?;
                    let train = sampler.batch(n, train_seed)?;
                    let mut fits: Vec<(LossSpec, FitResult)> = Vec::new();
                    for cell in &cells {
                        if !fits.iter().any(|(l, _)| *l == cell.train) {
                            let r = fit(cfg, &train, cell.train)?;
                            out.stats.record(&r);
                            fits.push((cell.train, r));
                        }
                        let r = &fits.iter().find(|(l, _)| *l == cell.train).unwrap().1;
                        let group = format!("{}/{}", resp.name, cell.label());
                        let te = test_error(&r.theta, &sampler, cell.test, cfg.n_test, test_seed)?;
                        let tr = empirical_loss(&r.theta, &train, cell.test);
                        let tag = model.tag();
                        out.obs.push(Obs::new(key(&group, tag, "psi", psi, "", None, "test_error"), te.value));
                        out.obs.push(Obs::new(key(&group, tag, "psi", psi, "", None, "train_error"), tr.value));
                    }
                }
            }
        }
        Ok(out)
    })?;
    Ok(Outcome {
        table,
        diagnostics: json!({ "fits": stats }),
        passed: true,
    })
}

/// Distribution of `⟨θ̂, z⟩` on fresh test draws, `θ̂` fitted on RF data.
pub fn run_marginal(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let d = cfg.d;
    let n = cfg.n();
    let cell = cfg.cells[0];
    let tasks: Vec<(usize, usize, usize)> = (0..cfg.responses.len())
        .flat_map(|r| {
            (0..cfg.p_ratios.len()).flat_map(move |g| (0..cfg.trials).map(move |t| (r, g, t)))
        })
        .collect();
    let (table, stats, extra) = run_tasks(cfg, &tasks, |&(ri, g, trial)| {
        let resp = &cfg.responses[ri];
        let pr = cfg.p_ratios[g];
        let ts = trial_seed(cfg, trial);
        let p = cfg.scaled(pr);
        let we = Arc::new(sample_weights(d, p, child_seed(ts, "weights", g as u64))?);
        let targets = Targets::new(&resp.target(ts, cell.is_classification()), d)?;
        let rf = targets.sampler(ModelKind::Rf, &we, &cfg.activation)?;
        let train = rf.batch(n, child_seed(ts, "train", 0))?;
        let r = fit(cfg, &train, cell.train)?;
        let mut out = TaskOut::new();
        out.stats.record(&r);
        let test_seed = child_seed(ts, "test", 0);
        let preds: Vec<(ModelKind, Vec<f64>, Vec<f64>)> = cfg
            .models
            .iter()
            .map(|&m| {
                let s = targets.sampler(m, &we, &cfg.activation)?;
                let (pr, y) = test_predictions(&r.theta, &s, cfg.n_test, test_seed)?;
                Ok((m, pr, y))
            })
            .collect::<Result<_>>()?;
        let reference = &preds
            .iter()
            .find(|(m, ..)| *m == ModelKind::Rf)
            .unwrap_or(&preds[0])
            .1;
        let (center, sd) = (mean(reference), variance(reference).sqrt());
        let group = resp.name.as_str();
        let bin_width = 12.0 / cfg.bins as f64;
        for (m, pr, y) in &preds {
            let tag = m.tag();
            let k = |metric| key(group, tag, "p_ratio", pr_of(cfg, g), "", None, metric);
            let sk = skewness_se(pr);
            let ku = excess_kurtosis_se(pr);
            let te = mean(
                &pr.iter()
                    .zip(y)
                    .map(|(&yhat, &yy)| cell.test.value(yy, yhat))
                    .collect::<Vec<_>>(),
            );
            out.obs.push(Obs::new(k("mean"), mean(pr)));
            out.obs.push(Obs::new(k("sd"), variance(pr).sqrt()));
            out.obs.push(Obs::new(k("skewness"), sk.value).with_se(sk.se));
            out.obs.push(Obs::new(k("excess_kurtosis"), ku.value).with_se(ku.se));
            out.obs.push(Obs::new(k("test_error"), te));
            let standardized: Vec<f64> = pr.iter().map(|v| (v - center) / sd).collect();
            let h = histogram(&standardized, -6.0, 6.0, cfg.bins);
            for (b, dens) in h.density.iter().enumerate() {
                let x = -6.0 + (b as f64 + 0.5) * bin_width;
                out.obs.push(Obs::new(
                    key(group, tag, "std_bin", x, "p_ratio", Some(pr_of(cfg, g)), "density"),
                    *dens,
                ));
            }
        }
        for i in 0..preds.len() {
            for j in i + 1..preds.len() {
                let pair = format!("{}-{}", preds[i].0.tag(), preds[j].0.tag());
                out.obs.push(Obs::new(
                    key(group, &pair, "p_ratio", pr_of(cfg, g), "", None, "ks"),
                    ks_distance(&preds[i].1, &preds[j].1),
                ));
            }
        }
        out.extra.push(json!({
            "response": resp.name, "p_ratio": pr, "trial": trial,
            "train_risk": r.risk, "grad_norm": r.grad_norm, "converged": r.converged,
        }));
        Ok(out)
    })?;
    Ok(Outcome {
        table,
        diagnostics: json!({ "fits": stats, "trials": extra }),
        passed: true,
    })
}

fn pr_of(cfg: &ExperimentConfig, g: usize) -> f64 {
    cfg.p_ratios[g]
}

/// `P̂(sign⟨θ, σ(Wx)⟩ = +1)` with `x_1, x_2` fixed and the rest Gaussian.
pub fn prob_positive(
    theta: &Array1<f64>,
    we: &WeightEnsemble,
    sigma: &ActivationSpec,
    x1: f64,
    x2: f64,
    n_mc: usize,
    seed: u64,
) -> f64 {
    let d = we.d();
    let mut rng = rng_from_seed(seed);
    let mut x = Array2::<f64>::zeros((d, n_mc));
    for mut col in x.columns_mut() {
        col[0] = x1;
        if d > 1 {
            col[1] = x2;
        }
        for v in col.iter_mut().skip(2) {
            *v = StandardNormal.sample(&mut rng);
        }
    }
    let mut z = we.w().dot(&x);
    z.mapv_inplace(|v| sigma.eval(v));
    let preds = z.t().dot(theta);
    preds.iter().filter(|&&v| sign(v) > 0.0).count() as f64 / n_mc as f64
}

/// Crossings of `0.5` on either side of `t = 0`, scanning outward;
/// linear interpolation between grid points.
pub fn crossings(ts: &[f64], ps: &[f64]) -> (Option<f64>, Option<f64>) {
    let mut idx: Vec<usize> = (0..ts.len()).collect();
    idx.sort_by(|&a, &b| ts[a].total_cmp(&ts[b]));
    let pos: Vec<usize> = idx.iter().copied().filter(|&i| ts[i] >= 0.0).collect();
    let neg: Vec<usize> = idx.iter().rev().copied().filter(|&i| ts[i] <= 0.0).collect();
    let scan = |side: &[usize]| {
        side.windows(2).find_map(|w| {
            let (a, b) = (w[0], w[1]);
            if ps[a] < 0.5 && ps[b] >= 0.5 {
                let frac = (0.5 - ps[a]) / (ps[b] - ps[a]);
                Some(ts[a] + frac * (ts[b] - ts[a]))
            } else {
                None
            }
        })
    };
    (scan(&neg), scan(&pos))
}

/// Decision-boundary diagram of the RF classifier.
///
/// The single-index direction is `u = (e₁ + e₂)/√2`. By rotation invariance
/// of `W`, the run works in the frame where `u = e₁`; a grid point
/// `(x₁, x₂)` maps to `((x₁+x₂)/√2, (x₁−x₂)/√2)`.
pub fn run_boundary(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let d = cfg.d;
    if d < 2 {
        return Err(Error::Config("boundary needs d ≥ 2".into()));
    }
    let n = cfg.n();
    let cell = cfg.cells[0];
    let resp = &cfg.responses[0];
    let target = resp.target(cfg.master_seed, true);
    if !target.link.is_binary() {
        return Err(Error::Config("boundary needs a binary link".into()));
    }
    let tasks: Vec<(usize, usize)> = (0..cfg.p_ratios.len())
        .flat_map(|g| (0..cfg.trials).map(move |t| (g, t)))
        .collect();
    let r2 = std::f64::consts::FRAC_1_SQRT_2;
    let (table, stats, extra) = run_tasks(cfg, &tasks, |&(g, trial)| {
        let pr = cfg.p_ratios[g];
        let ts = trial_seed(cfg, trial);
        let p = cfg.scaled(pr);
        let we = Arc::new(sample_weights(d, p, child_seed(ts, "weights", g as u64))?);
        let targets = Targets::new(&resp.target(ts, true), d)?;
        let rf = targets.sampler(ModelKind::Rf, &we, &cfg.activation)?;
        let train = rf.batch(n, child_seed(ts, "train", 0))?;
        let r = fit(cfg, &train, cell.train)?;
        let mut out = TaskOut::new();
        out.stats.record(&r);
        let mc = child_seed(ts, "mc", 0);
        let grid_group = format!("{}/p_ratio={}/grid", resp.name, pr);
        let line_group = format!("{}/p_ratio={}/diagonal", resp.name, pr);
        let mut point = 0u64;
        for &a in &cfg.boundary.grid {
            for &b in &cfg.boundary.grid {
                let v = prob_positive(&r.theta, &we, &cfg.activation, (a + b) * r2, (a - b) * r2, cfg.boundary.n_mc, child_seed(mc, "grid", point));
                point += 1;
                out.obs.push(Obs::new(key(&grid_group, "RF", "x1", a, "x2", Some(b), "p_plus"), v));
            }
        }
        let mut line = Vec::new();
        for (i, &t) in cfg.boundary.line.iter().enumerate() {
            let v = prob_positive(&r.theta, &we, &cfg.activation, t, 0.0, cfg.boundary.n_mc, child_seed(mc, "line", i as u64));
            line.push(v);
            out.obs.push(Obs::new(key(&line_group, "RF", "t", t, "", None, "p_plus"), v));
        }
        let (lo, hi) = crossings(&cfg.boundary.line, &line);
        let te = test_error(&r.theta, &rf, LossSpec::ZeroOne, cfg.n_test, child_seed(ts, "test", 0))?;
        out.obs.push(Obs::new(key(&line_group, "RF", "t", f64::NAN, "", None, "test_zero_one"), te.value));
        out.extra.push(json!({ "p_ratio": pr, "trial": trial, "crossings": [lo, hi], "converged": r.converged }));
        Ok(out)
    })?;
    Ok(Outcome {
        table,
        diagnostics: json!({ "fits": stats, "trials": extra }),
        passed: true,
    })
}

fn phase_target(resp: &ResponseSpec, axis: Option<(PhaseAxis, f64)>, ts: u64) -> TargetSpec {
    let mut resp = resp.clone();
    match axis {
        Some((PhaseAxis::SStar, v)) => resp.binary_output = OutputMap::Logistic { scale: v },
        Some((PhaseAxis::Mu0, v)) => {
            if let ResponseKind::SingleIndex { coeffs } = &mut resp.kind {
                coeffs[0] = v;
            }
        }
        None => {}
    }
    resp.target(ts, true)
}

/// Fraction of trials in which the training data can be interpolated.
pub fn run_phase(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let d = cfg.d;
    let n = cfg.n();
    let resp = &cfg.responses[0];
    let axis: Vec<Option<(PhaseAxis, f64)>> = match &cfg.second_axis {
        Some(a) => a.values.iter().map(|&v| Some((a.param, v))).collect(),
        None => vec![None],
    };
    let mu0_axis = matches!(&cfg.second_axis, Some(a) if a.param == PhaseAxis::Mu0);
    if mu0_axis && !matches!(resp.kind, ResponseKind::SingleIndex { .. }) {
        return Err(Error::Config("the mu0 axis needs a single-index response".into()));
    }
    let tasks: Vec<(usize, usize, usize)> = (0..axis.len())
        .flat_map(|a| {
            (0..cfg.psi_grid.len()).flat_map(move |g| (0..cfg.trials).map(move |t| (a, g, t)))
        })
        .collect();
    let (table, _, _) = run_tasks(cfg, &tasks, |&(ai, g, trial)| {
        let psi = cfg.psi_grid[g];
        let ts = trial_seed(cfg, trial);
        let p = ((psi * n as f64).round() as usize).max(1);
        let we = Arc::new(sample_weights(d, p, child_seed(ts, "weights", (ai * cfg.psi_grid.len() + g) as u64))?);
        let targets = Targets::new(&phase_target(resp, axis[ai], ts), d)?;
        let (y_name, y) = match axis[ai] {
            Some((PhaseAxis::SStar, v)) => ("s_star", Some(v)),
            Some((PhaseAxis::Mu0, v)) => ("mu0", Some(v)),
            None => ("", None),
        };
        let mut out = TaskOut::new();
        for &model in &cfg.models {
            let s = targets.sampler(model, &we, &cfg.activation)?;
            let b = s.batch(n, child_seed(ts, "train", ai as u64))?;
            let hit = interpolation_check(&b, cfg.interp_max_iter)?;
            out.obs.push(Obs::new(
                key(&resp.name, model.tag(), "psi", psi, y_name, y, "interpolates"),
                if hit { 1.0 } else { 0.0 },
            ));
        }
        Ok(out)
    })?;
    Ok(Outcome {
        table,
        diagnostics: json!({ "n": n }),
        passed: true,
    })
}

/// Train and test loss curves over `p/n` or `n/d²`.
pub fn run_descent(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let d = cfg.d;
    let cell = cfg.cells[0];
    let resp = &cfg.responses[0];
    let grid: Vec<(f64, usize, usize)> = match cfg.sweep {
        DescentSweep::P => {
            let n = cfg.n();
            cfg.psi_grid
                .iter()
                .map(|&psi| (psi, ((psi * n as f64).round() as usize).max(1), n))
                .collect()
        }
        DescentSweep::N => {
            let p = cfg.scaled(cfg.p_ratios[0]);
            cfg.n_grid.iter().map(|&r| (r, p, cfg.scaled(r))).collect()
        }
    };
    let x_name = match cfg.sweep {
        DescentSweep::P => "psi",
        DescentSweep::N => "n_ratio",
    };
    let tasks: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..cfg.trials).map(move |t| (g, t)))
        .collect();
    let (table, stats, _) = run_tasks(cfg, &tasks, |&(g, trial)| {
        let (x, p, n) = grid[g];
        let ts = trial_seed(cfg, trial);
        let we = Arc::new(sample_weights(d, p, child_seed(ts, "weights", g as u64))?);
        let targets = Targets::new(&resp.target(ts, cell.is_classification()), d)?;
        let mut out = TaskOut::new();
        for &model in &cfg.models {
            let s = targets.sampler(model, &we, &cfg.activation)?;
            let train = s.batch(n, child_seed(ts, "train", 0))?;
            let r = fit(cfg, &train, cell.train)?;
            out.stats.record(&r);
            let test_seed = child_seed(ts, "test", 0);
            let te = test_error(&r.theta, &s, cell.test, cfg.n_test, test_seed)?;
            let te01 = test_error(&r.theta, &s, LossSpec::ZeroOne, cfg.n_test, test_seed)?;
            let tr = empirical_loss(&r.theta, &train, cell.train);
            let tag = model.tag();
            let k = |metric| key(&resp.name, tag, x_name, x, "", None, metric);
            out.obs.push(Obs::new(k("train_loss"), tr.value));
            out.obs.push(Obs::new(k("test_loss"), te.value));
            out.obs.push(Obs::new(k("test_zero_one"), te01.value));
            out.obs.push(Obs::new(k("theta_norm"), r.theta.dot(&r.theta).sqrt()));
        }
        Ok(out)
    })?;
    Ok(Outcome {
        table,
        diagnostics: json!({ "fits": stats }),
        passed: true,
    })
}
