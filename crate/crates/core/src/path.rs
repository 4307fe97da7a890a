//! Generalized path seeking with the fixed-increment coefficient update.
//!
//! Every step moves one coefficient by exactly `±delta_t`. Coefficients are
//! stored as signed integer multiples ("ticks") of `delta_t`, so a coefficient
//! that returns to zero is exactly zero. The path parameter advances by
//! `m * delta_t`, where `m = log(1 - alpha/|g_k|) / log(1 - alpha)` is the
//! number of elementary gradient steps one fixed increment stands for.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataset::StandardizedDesign;
use crate::error::{GpsError, Result};
use crate::linalg;
use crate::penalty::{AbsGradient, WEIGHT_FLOOR};

/// Residuals and gradients are recomputed from scratch this often.
pub const REFRESH_INTERVAL: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaT {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathOptions {
    /// Target number of increments needed to reach the least-squares ℓ1 norm.
    pub step_budget: usize,
    /// Stop before a `(q+1)`-th distinct variable would enter.
    pub max_vars: Option<usize>,
    /// Defaults to `10 * step_budget` when `None`.
    pub max_iterations: Option<usize>,
    pub delta_t: DeltaT,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            step_budget: 20_000,
            max_vars: None,
            max_iterations: None,
            delta_t: DeltaT::Auto,
        }
    }
}

impl PathOptions {
    pub fn with_delta_t(mut self, delta_t: f64) -> Self {
        self.delta_t = DeltaT::Fixed(delta_t);
        self
    }

    pub fn with_budget(mut self, step_budget: usize) -> Self {
        self.step_budget = step_budget;
        self
    }

    pub fn iteration_limit(&self) -> usize {
        self.max_iterations
            .unwrap_or_else(|| self.step_budget.saturating_mul(10))
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.step_budget == 0 {
            return Err(GpsError::InvalidParameter("step budget must be positive".into()));
        }
        if let DeltaT::Fixed(dt) = self.delta_t {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(GpsError::InvalidParameter(format!(
                    "delta_t must be positive and finite, got {dt}"
                )));
            }
        }
        if let Some(q) = self.max_vars {
            if q == 0 || q > p {
                return Err(GpsError::InvalidParameter(format!(
                    "max_vars must lie in 1..={p}, got {q}"
                )));
            }
        }
        if self.max_iterations == Some(0) {
            return Err(GpsError::InvalidParameter("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// One entry of the step log. Entry 0 is the null model and carries no
/// update (`k == None`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub k: Option<usize>,
    /// Direction of the increment, `+1` or `-1` (0 for the null entry).
    pub sign: i8,
    /// Gradient of the updated coordinate before the update.
    pub g_k: f64,
    /// `alpha / |g_k|`
    pub alpha_t: f64,
    /// Multiplicity factor.
    pub m: f64,
    /// Accumulated path parameter after the update.
    pub t: f64,
    pub l1: f64,
    /// Residual sum of squares after the update.
    pub rss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// No gradient exceeds `alpha`.
    Converged,
    MaxIterations,
    MaxVars,
}

/// The full step log of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionPath {
    pub delta_t: f64,
    /// `2 delta_t / N`
    pub alpha: f64,
    pub n: usize,
    pub p: usize,
    pub steps: Vec<PathStep>,
    /// Distinct updated indices in order of first selection.
    pub selected: Vec<usize>,
    pub stop: StopReason,
    /// Number of times a coefficient returned to exactly zero.
    pub exits: usize,
}

impl SolutionPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last_index(&self) -> usize {
        self.steps.len() - 1
    }

    /// Calls `f(step_index, ticks)` for every step in order, where `ticks[j]`
    /// is the coefficient of `j` in units of `delta_t`.
    pub fn for_each_ticks(&self, mut f: impl FnMut(usize, &[i64])) {
        let mut ticks = vec![0i64; self.p];
        for (s, step) in self.steps.iter().enumerate() {
            if let Some(k) = step.k {
                ticks[k] += step.sign as i64;
            }
            f(s, &ticks);
        }
    }

    /// Coefficients at each of the requested (ascending or not) step indices.
    pub fn betas_at(&self, indices: &[usize]) -> Vec<Array1<f64>> {
        let mut wanted: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (pos, &s) in indices.iter().enumerate() {
            wanted.entry(s).or_default().push(pos);
        }
        let mut out = vec![Array1::<f64>::zeros(self.p); indices.len()];
        let dt = self.delta_t;
        self.for_each_ticks(|s, ticks| {
            if let Some(slots) = wanted.get(&s) {
                let beta = Array1::from_iter(ticks.iter().map(|&c| c as f64 * dt));
                for &slot in slots {
                    out[slot] = beta.clone();
                }
            }
        });
        out
    }

    pub fn beta_at(&self, step: usize) -> Array1<f64> {
        self.betas_at(&[step]).pop().unwrap_or_else(|| Array1::zeros(self.p))
    }

    pub fn final_beta(&self) -> Array1<f64> {
        self.beta_at(self.last_index())
    }

    /// Nonzero coefficients at a step, keyed by predictor index.
    pub fn sparse_beta(&self, step: usize) -> BTreeMap<usize, f64> {
        self.beta_at(step)
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect()
    }

    /// Number of nonzero coefficients at every step.
    pub fn nonzero_counts(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut ticks = vec![0i64; self.p];
        let mut nz = 0usize;
        for step in &self.steps {
            if let Some(k) = step.k {
                let before = ticks[k];
                ticks[k] += step.sign as i64;
                if before == 0 {
                    nz += 1;
                } else if ticks[k] == 0 {
                    nz -= 1;
                }
            }
            out.push(nz);
        }
        out
    }

    /// Step indices kept when emitting every `r`-th step; always keeps the
    /// first and last entries.
    pub fn thinned_indices(&self, r: usize) -> Vec<usize> {
        let r = r.max(1);
        let last = self.last_index();
        let mut idx: Vec<usize> = (0..=last).step_by(r).collect();
        if *idx.last().unwrap_or(&0) != last {
            idx.push(last);
        }
        idx
    }

    /// Last step whose ℓ1 norm does not exceed `fraction` of the final ℓ1 norm.
    pub fn step_at_l1_fraction(&self, fraction: f64) -> usize {
        let total = self.steps[self.last_index()].l1;
        if total <= 0.0 {
            return 0;
        }
        let limit = fraction * total;
        let mut best = 0;
        for (s, step) in self.steps.iter().enumerate() {
            if step.l1 <= limit * (1.0 + 1e-12) {
                best = s;
            }
        }
        best
    }

    /// Last step whose path parameter does not exceed `t`.
    pub fn step_at_t(&self, t: f64) -> usize {
        match self.steps.iter().rposition(|s| s.t <= t) {
            Some(s) => s,
            None => 0,
        }
    }

    /// `g_j` in the state reached after each step, reconstructed from the
    /// Gram matrix.
    pub fn gradient_trace(&self, j: usize, design: &StandardizedDesign) -> Result<Vec<f64>> {
        if j >= self.p {
            return Err(GpsError::InvalidParameter(format!(
                "variable index {j} out of range (p = {})",
                self.p
            )));
        }
        let n = design.n() as f64;
        let xj = design.x.column(j);
        let mut g = 2.0 * xj.dot(&design.y) / n;
        let gram_row: Vec<f64> = (0..self.p).map(|k| xj.dot(&design.x.column(k))).collect();
        let mut out = Vec::with_capacity(self.len());
        for step in &self.steps {
            if let Some(k) = step.k {
                g -= 2.0 / n * self.delta_t * step.sign as f64 * gram_row[k];
            }
            out.push(g);
        }
        Ok(out)
    }
}

/// Least-squares coefficients of the standardized design.
pub fn ols_fit(design: &StandardizedDesign) -> Result<Array1<f64>> {
    let (n, p) = (design.n(), design.p());
    if n <= p {
        return Err(GpsError::RankDeficient(format!(
            "{n} observations for {p} predictors"
        )));
    }
    let qr = linalg::householder_qr(design.x.view())?;
    let diag: Vec<f64> = (0..p).map(|i| qr.r[[i, i]].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    // Unit-norm columns: the diagonal ratio tracks the condition number.
    if min == 0.0 || max / min > 1e12 {
        return Err(GpsError::RankDeficient(
            "design matrix is numerically singular".into(),
        ));
    }
    let qty = qr.q.t().dot(&design.y);
    linalg::solve_upper(qr.r.view(), qty.view())
}

/// `2 Xᵀ y / N`
pub fn initial_gradient(design: &StandardizedDesign) -> Array1<f64> {
    design.x.t().dot(&design.y) * (2.0 / design.n() as f64)
}

/// Resolves the coefficient increment.
///
/// `Auto` uses the ℓ1 norm of the least-squares fit (minimum-norm solution
/// when `N <= p` or the fit is singular) divided by the step budget, clamped so
/// that `alpha` stays below the largest initial gradient.
pub fn estimate_delta_t(design: &StandardizedDesign, opts: &PathOptions) -> Result<f64> {
    opts.validate(design.p())?;
    if let DeltaT::Fixed(dt) = opts.delta_t {
        return Ok(dt);
    }
    let n = design.n() as f64;
    let g0 = initial_gradient(design);
    let gmax = g0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if gmax <= 0.0 || !gmax.is_finite() {
        return Err(GpsError::Degenerate(
            "every initial gradient is zero; the response is orthogonal to all predictors".into(),
        ));
    }
    let beta = match ols_fit(design) {
        Ok(b) => b,
        Err(_) => linalg::min_norm_solution(design.x.view(), design.y.view()).map_err(|e| {
            GpsError::Degenerate(format!("cannot size the step automatically ({e}); pass delta_t"))
        })?,
    };
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    if !(l1 > 0.0 && l1.is_finite()) {
        return Err(GpsError::Degenerate("least-squares fit has zero ℓ1 norm".into()));
    }
    let mut dt = l1 / opts.step_budget as f64;
    if 2.0 * dt / n >= gmax {
        dt = 0.5 * gmax * n / 2.0;
    }
    Ok(dt)
}

/// Runs the path to completion.
pub fn fit(
    design: &StandardizedDesign,
    penalty: &dyn AbsGradient,
    opts: &PathOptions,
) -> Result<SolutionPath> {
    opts.validate(design.p())?;
    let g0 = initial_gradient(design);
    let gmax = g0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !gmax.is_finite() {
        return Err(GpsError::Numerical("non-finite initial gradient".into()));
    }
    if gmax == 0.0 {
        let dt = match opts.delta_t {
            DeltaT::Fixed(dt) => dt,
            DeltaT::Auto => 0.0,
        };
        return Ok(null_path(design, dt));
    }
    let dt = estimate_delta_t(design, opts)?;
    let alpha = 2.0 * dt / design.n() as f64;
    if alpha >= gmax {
        return Err(GpsError::Numerical(format!(
            "delta_t = {dt} gives alpha = {alpha:.6e}, which is not below the largest initial gradient {gmax:.6e}; no step can be taken"
        )));
    }
    if alpha >= 1.0 {
        return Err(GpsError::Numerical(format!(
            "delta_t = {dt} gives alpha = {alpha} >= 1"
        )));
    }
    let mut engine = GpsEngine::new(design, penalty, dt)?;
    engine.run(opts.iteration_limit(), opts.max_vars)?;
    Ok(engine.into_path())
}

fn null_path(design: &StandardizedDesign, dt: f64) -> SolutionPath {
    SolutionPath {
        delta_t: dt,
        alpha: 2.0 * dt / design.n() as f64,
        n: design.n(),
        p: design.p(),
        steps: vec![PathStep {
            k: None,
            sign: 0,
            g_k: 0.0,
            alpha_t: 0.0,
            m: 0.0,
            t: 0.0,
            l1: 0.0,
            rss: design.y.dot(&design.y),
        }],
        selected: Vec::new(),
        stop: StopReason::Converged,
        exits: 0,
    }
}

/// Snapshot of the engine between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub t: f64,
    pub beta: Array1<f64>,
    pub mu_hat: Array1<f64>,
    pub g: Array1<f64>,
    /// Number of updates of each coordinate.
    pub update_counts: Vec<u64>,
    /// Accumulated multiplicity (elementary steps) of each coordinate.
    pub elementary_steps: Vec<f64>,
    pub step_index: usize,
}

/// Stepwise driver behind [`fit`].
pub struct GpsEngine<'a> {
    design: &'a StandardizedDesign,
    penalty: &'a dyn AbsGradient,
    /// `p x N`, row `j` is predictor `j`.
    xt: Array2<f64>,
    gram: Array2<f64>,
    dt: f64,
    alpha: f64,
    residual: Array1<f64>,
    g: Array1<f64>,
    ticks: Vec<i64>,
    counts: Vec<u64>,
    elementary: Vec<f64>,
    l1_ticks: i64,
    t: f64,
    steps: Vec<PathStep>,
    selected: Vec<usize>,
    is_selected: Vec<bool>,
    exits: usize,
    stop: Option<StopReason>,
}

impl<'a> GpsEngine<'a> {
    pub fn new(
        design: &'a StandardizedDesign,
        penalty: &'a dyn AbsGradient,
        delta_t: f64,
    ) -> Result<Self> {
        if !(delta_t > 0.0 && delta_t.is_finite()) {
            return Err(GpsError::InvalidParameter(format!(
                "delta_t must be positive and finite, got {delta_t}"
            )));
        }
        let (n, p) = (design.n(), design.p());
        let xt = design.x.t().to_owned();
        let gram = xt.dot(&design.x);
        let residual = design.y.clone();
        let g = initial_gradient(design);
        let rss = residual.dot(&residual);
        Ok(Self {
            design,
            penalty,
            xt,
            gram,
            dt: delta_t,
            alpha: 2.0 * delta_t / n as f64,
            residual,
            g,
            ticks: vec![0; p],
            counts: vec![0; p],
            elementary: vec![0.0; p],
            l1_ticks: 0,
            t: 0.0,
            steps: vec![PathStep {
                k: None,
                sign: 0,
                g_k: 0.0,
                alpha_t: 0.0,
                m: 0.0,
                t: 0.0,
                l1: 0.0,
                rss,
            }],
            selected: Vec::new(),
            is_selected: vec![false; p],
            exits: 0,
            stop: None,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn stop_reason(&self) -> Option<StopReason> {
        self.stop
    }

    /// Current state; `mu_hat` is `y - residual`.
    pub fn state(&self) -> PathState {
        PathState {
            t: self.t,
            beta: Array1::from_iter(self.ticks.iter().map(|&c| c as f64 * self.dt)),
            mu_hat: &self.design.y - &self.residual,
            g: self.g.clone(),
            update_counts: self.counts.clone(),
            elementary_steps: self.elementary.clone(),
            step_index: self.steps.len() - 1,
        }
    }

    /// Picks the coordinate to update, or `None` when no gradient exceeds
    /// `alpha`. Ties go to the lowest index.
    fn select(&self) -> Result<Option<(usize, f64)>> {
        let mut best_any: Option<(usize, f64)> = None;
        let mut best_s: Option<(usize, f64)> = None;
        let unit = self.penalty.is_unit();
        for (j, &gj) in self.g.iter().enumerate() {
            if !gj.is_finite() {
                return Err(GpsError::Numerical(format!(
                    "gradient of variable {j} became non-finite at step {}",
                    self.steps.len()
                )));
            }
            if gj.abs() <= self.alpha {
                continue;
            }
            let beta_j = self.ticks[j] as f64 * self.dt;
            let lambda = if unit {
                gj
            } else {
                gj / self.penalty.weight(beta_j.abs()).max(WEIGHT_FLOOR)
            };
            let mag = lambda.abs();
            if best_any.map_or(true, |(_, b)| mag > b) {
                best_any = Some((j, mag));
            }
            if lambda * beta_j < 0.0 && best_s.map_or(true, |(_, b)| mag > b) {
                best_s = Some((j, mag));
            }
        }
        Ok(best_s.or(best_any))
    }

    /// Performs one update. Returns `false` (and records the reason) when the
    /// path has stopped.
    pub fn step(&mut self, max_vars: Option<usize>) -> Result<bool> {
        if self.stop.is_some() {
            return Ok(false);
        }
        let Some((k, _)) = self.select()? else {
            self.stop = Some(StopReason::Converged);
            return Ok(false);
        };
        if !self.is_selected[k] {
            if let Some(q) = max_vars {
                if self.selected.len() >= q {
                    self.stop = Some(StopReason::MaxVars);
                    return Ok(false);
                }
            }
            self.is_selected[k] = true;
            self.selected.push(k);
        }

        let g_k = self.g[k];
        // sign(lambda_k) == sign(g_k) because penalty weights are positive.
        let sign: i64 = if g_k > 0.0 { 1 } else { -1 };
        let alpha_t = self.alpha / g_k.abs();
        let m = (-alpha_t).ln_1p() / (-self.alpha).ln_1p();

        let before = self.ticks[k];
        self.ticks[k] += sign;
        self.l1_ticks += self.ticks[k].abs() - before.abs();
        if before != 0 && self.ticks[k] == 0 {
            self.exits += 1;
            log::debug!("variable {k} returned to zero at step {}", self.steps.len());
        }
        self.counts[k] += 1;
        self.elementary[k] += m;
        self.t += m * self.dt;

        let step_index = self.steps.len();
        let shift = sign as f64 * self.dt;
        if step_index % REFRESH_INTERVAL == 0 {
            self.refresh();
        } else {
            let xk = self.xt.row(k);
            self.residual.scaled_add(-shift, &xk);
            let c = 2.0 / self.design.n() as f64 * shift;
            self.g.scaled_add(-c, &self.gram.column(k));
        }
        let rss = self.residual.dot(&self.residual);
        self.steps.push(PathStep {
            k: Some(k),
            sign: sign as i8,
            g_k,
            alpha_t,
            m,
            t: self.t,
            l1: self.l1_ticks as f64 * self.dt,
            rss,
        });
        Ok(true)
    }

    /// Recomputes residual and gradients from the coefficients.
    fn refresh(&mut self) {
        let beta = Array1::from_iter(self.ticks.iter().map(|&c| c as f64 * self.dt));
        self.residual = &self.design.y - &self.design.x.dot(&beta);
        self.g = self.xt.dot(&self.residual) * (2.0 / self.design.n() as f64);
    }

    pub fn run(&mut self, max_iterations: usize, max_vars: Option<usize>) -> Result<()> {
        while self.step(max_vars)? {
            if self.steps.len() > max_iterations {
                self.stop = Some(StopReason::MaxIterations);
                log::warn!("path stopped at the iteration limit ({max_iterations})");
                break;
            }
        }
        Ok(())
    }

    pub fn into_path(self) -> SolutionPath {
        SolutionPath {
            delta_t: self.dt,
            alpha: self.alpha,
            n: self.design.n(),
            p: self.design.p(),
            steps: self.steps,
            selected: self.selected,
            stop: self.stop.unwrap_or(StopReason::MaxIterations),
            exits: self.exits,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{standardize, RawDataset};
    use crate::penalty::PenaltySpec;
    use ndarray::array;

    fn toy() -> StandardizedDesign {
        let raw = RawDataset::unnamed(
            array![
                [1.0, 0.2, -0.3],
                [0.5, -1.0, 0.8],
                [-0.7, 0.4, 1.1],
                [0.3, 0.9, -0.5],
                [-1.2, -0.1, 0.2],
                [0.8, 0.6, 0.9]
            ],
            array![2.0, -1.0, 0.5, 1.5, -2.0, 1.0],
        )
        .unwrap();
        standardize(&raw).unwrap()
    }

    #[test]
    fn zero_response_gives_null_path() {
        let mut d = toy();
        d.y.fill(0.0);
        let path = fit(&d, &PenaltySpec::Lasso, &PathOptions::default().with_delta_t(0.01)).unwrap();
        assert_eq!(path.len(), 1);
        assert_eq!(path.steps[0].k, None);
        assert_eq!(path.stop, StopReason::Converged);
    }

    #[test]
    fn oversized_step_is_numerical_error() {
        let d = toy();
        let opts = PathOptions::default().with_budget(10).with_delta_t(1e9);
        assert!(matches!(
            fit(&d, &PenaltySpec::Lasso, &opts),
            Err(GpsError::Numerical(_))
        ));
    }

    #[test]
    fn explicit_delta_t_passes_through() {
        let d = toy();
        let opts = PathOptions::default().with_delta_t(0.01);
        assert_eq!(estimate_delta_t(&d, &opts).unwrap(), 0.01);
    }

    #[test]
    fn auto_delta_t_single_predictor() {
        let raw = RawDataset::unnamed(array![[1.0], [2.0], [4.0], [7.0]], array![1.0, 2.0, 4.0, 7.0])
            .unwrap();
        let d = standardize(&raw).unwrap();
        let b = d.x.column(0).dot(&d.y);
        let dt = estimate_delta_t(&d, &PathOptions::default().with_budget(500)).unwrap();
        assert!((dt - b.abs() / 500.0).abs() < 1e-12);
    }

    #[test]
    fn every_step_moves_one_tick() {
        let d = toy();
        let path = fit(&d, &PenaltySpec::GeneralizedElasticNet(0.5), &PathOptions::default().with_budget(2000))
            .unwrap();
        let mut prev = vec![0i64; d.p()];
        path.for_each_ticks(|s, ticks| {
            if s > 0 {
                let k = path.steps[s].k.unwrap();
                for j in 0..ticks.len() {
                    let diff = ticks[j] - prev[j];
                    if j == k {
                        assert_eq!(diff.abs(), 1);
                    } else {
                        assert_eq!(diff, 0);
                    }
                }
            }
            prev.copy_from_slice(ticks);
        });
    }

    #[test]
    fn max_vars_limits_selection() {
        let d = toy();
        let opts = PathOptions {
            max_vars: Some(1),
            ..PathOptions::default().with_budget(500)
        };
        let path = fit(&d, &PenaltySpec::Lasso, &opts).unwrap();
        assert_eq!(path.selected.len(), 1);
        assert_eq!(path.stop, StopReason::MaxVars);
    }

    #[test]
    fn gradient_trace_matches_definition() {
        let d = toy();
        let path = fit(&d, &PenaltySpec::Lasso, &PathOptions::default().with_budget(300)).unwrap();
        let trace = path.gradient_trace(1, &d).unwrap();
        let idx = [0, path.len() / 2, path.last_index()];
        for (beta, &s) in path.betas_at(&idx).iter().zip(&idx) {
            let r = &d.y - &d.x.dot(beta);
            let g = 2.0 * d.x.column(1).dot(&r) / d.n() as f64;
            assert!((trace[s] - g).abs() < 1e-10);
        }
    }
}
