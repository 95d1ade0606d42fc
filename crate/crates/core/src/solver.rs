//! Penalized iteratively reweighted least squares for the M-type objective
//!
//! ```text
//!   F(c) = Σ_i Σ_j d_ij ρ(Y_ij − B_ijᵀc) + λ cᵀPc,     d_ij = 1 / (n m_i).
//! ```
//!
//! Each iteration freezes the weights `w = ψ(r)/r` and solves
//! `(BᵀDWB + 2λP) c = BᵀDWy`, whose gradient at the current iterate matches
//! that of `F`. Observations sharing the exact same sampling point are
//! collapsed into one weighted row per solve, so a common design costs one
//! row per grid point regardless of the number of curves.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basis::{LocalRow, SplineFunction, SplineModel};
use crate::error::{Error, Result};
use crate::linalg::BandQr;
use crate::loss::{preliminary_scale, Loss, LossSpec, ScaleMode};
use crate::model::ObservationSet;
use crate::scalar::Scalar;

/// Residuals below this magnitude use the loss's continuity weight.
pub const TINY_RESIDUAL: f64 = 1e-10;
/// Upper clamp on IRLS weights.
pub const MAX_WEIGHT: f64 = 1e12;
pub const DEFAULT_MAX_ITER: usize = 500;
pub const DEFAULT_COEF_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum LambdaPolicy<S> {
    Fixed {
        lambda: S,
    },
    /// `count` log-spaced values between `10^log10_min` and `10^log10_max`.
    GcvGrid {
        log10_min: S,
        log10_max: S,
        count: usize,
    },
}

impl<S: Scalar> LambdaPolicy<S> {
    pub fn default_grid() -> Self {
        LambdaPolicy::GcvGrid {
            log10_min: S::lit(-10.0),
            log10_max: S::lit(1.0),
            count: 50,
        }
    }

    /// Candidate values in increasing order.
    pub fn values(&self) -> Vec<S> {
        match *self {
            LambdaPolicy::Fixed { lambda } => vec![lambda],
            LambdaPolicy::GcvGrid {
                log10_min,
                log10_max,
                count,
            } => {
                if count == 1 {
                    return vec![S::lit(10.0).powf(log10_min)];
                }
                let step = (log10_max - log10_min) / S::from_usize_exact(count - 1);
                (0..count)
                    .map(|i| S::lit(10.0).powf(log10_min + step * S::from_usize_exact(i)))
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig<S> {
    pub r: usize,
    pub lambda: LambdaPolicy<S>,
    pub max_iter: usize,
    pub coef_tol: S,
    /// Warm-start successive grid fits (forces sequential evaluation).
    pub warm_start: bool,
}

impl<S: Scalar> FitConfig<S> {
    pub fn new(r: usize, lambda: LambdaPolicy<S>) -> Self {
        Self {
            r,
            lambda,
            max_iter: DEFAULT_MAX_ITER,
            coef_tol: S::lit(DEFAULT_COEF_TOL),
            warm_start: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return Err(Error::InvalidConfig("r must be at least 1".into()));
        }
        if !(self.coef_tol > S::zero()) {
            return Err(Error::InvalidConfig("coef_tol must be positive".into()));
        }
        match self.lambda {
            LambdaPolicy::Fixed { lambda } if !(lambda > S::zero() && lambda.is_finite()) => Err(
                Error::InvalidConfig(format!("lambda must be positive, got {lambda}")),
            ),
            LambdaPolicy::GcvGrid {
                log10_min,
                log10_max,
                count,
            } if count < 2 || !(log10_max > log10_min) => Err(Error::InvalidConfig(
                "GCV grid needs at least two points and log10_max > log10_min".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Outcome of a penalized M-type fit.
#[derive(Debug, Clone)]
pub struct FitResult<S> {
    pub function: SplineFunction<S>,
    pub lambda_used: S,
    /// Objective value at the returned coefficients.
    pub objective: S,
    /// Objective after the initial fit and after every IRLS step.
    pub objective_trace: Vec<S>,
    /// Per-observation residuals in storage order.
    pub residuals: Vec<S>,
    /// Diagonal of the weighted hat matrix at the final weights.
    pub hat_diag: Vec<S>,
    pub iterations: usize,
    pub converged: bool,
    /// Final IRLS weights.
    pub weights: Vec<S>,
    /// Residual scale used by the loss (1 for raw tuning).
    pub scale: S,
}

impl<S: Scalar> FitResult<S> {
    pub fn coefficients(&self) -> &[S] {
        self.function.coefficients()
    }

    /// `Σ h_ij`.
    pub fn effective_dof(&self) -> S {
        self.hat_diag.iter().copied().sum()
    }
}

struct Groups<S> {
    rows: Vec<LocalRow<S>>,
    offsets: Vec<usize>,
    members: Vec<usize>,
}

/// Observation data bound to a spline model, reusable across many fits.
pub struct Fitter<S> {
    model: Arc<SplineModel<S>>,
    y: Vec<S>,
    d: Vec<S>,
    obs_group: Vec<usize>,
    groups: Groups<S>,
    n: usize,
    total: usize,
}

impl<S: Scalar> Fitter<S> {
    pub fn new(data: &ObservationSet<S>, model: Arc<SplineModel<S>>) -> Result<Self> {
        let total = data.total_points();
        if total < model.r() {
            return Err(Error::InsufficientData {
                observations: total,
                r: model.r(),
            });
        }
        let n = data.n_subjects();
        let nf = S::from_usize_exact(n);
        let mut y = Vec::with_capacity(total);
        let mut d = Vec::with_capacity(total);
        let mut t = Vec::with_capacity(total);
        for s in data.subjects() {
            let w = S::one() / (nf * S::from_usize_exact(s.len()));
            for (ti, yi) in s.points() {
                t.push(ti);
                y.push(yi);
                d.push(w);
            }
        }
        let mut order: Vec<usize> = (0..total).collect();
        order.sort_by(|&i, &j| t[i].partial_cmp(&t[j]).unwrap().then(i.cmp(&j)));
        let mut rows = Vec::new();
        let mut offsets = vec![0];
        let mut members = Vec::with_capacity(total);
        let mut obs_group = vec![0; total];
        for (pos, &i) in order.iter().enumerate() {
            if pos == 0 || t[i] != t[order[pos - 1]] {
                if pos > 0 {
                    offsets.push(members.len());
                }
                rows.push(model.row(t[i])?);
            }
            obs_group[i] = rows.len() - 1;
            members.push(i);
        }
        offsets.push(members.len());
        Ok(Self {
            model,
            y,
            d,
            obs_group,
            groups: Groups {
                rows,
                offsets,
                members,
            },
            n,
            total,
        })
    }

    pub fn model(&self) -> &Arc<SplineModel<S>> {
        &self.model
    }

    pub fn n_subjects(&self) -> usize {
        self.n
    }

    pub fn n_obs(&self) -> usize {
        self.total
    }

    /// Per-observation subject weights `1 / (n m_i)`.
    pub fn subject_weights(&self) -> &[S] {
        &self.d
    }

    pub fn responses(&self) -> &[S] {
        &self.y
    }

    pub fn residuals(&self, c: &[S]) -> Vec<S> {
        let fitted: Vec<S> = self.groups.rows.iter().map(|row| row.dot(c)).collect();
        (0..self.total)
            .map(|i| self.y[i] - fitted[self.obs_group[i]])
            .collect()
    }

    /// `Σ d_ij ρ(r_ij) + λ cᵀPc`.
    pub fn objective(&self, loss: &Loss<S>, lambda: S, c: &[S]) -> S {
        let r = self.residuals(c);
        self.objective_from_residuals(loss, lambda, c, &r)
    }

    fn objective_from_residuals(&self, loss: &Loss<S>, lambda: S, c: &[S], r: &[S]) -> S {
        let data: S = r
            .iter()
            .zip(&self.d)
            .map(|(&ri, &di)| di * loss.rho(ri))
            .sum();
        data + lambda * self.model.roughness(c)
    }

    /// Gradient of the objective: `−Bᵀ D ψ(r) + 2λPc`.
    pub fn gradient(&self, loss: &Loss<S>, lambda: S, c: &[S]) -> Vec<S> {
        let r = self.residuals(c);
        let mut g: Vec<S> = self
            .model
            .penalty()
            .mul_vec(c)
            .into_iter()
            .map(|v| S::lit(2.0) * lambda * v)
            .collect();
        for (gi, row) in self.groups.rows.iter().enumerate() {
            let members =
                &self.groups.members[self.groups.offsets[gi]..self.groups.offsets[gi + 1]];
            let s: S = members.iter().map(|&i| self.d[i] * loss.psi(r[i])).sum();
            for (k, &v) in row.vals.iter().enumerate() {
                g[row.start + k] = g[row.start + k] - v * s;
            }
        }
        g
    }

    fn irls_weights(&self, loss: &Loss<S>, r: &[S]) -> Vec<S> {
        let tiny = S::lit(TINY_RESIDUAL);
        let cap = S::lit(MAX_WEIGHT);
        r.iter()
            .map(|&ri| {
                let w = if ri.abs() < tiny {
                    loss.weight_at_zero()
                } else {
                    loss.weight(ri)
                };
                w.min(cap)
            })
            .collect()
    }

    /// Factor of `BᵀDWB + 2λP`, with one jittered retry.
    fn factor(&self, w: &[S], lambda: S) -> Result<BandQr<S>> {
        let mut qr = self.factor_once(w, lambda, S::zero());
        if qr.is_singular() {
            let p = self.model.penalty();
            let tr = p.trace();
            let base = if tr > S::zero() { tr } else { S::one() };
            let jitter = S::lit(1e-10) * base / S::from_usize_exact(p.dim());
            qr = self.factor_once(w, lambda, jitter);
            if qr.is_singular() {
                return Err(Error::SingularSystem);
            }
        }
        Ok(qr)
    }

    fn factor_once(&self, w: &[S], lambda: S, jitter: S) -> BandQr<S> {
        let dim = self.model.dim();
        let order = self.model.order();
        let mut qr = BandQr::new(dim, order);
        let pen_scale = (S::lit(2.0) * lambda).sqrt();
        let pen = self.model.penalty_rows();
        let groups = &self.groups;
        let (mut gi, mut pi) = (0, 0);
        let mut buf = vec![S::zero(); order];
        // rows are merged by starting column to keep Givens fill-in local
        while gi < groups.rows.len() || pi < pen.len() {
            let take_group = pi >= pen.len()
                || (gi < groups.rows.len() && groups.rows[gi].start <= pen[pi].start);
            if take_group {
                let row = &groups.rows[gi];
                let members = &groups.members[groups.offsets[gi]..groups.offsets[gi + 1]];
                let mut sw = S::zero();
                let mut swy = S::zero();
                for &i in members {
                    let dw = self.d[i] * w[i];
                    sw = sw + dw;
                    swy = swy + dw * self.y[i];
                }
                if sw > S::zero() {
                    let root = sw.sqrt();
                    for (b, &v) in buf.iter_mut().zip(&row.vals) {
                        *b = root * v;
                    }
                    qr.add_row(row.start, &buf[..row.vals.len()], swy / root);
                }
                gi += 1;
            } else {
                let row = &pen[pi];
                for (b, &v) in buf.iter_mut().zip(&row.vals) {
                    *b = pen_scale * v;
                }
                qr.add_row(row.start, &buf[..row.vals.len()], S::zero());
                pi += 1;
            }
        }
        if jitter > S::zero() {
            let root = jitter.sqrt();
            for k in 0..dim {
                qr.add_row(k, &[root], S::zero());
            }
        }
        qr
    }

    /// Ridge (squared-loss) solution at `λ`, the IRLS starting point.
    pub fn ridge(&self, lambda: S) -> Result<Vec<S>> {
        let w = vec![S::lit(2.0); self.total];
        Ok(self.factor(&w, lambda)?.solve())
    }

    /// Resolves the residual scale requested by `spec` for fits at `lambda`.
    pub fn resolve_loss(&self, spec: &LossSpec<S>, lambda: S) -> Result<Loss<S>> {
        let loss = Loss::new(spec.kind)?;
        match spec.scale_mode {
            ScaleMode::Raw => Ok(loss),
            ScaleMode::PreliminaryMad => {
                let c = self.ridge(lambda)?;
                Ok(loss.with_scale(preliminary_scale(&self.residuals(&c))))
            }
        }
    }

    /// Runs IRLS from `init` (or the ridge fit at the same `λ`).
    pub fn fit(
        &self,
        loss: &Loss<S>,
        lambda: S,
        config: &FitConfig<S>,
        init: Option<&[S]>,
    ) -> Result<FitResult<S>> {
        if !(lambda > S::zero() && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        let mut c = match init {
            Some(c0) if c0.len() == self.model.dim() => c0.to_vec(),
            _ => self.ridge(lambda)?,
        };
        let mut r = self.residuals(&c);
        let mut obj = self.objective_from_residuals(loss, lambda, &c, &r);
        let mut trace = vec![obj];
        let mut converged = false;
        let mut iterations = 0;
        let slack = S::lit(4.0) * S::epsilon();
        while iterations < config.max_iter {
            iterations += 1;
            let w = self.irls_weights(loss, &r);
            let proposal = self.factor(&w, lambda)?.solve();
            // step halving keeps the objective monotone for asymmetric losses,
            // where the reweighted quadratic is not a majorizer
            let mut step = S::one();
            let mut cand = proposal.clone();
            let mut cand_r = self.residuals(&cand);
            let mut cand_obj = self.objective_from_residuals(loss, lambda, &cand, &cand_r);
            let mut halvings = 0;
            while cand_obj > obj + slack * obj.abs() && halvings < 40 {
                step = step * S::lit(0.5);
                cand = c
                    .iter()
                    .zip(&proposal)
                    .map(|(&a, &b)| a + step * (b - a))
                    .collect();
                cand_r = self.residuals(&cand);
                cand_obj = self.objective_from_residuals(loss, lambda, &cand, &cand_r);
                halvings += 1;
            }
            if cand_obj > obj + slack * obj.abs() {
                // no descent along the IRLS direction: stationary to working precision
                converged = true;
                break;
            }
            let diff: S = c
                .iter()
                .zip(&cand)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<S>()
                .sqrt();
            let norm: S = cand.iter().map(|&v| v * v).sum::<S>().sqrt();
            c = cand;
            r = cand_r;
            obj = cand_obj;
            trace.push(obj);
            if diff <= config.coef_tol * norm.max(S::min_positive_value()) {
                converged = true;
                break;
            }
        }

        let weights = self.irls_weights(loss, &r);
        let hat_diag = self.hat_diagonal(&weights, lambda)?;
        Ok(FitResult {
            function: SplineFunction::new(self.model.clone(), c)?,
            lambda_used: lambda,
            objective: obj,
            objective_trace: trace,
            residuals: r,
            hat_diag,
            iterations,
            converged,
            weights,
            scale: loss.scale(),
        })
    }

    /// `h_ij = d_ij w_ij B_ijᵀ (BᵀDWB + 2λP)⁻¹ B_ij`.
    pub fn hat_diagonal(&self, weights: &[S], lambda: S) -> Result<Vec<S>> {
        let sigma = self.factor(weights, lambda)?.inverse_band();
        let quad: Vec<S> = self
            .groups
            .rows
            .iter()
            .map(|row| sigma.local_quad_form(row.start, &row.vals))
            .collect();
        Ok((0..self.total)
            .map(|i| self.d[i] * weights[i] * quad[self.obs_group[i]])
            .collect())
    }
}

/// Fits the penalized M-type spline at a fixed `λ`.
pub fn fit<S: Scalar>(
    data: &ObservationSet<S>,
    model: Arc<SplineModel<S>>,
    loss: &Loss<S>,
    lambda: S,
    config: &FitConfig<S>,
) -> Result<FitResult<S>> {
    config.validate()?;
    Fitter::new(data, model)?.fit(loss, lambda, config, None)
}

/// The `s`-th derivative of the fitted curve on `grid`.
pub fn fit_derivative<S: Scalar>(result: &FitResult<S>, s: usize, grid: &[S]) -> Result<Vec<S>> {
    result.function.evaluate_many(grid, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LossKind;
    use crate::model::{summarize, DEDUP_TOL};

    fn toy() -> ObservationSet<f64> {
        let mut raw = Vec::new();
        for i in 0..4 {
            for j in 1..=12 {
                let t = j as f64 / 13.0;
                let y = (6.0 * t).sin() + 0.1 * ((i * 31 + j * 17) % 7) as f64 - 0.3;
                raw.push((i as i64, t, y));
            }
        }
        ObservationSet::validate(&raw).unwrap()
    }

    fn setup(data: &ObservationSet<f64>, r: usize) -> Fitter<f64> {
        let summary = summarize(data, DEDUP_TOL);
        let model = Arc::new(SplineModel::build(&summary, r).unwrap());
        Fitter::new(data, model).unwrap()
    }

    #[test]
    fn squared_loss_takes_one_iteration() {
        let data = toy();
        let fitter = setup(&data, 2);
        let loss = Loss::new(LossKind::Squared).unwrap();
        let cfg = FitConfig::new(2, LambdaPolicy::Fixed { lambda: 1e-4 });
        let res = fitter.fit(&loss, 1e-4, &cfg, None).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
        let ridge = fitter.ridge(1e-4).unwrap();
        for (a, b) in res.coefficients().iter().zip(&ridge) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_values_are_log_spaced() {
        let g = LambdaPolicy::<f64>::default_grid().values();
        assert_eq!(g.len(), 50);
        assert!((g[0] - 1e-10).abs() < 1e-22);
        assert!((g[49] - 10.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn config_validation() {
        let mut cfg = FitConfig::<f64>::new(2, LambdaPolicy::Fixed { lambda: 0.0 });
        assert!(cfg.validate().is_err());
        cfg.lambda = LambdaPolicy::GcvGrid {
            log10_min: -3.0,
            log10_max: 0.0,
            count: 1,
        };
        assert!(cfg.validate().is_err());
        cfg.lambda = LambdaPolicy::Fixed { lambda: 1.0 };
        cfg.r = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn huber_fit_is_stationary() {
        let data = toy();
        let fitter = setup(&data, 2);
        let loss = Loss::new(LossKind::Huber { k: 0.1 }).unwrap();
        let lambda = 1e-5;
        let cfg = FitConfig::new(2, LambdaPolicy::Fixed { lambda });
        let res = fitter.fit(&loss, lambda, &cfg, None).unwrap();
        assert!(res.converged);
        let g = fitter.gradient(&loss, lambda, res.coefficients());
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(gmax < 1e-6 * (1.0 + res.objective.abs()), "{gmax}");
        for w in res.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
    }

    #[test]
    fn hat_values_in_unit_interval() {
        let data = toy();
        let fitter = setup(&data, 2);
        let loss = Loss::new(LossKind::Huber { k: 0.2 }).unwrap();
        let cfg = FitConfig::new(2, LambdaPolicy::Fixed { lambda: 1e-6 });
        let res = fitter.fit(&loss, 1e-6, &cfg, None).unwrap();
        assert!(res
            .hat_diag
            .iter()
            .all(|&h| (0.0..=1.0 + 1e-9).contains(&h)));
        assert!(res.effective_dof() <= fitter.model().dim() as f64 + 1e-6);
    }

    #[test]
    fn derivative_order_is_bounded() {
        let data = toy();
        let fitter = setup(&data, 1);
        let loss = Loss::new(LossKind::Squared).unwrap();
        let cfg = FitConfig::new(1, LambdaPolicy::Fixed { lambda: 1e-3 });
        let res = fitter.fit(&loss, 1e-3, &cfg, None).unwrap();
        let grid = [0.2, 0.5];
        assert_eq!(
            fit_derivative(&res, 0, &grid).unwrap(),
            res.function.evaluate_many(&grid, 0).unwrap()
        );
        assert!(matches!(
            fit_derivative(&res, 2, &grid),
            Err(Error::DerivativeOrder { .. })
        ));
    }

    #[test]
    fn rejects_too_little_data() {
        let data = ObservationSet::validate(&[(1, 0.2, 1.0), (2, 0.8, 1.0)]).unwrap();
        let model = Arc::new(SplineModel::from_breakpoints(&[0.2, 0.8], 3).unwrap());
        assert!(matches!(
            Fitter::new(&data, model),
            Err(Error::InsufficientData { .. })
        ));
    }
}
