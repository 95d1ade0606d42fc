//! Smoothing-parameter selection by weighted generalized cross-validation.
//!
//! ```text
//!   GCV(λ) = Σ_i m_i⁻¹ Σ_j W(r_ij) r_ij²  /  (1 − n⁻¹ Σ_i m_i⁻¹ Σ_j h_ij)²
//! ```
//!
//! with `W(r) = ψ(r)/r` the IRLS weight and `h_ij` the weighted hat diagonal
//! at convergence.

use std::sync::Arc;

use rayon::prelude::*;

use crate::basis::SplineModel;
use crate::error::{Error, Result};
use crate::loss::{preliminary_scale, Loss, LossKind, LossSpec, ScaleMode};
use crate::model::ObservationSet;
use crate::scalar::Scalar;
use crate::solver::{FitConfig, FitResult, Fitter, LambdaPolicy};

/// Denominators at or below this value report an infinite criterion.
pub const GCV_DENOM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GcvTrace<S> {
    /// Candidate values, strictly increasing.
    pub lambdas: Vec<S>,
    /// Criterion per candidate; NaN where the fit failed.
    pub gcv_values: Vec<S>,
    pub chosen_index: usize,
    pub fits_converged: Vec<bool>,
    pub iterations: Vec<usize>,
}

impl<S: Scalar> GcvTrace<S> {
    pub fn chosen_lambda(&self) -> S {
        self.lambdas[self.chosen_index]
    }
}

#[derive(Debug, Clone)]
pub struct Selection<S> {
    pub fit: FitResult<S>,
    pub trace: GcvTrace<S>,
}

/// Evaluates the criterion for a fit whose observations are in the storage
/// order of `data`.
pub fn gcv_value<S: Scalar>(result: &FitResult<S>, data: &ObservationSet<S>) -> S {
    let n = S::from_usize_exact(data.n_subjects());
    let mut numer = S::zero();
    let mut lev = S::zero();
    let mut k = 0;
    for s in data.subjects() {
        let inv_m = S::one() / S::from_usize_exact(s.len());
        let mut rss = S::zero();
        let mut hsum = S::zero();
        for _ in 0..s.len() {
            let r = result.residuals[k];
            rss = rss + result.weights[k] * r * r;
            hsum = hsum + result.hat_diag[k];
            k += 1;
        }
        numer = numer + inv_m * rss;
        lev = lev + inv_m * hsum;
    }
    let denom = (S::one() - lev / n).powi(2);
    if denom <= S::lit(GCV_DENOM_FLOOR) {
        S::infinity()
    } else {
        numer / denom
    }
}

/// Fits every candidate `λ` and returns the GCV minimizer.
///
/// With warm starts the grid is traversed from the largest `λ` down, each
/// fit starting from the previous coefficients. Ties go to the larger `λ`.
pub fn select<S: Scalar>(
    data: &ObservationSet<S>,
    model: Arc<SplineModel<S>>,
    loss: &LossSpec<S>,
    grid: &LambdaPolicy<S>,
    config: &FitConfig<S>,
) -> Result<Selection<S>> {
    let fitter = Fitter::new(data, model)?;
    select_with(&fitter, data, loss, grid, config)
}

/// As [`select`], reusing a prepared fitter.
pub fn select_with<S: Scalar>(
    fitter: &Fitter<S>,
    data: &ObservationSet<S>,
    spec: &LossSpec<S>,
    grid: &LambdaPolicy<S>,
    config: &FitConfig<S>,
) -> Result<Selection<S>> {
    let lambdas = grid.values();
    if lambdas.is_empty() {
        return Err(Error::InvalidConfig("empty lambda grid".into()));
    }
    let loss = resolve_scale(fitter, data, spec, grid, config)?;

    let mut fits: Vec<Option<FitResult<S>>> = vec![None; lambdas.len()];
    if config.warm_start {
        let mut prev: Option<Vec<S>> = None;
        for (idx, &lambda) in lambdas.iter().enumerate().rev() {
            match fitter.fit(&loss, lambda, config, prev.as_deref()) {
                Ok(f) => {
                    prev = Some(f.coefficients().to_vec());
                    fits[idx] = Some(f);
                }
                Err(Error::SingularSystem) => {}
                Err(e) => return Err(e),
            }
        }
    } else {
        let results: Vec<Result<FitResult<S>>> = lambdas
            .par_iter()
            .map(|&lambda| fitter.fit(&loss, lambda, config, None))
            .collect();
        for (slot, res) in fits.iter_mut().zip(results) {
            match res {
                Ok(f) => *slot = Some(f),
                Err(Error::SingularSystem) => {}
                Err(e) => return Err(e),
            }
        }
    }

    let mut gcv_values = Vec::with_capacity(lambdas.len());
    let mut fits_converged = Vec::with_capacity(lambdas.len());
    let mut iterations = Vec::with_capacity(lambdas.len());
    let mut chosen: Option<usize> = None;
    for (idx, f) in fits.iter().enumerate() {
        let (g, conv, it) = match f {
            Some(f) => (gcv_value(f, data), f.converged, f.iterations),
            None => (S::nan(), false, 0),
        };
        if g.is_finite() && chosen.is_none_or(|c| g <= gcv_values[c]) {
            chosen = Some(idx);
        }
        gcv_values.push(g);
        fits_converged.push(conv);
        iterations.push(it);
    }
    // every surviving fit interpolates: fall back to the smoothest one
    let chosen = match chosen {
        Some(c) => c,
        None => fits
            .iter()
            .rposition(Option::is_some)
            .ok_or(Error::AllFitsFailed)?,
    };
    let fit = fits.swap_remove(chosen).expect("chosen fit exists");
    Ok(Selection {
        fit,
        trace: GcvTrace {
            lambdas,
            gcv_values,
            chosen_index: chosen,
            fits_converged,
            iterations,
        },
    })
}

fn resolve_scale<S: Scalar>(
    fitter: &Fitter<S>,
    data: &ObservationSet<S>,
    spec: &LossSpec<S>,
    grid: &LambdaPolicy<S>,
    config: &FitConfig<S>,
) -> Result<Loss<S>> {
    let loss = Loss::new(spec.kind)?;
    match spec.scale_mode {
        ScaleMode::Raw => Ok(loss),
        ScaleMode::PreliminaryMad => {
            let pilot = LossSpec::raw(LossKind::Squared);
            let sel = select_with(fitter, data, &pilot, grid, config)?;
            Ok(loss.with_scale(preliminary_scale(&sel.fit.residuals)))
        }
    }
}

/// Fits under any policy: fixed `λ` directly, or GCV selection over a grid.
pub fn fit_with_policy<S: Scalar>(
    fitter: &Fitter<S>,
    data: &ObservationSet<S>,
    spec: &LossSpec<S>,
    config: &FitConfig<S>,
) -> Result<Selection<S>> {
    select_with(fitter, data, spec, &config.lambda, config)
}
