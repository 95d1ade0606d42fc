//! B-splines of order `2r` on the deduplicated sampling points.
//!
//! The knot vector repeats `a = min T` and `b = max T` `order` times and uses
//! every distinct interior sampling point once, giving `v + 2r` basis
//! functions for `v = #unique − 2`. The roughness penalty
//! `P[k][l] = ∫ B_k^(r) B_l^(r)` is assembled by Gauss–Legendre quadrature
//! with `r + 1` nodes per knot interval, which is exact for the piecewise
//! polynomial integrand. The quadrature rows themselves are kept so the
//! solver can rotate them into its factorization without forming `P`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::SymBand;
use crate::model::{DesignSummary, ObservationSet, DEDUP_TOL};
use crate::quadrature::gauss_legendre;
use crate::scalar::Scalar;

/// A sparse row: `vals` occupy consecutive columns starting at `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalRow<S> {
    pub start: usize,
    pub vals: Vec<S>,
}

impl<S: Scalar> LocalRow<S> {
    pub fn dot(&self, coef: &[S]) -> S {
        self.vals
            .iter()
            .zip(&coef[self.start..])
            .map(|(&v, &c)| v * c)
            .sum()
    }

    pub fn nnz(&self) -> usize {
        self.vals.iter().filter(|v| **v != S::zero()).count()
    }
}

#[derive(Debug, Clone)]
pub struct SplineModel<S> {
    r: usize,
    order: usize,
    knots: Vec<S>,
    breakpoints: Vec<S>,
    dim: usize,
    penalty: SymBand<S>,
    penalty_rows: Vec<LocalRow<S>>,
}

impl<S: Scalar> SplineModel<S> {
    /// Builds the basis on the summary's unique knots.
    pub fn build(summary: &DesignSummary<S>, r: usize) -> Result<Self> {
        Self::from_breakpoints(&summary.unique_knots, r)
    }

    /// Builds the basis on strictly increasing breakpoints `a = x_0 < … < x_last = b`.
    pub fn from_breakpoints(breakpoints: &[S], r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidConfig(
                "penalty order r must be at least 1".into(),
            ));
        }
        if breakpoints.len() < 2 {
            return Err(Error::TooFewPoints(breakpoints.len()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let order = 2 * r;
        let a = breakpoints[0];
        let b = breakpoints[breakpoints.len() - 1];
        let interior = &breakpoints[1..breakpoints.len() - 1];
        let mut knots = Vec::with_capacity(2 * order + interior.len());
        knots.extend(std::iter::repeat_n(a, order));
        knots.extend_from_slice(interior);
        knots.extend(std::iter::repeat_n(b, order));
        let dim = interior.len() + order;

        let mut model = Self {
            r,
            order,
            knots,
            breakpoints: breakpoints.to_vec(),
            dim,
            penalty: SymBand::zeros(dim, order - 1),
            penalty_rows: Vec::new(),
        };
        model.assemble_penalty();
        Ok(model)
    }

    fn assemble_penalty(&mut self) {
        let (nodes, weights) = gauss_legendre::<S>(self.r + 1);
        let half = S::lit(0.5);
        let mut rows = Vec::with_capacity((self.dim - self.order + 1) * nodes.len());
        for span in self.order - 1..self.dim {
            let (u0, u1) = (self.knots[span], self.knots[span + 1]);
            if u1 <= u0 {
                continue;
            }
            let mid = half * (u0 + u1);
            let rad = half * (u1 - u0);
            for (&xi, &wi) in nodes.iter().zip(&weights) {
                let x = mid + rad * xi;
                let ders = self.basis_derivs(span, x, self.r);
                let v = &ders[self.r];
                let wq = rad * wi;
                let start = span + 1 - self.order;
                for p in 0..self.order {
                    for q in p..self.order {
                        self.penalty.add(start + p, start + q, wq * v[p] * v[q]);
                    }
                }
                let sw = wq.sqrt();
                rows.push(LocalRow {
                    start,
                    vals: v.iter().map(|&x| sw * x).collect(),
                });
            }
        }
        self.penalty_rows = rows;
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn knots(&self) -> &[S] {
        &self.knots
    }

    pub fn breakpoints(&self) -> &[S] {
        &self.breakpoints
    }

    pub fn domain(&self) -> (S, S) {
        (
            self.breakpoints[0],
            self.breakpoints[self.breakpoints.len() - 1],
        )
    }

    /// Penalty matrix `P`, banded with `order − 1` off-diagonals.
    pub fn penalty(&self) -> &SymBand<S> {
        &self.penalty
    }

    /// Square-root quadrature rows with `Σ rowᵀ row = P`.
    pub fn penalty_rows(&self) -> &[LocalRow<S>] {
        &self.penalty_rows
    }

    /// `∫ |f^(r)|²` for coefficient vector `c`, summed over quadrature rows.
    pub fn roughness(&self, c: &[S]) -> S {
        self.penalty_rows
            .iter()
            .map(|row| {
                let v = row.dot(c);
                v * v
            })
            .sum()
    }

    /// Maps `t` into the domain, allowing `DEDUP_TOL` of slack at each end.
    pub fn check_domain(&self, t: S) -> Result<S> {
        let (a, b) = self.domain();
        let tol = S::lit(DEDUP_TOL);
        if !(t >= a - tol && t <= b + tol) {
            return Err(Error::OutOfDomain {
                t: t.as_f64(),
                a: a.as_f64(),
                b: b.as_f64(),
            });
        }
        Ok(t.max(a).min(b))
    }

    /// Knot span `μ` with `knots[μ] ≤ t < knots[μ+1]`; `t = b` maps to the last span.
    pub fn find_span(&self, t: S) -> usize {
        let last = self.dim - 1;
        if t >= self.knots[self.dim] {
            return last;
        }
        let (mut lo, mut hi) = (self.order - 1, self.dim);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if t < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// The `order` possibly-nonzero basis values on `span` (Cox–de Boor).
    pub fn basis_values(&self, span: usize, t: S) -> Vec<S> {
        let p = self.order - 1;
        let u = &self.knots;
        let mut n = vec![S::zero(); p + 1];
        let mut left = vec![S::zero(); p + 1];
        let mut right = vec![S::zero(); p + 1];
        n[0] = S::one();
        for j in 1..=p {
            left[j] = t - u[span + 1 - j];
            right[j] = u[span + j] - t;
            let mut saved = S::zero();
            for k in 0..j {
                let tmp = n[k] / (right[k + 1] + left[j - k]);
                n[k] = saved + right[k + 1] * tmp;
                saved = left[j - k] * tmp;
            }
            n[j] = saved;
        }
        n
    }

    /// Basis values and derivatives up to `nd` on `span`; `out[k][j]` is the
    /// `k`-th derivative of basis function `span − order + 1 + j`.
    pub fn basis_derivs(&self, span: usize, t: S, nd: usize) -> Vec<Vec<S>> {
        let p = self.order - 1;
        let u = &self.knots;
        let mut ndu = vec![vec![S::zero(); p + 1]; p + 1];
        let mut left = vec![S::zero(); p + 1];
        let mut right = vec![S::zero(); p + 1];
        ndu[0][0] = S::one();
        for j in 1..=p {
            left[j] = t - u[span + 1 - j];
            right[j] = u[span + j] - t;
            let mut saved = S::zero();
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let tmp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            ndu[j][j] = saved;
        }
        let mut ders = vec![vec![S::zero(); p + 1]; nd + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let pi = p as isize;
        let mut a = vec![vec![S::zero(); p + 1]; 2];
        for r in 0..=pi {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = S::one();
            for k in 1..=(nd.min(p) as isize) {
                let mut d = S::zero();
                let rk = r - k;
                let pk = pi - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[(pk + 1) as usize][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk as usize];
                }
                let j1 = if rk >= -1 { 1 } else { -rk };
                let j2 = if r - 1 <= pk { k - 1 } else { pi - r };
                for j in j1..=j2 {
                    let ju = j as usize;
                    a[s2][ju] =
                        (a[s1][ju] - a[s1][ju - 1]) / ndu[(pk + 1) as usize][(rk + j) as usize];
                    d = d + a[s2][ju] * ndu[(rk + j) as usize][pk as usize];
                }
                if r <= pk {
                    let ku = k as usize;
                    a[s2][ku] = -a[s1][ku - 1] / ndu[(pk + 1) as usize][r as usize];
                    d = d + a[s2][ku] * ndu[r as usize][pk as usize];
                }
                ders[k as usize][r as usize] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut fac = S::from_usize_exact(p);
        for (k, row) in ders.iter_mut().enumerate().skip(1) {
            if k > p {
                row.iter_mut().for_each(|v| *v = S::zero());
                continue;
            }
            for v in row.iter_mut() {
                *v = *v * fac;
            }
            fac = fac * S::from_usize_exact(p - k);
        }
        ders
    }

    /// Basis row `(B_1(t), …, B_dim(t))` in local form.
    pub fn row(&self, t: S) -> Result<LocalRow<S>> {
        let t = self.check_domain(t)?;
        let span = self.find_span(t);
        Ok(LocalRow {
            start: span + 1 - self.order,
            vals: self.basis_values(span, t),
        })
    }

    /// Coefficients of the constant function 1.
    pub fn constant_coefficients(&self) -> Vec<S> {
        vec![S::one(); self.dim]
    }
}

/// Design matrix with one local row per observation, in storage order.
#[derive(Debug, Clone)]
pub struct DesignMatrix<S> {
    pub rows: Vec<LocalRow<S>>,
    pub dim: usize,
}

impl<S: Scalar> DesignMatrix<S> {
    pub fn to_dense(&self) -> Vec<Vec<S>> {
        self.rows
            .iter()
            .map(|row| {
                let mut d = vec![S::zero(); self.dim];
                d[row.start..row.start + row.vals.len()].copy_from_slice(&row.vals);
                d
            })
            .collect()
    }
}

pub fn design_matrix<S: Scalar>(
    model: &SplineModel<S>,
    data: &ObservationSet<S>,
) -> Result<DesignMatrix<S>> {
    let rows = data
        .observations()
        .map(|(_, t, _)| model.row(t))
        .collect::<Result<Vec<_>>>()?;
    Ok(DesignMatrix {
        rows,
        dim: model.dim(),
    })
}

/// A spline in the basis of a shared model.
#[derive(Debug, Clone)]
pub struct SplineFunction<S> {
    model: Arc<SplineModel<S>>,
    coefficients: Vec<S>,
}

impl<S: Scalar> SplineFunction<S> {
    pub fn new(model: Arc<SplineModel<S>>, coefficients: Vec<S>) -> Result<Self> {
        if coefficients.len() != model.dim() {
            return Err(Error::InvalidConfig(format!(
                "expected {} coefficients, got {}",
                model.dim(),
                coefficients.len()
            )));
        }
        Ok(Self {
            model,
            coefficients,
        })
    }

    pub fn model(&self) -> &Arc<SplineModel<S>> {
        &self.model
    }

    pub fn coefficients(&self) -> &[S] {
        &self.coefficients
    }

    /// Value of the `deriv`-th derivative at `t`.
    ///
    /// Derivatives difference the local coefficients down to a spline of
    /// order `order − deriv`, which is then evaluated with de Boor's scheme.
    pub fn evaluate(&self, t: S, deriv: usize) -> Result<S> {
        let m = &*self.model;
        let k = m.order;
        if deriv >= k {
            return Err(Error::DerivativeOrder { deriv, order: k });
        }
        let t = m.check_domain(t)?;
        let span = m.find_span(t);
        let knots = &m.knots;
        let first = span + 1 - k;
        let mut c: Vec<S> = self.coefficients[first..=span].to_vec();
        for d in 1..=deriv {
            let scale = S::from_usize_exact(k - d);
            for idx in (d..k).rev() {
                let i = first + idx;
                let denom = knots[i + k - d] - knots[i];
                c[idx] = scale * (c[idx] - c[idx - 1]) / denom;
            }
        }
        let p = k - deriv - 1;
        let dv = &mut c[deriv..];
        for rr in 1..=p {
            for j in (rr..=p).rev() {
                let i = span + j - p;
                let alpha = (t - knots[i]) / (knots[i + p + 1 - rr] - knots[i]);
                dv[j] = (S::one() - alpha) * dv[j - 1] + alpha * dv[j];
            }
        }
        Ok(dv[p])
    }

    pub fn evaluate_many(&self, grid: &[S], deriv: usize) -> Result<Vec<S>> {
        grid.iter().map(|&t| self.evaluate(t, deriv)).collect()
    }
}
