//! Reproducing kernel of `W^{1,2}[0,1]` under `⟨f,g⟩ + λ⟨f′,g′⟩`.
//!
//! For `r = 1` the cosine system `φ_1 = 1`, `φ_j = √2 cos((j−1)πx)` is
//! orthonormal in `L²` and orthogonal in the λ-inner product with
//! `⟨φ_j, φ_j⟩_λ = 1 + λγ_j`, `γ_j = ((j−1)π)²`. The kernel is the series
//! `Σ φ_j(x)φ_j(y) / (1 + λγ_j)`, truncated at `N` terms.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_PLOT_TERMS: usize = 10_000;
pub const DEFAULT_NORM_TERMS: usize = 64;
pub const SUP_GRID_POINTS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec<S> {
    r: usize,
    lambda: S,
    terms: usize,
}

impl<S: Scalar> KernelSpec<S> {
    pub fn new(r: usize, lambda: S, terms: usize) -> Result<Self> {
        if r != 1 {
            return Err(Error::UnsupportedOrder(r));
        }
        if !(lambda > S::zero() && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if terms == 0 {
            return Err(Error::InvalidConfig(
                "truncation must keep at least one term".into(),
            ));
        }
        Ok(Self { r, lambda, terms })
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn lambda(&self) -> S {
        self.lambda
    }

    pub fn terms(&self) -> usize {
        self.terms
    }

    /// `1 + λγ_j` for 1-based `j`.
    pub fn norm_factor(&self, j: usize) -> S {
        S::one() + self.lambda * gamma::<S>(j)
    }
}

/// Eigenvalue `γ_j` of the derivative form, 1-based.
pub fn gamma<S: Scalar>(j: usize) -> S {
    let w = S::lit(PI) * S::from_usize_exact(j - 1);
    w * w
}

/// Cosine eigenfunction `φ_j(x)`, 1-based.
pub fn phi<S: Scalar>(j: usize, x: S) -> S {
    if j == 1 {
        S::one()
    } else {
        S::lit(2.0).sqrt() * (S::lit(PI) * S::from_usize_exact(j - 1) * x).cos()
    }
}

/// Derivative `φ_j′(x)`.
pub fn phi_prime<S: Scalar>(j: usize, x: S) -> S {
    if j == 1 {
        S::zero()
    } else {
        let w = S::lit(PI) * S::from_usize_exact(j - 1);
        -S::lit(2.0).sqrt() * w * (w * x).sin()
    }
}

fn check_unit<S: Scalar>(x: S) -> Result<()> {
    if x >= S::zero() && x <= S::one() {
        Ok(())
    } else {
        Err(Error::TOutOfRange(x.as_f64()))
    }
}

/// Truncated kernel series at `(x, y)`.
pub fn kernel_value<S: Scalar>(spec: &KernelSpec<S>, x: S, y: S) -> Result<S> {
    check_unit(x)?;
    check_unit(y)?;
    // cos(a)cos(b) = (cos(a−b) + cos(a+b)) / 2 keeps the summand symmetric in (x, y)
    let diff = S::lit(PI) * (x - y).abs();
    let sum = S::lit(PI) * (x + y);
    let mut acc = S::one();
    for j in 2..=spec.terms {
        let k = S::from_usize_exact(j - 1);
        let num = (k * diff).cos() + (k * sum).cos();
        acc = acc + num / spec.norm_factor(j);
    }
    Ok(acc)
}

/// A band-limited function `Σ_{j ≤ N} f_j φ_j` in cosine coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolevFunction<S> {
    pub coefficients: Vec<S>,
}

impl<S: Scalar> SobolevFunction<S> {
    pub fn new(coefficients: Vec<S>) -> Self {
        Self { coefficients }
    }

    /// The single eigenfunction `φ_j`.
    pub fn basis(j: usize, terms: usize) -> Self {
        let mut c = vec![S::zero(); terms.max(j)];
        c[j - 1] = S::one();
        Self::new(c)
    }

    /// Coordinates of `x ↦ R(x0, x)` truncated to `spec.terms()` terms.
    pub fn kernel_section(spec: &KernelSpec<S>, x0: S) -> Self {
        Self::new(
            (1..=spec.terms)
                .map(|j| phi::<S>(j, x0) / spec.norm_factor(j))
                .collect(),
        )
    }

    pub fn value(&self, x: S) -> S {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, &c)| c * phi(i + 1, x))
            .sum()
    }

    pub fn derivative(&self, x: S) -> S {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, &c)| c * phi_prime(i + 1, x))
            .sum()
    }

    pub fn l2_norm_sq(&self) -> S {
        self.coefficients.iter().map(|&c| c * c).sum()
    }
}

/// `⟨f, g⟩_{1,λ}` in coefficient space.
pub fn inner_product<S: Scalar>(
    spec: &KernelSpec<S>,
    f: &SobolevFunction<S>,
    g: &SobolevFunction<S>,
) -> S {
    f.coefficients
        .iter()
        .zip(&g.coefficients)
        .enumerate()
        .map(|(i, (&a, &b))| a * b * spec.norm_factor(i + 1))
        .sum()
}

/// `‖f‖_{1,λ} = sqrt(Σ f_j² (1 + λγ_j))`.
pub fn sobolev_norm<S: Scalar>(f: &SobolevFunction<S>, spec: &KernelSpec<S>) -> S {
    inner_product(spec, f, f).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReproducingCheck<S> {
    pub value: S,
    pub inner: S,
    pub gap: S,
}

/// Compares `f(x)` with `⟨R(x,·), f⟩_{1,λ}`.
pub fn reproducing_check<S: Scalar>(
    spec: &KernelSpec<S>,
    f: &SobolevFunction<S>,
    x: S,
) -> Result<ReproducingCheck<S>> {
    check_unit(x)?;
    let terms = spec.terms.max(f.coefficients.len());
    let widened = KernelSpec { terms, ..*spec };
    let section = SobolevFunction::kernel_section(&widened, x);
    let inner = inner_product(&widened, &section, f);
    let value = f.value(x);
    Ok(ReproducingCheck {
        value,
        inner,
        gap: (value - inner).abs(),
    })
}

/// `sup_x |f(x)| / (λ^{−1/4r} ‖f‖_{r,λ})` over an equispaced grid.
///
/// Requires `λ ∈ (0, 1]`, the range where the embedding constant is uniform.
pub fn embedding_ratio<S: Scalar>(spec: &KernelSpec<S>, f: &SobolevFunction<S>) -> Result<S> {
    if spec.lambda > S::one() {
        return Err(Error::InvalidConfig(format!(
            "embedding bound needs lambda in (0, 1], got {}",
            spec.lambda
        )));
    }
    let norm = sobolev_norm(f, spec);
    if norm == S::zero() {
        return Err(Error::ZeroFunction);
    }
    let g = SUP_GRID_POINTS;
    let sup = (0..g)
        .map(|i| {
            f.value(S::from_usize_exact(i) / S::from_usize_exact(g - 1))
                .abs()
        })
        .fold(S::zero(), S::max);
    let exponent = S::lit(-1.0 / (4.0 * spec.r as f64));
    Ok(sup / (spec.lambda.powf(exponent) * norm))
}

/// Samples `x ↦ R(x, y)` on `points` equispaced abscissae in `[0, 1]`.
pub fn kernel_curve<S: Scalar>(spec: &KernelSpec<S>, y: S, points: usize) -> Result<Vec<(S, S)>> {
    let denom = S::from_usize_exact(points.max(2) - 1);
    (0..points)
        .map(|i| {
            let x = S::from_usize_exact(i) / denom;
            kernel_value(spec, x, y).map(|v| (x, v))
        })
        .collect()
}
