//! Convex loss functions with their scores and IRLS weights.
//!
//! Every kind exposes `rho`, `psi = rho'` and `weight(x) = psi(x) / x`, the
//! latter continuous-extended at zero (averaging one-sided limits for the
//! asymmetric kinds). The pure check loss is only available through its
//! smoothed form, which has a bounded weight near the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Huber tuning constant giving 85% Gaussian efficiency.
pub const DEFAULT_HUBER_K: f64 = 0.70;

/// Relative size of the default smoothing band for the check loss.
pub const DEFAULT_CHECK_EPS_IQR_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind<S> {
    Squared,
    Huber { k: S },
    Lq { q: S },
    CheckSmoothed { tau: S, eps: S },
    Expectile { alpha: S },
    LogCosh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    #[default]
    Raw,
    /// Residuals are standardized by the MAD of a preliminary ridge fit.
    PreliminaryMad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec<S> {
    pub kind: LossKind<S>,
    pub scale_mode: ScaleMode,
}

impl<S: Scalar> LossSpec<S> {
    pub fn raw(kind: LossKind<S>) -> Self {
        Self {
            kind,
            scale_mode: ScaleMode::Raw,
        }
    }

    pub fn squared() -> Self {
        Self::raw(LossKind::Squared)
    }

    pub fn huber(k: S) -> Self {
        Self::raw(LossKind::Huber { k })
    }
}

/// Evaluable loss: a validated kind plus a residual scale.
///
/// With scale `s` the loss is `s² ρ(x / s)`, so the IRLS weight becomes
/// `w(x / s)` and `s = 1` recovers the raw loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loss<S> {
    kind: LossKind<S>,
    scale: S,
}

pub fn make_loss<S: Scalar>(spec: &LossSpec<S>) -> Result<Loss<S>> {
    Loss::new(spec.kind)
}

fn in_open_unit<S: Scalar>(v: S) -> bool {
    v > S::zero() && v < S::one()
}

impl<S: Scalar> Loss<S> {
    pub fn new(kind: LossKind<S>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidTuning(msg));
        match kind {
            LossKind::Huber { k } if !(k > S::zero() && k.is_finite()) => {
                return bad(format!("Huber k must be positive, got {k}"))
            }
            LossKind::Lq { q } if !(q > S::one() && q <= S::lit(2.0)) => {
                return bad(format!(
                    "L_q exponent must lie in (1, 2], got {q}; use the smoothed check loss with tau = 0.5 for q = 1"
                ))
            }
            LossKind::CheckSmoothed { tau, .. } if !in_open_unit(tau) => {
                return bad(format!("tau must lie in (0, 1), got {tau}"))
            }
            LossKind::CheckSmoothed { eps, .. } if !(eps > S::zero() && eps.is_finite()) => {
                return bad(format!("check-loss smoothing eps must be positive, got {eps}"))
            }
            LossKind::Expectile { alpha } if !in_open_unit(alpha) => {
                return bad(format!("alpha must lie in (0, 1), got {alpha}"))
            }
            _ => {}
        }
        Ok(Self {
            kind,
            scale: S::one(),
        })
    }

    pub fn kind(&self) -> LossKind<S> {
        self.kind
    }

    pub fn scale(&self) -> S {
        self.scale
    }

    /// Same loss applied to residuals divided by `scale`.
    pub fn with_scale(mut self, scale: S) -> Self {
        self.scale = scale;
        self
    }

    pub fn rho(&self, x: S) -> S {
        let s = self.scale;
        s * s * self.rho_unit(x / s)
    }

    pub fn psi(&self, x: S) -> S {
        let s = self.scale;
        s * self.psi_unit(x / s)
    }

    pub fn weight(&self, x: S) -> S {
        self.weight_unit(x / self.scale)
    }

    /// Continuity value of the weight at zero.
    pub fn weight_at_zero(&self) -> S {
        let two = S::lit(2.0);
        match self.kind {
            LossKind::Squared => two,
            LossKind::Huber { .. } | LossKind::LogCosh => S::one(),
            LossKind::Lq { q } => {
                if q == two {
                    two
                } else {
                    S::infinity()
                }
            }
            LossKind::CheckSmoothed { eps, .. } => S::lit(0.5) / eps,
            LossKind::Expectile { .. } => S::lit(0.5),
        }
    }

    fn rho_unit(&self, x: S) -> S {
        let half = S::lit(0.5);
        match self.kind {
            LossKind::Squared => x * x,
            LossKind::Huber { k } => {
                let ax = x.abs();
                if ax <= k {
                    half * x * x
                } else {
                    k * (ax - half * k)
                }
            }
            LossKind::Lq { q } => x.abs().powf(q),
            LossKind::CheckSmoothed { tau, eps } => {
                let slope = if x < S::zero() { S::one() - tau } else { tau };
                let ax = x.abs();
                if ax < eps {
                    slope * x * x / (S::lit(2.0) * eps)
                } else {
                    slope * (ax - half * eps)
                }
            }
            LossKind::Expectile { alpha } => {
                let a = if x <= S::zero() {
                    S::one() - alpha
                } else {
                    alpha
                };
                half * a * x * x
            }
            LossKind::LogCosh => {
                // log cosh x = |x| + log(1 + e^{-2|x|}) - log 2
                let ax = x.abs();
                ax + (-S::lit(2.0) * ax).exp().ln_1p() - S::lit(std::f64::consts::LN_2)
            }
        }
    }

    fn psi_unit(&self, x: S) -> S {
        match self.kind {
            LossKind::Squared => S::lit(2.0) * x,
            LossKind::Huber { k } => x.max(-k).min(k),
            LossKind::Lq { q } => q * x.abs().powf(q - S::one()) * x.signum0(),
            LossKind::CheckSmoothed { tau, eps } => {
                let slope = if x < S::zero() { S::one() - tau } else { tau };
                if x.abs() < eps {
                    slope * x / eps
                } else {
                    slope * x.signum()
                }
            }
            LossKind::Expectile { alpha } => {
                let a = if x <= S::zero() {
                    S::one() - alpha
                } else {
                    alpha
                };
                a * x
            }
            LossKind::LogCosh => x.tanh(),
        }
    }

    fn weight_unit(&self, x: S) -> S {
        if x == S::zero() {
            return self.weight_at_zero();
        }
        match self.kind {
            LossKind::Squared => S::lit(2.0),
            LossKind::Huber { k } => {
                let ax = x.abs();
                if ax <= k {
                    S::one()
                } else {
                    k / ax
                }
            }
            LossKind::Lq { q } => q * x.abs().powf(q - S::lit(2.0)),
            LossKind::CheckSmoothed { tau, eps } => {
                let slope = if x < S::zero() { S::one() - tau } else { tau };
                let ax = x.abs();
                if ax < eps {
                    slope / eps
                } else {
                    slope / ax
                }
            }
            LossKind::Expectile { alpha } => {
                if x <= S::zero() {
                    S::one() - alpha
                } else {
                    alpha
                }
            }
            LossKind::LogCosh => {
                if x.abs() < S::lit(1e-4) {
                    // tanh(x)/x = 1 - x²/3 + 2x⁴/15
                    let x2 = x * x;
                    S::one() - x2 / S::lit(3.0) + S::lit(2.0 / 15.0) * x2 * x2
                } else {
                    x.tanh() / x
                }
            }
        }
    }

    /// Short label for reports.
    pub fn label(&self) -> String {
        match self.kind {
            LossKind::Squared => "squared".into(),
            LossKind::Huber { k } => format!("huber(k={k})"),
            LossKind::Lq { q } => format!("lq(q={q})"),
            LossKind::CheckSmoothed { tau, eps } => format!("quantile(tau={tau},eps={eps})"),
            LossKind::Expectile { alpha } => format!("expectile(alpha={alpha})"),
            LossKind::LogCosh => "logcosh".into(),
        }
    }
}

trait Signum0 {
    fn signum0(self) -> Self;
}

impl<S: Scalar> Signum0 for S {
    fn signum0(self) -> S {
        if self == S::zero() {
            S::zero()
        } else {
            self.signum()
        }
    }
}

/// Median of a slice (average of the two middle values for even length).
pub fn median<S: Scalar>(values: &[S]) -> S {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) * S::lit(0.5)
    }
}

/// Normalized median absolute deviation, `1.4826 · MAD`, with a unit
/// fallback when the MAD is degenerate.
pub fn preliminary_scale<S: Scalar>(residuals: &[S]) -> S {
    assert!(!residuals.is_empty(), "preliminary_scale needs residuals");
    let med = median(residuals);
    let dev: Vec<S> = residuals.iter().map(|&r| (r - med).abs()).collect();
    let mad = median(&dev);
    if mad < S::lit(1e-12) {
        S::one()
    } else {
        S::lit(1.4826) * mad
    }
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile<S: Scalar>(values: &[S], p: f64) -> S {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = p * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = S::lit(h - lo as f64);
    v[lo] + (v[hi] - v[lo]) * frac
}

/// Default smoothing band for the check loss: a fixed fraction of the
/// response interquartile range (unit IQR when the responses are constant).
pub fn default_check_eps<S: Scalar>(responses: &[S]) -> S {
    let iqr = quantile(responses, 0.75) - quantile(responses, 0.25);
    let iqr = if iqr > S::zero() { iqr } else { S::one() };
    S::lit(DEFAULT_CHECK_EPS_IQR_FRACTION) * iqr
}
