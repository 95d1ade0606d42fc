//! Data-generating processes and Monte Carlo replication.
//!
//! Curves follow a truncated Karhunen–Loève expansion of Brownian motion with
//! heavy-tailed scores,
//!
//! ```text
//!   X(t) = μ(t) + √2 Σ_{k=1}^{K} W_k sin((k − ½)πt) / ((k − ½)π),   W_k ~ t₅
//!   Y_ij = X_i(T_ij) + σ ζ_ij
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Normal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{SplineFunction, SplineModel};
use crate::error::{Error, Result};
use crate::lambda_select::select;
use crate::loss::LossSpec;
use crate::model::{summarize, ObservationSet, Subject, DEDUP_TOL};
use crate::solver::{FitConfig, LambdaPolicy};

pub const DEFAULT_KL_TERMS: usize = 50;
pub const SCORE_DOF: f64 = 5.0;
pub const DEFAULT_REPS: usize = 200;

/// 64-bit finalizer used to derive per-replicate seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn replicate_seed(master: u64, index: usize) -> u64 {
    splitmix64(master.wrapping_add(index as u64))
}

type MeanFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum MeanKind {
    /// `sin(6πt)(t + 1)`
    Sinusoidal,
    /// `3 exp(−(0.25 − t)² / 0.1)`
    Bump,
    Custom(MeanFn),
}

impl MeanKind {
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        MeanKind::Custom(Arc::new(f))
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            MeanKind::Sinusoidal => (6.0 * PI * t).sin() * (t + 1.0),
            MeanKind::Bump => 3.0 * (-(0.25 - t).powi(2) / 0.1).exp(),
            MeanKind::Custom(f) => f(t),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            MeanKind::Sinusoidal => "sinusoidal",
            MeanKind::Bump => "bump",
            MeanKind::Custom(_) => "custom",
        }
    }
}

impl fmt::Debug for MeanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorLaw {
    Gaussian,
    T3,
    /// Noncentral t₃ with noncentrality 0.5.
    SkewT3,
    /// `0.85·N(0,1) + 0.15·N(0,9)`
    MixGauss,
    /// `N(0,1) / U(0,1)`
    Slash,
}

impl ErrorLaw {
    pub const ALL: [ErrorLaw; 5] = [
        ErrorLaw::Gaussian,
        ErrorLaw::T3,
        ErrorLaw::SkewT3,
        ErrorLaw::MixGauss,
        ErrorLaw::Slash,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ErrorLaw::Gaussian => "gaussian",
            ErrorLaw::T3 => "t3",
            ErrorLaw::SkewT3 => "skew_t3",
            ErrorLaw::MixGauss => "mix_gauss",
            ErrorLaw::Slash => "slash",
        }
    }
}

/// Draws from one error law.
pub struct ErrorSampler {
    law: ErrorLaw,
    normal: Normal<f64>,
    t3: StudentT<f64>,
    chi3: ChiSquared<f64>,
}

impl ErrorSampler {
    pub fn new(law: ErrorLaw) -> Self {
        Self {
            law,
            normal: Normal::new(0.0, 1.0).expect("standard normal"),
            t3: StudentT::new(3.0).expect("t3"),
            chi3: ChiSquared::new(3.0).expect("chi-squared 3"),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.law {
            ErrorLaw::Gaussian => self.normal.sample(rng),
            ErrorLaw::T3 => self.t3.sample(rng),
            ErrorLaw::SkewT3 => {
                let z = 0.5 + self.normal.sample(rng);
                z / (self.chi3.sample(rng) / 3.0).sqrt()
            }
            ErrorLaw::MixGauss => {
                let z = self.normal.sample(rng);
                if rng.random::<f64>() < 0.15 {
                    3.0 * z
                } else {
                    z
                }
            }
            ErrorLaw::Slash => {
                let u: f64 = rng.sample(Open01);
                self.normal.sample(rng) / u
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectCounts {
    Fixed(usize),
    PerSubject(Vec<usize>),
}

impl SubjectCounts {
    fn count(&self, i: usize) -> usize {
        match self {
            SubjectCounts::Fixed(m) => *m,
            SubjectCounts::PerSubject(ms) => ms[i],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// `T_j = j/(m+1)` shared by all subjects.
    Common,
    /// `T_ij ~ U(0,1)` drawn per subject.
    Independent,
}

#[derive(Debug, Clone)]
pub struct SimDesign {
    pub mean: MeanKind,
    pub n: usize,
    pub m: SubjectCounts,
    pub sampling: Sampling,
    pub sigma: f64,
    pub error_law: ErrorLaw,
    pub kl_terms: usize,
    pub seed: u64,
}

impl SimDesign {
    /// Common-design cell with the default expansion length.
    pub fn common(
        mean: MeanKind,
        n: usize,
        m: usize,
        sigma: f64,
        error_law: ErrorLaw,
        seed: u64,
    ) -> Self {
        Self {
            mean,
            n,
            m: SubjectCounts::Fixed(m),
            sampling: Sampling::Common,
            sigma,
            error_law,
            kl_terms: DEFAULT_KL_TERMS,
            seed,
        }
    }

    pub fn independent(
        mean: MeanKind,
        n: usize,
        m: usize,
        sigma: f64,
        error_law: ErrorLaw,
        seed: u64,
    ) -> Self {
        Self {
            sampling: Sampling::Independent,
            ..Self::common(mean, n, m, sigma, error_law, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        match &self.m {
            SubjectCounts::Fixed(0) => {
                return Err(Error::InvalidConfig("m must be at least 1".into()))
            }
            SubjectCounts::PerSubject(ms) => {
                if ms.len() != self.n {
                    return Err(Error::InvalidConfig(format!(
                        "{} per-subject counts for n = {}",
                        ms.len(),
                        self.n
                    )));
                }
                if ms.contains(&0) {
                    return Err(Error::InvalidConfig("every m_i must be at least 1".into()));
                }
            }
            SubjectCounts::Fixed(_) => {}
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be non-negative, got {}",
                self.sigma
            )));
        }
        if self.kl_terms == 0 {
            return Err(Error::InvalidConfig("kl_terms must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// `T_j = j/(m+1)`, `j = 1..m`.
pub fn common_grid(m: usize) -> Vec<f64> {
    (1..=m).map(|j| j as f64 / (m + 1) as f64).collect()
}

/// Random curve `X(t) − μ(t)` represented by its scores.
#[derive(Debug, Clone)]
pub struct KlCurve {
    scores: Vec<f64>,
}

impl KlCurve {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, terms: usize) -> Self {
        let t5 = StudentT::new(SCORE_DOF).expect("t5");
        Self {
            scores: (0..terms).map(|_| t5.sample(rng)).collect(),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let acc: f64 = self
            .scores
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let f = (k as f64 + 0.5) * PI;
                w * (f * t).sin() / f
            })
            .sum();
        std::f64::consts::SQRT_2 * acc
    }
}

#[derive(Debug, Clone)]
pub struct SimSample {
    pub data: ObservationSet<f64>,
    /// Design-grid abscissae: `T_j` for the common design, the sorted pooled
    /// sampling points otherwise.
    pub grid: Vec<f64>,
    pub true_mean: Vec<f64>,
}

/// Generates one dataset. Identical designs give bitwise identical output.
pub fn generate(design: &SimDesign) -> Result<SimSample> {
    design.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(design.seed);
    let errors = ErrorSampler::new(design.error_law);
    let mut subjects = Vec::with_capacity(design.n);
    for i in 0..design.n {
        let m = design.m.count(i);
        let curve = KlCurve::draw(&mut rng, design.kl_terms);
        let t = match design.sampling {
            Sampling::Common => common_grid(m),
            Sampling::Independent => {
                let mut t: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
                t.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
                t
            }
        };
        let y = t
            .iter()
            .map(|&tj| {
                let x = design.mean.value(tj) + curve.value(tj);
                if design.sigma == 0.0 {
                    x
                } else {
                    x + design.sigma * errors.sample(&mut rng)
                }
            })
            .collect();
        subjects.push(Subject { id: i as i64, t, y });
    }
    let grid = match (&design.sampling, &design.m) {
        (Sampling::Common, SubjectCounts::Fixed(m)) => common_grid(*m),
        _ => {
            let mut all: Vec<f64> = subjects.iter().flat_map(|s| s.t.iter().copied()).collect();
            all.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            all.dedup();
            all
        }
    };
    let true_mean = grid.iter().map(|&t| design.mean.value(t)).collect();
    Ok(SimSample {
        data: ObservationSet::from_subjects(subjects)?,
        grid,
        true_mean,
    })
}

/// `m⁻¹ Σ_j (μ̂(t_j) − μ(t_j))²`.
pub fn mse(fitted: &SplineFunction<f64>, true_mean: &[f64], grid: &[f64]) -> Result<f64> {
    if grid.len() != true_mean.len() {
        return Err(Error::InvalidConfig(format!(
            "grid has {} points but {} mean values",
            grid.len(),
            true_mean.len()
        )));
    }
    if grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    let fitted = fitted.evaluate_many(grid, 0)?;
    let sum: f64 = fitted
        .iter()
        .zip(true_mean)
        .map(|(f, m)| (f - m) * (f - m))
        .sum();
    Ok(sum / grid.len() as f64)
}

/// Where the MSE of a replicate is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MseGrid {
    /// The sample's own design grid.
    Design,
    /// `k` equispaced points spanning the fitted domain.
    Dense(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    pub loss: LossSpec<f64>,
    pub r: usize,
    pub lambda: LambdaPolicy<f64>,
}

impl Estimator {
    pub fn new(loss: LossSpec<f64>, r: usize, lambda: LambdaPolicy<f64>) -> Self {
        Self { loss, r, lambda }
    }

    pub fn label(&self) -> String {
        let loss = crate::loss::Loss::new(self.loss.kind)
            .map(|l| l.label())
            .unwrap_or_else(|_| "invalid".into());
        format!("{loss}/r={}", self.r)
    }

    /// Fits one sample and measures its MSE.
    pub fn evaluate(&self, sample: &SimSample, mean: &MeanKind, grid: MseGrid) -> Result<f64> {
        let summary = summarize(&sample.data, DEDUP_TOL);
        let model = Arc::new(SplineModel::build(&summary, self.r)?);
        let config = FitConfig::new(self.r, self.lambda);
        config.validate()?;
        let sel = select(
            &sample.data,
            model.clone(),
            &self.loss,
            &self.lambda,
            &config,
        )?;
        match grid {
            MseGrid::Design => mse(&sel.fit.function, &sample.true_mean, &sample.grid),
            MseGrid::Dense(k) => {
                let (a, b) = model.domain();
                let k = k.max(2);
                let pts: Vec<f64> = (0..k)
                    .map(|i| a + (b - a) * i as f64 / (k - 1) as f64)
                    .collect();
                let truth: Vec<f64> = pts.iter().map(|&t| mean.value(t)).collect();
                mse(&sel.fit.function, &truth, &pts)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub label: String,
    /// MSE per replicate, NaN where the replicate failed.
    pub mses: Vec<f64>,
    pub mean_mse: f64,
    /// Sample standard deviation over `√reps`.
    pub stderr_mse: f64,
    pub reps: usize,
    /// Indices of replicates whose fits all failed.
    pub failed: Vec<usize>,
}

impl MonteCarloReport {
    /// Aggregates per-replicate values in index order.
    pub fn from_mses(label: String, mses: Vec<f64>) -> Self {
        let failed: Vec<usize> = mses
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_nan())
            .map(|(i, _)| i)
            .collect();
        let ok: Vec<f64> = mses.iter().copied().filter(|v| !v.is_nan()).collect();
        let k = ok.len();
        let mean_mse = if k == 0 {
            f64::NAN
        } else {
            ok.iter().sum::<f64>() / k as f64
        };
        let stderr_mse = if k < 2 {
            f64::NAN
        } else {
            let var = ok.iter().map(|v| (v - mean_mse).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        };
        Self {
            label,
            reps: mses.len(),
            mses,
            mean_mse,
            stderr_mse,
            failed,
        }
    }
}

/// Runs `reps` independent replicates of one design/estimator cell.
///
/// Replicate `i` uses seed `splitmix64(design.seed + i)`; replicates run in
/// parallel and are aggregated in index order.
pub fn run_cell(
    design: &SimDesign,
    estimator: &Estimator,
    reps: usize,
    grid: MseGrid,
) -> Result<MonteCarloReport> {
    if reps < 2 {
        return Err(Error::InvalidConfig(
            "a cell needs at least two replicates".into(),
        ));
    }
    design.validate()?;
    let outcomes: Vec<Result<f64>> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let sample = generate(&design.with_seed(replicate_seed(design.seed, i)))?;
            match estimator.evaluate(&sample, &design.mean, grid) {
                Err(Error::AllFitsFailed) => Ok(f64::NAN),
                other => other,
            }
        })
        .collect();
    let mses = outcomes.into_iter().collect::<Result<Vec<f64>>>()?;
    let label = format!(
        "{}/{}/{}/sigma={}",
        estimator.label(),
        design.mean.label(),
        design.error_law.label(),
        design.sigma
    );
    Ok(MonteCarloReport::from_mses(label, mses))
}

/// How the per-subject count grows with `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MPolicy {
    Fixed(usize),
    /// `m = round(c·√n)`.
    SqrtScaled(f64),
}

impl MPolicy {
    pub fn m_for(self, n: usize) -> usize {
        match self {
            MPolicy::Fixed(m) => m,
            MPolicy::SqrtScaled(c) => ((c * (n as f64).sqrt()).round() as usize).max(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RateExperiment {
    pub mean: MeanKind,
    pub sampling: Sampling,
    pub sigma: f64,
    pub error_law: ErrorLaw,
    pub estimator: Estimator,
    pub n_sequence: Vec<usize>,
    pub m_policy: MPolicy,
    pub reps: usize,
    pub grid: MseGrid,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub m: usize,
    pub report: MonteCarloReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub points: Vec<RatePoint>,
    /// Least-squares slope of `log(mean MSE)` against `log n`.
    pub slope: f64,
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn rate_experiment(exp: &RateExperiment) -> Result<RateReport> {
    if exp.n_sequence.len() < 3 || exp.n_sequence.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "n_sequence must be strictly increasing with at least three entries".into(),
        ));
    }
    let mut points = Vec::with_capacity(exp.n_sequence.len());
    for &n in &exp.n_sequence {
        let m = exp.m_policy.m_for(n);
        let design = SimDesign {
            mean: exp.mean.clone(),
            n,
            m: SubjectCounts::Fixed(m),
            sampling: exp.sampling,
            sigma: exp.sigma,
            error_law: exp.error_law,
            kl_terms: DEFAULT_KL_TERMS,
            seed: splitmix64(exp.seed ^ ((n as u64) << 32)),
        };
        let report = run_cell(&design, &exp.estimator, exp.reps, exp.grid)?;
        points.push(RatePoint { n, m, report });
    }
    let x: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.report.mean_mse.ln()).collect();
    Ok(RateReport {
        slope: ls_slope(&x, &y),
        points,
    })
}
