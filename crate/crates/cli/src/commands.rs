use std::path::Path;
use std::sync::Arc;

use mspline::loss::{default_check_eps, DEFAULT_CHECK_EPS_IQR_FRACTION};
use mspline::rkhs::kernel_curve;
use mspline::simulate::{
    rate_experiment, run_cell, MPolicy, MseGrid, RateExperiment, Sampling, SubjectCounts,
};
use mspline::{
    select, summarize, ErrorLaw, Estimator, FitConfig, KernelSpec, LambdaPolicy, Loss, LossKind,
    LossSpec, MeanKind, ObservationSet, Selection, SimDesign, SplineModel, DEDUP_TOL,
};
use serde::Serialize;

use crate::args::{
    DesignName, FitArgs, KernelArgs, LawName, LossArgs, LossName, MeanName, QuantileArgs, RateArgs,
    RatePreset, SimulateArgs, SmoothingArgs,
};
use crate::error::{CliError, Result};
use crate::io::{ensure_dir, load, num, write_csv, write_json, Rescale};

/// Validated estimation settings shared by the data-driven commands.
#[derive(Debug, Clone, Copy)]
pub struct RunConfig {
    pub loss: LossSpec<f64>,
    pub r: usize,
    pub policy: LambdaPolicy<f64>,
}

impl RunConfig {
    /// `responses` sets the default quantile band; without them a unit
    /// response spread is assumed.
    pub fn new(
        loss: &LossArgs,
        smoothing: &SmoothingArgs,
        responses: Option<&[f64]>,
    ) -> Result<Self> {
        let kind = match loss.loss {
            LossName::Squared => LossKind::Squared,
            LossName::Huber => LossKind::Huber { k: loss.k },
            LossName::Lq => LossKind::Lq { q: loss.q },
            LossName::Quantile => LossKind::CheckSmoothed {
                tau: loss.tau,
                eps: check_eps(loss.eps, responses),
            },
            LossName::Expectile => LossKind::Expectile { alpha: loss.alpha },
            LossName::Logcosh => LossKind::LogCosh,
        };
        Self::with_kind(kind, smoothing)
    }

    pub fn with_kind(kind: LossKind<f64>, smoothing: &SmoothingArgs) -> Result<Self> {
        Loss::new(kind)?;
        let policy = lambda_policy(smoothing)?;
        FitConfig::new(smoothing.r, policy).validate()?;
        Ok(Self {
            loss: LossSpec::raw(kind),
            r: smoothing.r,
            policy,
        })
    }

    pub fn fit_config(&self) -> FitConfig<f64> {
        FitConfig::new(self.r, self.policy)
    }

    pub fn estimator(&self) -> Estimator {
        Estimator::new(self.loss, self.r, self.policy)
    }

    fn select(&self, data: &ObservationSet<f64>) -> Result<Selection<f64>> {
        let model = Arc::new(SplineModel::build(&summarize(data, DEDUP_TOL), self.r)?);
        Ok(select(
            data,
            model,
            &self.loss,
            &self.policy,
            &self.fit_config(),
        )?)
    }
}

fn check_eps(eps: Option<f64>, responses: Option<&[f64]>) -> f64 {
    match (eps, responses) {
        (Some(e), _) => e,
        (None, Some(y)) if !y.is_empty() => default_check_eps(y),
        _ => DEFAULT_CHECK_EPS_IQR_FRACTION,
    }
}

fn lambda_policy(args: &SmoothingArgs) -> Result<LambdaPolicy<f64>> {
    match (args.lambda, &args.gcv_grid) {
        (Some(_), Some(_)) => Err(CliError::Config(
            "--lambda and --gcv-grid are mutually exclusive".into(),
        )),
        (Some(lambda), None) => Ok(LambdaPolicy::Fixed { lambda }),
        (None, Some(g)) => {
            let count = g[2];
            if !(count >= 1.0 && count.fract() == 0.0) || !(g[1] >= g[0]) {
                return Err(CliError::Config(format!(
                    "--gcv-grid needs lo <= hi and a positive integer count, got {g:?}"
                )));
            }
            Ok(LambdaPolicy::GcvGrid {
                log10_min: g[0],
                log10_max: g[1],
                count: count as usize,
            })
        }
        (None, None) => Ok(LambdaPolicy::default_grid()),
    }
}

fn unit_grid(domain: (f64, f64), size: usize) -> Result<Vec<f64>> {
    if size < 2 {
        return Err(CliError::Config("--grid-size must be at least 2".into()));
    }
    let (a, b) = domain;
    Ok((0..size)
        .map(|i| {
            if i + 1 == size {
                b
            } else {
                a + (b - a) * i as f64 / (size - 1) as f64
            }
        })
        .collect())
}

fn responses(data: &ObservationSet<f64>) -> Vec<f64> {
    data.subjects()
        .iter()
        .flat_map(|s| s.y.iter().copied())
        .collect()
}

#[derive(Serialize)]
struct FitMeta {
    loss: LossKind<f64>,
    loss_label: String,
    r: usize,
    lambda_policy: LambdaPolicy<f64>,
    lambda: f64,
    iterations: usize,
    converged: bool,
    effective_dof: f64,
    objective: f64,
    scale: f64,
    n_subjects: usize,
    total_points: usize,
    rescale: Option<Rescale>,
    breakpoints: Vec<f64>,
    knots: Vec<f64>,
    coefficients: Vec<f64>,
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let (data, map) = load(&args.input.input, args.input.rescale)?;
    let cfg = RunConfig::new(&args.loss, &args.smoothing, Some(&responses(&data)))?;
    let sel = cfg.select(&data)?;
    let out = &args.input.out;
    ensure_dir(out)?;

    let f = &sel.fit.function;
    let model = f.model();
    let grid = unit_grid(model.domain(), args.input.grid_size)?;
    let values = f.evaluate_many(&grid, 0)?;
    write_csv(
        out,
        "fitted.csv",
        &["t", "mu_hat"],
        grid.iter()
            .zip(&values)
            .map(|(&u, &v)| vec![num(map.raw_of(u)), num(v)]),
    )?;

    let mut deriv_rows = Vec::new();
    for s in 0..=cfg.r {
        let d = f.evaluate_many(&grid, s)?;
        let factor = map.derivative_factor(s);
        for (&u, &v) in grid.iter().zip(&d) {
            deriv_rows.push(vec![num(map.raw_of(u)), s.to_string(), num(v * factor)]);
        }
    }
    write_csv(out, "derivatives.csv", &["t", "s", "value"], deriv_rows)?;
    write_trace(out, &sel)?;

    let meta = FitMeta {
        loss: cfg.loss.kind,
        loss_label: Loss::new(cfg.loss.kind)?.label(),
        r: cfg.r,
        lambda_policy: cfg.policy,
        lambda: sel.fit.lambda_used,
        iterations: sel.fit.iterations,
        converged: sel.fit.converged,
        effective_dof: sel.fit.effective_dof(),
        objective: sel.fit.objective,
        scale: sel.fit.scale,
        n_subjects: data.n_subjects(),
        total_points: data.total_points(),
        rescale: args.input.rescale.then_some(map),
        breakpoints: model.breakpoints().to_vec(),
        knots: model.knots().to_vec(),
        coefficients: sel.fit.coefficients().to_vec(),
    };
    write_json(out, "fit_meta.json", &meta)
}

fn write_trace(out: &Path, sel: &Selection<f64>) -> Result<()> {
    let t = &sel.trace;
    write_csv(
        out,
        "gcv_trace.csv",
        &["lambda", "gcv", "converged"],
        t.lambdas
            .iter()
            .zip(&t.gcv_values)
            .zip(&t.fits_converged)
            .map(|((&l, &g), &c)| vec![num(l), num(g), c.to_string()]),
    )
}

#[derive(Serialize)]
struct QuantileMeta {
    tau: f64,
    eps: f64,
    lambda: f64,
    iterations: usize,
    converged: bool,
    effective_dof: f64,
    coefficients: Vec<f64>,
}

pub fn quantiles(args: &QuantileArgs) -> Result<()> {
    if args.tau.is_empty() {
        return Err(CliError::Config("the tau list is empty".into()));
    }
    if args.tau.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
        return Err(CliError::Config("tau values must lie in (0, 1)".into()));
    }
    if args.tau.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config(
            "tau values must be strictly increasing".into(),
        ));
    }
    let (data, map) = load(&args.input.input, args.input.rescale)?;
    let eps = check_eps(args.eps, Some(&responses(&data)));
    let out = &args.input.out;
    ensure_dir(out)?;

    let mut rows = Vec::new();
    let mut metas = Vec::new();
    for &tau in &args.tau {
        let cfg = RunConfig::with_kind(LossKind::CheckSmoothed { tau, eps }, &args.smoothing)?;
        let sel = cfg.select(&data)?;
        let f = &sel.fit.function;
        let grid = unit_grid(f.model().domain(), args.input.grid_size)?;
        for (&u, v) in grid.iter().zip(f.evaluate_many(&grid, 0)?) {
            rows.push(vec![num(map.raw_of(u)), num(tau), num(v)]);
        }
        metas.push(QuantileMeta {
            tau,
            eps,
            lambda: sel.fit.lambda_used,
            iterations: sel.fit.iterations,
            converged: sel.fit.converged,
            effective_dof: sel.fit.effective_dof(),
            coefficients: sel.fit.coefficients().to_vec(),
        });
    }
    write_csv(out, "quantiles.csv", &["t", "tau", "value"], rows)?;
    write_json(out, "quantile_meta.json", &metas)
}

fn mean_kind(m: MeanName) -> MeanKind {
    match m {
        MeanName::Sinusoidal => MeanKind::Sinusoidal,
        MeanName::Bump => MeanKind::Bump,
    }
}

fn error_law(l: LawName) -> ErrorLaw {
    match l {
        LawName::Gaussian => ErrorLaw::Gaussian,
        LawName::T3 => ErrorLaw::T3,
        LawName::SkewT3 => ErrorLaw::SkewT3,
        LawName::MixGauss => ErrorLaw::MixGauss,
        LawName::Slash => ErrorLaw::Slash,
    }
}

fn sampling(d: DesignName) -> Sampling {
    match d {
        DesignName::Common => Sampling::Common,
        DesignName::Independent => Sampling::Independent,
    }
}

const CELL_HEADER: [&str; 11] = [
    "estimator",
    "mean",
    "error_law",
    "design",
    "sigma",
    "n",
    "m",
    "reps",
    "failed",
    "mean_mse",
    "stderr_mse",
];

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let c = &args.common;
    let cfg = RunConfig::new(&c.loss, &c.smoothing, None)?;
    let design = SimDesign {
        mean: mean_kind(c.mean),
        n: args.n,
        m: SubjectCounts::Fixed(args.m),
        sampling: sampling(c.design),
        sigma: c.sigma,
        error_law: error_law(c.error_law),
        kl_terms: mspline::simulate::DEFAULT_KL_TERMS,
        seed: c.seed,
    };
    let grid = args.grid_size.map_or(MseGrid::Design, MseGrid::Dense);
    let est = cfg.estimator();
    let report = run_cell(&design, &est, c.reps, grid)?;
    ensure_dir(&c.out)?;
    let row = vec![
        est.label(),
        design.mean.label().to_string(),
        design.error_law.label().to_string(),
        format!("{:?}", c.design).to_lowercase(),
        num(c.sigma),
        args.n.to_string(),
        args.m.to_string(),
        report.reps.to_string(),
        report.failed.len().to_string(),
        num(report.mean_mse),
        num(report.stderr_mse),
    ];
    write_csv(&c.out, "simulate.csv", &CELL_HEADER, [row])?;
    write_json(&c.out, "simulate.json", &report)
}

pub fn rates(args: &RateArgs) -> Result<()> {
    let c = &args.common;
    let cfg = RunConfig::new(&c.loss, &c.smoothing, None)?;
    let m_policy = match args.preset {
        RatePreset::Dense => MPolicy::SqrtScaled(4.0),
        RatePreset::Sparse => MPolicy::Fixed(5),
    };
    let est = cfg.estimator();
    let exp = RateExperiment {
        mean: mean_kind(c.mean),
        sampling: sampling(c.design),
        sigma: c.sigma,
        error_law: error_law(c.error_law),
        estimator: est,
        n_sequence: args.n_seq.clone(),
        m_policy,
        reps: c.reps,
        grid: MseGrid::Dense(args.grid_size),
        seed: c.seed,
    };
    let report = rate_experiment(&exp)?;
    ensure_dir(&c.out)?;
    write_csv(
        &c.out,
        "rates.csv",
        &["n", "m", "reps", "failed", "mean_mse", "stderr_mse"],
        report.points.iter().map(|p| {
            vec![
                p.n.to_string(),
                p.m.to_string(),
                p.report.reps.to_string(),
                p.report.failed.len().to_string(),
                num(p.report.mean_mse),
                num(p.report.stderr_mse),
            ]
        }),
    )?;
    write_csv(
        &c.out,
        "rate_slope.csv",
        &[
            "estimator",
            "preset",
            "mean",
            "error_law",
            "n_min",
            "n_max",
            "slope",
        ],
        [vec![
            est.label(),
            format!("{:?}", args.preset).to_lowercase(),
            exp.mean.label().to_string(),
            exp.error_law.label().to_string(),
            args.n_seq.first().map_or(0, |n| *n).to_string(),
            args.n_seq.last().map_or(0, |n| *n).to_string(),
            num(report.slope),
        ]],
    )?;
    write_json(&c.out, "rates.json", &report)
}

/// File name of the kernel curve for one `(λ, y)` pair.
pub fn kernel_file(lambda: f64, y: f64) -> String {
    format!("kernel_lambda{lambda}_y{y}.csv")
}

pub fn kernel(args: &KernelArgs) -> Result<()> {
    if args.lambda.is_empty() || args.y.is_empty() {
        return Err(CliError::Config(
            "kernel needs at least one lambda and one y".into(),
        ));
    }
    if args.grid_size < 2 {
        return Err(CliError::Config("--grid-size must be at least 2".into()));
    }
    ensure_dir(&args.out)?;
    for &lambda in &args.lambda {
        let spec = KernelSpec::new(1, lambda, args.terms)?;
        for &y in &args.y {
            let curve = kernel_curve(&spec, y, args.grid_size)?;
            write_csv(
                &args.out,
                &kernel_file(lambda, y),
                &["x", "value"],
                curve.iter().map(|&(x, v)| vec![num(x), num(v)]),
            )?;
        }
    }
    Ok(())
}
