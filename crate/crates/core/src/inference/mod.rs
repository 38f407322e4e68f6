//! REML estimation of covariance and warping parameters.

pub mod lbfgs;
pub mod params;
pub mod reml;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use lbfgs::{LbfgsOptions, Status};
pub use params::{ParamCodec, ParamVector, Slot, Transform};
pub use reml::{
    gls_beta, gradient_fd, reml_loglik, reml_loglik_prepared, value_and_gradient, RemlData,
    RemlEval,
};

use crate::covariance::{assemble_from_warped, WarpedSites};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::model::{ModelSpec, MultivariateDataset, TrendCoefficients};
use crate::warp::{homogenize, select_anchors, HomogenizationAnchors, HomogenizedFrame, Location};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub max_iters: usize,
    pub tol_grad: f64,
    /// Relative per-iteration decrease below which progress counts as stalled.
    pub tol_progress: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Fit covariance parameters with warps frozen before releasing them.
    pub staged: bool,
    pub homogenize: bool,
    /// Parameter names (or `prefix*` patterns) held at their template values.
    pub fixed: Vec<String>,
    /// Standard deviation of the jitter added to warp coordinates on restarts.
    pub warp_jitter: f64,
    /// Optional explicit anchors into process 1's locations.
    pub anchors: Option<HomogenizationAnchors>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol_grad: 1e-6,
            tol_progress: 1e-12,
            restarts: 3,
            seed: 0,
            staged: true,
            homogenize: true,
            fixed: vec![],
            warp_jitter: 0.1,
            anchors: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    pub evaluations: usize,
    pub grad_norm: f64,
    pub status: Status,
    /// Log restricted likelihood after each accepted iteration.
    pub trace: Vec<f64>,
}

/// Warped measurement locations in the homogenized frame and `ã`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Homogenized {
    pub anchors: HomogenizationAnchors,
    pub frame: HomogenizedFrame,
    pub locations: Vec<Vec<Location>>,
    pub transformed_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub theta_hat: ParamVector,
    pub beta_hat: TrendCoefficients,
    pub reml_value: f64,
    pub aic: f64,
    /// Number of estimated covariance, noise and warp parameters.
    pub n_params: usize,
    pub convergence: Convergence,
    pub homogenized: Option<Homogenized>,
    pub fit_seconds: f64,
    /// Codec used for the fit; warm starts reuse it.
    #[serde(skip)]
    pub codec: Option<ParamCodec>,
}

fn objective<'a>(
    data: &'a RemlData,
    codec: &'a ParamCodec,
) -> impl FnMut(&[f64]) -> Option<(f64, Vec<f64>)> + 'a {
    move |theta: &[f64]| {
        let full = codec.expand(theta);
        let (v, g) = value_and_gradient(data, codec, &full).ok()?;
        Some((-v, codec.select(&g).into_iter().map(|x| -x).collect()))
    }
}

fn optimize(
    data: &RemlData,
    codec: &ParamCodec,
    theta0: &[f64],
    opts: &FitOptions,
) -> lbfgs::LbfgsOutcome {
    let lb = LbfgsOptions {
        max_iters: opts.max_iters,
        tol_grad: opts.tol_grad,
        tol_progress: opts.tol_progress,
        ..LbfgsOptions::default()
    };
    lbfgs::minimize(objective(data, codec), theta0, &lb)
}

/// REML fit of `template` to `ds`. The template supplies initial values,
/// the warp architecture and the parameters held fixed.
pub fn fit(template: &ModelSpec, ds: &MultivariateDataset, opts: &FitOptions) -> Result<FitResult> {
    let start = Instant::now();
    let data = prepare(ds, template)?;
    let codec = ParamCodec::new(template, &opts.fixed)?;
    let has_free_warps = codec
        .slots()
        .iter()
        .zip(codec.is_free())
        .any(|(s, f)| *f && s.is_warp());

    let mut spec0 = template.clone();
    let mut stage_iters = 0;
    let mut stage_evals = 0;
    if opts.staged && has_free_warps {
        let mut fixed = opts.fixed.clone();
        fixed.extend(
            codec
                .all_names()
                .iter()
                .zip(codec.slots())
                .filter(|(_, s)| s.is_warp())
                .map(|(n, _)| n.clone()),
        );
        let stage = ParamCodec::new(template, &fixed)?;
        let out = optimize(&data, &stage, &stage.encode(template).theta, opts);
        if out.status != Status::Failed {
            spec0 = stage.decode(&out.x);
        }
        stage_iters = out.iterations;
        stage_evals = out.evaluations;
        log::info!(
            "stationary stage: REML {:.4} after {} iterations",
            -out.f,
            out.iterations
        );
    }

    let codec = codec.with_template(&spec0)?;
    let theta0 = codec.encode(&spec0).theta;
    let restarts = if has_free_warps {
        opts.restarts.max(1)
    } else {
        1
    };
    let noise = crate::model::standard_normals(opts.seed, theta0.len().max(1) * restarts);
    let mut runs: Vec<(usize, lbfgs::LbfgsOutcome)> = crate::map_indices(restarts, |r| {
        let start = if r == 0 {
            theta0.clone()
        } else {
            let n = theta0.len().max(1);
            codec.jitter_warps(&theta0, &noise[r * n..(r + 1) * n], opts.warp_jitter)
        };
        (r, optimize(&data, &codec, &start, opts))
    });
    runs.sort_by(|a, b| a.1.f.total_cmp(&b.1.f).then(a.0.cmp(&b.0)));
    let best = runs.swap_remove(0).1;
    if best.status == Status::Failed {
        return Err(Error::Optimization(
            "log restricted likelihood is undefined at every starting point".into(),
        ));
    }
    finish(
        &data,
        ds,
        &codec,
        best,
        stage_iters,
        stage_evals,
        opts,
        start,
    )
}

/// Refit starting from `theta0` in the coordinates of `codec`, without
/// staging or restarts.
pub fn fit_from(
    codec: &ParamCodec,
    theta0: &[f64],
    ds: &MultivariateDataset,
    opts: &FitOptions,
) -> Result<FitResult> {
    let start = Instant::now();
    let data = prepare(ds, codec.template())?;
    let out = optimize(&data, codec, theta0, opts);
    if out.status == Status::Failed {
        return Err(Error::Optimization(
            "log restricted likelihood undefined at the start".into(),
        ));
    }
    finish(&data, ds, codec, out, 0, 0, opts, start)
}

fn prepare(ds: &MultivariateDataset, template: &ModelSpec) -> Result<RemlData> {
    if template.p() != ds.p() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} processes, data has {}",
            template.p(),
            ds.p()
        )));
    }
    let data = RemlData::new(ds)?;
    if data.n() < data.pq() + 1 {
        return Err(Error::InvalidData(format!(
            "{} observations; at least pq + 1 = {} are required",
            data.n(),
            data.pq() + 1
        )));
    }
    for (i, pd) in ds.processes.iter().enumerate() {
        if pd.is_empty() {
            log::warn!(
                "process {} has no observations; its parameters are not identified",
                i + 1
            );
        }
    }
    Ok(data)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    data: &RemlData,
    ds: &MultivariateDataset,
    codec: &ParamCodec,
    out: lbfgs::LbfgsOutcome,
    stage_iters: usize,
    stage_evals: usize,
    opts: &FitOptions,
    start: Instant,
) -> Result<FitResult> {
    let spec = codec.decode(&out.x);
    let eval = reml::evaluate(data, &spec)?;
    let k = codec.dim();
    let homogenized = if opts.homogenize {
        match homogenize_fit(&spec, ds, opts.anchors) {
            Ok(h) => Some(h),
            Err(e) => {
                log::warn!("homogenization skipped: {e}");
                None
            }
        }
    } else {
        None
    };
    Ok(FitResult {
        theta_hat: codec.encode(&spec),
        beta_hat: TrendCoefficients(eval.beta),
        reml_value: eval.value,
        aic: 2.0 * k as f64 - 2.0 * eval.value,
        n_params: k,
        convergence: Convergence {
            iterations: stage_iters + out.iterations,
            evaluations: stage_evals + out.evaluations,
            grad_norm: out.grad_norm(),
            status: out.status,
            trace: out.trace.iter().map(|f| -f).collect(),
        },
        homogenized,
        fit_seconds: start.elapsed().as_secs_f64(),
        codec: Some(codec.clone()),
        spec,
    })
}

/// Homogenizes `f ∘ gᵢ` of every measurement location using anchors taken
/// from process 1 (where `g₁` is the identity).
pub fn homogenize_fit(
    spec: &ModelSpec,
    ds: &MultivariateDataset,
    anchors: Option<HomogenizationAnchors>,
) -> Result<Homogenized> {
    let reference = &ds.processes[0].locations;
    let anchors = match anchors {
        Some(a) => a,
        None => select_anchors(reference)?,
    };
    let f_ref: Vec<Location> = reference
        .iter()
        .map(|s| spec.warps.shared.apply(s))
        .collect::<Result<_>>()?;
    let (_, frame) = homogenize(&f_ref, &anchors)?;
    let mut locations = Vec::with_capacity(ds.p());
    for (i, pd) in ds.processes.iter().enumerate() {
        let warped: Vec<Location> = pd
            .locations
            .iter()
            .map(|s| spec.warps.warp(i, s).map(|w| frame.apply(&w)))
            .collect::<Result<_>>()?;
        locations.push(warped);
    }
    Ok(Homogenized {
        anchors,
        transformed_scale: frame.transformed_scale(spec.params.scale),
        frame,
        locations,
    })
}

/// Predicted operation counts and measured wall times of one likelihood
/// evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub n: usize,
    /// `N · Σ r_l` basis evaluations for warping.
    pub warp_cost: f64,
    /// `N³/3` flops for the Cholesky factor.
    pub factor_cost: f64,
    pub warp_seconds: f64,
    pub assembly_seconds: f64,
    pub factor_seconds: f64,
    /// Value-only log restricted likelihood.
    pub value_seconds: f64,
    /// Value and gradient as used by the optimizer.
    pub gradient_seconds: f64,
}

pub fn complexity_report(spec: &ModelSpec, ds: &MultivariateDataset) -> Result<ComplexityReport> {
    let data = RemlData::new(ds)?;
    let n = data.n();
    let basis: usize = spec.warps.shared.basis_count()
        + spec
            .warps
            .aligners
            .iter()
            .map(|g| g.basis_count())
            .sum::<usize>();

    let t = Instant::now();
    let sites = WarpedSites::new(&spec.warps, &data.locations)?;
    let warp_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let sigma = assemble_from_warped(&spec.params, &sites);
    let assembly_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let _chol = Cholesky::factor_with_jitter(&sigma)?;
    let factor_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    reml::evaluate(&data, spec)?;
    let value_seconds = t.elapsed().as_secs_f64();
    let codec = ParamCodec::new(spec, &[])?;
    let t = Instant::now();
    value_and_gradient(&data, &codec, &codec.encode_all(spec))?;
    let gradient_seconds = t.elapsed().as_secs_f64();

    Ok(ComplexityReport {
        n,
        warp_cost: (n * basis) as f64,
        factor_cost: (n as f64).powi(3) / 3.0,
        warp_seconds,
        assembly_seconds,
        factor_seconds,
        value_seconds,
        gradient_seconds,
    })
}
