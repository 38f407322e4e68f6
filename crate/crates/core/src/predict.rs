//! Cokriging with plug-in estimates, and RMSPE/CRPS scoring.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::covariance::{PairKernels, WarpedSites};
use crate::error::{Error, Result};
use crate::inference::FitResult;
use crate::linalg::Cholesky;
use crate::model::{
    build_design, sigma_z_unchecked, ModelSpec, MultivariateDataset, TrendCoefficients,
};
use crate::special::{norm_cdf, norm_pdf};
use crate::warp::Location;

/// Queries are processed in blocks of this many columns.
const CHUNK: usize = 512;

/// A prediction target: zero-based process index, location and covariate row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub process: usize,
    pub location: Location,
    pub covariates: Vec<f64>,
}

impl Query {
    /// Intercept-only query.
    pub fn at(process: usize, location: Location) -> Self {
        Self {
            process,
            location,
            covariates: vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub process: usize,
    pub location: Location,
    pub mean: f64,
    /// Conditional variance of the latent process.
    pub variance: f64,
    /// `variance + τᵢ²`.
    pub observation_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PredictionResult {
    pub predictions: Vec<Prediction>,
}

impl PredictionResult {
    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }
}

pub fn predict(
    fit: &FitResult,
    ds: &MultivariateDataset,
    queries: &[Query],
) -> Result<PredictionResult> {
    predict_with(&fit.spec, &fit.beta_hat, ds, queries)
}

/// `E(Ỹᵢ(s*) | Z) = xᵢ*ᵀβ + σ*ᵀΣ_Z⁻¹(Z − Xβ)`,
/// `var = C_ii(s*, s*) − σ*ᵀΣ_Z⁻¹σ*`.
pub fn predict_with(
    spec: &ModelSpec,
    beta: &TrendCoefficients,
    ds: &MultivariateDataset,
    queries: &[Query],
) -> Result<PredictionResult> {
    let p = spec.p();
    if ds.p() != p {
        return Err(Error::DimensionMismatch(
            "model and data process counts differ".into(),
        ));
    }
    if beta.0.len() != p * ds.q {
        return Err(Error::DimensionMismatch(format!(
            "beta must hold {} values",
            p * ds.q
        )));
    }
    for q in queries {
        if q.process >= p {
            return Err(Error::ProcessIndex {
                index: q.process,
                count: p,
            });
        }
        if q.covariates.len() != ds.q
            || !q.location.is_finite()
            || q.covariates.iter().any(|c| !c.is_finite())
        {
            return Err(Error::InvalidData(
                "query must be finite with q covariates".into(),
            ));
        }
    }
    if queries.is_empty() {
        return Ok(PredictionResult::default());
    }
    let params = &spec.params;
    let z = ds.z()?;
    let n = z.len();
    let sites = WarpedSites::new(&spec.warps, &ds.locations())?;
    let warped_q: Vec<Location> = queries
        .iter()
        .map(|q| spec.warps.warp(q.process, &q.location))
        .collect::<Result<_>>()?;

    let x_max = params.scale * {
        let mut all = sites.coords.clone();
        warped_q.iter().for_each(|w| all.extend_from_slice(w));
        let process = vec![0; all.len() / sites.dim.max(1)];
        WarpedSites {
            dim: sites.dim,
            process,
            coords: all,
        }
        .diameter_bound()
    };
    let kernels = PairKernels::new(params, false, x_max, n * queries.len());

    let (chol, alpha) = if n > 0 {
        let sigma = sigma_z_unchecked(params, &sites, &ds.process_of_rows());
        let chol = Cholesky::factor_with_jitter(&sigma)?;
        let xb = beta.mean(&build_design(ds));
        let r: Vec<f64> = z.iter().zip(&xb).map(|(z, m)| z - m).collect();
        let alpha = chol.solve_vec(&r);
        (Some(chol), alpha)
    } else {
        (None, vec![])
    };

    let mut out = Vec::with_capacity(queries.len());
    for (start, chunk) in queries
        .chunks(CHUNK)
        .enumerate()
        .map(|(k, c)| (k * CHUNK, c))
    {
        let m = chunk.len();
        let cross = Mat::from_fn(n, m, |a, j| {
            let qi = chunk[j].process;
            let w = &warped_q[start + j];
            let pa = sites.process[a];
            let r = w
                .iter()
                .zip(sites.point(a))
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            params.coef(qi, pa) * kernels.get(qi, pa).eval(params.scale * r).m
        });
        let v = match &chol {
            Some(c) => c.solve_lower(cross.as_ref()),
            None => cross.clone(),
        };
        for (j, q) in chunk.iter().enumerate() {
            let i = q.process;
            let trend: f64 = q
                .covariates
                .iter()
                .enumerate()
                .map(|(k, x)| x * beta.0[i * ds.q + k])
                .sum();
            let kriged: f64 = (0..n).map(|a| cross[(a, j)] * alpha[a]).sum();
            let explained: f64 = (0..n).map(|a| v[(a, j)] * v[(a, j)]).sum();
            let prior = params.coef(i, i);
            let mut variance = prior - explained;
            if variance < 0.0 {
                if variance < -1e-10 * prior.max(1.0) {
                    return Err(Error::NegativeVariance(variance));
                }
                variance = 0.0;
            }
            out.push(Prediction {
                process: i,
                location: q.location.clone(),
                mean: trend + kriged,
                variance,
                observation_variance: variance + params.tau[i] * params.tau[i],
            });
        }
    }
    Ok(PredictionResult { predictions: out })
}

/// Closed-form CRPS of `N(μ, σ²)` at `y`; `|y − μ|` when `σ = 0`.
pub fn crps_gaussian(y: f64, mu: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return (y - mu).abs();
    }
    let z = (y - mu) / sigma;
    sigma * (z * (2.0 * norm_cdf(z) - 1.0) + 2.0 * norm_pdf(z) - 1.0 / std::f64::consts::PI.sqrt())
}

/// Which predictive variance the CRPS uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceKind {
    /// Latent process variance, for noise-free truths.
    Latent,
    /// Observation variance, for held-out measurements.
    Observation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessScore {
    pub process: usize,
    pub count: usize,
    pub rmspe: f64,
    pub crps: f64,
}

/// Per-process RMSPE and mean CRPS of `pred` against `truth` (same order).
pub fn score(
    pred: &PredictionResult,
    truth: &[f64],
    kind: VarianceKind,
) -> Result<Vec<ProcessScore>> {
    if truth.len() != pred.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} truths for {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    let p = pred
        .predictions
        .iter()
        .map(|q| q.process + 1)
        .max()
        .unwrap_or(0);
    let mut acc = vec![(0usize, 0.0, 0.0); p];
    for (q, y) in pred.predictions.iter().zip(truth) {
        let var = match kind {
            VarianceKind::Latent => q.variance,
            VarianceKind::Observation => q.observation_variance,
        };
        let e = &mut acc[q.process];
        e.0 += 1;
        e.1 += (y - q.mean).powi(2);
        e.2 += crps_gaussian(*y, q.mean, var.sqrt());
    }
    Ok(acc
        .into_iter()
        .enumerate()
        .filter(|(_, a)| a.0 > 0)
        .map(|(i, (c, se, cr))| ProcessScore {
            process: i,
            count: c,
            rmspe: (se / c as f64).sqrt(),
            crps: cr / c as f64,
        })
        .collect())
}
