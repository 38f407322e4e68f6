//! Parametric bootstrap by decorrelating, resampling and recorrelating the
//! residuals of a fitted model, then refitting each replicate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{fit_from, FitOptions, FitResult, ParamCodec};
use crate::linalg::Cholesky;
use crate::model::{build_design, sigma_z, ModelSpec, MultivariateDataset};
use crate::warp::Location;

/// Replicate failures above this fraction abort the bootstrap.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapOptions {
    pub replicates: usize,
    /// Intervals have coverage `1 − alpha`.
    pub alpha: f64,
    pub seed: u64,
    /// Iteration cap for the warm-started replicate refits.
    pub max_iters: usize,
    pub tol_grad: f64,
    /// Keep each replicate's homogenized warped locations.
    pub keep_locations: bool,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            replicates: 1000,
            alpha: 0.05,
            seed: 0,
            max_iters: 300,
            tol_grad: 1e-6,
            keep_locations: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub index: usize,
    /// Values aligned with [`BootstrapResult::parameters`].
    pub values: Vec<f64>,
    pub beta: Vec<f64>,
    pub homogenized_locations: Option<Vec<Vec<Location>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub parameter: String,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub requested: usize,
    pub failed: usize,
    pub parameters: Vec<String>,
    pub replicates: Vec<Replicate>,
    pub intervals: Vec<Interval>,
}

impl BootstrapResult {
    pub fn interval(&self, name: &str) -> Option<&Interval> {
        self.intervals.iter().find(|i| i.parameter == name)
    }
}

/// Identifiable quantities reported by the bootstrap: `ν`, `σ`, `ρ`, `τ`
/// and the transformed scale `ã` (raw `a` when no frame is available).
pub fn natural_names(p: usize) -> Vec<String> {
    let mut names = Vec::new();
    names.extend((1..=p).map(|i| format!("nu{i}")));
    names.extend((1..=p).map(|i| format!("sigma{i}")));
    for i in 1..=p {
        for j in i + 1..=p {
            names.push(format!("rho{i}{j}"));
        }
    }
    names.extend((1..=p).map(|i| format!("tau{i}")));
    names.push("a_tilde".into());
    names
}

pub fn natural_values(spec: &ModelSpec, a_tilde: Option<f64>) -> Vec<f64> {
    let pr = &spec.params;
    let p = pr.p();
    let mut v = Vec::new();
    v.extend(&pr.nu);
    v.extend(&pr.sigma);
    for i in 0..p {
        for j in i + 1..p {
            v.push(pr.rho[i][j]);
        }
    }
    v.extend(&pr.tau);
    v.push(a_tilde.unwrap_or(pr.scale));
    v
}

/// Cholesky factor `L` of `Σ̂_Z` and decorrelated residuals `Z₀ = L⁻¹(Z − Xβ̂)`.
pub fn decorrelate(
    fit: &FitResult,
    ds: &MultivariateDataset,
) -> Result<(Cholesky, Vec<f64>, Vec<f64>)> {
    let chol = Cholesky::factor_with_jitter(&sigma_z(&fit.spec, ds)?)?;
    let mean = fit.beta_hat.mean(&build_design(ds));
    let r: Vec<f64> = ds.z()?.iter().zip(&mean).map(|(z, m)| z - m).collect();
    let z0 = chol.solve_lower_vec(&r);
    Ok((chol, z0, mean))
}

/// `Z_b = L Z₀,b + Xβ̂`.
pub fn recorrelate(chol: &Cholesky, z0b: &[f64], mean: &[f64]) -> Vec<f64> {
    chol.mul_lower_vec(z0b)
        .iter()
        .zip(mean)
        .map(|(e, m)| e + m)
        .collect()
}

/// Indices drawn uniformly with replacement for replicate `b`.
pub fn resample_indices(seed: u64, b: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Equal-tailed percentile interval (linear interpolation between order
/// statistics).
pub fn percentile_interval(values: &[f64], alpha: f64) -> (f64, f64) {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (v.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(v.len() - 1);
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    (q(alpha / 2.0), q(1.0 - alpha / 2.0))
}

pub fn bootstrap(
    fit: &FitResult,
    ds: &MultivariateDataset,
    opts: &BootstrapOptions,
) -> Result<BootstrapResult> {
    if opts.replicates == 0 {
        return Err(Error::InvalidParameter(
            "at least one replicate is required".into(),
        ));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::InvalidParameter("alpha must lie in (0, 1)".into()));
    }
    let codec = match &fit.codec {
        Some(c) => c.with_template(&fit.spec)?,
        None => ParamCodec::new(&fit.spec, &[])?,
    };
    let theta0 = codec.encode(&fit.spec).theta;
    let (chol, z0, mean) = decorrelate(fit, ds)?;
    let n = z0.len();
    let fit_opts = FitOptions {
        max_iters: opts.max_iters,
        tol_grad: opts.tol_grad,
        restarts: 1,
        staged: false,
        homogenize: fit.homogenized.is_some(),
        anchors: fit.homogenized.as_ref().map(|h| h.anchors),
        ..FitOptions::default()
    };

    let outcomes: Vec<Option<Replicate>> = crate::map_indices(opts.replicates, |b| {
        let idx = resample_indices(opts.seed, b, n);
        let z0b: Vec<f64> = idx.iter().map(|&i| z0[i]).collect();
        let zb = recorrelate(&chol, &z0b, &mean);
        let dsb = ds.with_z(&zb).ok()?;
        match fit_from(&codec, &theta0, &dsb, &fit_opts) {
            Ok(f) => {
                let h = f.homogenized.as_ref();
                Some(Replicate {
                    index: b,
                    values: natural_values(&f.spec, h.map(|h| h.transformed_scale)),
                    beta: f.beta_hat.0.clone(),
                    homogenized_locations: if opts.keep_locations {
                        h.map(|h| h.locations.clone())
                    } else {
                        None
                    },
                })
            }
            Err(e) => {
                log::warn!("bootstrap replicate {b} failed: {e}");
                None
            }
        }
    });

    let replicates: Vec<Replicate> = outcomes.into_iter().flatten().collect();
    let failed = opts.replicates - replicates.len();
    if failed as f64 > MAX_FAILURE_FRACTION * opts.replicates as f64 {
        return Err(Error::BootstrapUnstable {
            failed,
            requested: opts.replicates,
        });
    }
    let parameters = natural_names(fit.spec.p());
    let intervals = parameters
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let vals: Vec<f64> = replicates.iter().map(|r| r.values[k]).collect();
            let (lower, upper) = percentile_interval(&vals, opts.alpha);
            Interval {
                parameter: name.clone(),
                lower,
                upper,
                level: 1.0 - opts.alpha,
            }
        })
        .collect();
    Ok(BootstrapResult {
        requested: opts.replicates,
        failed,
        parameters,
        replicates,
        intervals,
    })
}
