//! Multivariate datasets, the block-diagonal trend design, the observation
//! covariance `Σ_Z = Σ_G + V`, and exact Gaussian simulation.

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::covariance::{
    assemble_from_warped, assemble_sigma, ParsimoniousMaternParams, WarpedSites,
};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::warp::{Location, ProcessWarpSet};

/// Locations, optional observations and covariate rows of one process.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProcessData {
    pub locations: Vec<Location>,
    pub z: Option<Vec<f64>>,
    /// One row of `q` covariates per location; first column conventionally 1.
    pub covariates: Vec<Vec<f64>>,
}

impl ProcessData {
    /// Intercept-only covariates.
    pub fn new(locations: Vec<Location>, z: Option<Vec<f64>>) -> Self {
        let covariates = vec![vec![1.0]; locations.len()];
        Self {
            locations,
            z,
            covariates,
        }
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultivariateDataset {
    pub processes: Vec<ProcessData>,
    pub q: usize,
}

impl MultivariateDataset {
    pub fn new(processes: Vec<ProcessData>, q: usize) -> Result<Self> {
        let ds = Self { processes, q };
        ds.validate()?;
        Ok(ds)
    }

    /// Intercept-only dataset from per-process locations and observations.
    pub fn intercept_only(locations: Vec<Vec<Location>>, z: Option<Vec<Vec<f64>>>) -> Result<Self> {
        let processes = match z {
            Some(z) => {
                if z.len() != locations.len() {
                    return Err(Error::DimensionMismatch(
                        "observation and location lists differ in process count".into(),
                    ));
                }
                locations
                    .into_iter()
                    .zip(z)
                    .map(|(l, z)| ProcessData::new(l, Some(z)))
                    .collect()
            }
            None => locations
                .into_iter()
                .map(|l| ProcessData::new(l, None))
                .collect(),
        };
        Self::new(processes, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.processes.is_empty() {
            return Err(Error::InvalidData("dataset has no processes".into()));
        }
        if self.q == 0 {
            return Err(Error::InvalidData(
                "at least one covariate (the intercept) is required".into(),
            ));
        }
        let dim = self.locations_iter().next().map(|l| l.dim());
        for (i, pd) in self.processes.iter().enumerate() {
            if pd.covariates.len() != pd.locations.len() {
                return Err(Error::InvalidData(format!(
                    "process {}: {} covariate rows for {} locations",
                    i + 1,
                    pd.covariates.len(),
                    pd.locations.len()
                )));
            }
            if let Some(z) = &pd.z {
                if z.len() != pd.locations.len() {
                    return Err(Error::InvalidData(format!(
                        "process {}: {} observations for {} locations",
                        i + 1,
                        z.len(),
                        pd.locations.len()
                    )));
                }
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidData(format!(
                        "process {}: non-finite observation",
                        i + 1
                    )));
                }
            }
            for row in &pd.covariates {
                if row.len() != self.q || row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidData(format!(
                        "process {}: covariate rows must hold {} finite values",
                        i + 1,
                        self.q
                    )));
                }
            }
            for l in &pd.locations {
                if Some(l.dim()) != dim || !l.is_finite() {
                    return Err(Error::InvalidData(format!(
                        "process {}: locations must be finite and of equal dimension",
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.processes.len()
    }

    /// `N = Σ nᵢ`.
    pub fn n_total(&self) -> usize {
        self.processes.iter().map(|p| p.len()).sum()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.processes.iter().map(|p| p.len()).collect()
    }

    fn locations_iter(&self) -> impl Iterator<Item = &Location> {
        self.processes.iter().flat_map(|p| p.locations.iter())
    }

    pub fn locations(&self) -> Vec<Vec<Location>> {
        self.processes.iter().map(|p| p.locations.clone()).collect()
    }

    /// Stacked observation vector `Z = (Z₁′, …, Z_p′)′`.
    pub fn z(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.n_total());
        for (i, pd) in self.processes.iter().enumerate() {
            match &pd.z {
                Some(z) => out.extend_from_slice(z),
                None if pd.is_empty() => {}
                None => {
                    return Err(Error::InvalidData(format!(
                        "process {} has no observations",
                        i + 1
                    )));
                }
            }
        }
        Ok(out)
    }

    /// Replaces the observations with a stacked vector.
    pub fn with_z(&self, z: &[f64]) -> Result<Self> {
        if z.len() != self.n_total() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} locations",
                z.len(),
                self.n_total()
            )));
        }
        let mut out = self.clone();
        let mut at = 0;
        for pd in &mut out.processes {
            pd.z = Some(z[at..at + pd.len()].to_vec());
            at += pd.len();
        }
        Ok(out)
    }

    /// Process index of each stacked row.
    pub fn process_of_rows(&self) -> Vec<usize> {
        self.processes
            .iter()
            .enumerate()
            .flat_map(|(i, p)| std::iter::repeat_n(i, p.len()))
            .collect()
    }
}

/// `X = bdiag(X₁, …, X_p)`, an `N × pq` matrix.
pub fn build_design(ds: &MultivariateDataset) -> Mat<f64> {
    let n = ds.n_total();
    let q = ds.q;
    let mut x = Mat::<f64>::zeros(n, ds.p() * q);
    let mut row = 0;
    for (i, pd) in ds.processes.iter().enumerate() {
        for cov in &pd.covariates {
            for (k, v) in cov.iter().enumerate() {
                x[(row, i * q + k)] = *v;
            }
            row += 1;
        }
    }
    x
}

/// Stacked trend coefficients `(β₁′, …, β_p′)′`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrendCoefficients(pub Vec<f64>);

impl TrendCoefficients {
    pub fn zeros(p: usize, q: usize) -> Self {
        Self(vec![0.0; p * q])
    }

    /// `Xβ`.
    pub fn mean(&self, x: &Mat<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|r| (0..x.ncols()).map(|c| x[(r, c)] * self.0[c]).sum())
            .collect()
    }
}

/// Covariance parameters, process warps and covariate count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub params: ParsimoniousMaternParams,
    pub warps: ProcessWarpSet,
    #[serde(default = "one")]
    pub q: usize,
}

fn one() -> usize {
    1
}

impl ModelSpec {
    pub fn new(params: ParsimoniousMaternParams, warps: ProcessWarpSet, q: usize) -> Result<Self> {
        let spec = Self { params, warps, q };
        spec.validate()?;
        Ok(spec)
    }

    pub fn stationary(params: ParsimoniousMaternParams) -> Self {
        let p = params.p();
        Self {
            params,
            warps: ProcessWarpSet::identity(p),
            q: 1,
        }
    }

    pub fn p(&self) -> usize {
        self.params.p()
    }

    pub fn validate(&self) -> Result<()> {
        self.warps.validate()?;
        if self.params.p() != self.warps.n_processes() {
            return Err(Error::DimensionMismatch(format!(
                "{} covariance processes, {} warp processes",
                self.params.p(),
                self.warps.n_processes()
            )));
        }
        self.params.validate(2)
    }

    /// Diagonal of `V`: `τᵢ²` repeated `nᵢ` times.
    pub fn noise_diagonal(&self, ds: &MultivariateDataset) -> Vec<f64> {
        ds.process_of_rows()
            .into_iter()
            .map(|i| self.params.tau[i] * self.params.tau[i])
            .collect()
    }
}

fn check_compat(spec: &ModelSpec, ds: &MultivariateDataset) -> Result<()> {
    if spec.p() != ds.p() {
        return Err(Error::DimensionMismatch(format!(
            "model has {} processes, data has {}",
            spec.p(),
            ds.p()
        )));
    }
    Ok(())
}

/// `Σ_Z = Σ_G + V`.
pub fn sigma_z(spec: &ModelSpec, ds: &MultivariateDataset) -> Result<Mat<f64>> {
    check_compat(spec, ds)?;
    let mut s = assemble_sigma(&spec.params, &spec.warps, &ds.locations())?;
    for (i, v) in spec.noise_diagonal(ds).into_iter().enumerate() {
        s[(i, i)] += v;
    }
    Ok(s)
}

/// `Σ_Z` without the nonnegative-definiteness diagnostic, for inner loops.
pub(crate) fn sigma_z_unchecked(
    params: &ParsimoniousMaternParams,
    sites: &WarpedSites,
    noise_of_row: &[usize],
) -> Mat<f64> {
    let mut s = assemble_from_warped(params, sites);
    for (i, &k) in noise_of_row.iter().enumerate() {
        s[(i, i)] += params.tau[k] * params.tau[k];
    }
    s
}

/// Draws `Z = Xβ + L w`, `L Lᵀ = Σ_Z`, `w` standard normal, from a
/// ChaCha stream seeded by `seed`. Returns one vector per process.
pub fn simulate(
    spec: &ModelSpec,
    ds: &MultivariateDataset,
    beta: &TrendCoefficients,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    check_compat(spec, ds)?;
    check_beta(ds, beta)?;
    let chol = Cholesky::factor_with_jitter(&sigma_z(spec, ds)?)?;
    let w = standard_normals(seed, ds.n_total());
    let mean = beta.mean(&build_design(ds));
    let lw = chol.mul_lower_vec(&w);
    let z: Vec<f64> = mean.iter().zip(&lw).map(|(m, e)| m + e).collect();
    Ok(split_by_process(ds, &z))
}

/// A latent draw `Y = Xβ + L_G w` with `L_G L_Gᵀ = Σ_G`, and the noisy
/// observation `Z = Y + ε`, `ε ~ N(0, V)`. Jointly distributed as `simulate`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedField {
    pub latent: Vec<Vec<f64>>,
    pub observed: Vec<Vec<f64>>,
}

pub fn simulate_field(
    spec: &ModelSpec,
    ds: &MultivariateDataset,
    beta: &TrendCoefficients,
    seed: u64,
) -> Result<SimulatedField> {
    check_compat(spec, ds)?;
    check_beta(ds, beta)?;
    let sigma_g = assemble_sigma(&spec.params, &spec.warps, &ds.locations())?;
    let chol = Cholesky::factor_with_jitter(&sigma_g)?;
    let n = ds.n_total();
    let draws = standard_normals(seed, 2 * n);
    let mean = beta.mean(&build_design(ds));
    let lw = chol.mul_lower_vec(&draws[..n]);
    let latent: Vec<f64> = mean.iter().zip(&lw).map(|(m, e)| m + e).collect();
    let observed: Vec<f64> = latent
        .iter()
        .zip(spec.noise_diagonal(ds))
        .zip(&draws[n..])
        .map(|((y, v), e)| y + v.sqrt() * e)
        .collect();
    Ok(SimulatedField {
        latent: split_by_process(ds, &latent),
        observed: split_by_process(ds, &observed),
    })
}

fn check_beta(ds: &MultivariateDataset, beta: &TrendCoefficients) -> Result<()> {
    if beta.0.len() != ds.p() * ds.q || beta.0.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "beta must hold {} finite values",
            ds.p() * ds.q
        )));
    }
    Ok(())
}

/// `n` iid standard normals from the stream for `seed`.
pub fn standard_normals(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub(crate) fn split_by_process(ds: &MultivariateDataset, stacked: &[f64]) -> Vec<Vec<f64>> {
    let mut at = 0;
    ds.processes
        .iter()
        .map(|p| {
            let v = stacked[at..at + p.len()].to_vec();
            at += p.len();
            v
        })
        .collect()
}
