//! Isotropic Matérn correlation, the parsimonious multivariate Matérn
//! cross-covariance on the warped domain, and assembly of the joint
//! covariance matrix `Σ_G` over per-process measurement locations.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::special::{ln_gamma, BesselK};
use crate::warp::{Location, ProcessWarpSet};

mod table;

pub(crate) use table::PairKernels;

/// Relative tolerance of the nonnegative-definiteness diagnostic.
pub const EPS_PSD: f64 = 1e-8;

/// Matérn correlation `M(x | ν) = 2^{1-ν}/Γ(ν) · x^ν K_ν(x)` in the scaled
/// lag `x = a‖h‖`, with the order-dependent work done once.
#[derive(Debug, Clone, Copy)]
pub struct Matern {
    nu: f64,
    log_norm: f64,
    bessel: BesselK,
    /// Pair `(K_{ν-1}, K_ν)` when `ν ≥ ½`, `(K_ν, K_{1-ν})` otherwise.
    slope_pair: BesselK,
}

impl Matern {
    pub fn new(nu: f64) -> Self {
        assert!(
            nu > 0.0 && nu.is_finite(),
            "Matérn smoothness must be positive, got {nu}"
        );
        let slope_pair = if nu >= 0.5 {
            BesselK::new(nu - 1.0)
        } else {
            BesselK::new(-nu)
        };
        Self {
            nu,
            log_norm: (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu),
            bessel: BesselK::new(nu),
            slope_pair,
        }
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    fn tiny_lag(&self, x: f64) -> Option<(f64, f64)> {
        if x == 0.0 {
            let slope = if self.nu == 0.5 {
                -1.0
            } else if self.nu < 0.5 {
                f64::NEG_INFINITY
            } else {
                0.0
            };
            return Some((1.0, slope));
        }
        // Past this point x^ν K_ν(x) may overflow for large ν while
        // 1 − M is below double precision.
        if self.nu > 1.0 && x < 1e-12 {
            return Some((1.0, -x / (2.0 * (self.nu - 1.0))));
        }
        None
    }

    fn prefactor(&self, x: f64) -> f64 {
        (self.log_norm + self.nu * x.ln() - x).exp()
    }

    /// `M(x)` for `x ≥ 0`.
    pub fn corr(&self, x: f64) -> f64 {
        if let Some((m, _)) = self.tiny_lag(x) {
            return m;
        }
        let pre = self.prefactor(x);
        if pre == 0.0 {
            return 0.0;
        }
        (pre * self.bessel.scaled_pair(x).0).min(1.0)
    }

    /// `(M(x), dM/dx)`, using `d/dx[x^ν K_ν(x)] = −x^ν K_{ν−1}(x)`.
    pub fn corr_and_slope(&self, x: f64) -> (f64, f64) {
        if let Some(v) = self.tiny_lag(x) {
            return v;
        }
        let pre = self.prefactor(x);
        if pre == 0.0 {
            return (0.0, 0.0);
        }
        let (k_lo, k_hi) = self.slope_pair.scaled_pair(x);
        let (k_nu, k_num1) = if self.nu >= 0.5 {
            (k_hi, k_lo)
        } else {
            (k_lo, k_hi)
        };
        ((pre * k_nu).min(1.0), -pre * k_num1)
    }
}

/// Isotropic Matérn correlation `M(h | ν, a)`.
pub fn matern_corr(h_norm: f64, nu: f64, a: f64) -> f64 {
    Matern::new(nu).corr(a * h_norm)
}

/// Parameters of the parsimonious multivariate Matérn model: common scale,
/// cross-smoothness `ν_ij = (ν_ii + ν_jj)/2`, plus measurement-error
/// standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParsimoniousMaternParams {
    pub nu: Vec<f64>,
    pub scale: f64,
    pub sigma: Vec<f64>,
    /// Symmetric `p×p` cross-correlation matrix with unit diagonal.
    pub rho: Vec<Vec<f64>>,
    pub tau: Vec<f64>,
}

impl ParsimoniousMaternParams {
    /// Uncorrelated processes with the given marginals.
    pub fn independent(nu: Vec<f64>, scale: f64, sigma: Vec<f64>, tau: Vec<f64>) -> Self {
        let p = nu.len();
        let rho = (0..p)
            .map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            nu,
            scale,
            sigma,
            rho,
            tau,
        }
    }

    /// Bivariate convenience constructor.
    pub fn bivariate(nu: [f64; 2], scale: f64, sigma: [f64; 2], rho12: f64, tau: [f64; 2]) -> Self {
        let mut p = Self::independent(nu.to_vec(), scale, sigma.to_vec(), tau.to_vec());
        p.rho[0][1] = rho12;
        p.rho[1][0] = rho12;
        p
    }

    pub fn p(&self) -> usize {
        self.nu.len()
    }

    pub fn nu_ij(&self, i: usize, j: usize) -> f64 {
        0.5 * (self.nu[i] + self.nu[j])
    }

    /// `σ_i²` on the diagonal, `ρ_ij σ_i σ_j` off it.
    pub fn coef(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.sigma[i] * self.sigma[i]
        } else {
            self.rho[i][j] * self.sigma[i] * self.sigma[j]
        }
    }

    /// Structural checks plus the pairwise parsimonious bound in dimension `d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        let p = self.p();
        if p == 0 {
            return Err(Error::InvalidParameter("no processes".into()));
        }
        if self.sigma.len() != p || self.tau.len() != p || self.rho.len() != p {
            return Err(Error::InvalidParameter(format!(
                "parameter vectors must all have length p = {p}"
            )));
        }
        if self.nu.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(
                "smoothness must be positive".into(),
            ));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidParameter("scale must be positive".into()));
        }
        if self.sigma.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("sigma must be positive".into()));
        }
        if self.tau.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("tau must be nonnegative".into()));
        }
        let bound = rho_bound(&self.nu, d);
        for i in 0..p {
            if self.rho[i].len() != p || self.rho[i][i] != 1.0 {
                return Err(Error::InvalidParameter(
                    "rho must be p×p with unit diagonal".into(),
                ));
            }
            for j in 0..p {
                if self.rho[i][j] != self.rho[j][i] {
                    return Err(Error::InvalidParameter("rho must be symmetric".into()));
                }
                if i != j && self.rho[i][j].abs() > bound[i][j] {
                    return Err(Error::InvalidParameter(format!(
                        "|rho[{i}][{j}]| = {} exceeds the validity bound {}",
                        self.rho[i][j].abs(),
                        bound[i][j]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Pairwise bound on `|ρ_ij|` for the parsimonious Matérn in dimension `d`:
/// `Γ(ν_i+d/2)^½ Γ(ν_j+d/2)^½ Γ(ν_ij) / (Γ(ν_i)^½ Γ(ν_j)^½ Γ(ν_ij+d/2))`.
pub fn rho_bound(nu: &[f64], d: usize) -> Vec<Vec<f64>> {
    let half_d = d as f64 / 2.0;
    let p = nu.len();
    let mut out = vec![vec![1.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            if i == j {
                continue;
            }
            let nij = 0.5 * (nu[i] + nu[j]);
            let ln_b = 0.5 * (ln_gamma(nu[i] + half_d) + ln_gamma(nu[j] + half_d)) + ln_gamma(nij)
                - 0.5 * (ln_gamma(nu[i]) + ln_gamma(nu[j]))
                - ln_gamma(nij + half_d);
            out[i][j] = ln_b.exp();
        }
    }
    out
}

/// Stationary cross-covariance on the warped domain, zero-based indices.
pub fn cross_cov_d(params: &ParsimoniousMaternParams, i: usize, j: usize, h: &[f64]) -> f64 {
    let r = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    params.coef(i, j) * matern_corr(r, params.nu_ij(i, j), params.scale)
}

/// `C_ij,G(s, u) = C⁰_ij,D(f∘gᵢ(s) − f∘gⱼ(u))`, zero-based indices.
pub fn cross_cov_g(
    params: &ParsimoniousMaternParams,
    warps: &ProcessWarpSet,
    i: usize,
    j: usize,
    s: &Location,
    u: &Location,
) -> Result<f64> {
    let ws = warps.warp(i, s)?;
    let wu = warps.warp(j, u)?;
    Ok(cross_cov_d(params, i, j, &ws.sub(&wu)))
}

/// Locations after warping, flattened, together with their process labels.
#[derive(Debug, Clone)]
pub struct WarpedSites {
    pub dim: usize,
    pub process: Vec<usize>,
    pub coords: Vec<f64>,
}

impl WarpedSites {
    /// Warps each process's locations with `f ∘ gᵢ`, stacked process by process.
    pub fn new(warps: &ProcessWarpSet, locations: &[Vec<Location>]) -> Result<Self> {
        if locations.len() != warps.n_processes() {
            return Err(Error::DimensionMismatch(format!(
                "{} location lists for {} processes",
                locations.len(),
                warps.n_processes()
            )));
        }
        let dim = locations
            .iter()
            .flatten()
            .next()
            .map(|l| l.dim())
            .unwrap_or(2);
        let mut process = Vec::new();
        let mut coords = Vec::new();
        for (i, locs) in locations.iter().enumerate() {
            for s in locs {
                let w = warps.warp(i, s)?;
                if w.dim() != dim || !w.is_finite() {
                    return Err(Error::InvalidWarp(format!(
                        "warped location {:?} of process {} is invalid",
                        &w[..],
                        i + 1
                    )));
                }
                process.push(i);
                coords.extend_from_slice(&w);
            }
        }
        Ok(Self {
            dim,
            process,
            coords,
        })
    }

    pub fn len(&self) -> usize {
        self.process.len()
    }

    pub fn is_empty(&self) -> bool {
        self.process.is_empty()
    }

    pub fn point(&self, a: usize) -> &[f64] {
        &self.coords[a * self.dim..(a + 1) * self.dim]
    }

    /// Diagonal of the bounding box, an upper bound on every pairwise distance.
    pub fn diameter_bound(&self) -> f64 {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for a in 0..self.len() {
            for (k, v) in self.point(a).iter().enumerate() {
                lo[k] = lo[k].min(*v);
                hi[k] = hi[k].max(*v);
            }
        }
        lo.iter()
            .zip(&hi)
            .map(|(l, h)| (h - l).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.point(a)
            .iter()
            .zip(self.point(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

/// `Σ_G` over pre-warped sites with every entry evaluated directly; the
/// lower triangle is computed and mirrored.
pub fn assemble_from_warped(params: &ParsimoniousMaternParams, sites: &WarpedSites) -> Mat<f64> {
    let n = sites.len();
    let kernels = PairKernels::direct(params);
    let mut sigma = Mat::<f64>::zeros(n, n);
    for a in 0..n {
        let pa = sites.process[a];
        for b in 0..=a {
            let pb = sites.process[b];
            let x = params.scale * sites.distance(a, b);
            let v = params.coef(pa, pb) * kernels.get(pa, pb).eval(x).m;
            sigma[(a, b)] = v;
            sigma[(b, a)] = v;
        }
    }
    sigma
}

/// Assembles `Σ_G` for per-process location lists and checks that its
/// minimum eigenvalue is at least `−EPS_PSD · ‖Σ_G‖₂`.
pub fn assemble_sigma(
    params: &ParsimoniousMaternParams,
    warps: &ProcessWarpSet,
    locations: &[Vec<Location>],
) -> Result<Mat<f64>> {
    let sites = WarpedSites::new(warps, locations)?;
    if sites.is_empty() {
        return Err(Error::InvalidData("no locations".into()));
    }
    if params.p() != warps.n_processes() {
        return Err(Error::DimensionMismatch(
            "parameter and warp process counts differ".into(),
        ));
    }
    let sigma = assemble_from_warped(params, &sites);
    check_nonnegative_definite(&sigma)?;
    Ok(sigma)
}

/// Fails with `InvalidParameter` unless `Σ + EPS_PSD‖Σ‖₂ I` admits a Cholesky
/// factorization, i.e. unless `λ_min(Σ) > −EPS_PSD‖Σ‖₂`.
pub fn check_nonnegative_definite(sigma: &Mat<f64>) -> Result<()> {
    let norm = linalg::spectral_norm_estimate(sigma);
    let mut shifted = sigma.clone();
    let shift = EPS_PSD * norm.max(f64::MIN_POSITIVE);
    for i in 0..shifted.nrows() {
        shifted[(i, i)] += shift;
    }
    if linalg::Cholesky::factor(&shifted).is_none() {
        return Err(Error::InvalidParameter(format!(
            "covariance matrix has an eigenvalue below −{EPS_PSD:e}·‖Σ‖ (ρ outside its validity region?)"
        )));
    }
    Ok(())
}
