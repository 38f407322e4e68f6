//! Random instances and dense reference computations shared by the
//! integration tests. The oracles never call the library's assembly,
//! factorization or conditioning code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use warpfield_core::covariance::{cross_cov_g, rho_bound, ParsimoniousMaternParams};
use warpfield_core::model::{ModelSpec, MultivariateDataset, ProcessData, TrendCoefficients};
use warpfield_core::predict::Query;
use warpfield_core::warp::{AxialWarp, Location, ProcessWarpSet, WarpFunction, WarpUnit};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_locations(rng: &mut ChaCha8Rng, n: usize) -> Vec<Location> {
    (0..n)
        .map(|_| Location::xy(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
        .collect()
}

/// Bivariate parameters with `ρ` inside its validity bound.
pub fn random_params(rng: &mut ChaCha8Rng) -> ParsimoniousMaternParams {
    let nu = [rng.random_range(0.2..2.5), rng.random_range(0.2..2.5)];
    let bound = rho_bound(&nu, 2)[0][1];
    ParsimoniousMaternParams::bivariate(
        nu,
        rng.random_range(0.5..6.0),
        [rng.random_range(0.3..2.0), rng.random_range(0.3..2.0)],
        0.999 * bound * rng.random_range(-1.0..1.0),
        [rng.random_range(0.05..0.5), rng.random_range(0.05..0.5)],
    )
}

/// Axial, radial and Möbius layers with random admissible parameters.
pub fn random_shared_warp(rng: &mut ChaCha8Rng) -> WarpFunction {
    let mut layers = Vec::new();
    for axis in 0..2 {
        let mut a = AxialWarp::with_basis(axis, 6, -0.5, 0.5, 0.0);
        for w in a.weights[1..].iter_mut() {
            *w = rng.random_range(0.0..0.6);
        }
        layers.push(WarpUnit::Axial(a));
    }
    layers.push(WarpUnit::RadialBasis {
        weight: rng.random_range(-0.9..1.5),
        center: Location::xy(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)),
        precision: rng.random_range(2.0..20.0),
    });
    layers.push(WarpUnit::Mobius {
        theta: [
            [1.0, 0.0],
            [rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)],
            [rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)],
            [1.0, 0.0],
        ],
    });
    WarpFunction::new(layers)
}

/// A random affine map with positive determinant, bounded away from the identity.
pub fn random_affine(rng: &mut ChaCha8Rng) -> WarpUnit {
    let angle: f64 = rng.random_range(-0.6..0.6);
    let (s, c) = angle.sin_cos();
    let (sx, sy) = (rng.random_range(0.7..1.4), rng.random_range(0.7..1.4));
    WarpUnit::Affine {
        matrix: vec![c * sx, -s * sy, s * sx, c * sy],
        shift: Location::xy(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)),
    }
}

pub fn warp_set(shared: WarpFunction, aligner: Option<WarpUnit>) -> ProcessWarpSet {
    let g2 = match aligner {
        Some(u) => WarpFunction::new(vec![u]),
        None => WarpFunction::identity(),
    };
    ProcessWarpSet::new(shared, vec![WarpFunction::identity(), g2]).unwrap()
}

/// Random bivariate model, optionally with an affine aligner on process 2.
pub fn random_spec(rng: &mut ChaCha8Rng, asymmetric: bool) -> ModelSpec {
    let params = random_params(rng);
    let shared = random_shared_warp(rng);
    let aligner = asymmetric.then(|| random_affine(rng));
    ModelSpec::new(params, warp_set(shared, aligner), 1).unwrap()
}

/// Dataset with `q − 1` standard normal covariates after the intercept.
pub fn random_dataset(rng: &mut ChaCha8Rng, counts: &[usize], q: usize) -> MultivariateDataset {
    let processes = counts
        .iter()
        .map(|&n| {
            let locations = uniform_locations(rng, n);
            let covariates = (0..n)
                .map(|_| {
                    let mut row = vec![1.0];
                    row.extend((1..q).map(|_| rng.random_range(-1.0..1.0)));
                    row
                })
                .collect();
            let z = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            ProcessData {
                locations,
                z: Some(z),
                covariates,
            }
        })
        .collect();
    MultivariateDataset::new(processes, q).unwrap()
}

pub type Dense = Vec<Vec<f64>>;

/// `(process, location)` pairs in stacked order.
pub fn stacked_sites(ds: &MultivariateDataset) -> Vec<(usize, Location)> {
    ds.processes
        .iter()
        .enumerate()
        .flat_map(|(i, p)| p.locations.iter().map(move |s| (i, s.clone())))
        .collect()
}

/// Covariance of the latent processes between two site lists, one
/// `cross_cov_g` call per entry.
pub fn dense_cov(spec: &ModelSpec, a: &[(usize, Location)], b: &[(usize, Location)]) -> Dense {
    a.iter()
        .map(|(i, s)| {
            b.iter()
                .map(|(j, u)| cross_cov_g(&spec.params, &spec.warps, *i, *j, s, u).unwrap())
                .collect()
        })
        .collect()
}

pub fn dense_sigma_z(spec: &ModelSpec, ds: &MultivariateDataset) -> Dense {
    let sites = stacked_sites(ds);
    let mut s = dense_cov(spec, &sites, &sites);
    for (k, (i, _)) in sites.iter().enumerate() {
        s[k][k] += spec.params.tau[*i].powi(2);
    }
    s
}

pub fn dense_design(ds: &MultivariateDataset) -> Dense {
    let p = ds.p();
    let q = ds.q;
    let mut x = Vec::new();
    for (i, pd) in ds.processes.iter().enumerate() {
        for row in &pd.covariates {
            let mut r = vec![0.0; p * q];
            r[i * q..(i + 1) * q].copy_from_slice(row);
            x.push(r);
        }
    }
    x
}

pub fn transpose(a: &Dense) -> Dense {
    if a.is_empty() {
        return vec![];
    }
    (0..a[0].len())
        .map(|j| a.iter().map(|r| r[j]).collect())
        .collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let m = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|r| {
            (0..m)
                .map(|j| r.iter().zip(b).map(|(x, br)| x * br[j]).sum())
                .collect()
        })
        .collect()
}

pub fn matvec(a: &Dense, v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

/// Gauss-Jordan inverse with partial pivoting, and `ln|det|`.
pub fn inverse_and_logdet(a: &Dense) -> (Dense, f64) {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    let mut logdet = 0.0;
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs()))
            .unwrap();
        m.swap(c, piv);
        let d = m[c][c];
        logdet += d.abs().ln();
        for v in m[c].iter_mut() {
            *v /= d;
        }
        let pivot_row = m[c].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != c {
                let f = row[c];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
    }
    (m.into_iter().map(|r| r[n..].to_vec()).collect(), logdet)
}

pub struct BruteReml {
    pub value: f64,
    /// `Π = Σ⁻¹ − Σ⁻¹X(XᵀΣ⁻¹X)⁻¹XᵀΣ⁻¹`.
    pub pi: Dense,
    pub x: Dense,
}

/// Restricted log-likelihood from explicit inverses.
pub fn brute_reml(spec: &ModelSpec, ds: &MultivariateDataset) -> BruteReml {
    let sigma = dense_sigma_z(spec, ds);
    let x = dense_design(ds);
    let z: Vec<f64> = ds
        .processes
        .iter()
        .flat_map(|p| p.z.clone().unwrap())
        .collect();
    let n = z.len();
    let pq = x[0].len();
    let (si, ld_sigma) = inverse_and_logdet(&sigma);
    let xt = transpose(&x);
    let (_, ld_xtx) = inverse_and_logdet(&matmul(&xt, &x));
    let si_x = matmul(&si, &x);
    let m = matmul(&xt, &si_x);
    let (mi, ld_m) = inverse_and_logdet(&m);
    let corr = matmul(&matmul(&si_x, &mi), &transpose(&si_x));
    let pi: Dense = si
        .iter()
        .zip(&corr)
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| u - v).collect())
        .collect();
    let quad: f64 = z.iter().zip(matvec(&pi, &z)).map(|(a, b)| a * b).sum();
    let value = -0.5 * (n - pq) as f64 * (2.0 * std::f64::consts::PI).ln() + 0.5 * ld_xtx
        - 0.5 * ld_sigma
        - 0.5 * ld_m
        - 0.5 * quad;
    BruteReml { value, pi, x }
}

/// Conditional mean and latent variance of each query given the
/// observations, from the joint Gaussian with explicit inverses.
pub fn dense_conditioning(
    spec: &ModelSpec,
    beta: &TrendCoefficients,
    ds: &MultivariateDataset,
    queries: &[Query],
) -> Vec<(f64, f64)> {
    let sites = stacked_sites(ds);
    let sigma = dense_sigma_z(spec, ds);
    let (si, _) = inverse_and_logdet(&sigma);
    let x = dense_design(ds);
    let z: Vec<f64> = ds
        .processes
        .iter()
        .flat_map(|p| p.z.clone().unwrap())
        .collect();
    let resid: Vec<f64> = z
        .iter()
        .zip(matvec(&x, &beta.0))
        .map(|(a, b)| a - b)
        .collect();
    let w = matvec(&si, &resid);
    queries
        .iter()
        .map(|q| {
            let target = vec![(q.process, q.location.clone())];
            let c = dense_cov(spec, &target, &sites).remove(0);
            let prior = dense_cov(spec, &target, &target)[0][0];
            let trend: f64 = q
                .covariates
                .iter()
                .enumerate()
                .map(|(k, v)| v * beta.0[q.process * ds.q + k])
                .sum();
            let mean = trend + c.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let var = prior
                - c.iter()
                    .zip(matvec(&si, &c))
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            (mean, var)
        })
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
