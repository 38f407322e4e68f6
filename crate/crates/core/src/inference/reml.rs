//! Log restricted likelihood, its gradient in the unconstrained
//! coordinates, and the GLS trend estimate.
//!
//! With `A = Σ⁻¹X`, `M = XᵀΣ⁻¹X` and `r = Z − Xβ̂`,
//! `L = −(N−pq)/2 ln 2π + ½ln|XᵀX| − ½ln|Σ| − ½ln|M| − ½ rᵀΣ⁻¹r`,
//! and `∂L/∂θ = ½ tr(W ∂Σ/∂θ)` with `W = Π Z Zᵀ Π − Π`.

use faer::Mat;
use rayon::prelude::*;

use super::params::{nu_coord_slope, ParamCodec, Slot};
use crate::covariance::{rho_bound, PairKernels, ParsimoniousMaternParams, WarpedSites};
use crate::error::{Error, Result};
use crate::linalg::{col, Cholesky};
use crate::model::{build_design, sigma_z_unchecked, ModelSpec, MultivariateDataset};
use crate::warp::Location;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Dataset quantities that do not depend on the covariance parameters.
#[derive(Debug, Clone)]
pub struct RemlData {
    pub(crate) x: Mat<f64>,
    pub(crate) z: Vec<f64>,
    pub(crate) rows: Vec<usize>,
    pub(crate) locations: Vec<Vec<Location>>,
    pub(crate) p: usize,
    log_det_xtx: f64,
}

impl RemlData {
    pub fn new(ds: &MultivariateDataset) -> Result<Self> {
        ds.validate()?;
        let z = ds.z()?;
        let x = build_design(ds);
        let pq = x.ncols();
        if z.len() < pq {
            return Err(Error::InvalidData(format!(
                "{} observations; at least pq = {} are required",
                z.len(),
                pq
            )));
        }
        let xtx = x.transpose() * &x;
        let chol = Cholesky::factor(&xtx).ok_or(Error::SingularDesign)?;
        Ok(Self {
            log_det_xtx: chol.log_det(),
            x,
            z,
            rows: ds.process_of_rows(),
            locations: ds.locations(),
            p: ds.p(),
        })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn pq(&self) -> usize {
        self.x.ncols()
    }
}

struct Core {
    value: f64,
    beta: Vec<f64>,
    a: Mat<f64>,
    m_chol: Cholesky,
    pz: Vec<f64>,
}

fn core_terms(data: &RemlData, chol: &Cholesky) -> Result<Core> {
    let n = data.n();
    let pq = data.pq();
    let a = chol.solve(data.x.as_ref());
    let m = data.x.transpose() * &a;
    let m = Mat::from_fn(pq, pq, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let m_chol = Cholesky::factor(&m).ok_or(Error::SingularDesign)?;
    let atz = a.transpose() * col(&data.z);
    let beta = m_chol.solve_vec(&(0..pq).map(|i| atz[(i, 0)]).collect::<Vec<_>>());
    let xb = &data.x * col(&beta);
    let r: Vec<f64> = (0..n).map(|i| data.z[i] - xb[(i, 0)]).collect();
    let pz = chol.solve_vec(&r);
    let quad: f64 = r.iter().zip(&pz).map(|(a, b)| a * b).sum();
    let value = -0.5 * (n - pq) as f64 * LN_2PI + 0.5 * data.log_det_xtx
        - 0.5 * chol.log_det()
        - 0.5 * m_chol.log_det()
        - 0.5 * quad;
    Ok(Core {
        value,
        beta,
        a,
        m_chol,
        pz,
    })
}

/// Value of the log restricted likelihood with the GLS estimate at the same
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RemlEval {
    pub value: f64,
    pub beta: Vec<f64>,
}

pub(crate) fn evaluate(data: &RemlData, spec: &ModelSpec) -> Result<RemlEval> {
    if spec.p() != data.p {
        return Err(Error::DimensionMismatch(
            "model and data process counts differ".into(),
        ));
    }
    let sites = WarpedSites::new(&spec.warps, &data.locations)?;
    let sigma = sigma_z_unchecked(&spec.params, &sites, &data.rows);
    let chol = Cholesky::factor(&sigma).ok_or(Error::NotPositiveDefinite { jitter: 0.0 })?;
    let c = core_terms(data, &chol)?;
    Ok(RemlEval {
        value: c.value,
        beta: c.beta,
    })
}

/// Log restricted likelihood; `−∞` when `Σ_Z` or the design cannot be
/// factorized so optimizers retreat.
pub fn reml_loglik(spec: &ModelSpec, ds: &MultivariateDataset) -> f64 {
    RemlData::new(ds)
        .and_then(|d| evaluate(&d, spec))
        .map(|e| e.value)
        .unwrap_or(f64::NEG_INFINITY)
}

/// [`reml_loglik`] on data prepared once.
pub fn reml_loglik_prepared(spec: &ModelSpec, data: &RemlData) -> f64 {
    evaluate(data, spec)
        .map(|e| e.value)
        .unwrap_or(f64::NEG_INFINITY)
}

/// `β̂ = (XᵀΣ⁻¹X)⁻¹XᵀΣ⁻¹Z`.
pub fn gls_beta(spec: &ModelSpec, ds: &MultivariateDataset) -> Result<Vec<f64>> {
    let data = RemlData::new(ds)?;
    let sites = WarpedSites::new(&spec.warps, &data.locations)?;
    let sigma = sigma_z_unchecked(&spec.params, &sites, &data.rows);
    let chol = Cholesky::factor_with_jitter(&sigma)?;
    Ok(core_terms(&data, &chol)?.beta)
}

/// Per-entry derivative material: `M`, `(dM/dx)·a/r`, `∂M/∂ν`.
#[derive(Clone, Copy, Default)]
struct Entry {
    m: f64,
    g: f64,
    dn: f64,
}

struct Block {
    coef: f64,
}

fn blocks(params: &ParsimoniousMaternParams) -> Vec<Block> {
    let p = params.p();
    let mut out = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            out.push(Block {
                coef: params.coef(i, j),
            });
        }
    }
    out
}

#[derive(Clone, Default)]
struct ColumnSums {
    /// Per block: `½ΣW M`, `½ΣW ∂M/∂ln a`, `½ΣW ∂M/∂ν`.
    block: Vec<[f64; 3]>,
    force: Vec<f64>,
}

/// Log restricted likelihood and its gradient with respect to every
/// coordinate of the codec's full vector. Gradient entries of fixed
/// coordinates are zero.
pub fn value_and_gradient(
    data: &RemlData,
    codec: &ParamCodec,
    full: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let spec = codec.decode_all(full);
    let params = &spec.params;
    let p = params.p();
    if p != data.p {
        return Err(Error::DimensionMismatch(
            "model and data process counts differ".into(),
        ));
    }
    let sites = WarpedSites::new(&spec.warps, &data.locations)?;
    let n = sites.len();
    let d = sites.dim;
    let scale = params.scale;
    let blk = blocks(params);
    let kernels = PairKernels::for_sites(params, &sites, true);

    let mut entries = vec![Entry::default(); n * n];
    entries
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(b, column)| {
            let pb = sites.process[b];
            for a in b..n {
                let r = sites.distance(a, b);
                let k = kernels.get(sites.process[a], pb).eval(scale * r);
                let g = if r > 0.0 { k.slope * scale / r } else { 0.0 };
                column[a] = Entry {
                    m: k.m,
                    g,
                    dn: k.dnu,
                };
            }
        });
    for b in 0..n {
        for a in b + 1..n {
            entries[a * n + b] = entries[b * n + a];
        }
    }
    let mut sigma = Mat::from_fn(n, n, |a, b| {
        blk[sites.process[a] * p + sites.process[b]].coef * entries[b * n + a].m
    });
    for (a, &k) in data.rows.iter().enumerate() {
        sigma[(a, a)] += params.tau[k] * params.tau[k];
    }
    let chol = Cholesky::factor(&sigma).ok_or(Error::NotPositiveDefinite { jitter: 0.0 })?;
    drop(sigma);
    let core = core_terms(data, &chol)?;

    // W = PZ PZᵀ − Σ⁻¹ + A M⁻¹ Aᵀ
    let pz = col(&core.pz);
    let a_minv = &core.a * core.m_chol.inverse();
    let mut w = chol.inverse();
    w *= faer::Scale(-1.0);
    w += &pz * pz.transpose();
    w += &a_minv * core.a.transpose();

    let columns: Vec<ColumnSums> = (0..n)
        .into_par_iter()
        .map(|b| {
            let mut acc = ColumnSums {
                block: vec![[0.0; 3]; p * p],
                force: vec![0.0; d],
            };
            let pb = sites.process[b];
            let xb = sites.point(b);
            for a in 0..n {
                let wab = w[(a, b)];
                let e = entries[b * n + a];
                let pa = sites.process[a];
                let half = 0.5 * wab;
                let xa = sites.point(a);
                let r2: f64 = xa.iter().zip(xb).map(|(u, v)| (u - v) * (u - v)).sum();
                let s = &mut acc.block[pa * p + pb];
                s[0] += half * e.m;
                s[1] += half * e.g * r2;
                s[2] += half * e.dn;
                if a != b && e.g != 0.0 {
                    let f = wab * blk[pa * p + pb].coef * e.g;
                    for k in 0..d {
                        acc.force[k] += f * (xb[k] - xa[k]);
                    }
                }
            }
            acc
        })
        .collect();

    let mut sums = vec![[0.0; 3]; p * p];
    let mut force = vec![0.0; n * d];
    for (b, c) in columns.iter().enumerate() {
        for (s, v) in sums.iter_mut().zip(&c.block) {
            for k in 0..3 {
                s[k] += v[k];
            }
        }
        force[b * d..(b + 1) * d].copy_from_slice(&c.force);
    }
    let mut w_diag = vec![0.0; p];
    for (a, &k) in data.rows.iter().enumerate() {
        w_diag[k] += w[(a, a)];
    }

    // ∂L/∂ρ_ij for i < j, holding ν fixed.
    let mut d_rho = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in i + 1..p {
            let v = (sums[i * p + j][0] + sums[j * p + i][0]) * params.sigma[i] * params.sigma[j];
            d_rho[i][j] = v;
        }
    }
    let bound = rho_bound(&params.nu, 2);

    let free = codec.is_free();
    let mut grad = vec![0.0; full.len()];
    let mut warp_slots = Vec::new();
    for (idx, slot) in codec.slots().iter().enumerate() {
        if !free[idx] {
            continue;
        }
        grad[idx] = match *slot {
            Slot::Nu(k) => {
                let nu_k = params.nu[k];
                let mut g = 0.0;
                for i in 0..p {
                    for j in 0..p {
                        let factor = 0.5 * ((i == k) as u8 + (j == k) as u8) as f64;
                        if factor != 0.0 {
                            g += blk[i * p + j].coef * sums[i * p + j][2] * factor;
                        }
                    }
                }
                let slope = nu_coord_slope(nu_k);
                g *= slope;
                // ρ = B(ν) tanh η moves with ν through the bound.
                let h = 1e-6 * nu_k;
                let mut nu_p = params.nu.clone();
                let mut nu_m = params.nu.clone();
                nu_p[k] += h;
                nu_m[k] -= h;
                let (bp, bm) = (rho_bound(&nu_p, 2), rho_bound(&nu_m, 2));
                for i in 0..p {
                    for j in i + 1..p {
                        if i == k || j == k {
                            let dlnb = (bp[i][j].ln() - bm[i][j].ln()) / (2.0 * h);
                            g += d_rho[i][j] * params.rho[i][j] * dlnb * slope;
                        }
                    }
                }
                g
            }
            Slot::Scale => (0..p * p).map(|b| blk[b].coef * sums[b][1]).sum(),
            Slot::Sigma(k) => {
                let mut g = 0.0;
                for i in 0..p {
                    for j in 0..p {
                        let factor = ((i == k) as u8 + (j == k) as u8) as f64;
                        g += factor * blk[i * p + j].coef * sums[i * p + j][0];
                    }
                }
                g
            }
            Slot::Rho(i, j) => {
                let t = full[idx].tanh();
                d_rho[i][j] * bound[i][j] * (1.0 - t * t)
            }
            Slot::Tau(k) => params.tau[k] * params.tau[k] * w_diag[k],
            Slot::SharedWarp { .. } | Slot::Aligner { .. } => {
                warp_slots.push(idx);
                0.0
            }
        };
    }

    // Warp coordinates: force on each warped site times its central
    // difference sensitivity.
    let warp_grads: Vec<Result<f64>> = warp_slots
        .par_iter()
        .map(|&idx| {
            let h = 1e-6 * (1.0 + full[idx].abs());
            let mut th = full.to_vec();
            th[idx] = full[idx] + h;
            let sp = WarpedSites::new(&codec.decode_all(&th).warps, &data.locations)?;
            th[idx] = full[idx] - h;
            let sm = WarpedSites::new(&codec.decode_all(&th).warps, &data.locations)?;
            let g: f64 = force
                .iter()
                .zip(sp.coords.iter().zip(&sm.coords))
                .map(|(f, (u, v))| f * (u - v))
                .sum();
            Ok(g / (2.0 * h))
        })
        .collect();
    for (&idx, g) in warp_slots.iter().zip(warp_grads) {
        grad[idx] = g?;
    }

    Ok((core.value, grad))
}

/// Central-difference gradient of the log restricted likelihood over the
/// free coordinates, step `1e-6·(1 + |θ|)`.
pub fn gradient_fd(data: &RemlData, codec: &ParamCodec, theta: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(theta.len());
    let mut th = theta.to_vec();
    for k in 0..theta.len() {
        let h = 1e-6 * (1.0 + theta[k].abs());
        th[k] = theta[k] + h;
        let up = evaluate(data, &codec.decode(&th))?.value;
        th[k] = theta[k] - h;
        let down = evaluate(data, &codec.decode(&th))?.value;
        th[k] = theta[k];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}
