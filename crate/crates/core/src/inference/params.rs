//! Registry between a [`ModelSpec`] and the flat vector of unconstrained
//! optimizer coordinates.
//!
//! Layout: `logit(ν₁/ν_max)…`, `ln a`, `ln σ₁…ln σ_p`, `η_ij` for `i < j` with
//! `ρ_ij = B_ij(ν) tanh η_ij`, `ln τ₁…ln τ_p`, then the shared warp layers and
//! the aligners of processes `2…p`, each in the coordinates of
//! [`WarpUnit::free_params`](crate::warp::WarpUnit::free_params).

use serde::{Deserialize, Serialize};

use crate::covariance::rho_bound;
use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Upper limit on estimated smoothness. Beyond it the Matérn is
/// indistinguishable from the Gaussian kernel and `Σ_Z` is numerically singular.
pub const NU_MAX: f64 = 30.0;

/// `ν = ν_max / (1 + e^{-θ})`.
pub fn nu_from_coord(theta: f64) -> f64 {
    NU_MAX / (1.0 + (-theta).exp())
}

pub fn nu_to_coord(nu: f64) -> f64 {
    let nu = nu.clamp(1e-12, NU_MAX * (1.0 - 1e-12));
    (nu / (NU_MAX - nu)).ln()
}

/// `dν/dθ` at `ν`.
pub fn nu_coord_slope(nu: f64) -> f64 {
    nu * (1.0 - nu / NU_MAX)
}

/// What a coordinate parameterizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Nu(usize),
    Scale,
    Sigma(usize),
    Rho(usize, usize),
    Tau(usize),
    /// Coordinate `k` of shared layer `layer`.
    SharedWarp {
        layer: usize,
        k: usize,
    },
    /// Coordinate `k` of the aligner of process `process` (zero-based).
    Aligner {
        process: usize,
        k: usize,
    },
}

impl Slot {
    pub fn is_warp(&self) -> bool {
        matches!(self, Slot::SharedWarp { .. } | Slot::Aligner { .. })
    }
}

/// Constraint transform applied to a coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Log,
    /// `ν = ν_max / (1 + e^{-θ})`.
    Logistic,
    /// `ρ = B tanh η`.
    BoundedTanh,
    /// Unit-specific warp transform.
    Warp,
    Identity,
}

/// Free/fixed registry built from a template specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCodec {
    template: ModelSpec,
    slots: Vec<Slot>,
    names: Vec<String>,
    transforms: Vec<Transform>,
    free: Vec<bool>,
    dim: usize,
}

/// Unconstrained coordinates of the free parameters of a [`ParamCodec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub theta: Vec<f64>,
    pub names: Vec<String>,
}

impl ParamCodec {
    /// All parameters free except those whose names appear in `fixed`.
    /// A name ending in `*` fixes every parameter with that prefix.
    pub fn new(template: &ModelSpec, fixed: &[String]) -> Result<Self> {
        template.validate()?;
        let p = template.p();
        let mut slots = Vec::new();
        let mut names = Vec::new();
        let mut transforms = Vec::new();
        let mut push = |s: Slot, n: String, t: Transform| {
            slots.push(s);
            names.push(n);
            transforms.push(t);
        };
        for i in 0..p {
            push(Slot::Nu(i), format!("nu{}", i + 1), Transform::Logistic);
        }
        push(Slot::Scale, "scale".into(), Transform::Log);
        for i in 0..p {
            push(Slot::Sigma(i), format!("sigma{}", i + 1), Transform::Log);
        }
        for i in 0..p {
            for j in i + 1..p {
                push(
                    Slot::Rho(i, j),
                    format!("rho{}{}", i + 1, j + 1),
                    Transform::BoundedTanh,
                );
            }
        }
        for i in 0..p {
            push(Slot::Tau(i), format!("tau{}", i + 1), Transform::Log);
        }
        for (l, unit) in template.warps.shared.layers.iter().enumerate() {
            for (k, n) in unit.free_param_names().into_iter().enumerate() {
                push(
                    Slot::SharedWarp { layer: l, k },
                    format!("f.{}.{}.{}", l + 1, unit.kind(), n),
                    Transform::Warp,
                );
            }
        }
        for (i, g) in template.warps.aligners.iter().enumerate() {
            let names_i: Vec<String> = g.layers.iter().flat_map(|u| u.free_param_names()).collect();
            for (k, n) in names_i.into_iter().enumerate() {
                push(
                    Slot::Aligner { process: i, k },
                    format!("g{}.{}", i + 1, n),
                    Transform::Identity,
                );
            }
        }
        let matches = |name: &str, pat: &str| match pat.strip_suffix('*') {
            Some(prefix) => name.starts_with(prefix),
            None => name == pat,
        };
        for pat in fixed {
            if !names.iter().any(|n| matches(n, pat)) {
                return Err(Error::InvalidParameter(format!(
                    "unknown parameter to fix: {pat}"
                )));
            }
        }
        let free: Vec<bool> = names
            .iter()
            .map(|n| !fixed.iter().any(|pat| matches(n, pat)))
            .collect();
        for (i, tau) in template.params.tau.iter().enumerate() {
            let idx = names
                .iter()
                .position(|n| *n == format!("tau{}", i + 1))
                .unwrap();
            if free[idx] && *tau <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "tau{} = 0 can only be used with the parameter fixed",
                    i + 1
                )));
            }
        }
        let dim = free.iter().filter(|f| **f).count();
        Ok(Self {
            template: template.clone(),
            slots,
            names,
            transforms,
            free,
            dim,
        })
    }

    /// Number of free coordinates, `dim(θ)`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn template(&self) -> &ModelSpec {
        &self.template
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn all_names(&self) -> &[String] {
        &self.names
    }

    pub fn transforms(&self) -> &[Transform] {
        &self.transforms
    }

    pub fn is_free(&self) -> &[bool] {
        &self.free
    }

    pub fn free_names(&self) -> Vec<String> {
        self.select(&self.names)
    }

    pub fn select<T: Clone>(&self, all: &[T]) -> Vec<T> {
        all.iter()
            .zip(&self.free)
            .filter(|(_, f)| **f)
            .map(|(v, _)| v.clone())
            .collect()
    }

    /// Same registry with a different template (values only; the layout must match).
    pub fn with_template(&self, spec: &ModelSpec) -> Result<Self> {
        let fixed: Vec<String> = self
            .names
            .iter()
            .zip(&self.free)
            .filter(|(_, f)| !**f)
            .map(|(n, _)| n.clone())
            .collect();
        let out = Self::new(spec, &fixed)?;
        if out.names != self.names {
            return Err(Error::InvalidParameter("parameter layout changed".into()));
        }
        Ok(out)
    }

    /// Same template with a different fixed set.
    pub fn refix(&self, fixed: &[String]) -> Result<Self> {
        Self::new(&self.template, fixed)
    }

    /// Every coordinate, free or fixed.
    pub fn encode_all(&self, spec: &ModelSpec) -> Vec<f64> {
        let pr = &spec.params;
        let bound = rho_bound(&pr.nu, 2);
        let shared: Vec<Vec<f64>> = spec
            .warps
            .shared
            .layers
            .iter()
            .map(|u| u.free_params())
            .collect();
        let aligners: Vec<Vec<f64>> = spec
            .warps
            .aligners
            .iter()
            .map(|g| g.free_params())
            .collect();
        self.slots
            .iter()
            .map(|s| match *s {
                Slot::Nu(i) => nu_to_coord(pr.nu[i]),
                Slot::Scale => pr.scale.ln(),
                Slot::Sigma(i) => pr.sigma[i].ln(),
                Slot::Rho(i, j) => {
                    let r = (pr.rho[i][j] / bound[i][j]).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                    r.atanh()
                }
                Slot::Tau(i) => pr.tau[i].ln(),
                Slot::SharedWarp { layer, k } => shared[layer][k],
                Slot::Aligner { process, k } => aligners[process][k],
            })
            .collect()
    }

    /// Free coordinates of `spec`.
    pub fn encode(&self, spec: &ModelSpec) -> ParamVector {
        ParamVector {
            theta: self.select(&self.encode_all(spec)),
            names: self.free_names(),
        }
    }

    /// Full coordinate vector with the free entries replaced by `theta`.
    pub fn expand(&self, theta: &[f64]) -> Vec<f64> {
        assert_eq!(theta.len(), self.dim, "theta has wrong length");
        let mut full = self.encode_all(&self.template);
        let mut it = theta.iter();
        for (v, f) in full.iter_mut().zip(&self.free) {
            if *f {
                *v = *it.next().unwrap();
            }
        }
        full
    }

    pub fn decode(&self, theta: &[f64]) -> ModelSpec {
        self.decode_all(&self.expand(theta))
    }

    /// Inverse of [`ParamCodec::encode_all`]. Fixed coordinates holding exact
    /// template values (such as `τ = 0`) are copied rather than transformed.
    pub fn decode_all(&self, full: &[f64]) -> ModelSpec {
        let mut spec = self.template.clone();
        let p = spec.p();
        let mut eta = vec![vec![0.0; p]; p];
        let mut shared: Vec<Vec<f64>> = spec
            .warps
            .shared
            .layers
            .iter()
            .map(|u| u.free_params())
            .collect();
        let mut aligners: Vec<Vec<f64>> = spec
            .warps
            .aligners
            .iter()
            .map(|g| g.free_params())
            .collect();
        for ((s, v), free) in self.slots.iter().zip(full).zip(&self.free) {
            match *s {
                Slot::Nu(i) => spec.params.nu[i] = nu_from_coord(*v),
                Slot::Scale => spec.params.scale = v.exp(),
                Slot::Sigma(i) => spec.params.sigma[i] = v.exp(),
                Slot::Rho(i, j) => eta[i][j] = *v,
                Slot::Tau(i) => {
                    if *free || self.template.params.tau[i] > 0.0 {
                        spec.params.tau[i] = v.exp();
                    }
                }
                Slot::SharedWarp { layer, k } => shared[layer][k] = *v,
                Slot::Aligner { process, k } => aligners[process][k] = *v,
            }
        }
        let bound = rho_bound(&spec.params.nu, 2);
        for i in 0..p {
            for j in i + 1..p {
                let r = bound[i][j] * eta[i][j].tanh();
                spec.params.rho[i][j] = r;
                spec.params.rho[j][i] = r;
            }
        }
        for (unit, v) in spec.warps.shared.layers.iter_mut().zip(&shared) {
            unit.set_free_params(v);
        }
        for (g, v) in spec.warps.aligners.iter_mut().zip(&aligners) {
            g.set_free_params(v);
        }
        spec
    }

    /// Jitters the free warp coordinates of `theta` by `scale` standard normals.
    pub fn jitter_warps(&self, theta: &[f64], noise: &[f64], scale: f64) -> Vec<f64> {
        let warp_free: Vec<bool> =
            self.select(&self.slots.iter().map(Slot::is_warp).collect::<Vec<_>>());
        theta
            .iter()
            .zip(&warp_free)
            .zip(noise.iter().cycle())
            .map(|((t, w), e)| if *w { t + scale * e } else { *t })
            .collect()
    }
}
