//! Cubic Hermite tables of the Matérn correlation for bulk evaluation.
//!
//! Covariance assembly and the likelihood gradient evaluate one kernel at
//! every pairwise lag. For large problems the kernel is tabulated on a
//! uniform grid with its analytic slope and interpolated; lags near zero,
//! where `M` is not smooth for small `ν`, and lags past the table are
//! evaluated directly.

use super::{Matern, ParsimoniousMaternParams, WarpedSites};

/// Grid spacing in the scaled lag.
const STEP: f64 = 2e-3;
/// Lags below this are evaluated directly.
const X_MIN: f64 = 0.25;
/// Upper end of any table.
const X_CAP: f64 = 80.0;
/// Tabulate only when there are this many lags per table node.
const PAIRS_PER_NODE: usize = 4;

/// Relative step of the central difference in `ν`.
const NU_STEP: f64 = 1e-5;

/// `M`, `dM/dx` and optionally `∂M/∂ν` at one lag.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KernelValue {
    pub m: f64,
    pub slope: f64,
    pub dnu: f64,
}

#[derive(Debug, Clone)]
struct Direct {
    kern: Matern,
    /// `ν ± h` kernels and `h`.
    dnu: Option<(Matern, Matern, f64)>,
}

impl Direct {
    fn new(nu: f64, with_dnu: bool) -> Self {
        let h = NU_STEP * nu;
        Self {
            kern: Matern::new(nu),
            dnu: with_dnu.then(|| (Matern::new(nu + h), Matern::new(nu - h), h)),
        }
    }

    fn eval(&self, x: f64) -> KernelValue {
        let (m, slope) = self.kern.corr_and_slope(x);
        let dnu = match &self.dnu {
            Some((up, down, h)) => (up.corr(x) - down.corr(x)) / (2.0 * h),
            None => 0.0,
        };
        KernelValue { m, slope, dnu }
    }

    /// Value and slope of `∂M/∂ν`.
    fn dnu_and_slope(&self, x: f64) -> (f64, f64) {
        let (up, down, h) = self.dnu.as_ref().expect("table built with ν derivative");
        let (mu, su) = up.corr_and_slope(x);
        let (md, sd) = down.corr_and_slope(x);
        ((mu - md) / (2.0 * h), (su - sd) / (2.0 * h))
    }
}

#[derive(Debug, Clone)]
struct Table {
    x1: f64,
    /// `(M, M′)` and, with the ν derivative, `(D, D′)` at each node.
    nodes: Vec<[f64; 4]>,
}

#[derive(Debug, Clone)]
pub(crate) struct KernelEval {
    direct: Direct,
    table: Option<Table>,
}

impl KernelEval {
    fn new(nu: f64, with_dnu: bool, x_max: f64, tabulate: bool) -> Self {
        let direct = Direct::new(nu, with_dnu);
        let table = tabulate.then(|| {
            let x1 = x_max.min(X_CAP);
            let count = ((x1 - X_MIN) / STEP).ceil() as usize + 2;
            let nodes = (0..count)
                .map(|k| {
                    let x = X_MIN + k as f64 * STEP;
                    let (m, s) = direct.kern.corr_and_slope(x);
                    let (d, ds) = if with_dnu {
                        direct.dnu_and_slope(x)
                    } else {
                        (0.0, 0.0)
                    };
                    [m, s, d, ds]
                })
                .collect();
            Table {
                x1: X_MIN + (count - 1) as f64 * STEP,
                nodes,
            }
        });
        Self { direct, table }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> KernelValue {
        let Some(t) = &self.table else {
            return self.direct.eval(x);
        };
        if x < X_MIN || x >= t.x1 {
            return self.direct.eval(x);
        }
        let u = (x - X_MIN) / STEP;
        let k = (u as usize).min(t.nodes.len() - 2);
        let s = u - k as f64;
        let (a, b) = (&t.nodes[k], &t.nodes[k + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let g0 = 6.0 * (s2 - s) / STEP;
        let g10 = 3.0 * s2 - 4.0 * s + 1.0;
        let g11 = 3.0 * s2 - 2.0 * s;
        let value =
            |v: usize| h00 * a[v] + h10 * STEP * a[v + 1] + h01 * b[v] + h11 * STEP * b[v + 1];
        let slope = |v: usize| g0 * (a[v] - b[v]) + g10 * a[v + 1] + g11 * b[v + 1];
        KernelValue {
            m: value(0),
            slope: slope(0),
            dnu: if self.direct.dnu.is_some() {
                value(2)
            } else {
                0.0
            },
        }
    }
}

/// Kernels of every process pair for one parameter set, indexed `i * p + j`
/// (pairs with equal `ν_ij` share a kernel).
#[derive(Debug, Clone)]
pub(crate) struct PairKernels {
    p: usize,
    index: Vec<usize>,
    kernels: Vec<KernelEval>,
}

impl PairKernels {
    /// `x_max` bounds every scaled lag; `pairs` is the number of lags to be
    /// evaluated and decides whether tabulation pays off.
    pub fn new(
        params: &ParsimoniousMaternParams,
        with_dnu: bool,
        x_max: f64,
        pairs: usize,
    ) -> Self {
        let p = params.p();
        let mut nus: Vec<f64> = Vec::new();
        let mut index = vec![0; p * p];
        for i in 0..p {
            for j in 0..p {
                let nu = params.nu_ij(i, j);
                index[i * p + j] = match nus.iter().position(|&v| v == nu) {
                    Some(k) => k,
                    None => {
                        nus.push(nu);
                        nus.len() - 1
                    }
                };
            }
        }
        let per_table = ((x_max.min(X_CAP) - X_MIN).max(0.0) / STEP) as usize + 2;
        let tabulate =
            x_max.is_finite() && x_max > X_MIN && pairs >= PAIRS_PER_NODE * per_table * nus.len();
        let kernels = nus
            .iter()
            .map(|&nu| KernelEval::new(nu, with_dnu, x_max, tabulate))
            .collect();
        Self { p, index, kernels }
    }

    /// Untabulated kernels without the ν derivative.
    pub fn direct(params: &ParsimoniousMaternParams) -> Self {
        Self::new(params, false, 0.0, 0)
    }

    /// Sizes tables for all pairs among `sites`.
    pub fn for_sites(
        params: &ParsimoniousMaternParams,
        sites: &WarpedSites,
        with_dnu: bool,
    ) -> Self {
        let n = sites.len();
        Self::new(
            params,
            with_dnu,
            params.scale * sites.diameter_bound(),
            n * (n + 1) / 2,
        )
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &KernelEval {
        &self.kernels[self.index[i * self.p + j]]
    }
}
