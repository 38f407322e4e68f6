//! Injective warping units, their composition, and the per-process warp set
//! `f ∘ gᵢ` used to build nonstationary cross-covariances.

mod homogenize;
mod location;

pub use homogenize::{homogenize, select_anchors, HomogenizationAnchors, HomogenizedFrame};
pub use location::Location;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum |det| accepted for Möbius and affine units.
pub const EPS_DET: f64 = 1e-8;
/// Minimum |θ₃z + θ₄| before a Möbius evaluation is treated as hitting the pole.
pub const EPS_DIV: f64 = 1e-10;
/// Central-difference step for numerical Jacobians.
pub const H_FD: f64 = 1e-5;

/// Admissible open interval for a radial-basis weight. On it both Jacobian
/// eigenvalues `1 + w e^{-t}` and `1 + w (1-2t) e^{-t}` stay positive for all
/// `t = θ₂ r² ≥ 0`; the radial one attains its minimum `1 - 2w e^{-3/2}` at
/// `t = 3/2`.
pub fn radial_weight_bounds() -> (f64, f64) {
    (-1.0, 0.5 * 1.5f64.exp())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Monotone warp of a single coordinate:
/// `s_axis ↦ w₁ s_axis + Σ_{i≥2} wᵢ / (1 + exp(-θ₁ᵢ (s_axis - θ₂ᵢ)))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxialWarp {
    pub axis: usize,
    /// `w₁ … w_r`; `w₁` multiplies the identity basis function.
    pub weights: Vec<f64>,
    /// Sigmoid steepness `θ₁ᵢ`, one per weight after the first.
    pub steepness: Vec<f64>,
    /// Sigmoid centers `θ₂ᵢ`, one per weight after the first.
    pub centers: Vec<f64>,
}

impl AxialWarp {
    /// `r` basis functions with sigmoid centers spread evenly over
    /// `[lo, hi]`, steepness `50 / (hi - lo)` and weights
    /// `(1, init, …, init)`.
    pub fn with_basis(axis: usize, r: usize, lo: f64, hi: f64, init: f64) -> Self {
        assert!(r >= 1 && hi > lo);
        let m = r - 1;
        let centers: Vec<f64> = (0..m)
            .map(|i| {
                if m == 1 {
                    0.5 * (lo + hi)
                } else {
                    lo + (hi - lo) * i as f64 / (m - 1) as f64
                }
            })
            .collect();
        let mut weights = vec![init; r];
        weights[0] = 1.0;
        Self {
            axis,
            weights,
            steepness: vec![50.0 / (hi - lo); m],
            centers,
        }
    }

    fn map(&self, t: f64) -> f64 {
        let mut out = self.weights[0] * t;
        for ((w, k), c) in self.weights[1..]
            .iter()
            .zip(&self.steepness)
            .zip(&self.centers)
        {
            out += w * sigmoid(k * (t - c));
        }
        out
    }
}

/// Complex number stored as `[re, im]`.
pub type ComplexPair = [f64; 2];

fn cx(p: ComplexPair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

/// One elemental injective deformation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WarpUnit {
    Identity,
    Axial(AxialWarp),
    RadialBasis {
        weight: f64,
        center: Location,
        precision: f64,
    },
    /// `z ↦ (θ₁z + θ₂)/(θ₃z + θ₄)` with `z = s₁ + i s₂`.
    Mobius {
        theta: [ComplexPair; 4],
    },
    /// `s ↦ A s + d`, `A` stored row-major.
    Affine {
        matrix: Vec<f64>,
        shift: Location,
    },
}

impl WarpUnit {
    pub fn mobius_identity() -> Self {
        WarpUnit::Mobius {
            theta: [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]],
        }
    }

    pub fn affine_identity(d: usize) -> Self {
        let mut matrix = vec![0.0; d * d];
        for i in 0..d {
            matrix[i * d + i] = 1.0;
        }
        WarpUnit::Affine {
            matrix,
            shift: Location::zeros(d),
        }
    }

    pub fn translation(shift: Location) -> Self {
        let d = shift.dim();
        match Self::affine_identity(d) {
            WarpUnit::Affine { matrix, .. } => WarpUnit::Affine { matrix, shift },
            _ => unreachable!(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            WarpUnit::Identity => "identity",
            WarpUnit::Axial(_) => "axial",
            WarpUnit::RadialBasis { .. } => "radial_basis",
            WarpUnit::Mobius { .. } => "mobius",
            WarpUnit::Affine { .. } => "affine",
        }
    }

    /// Number of basis functions `r_l` this unit evaluates per location.
    pub fn basis_count(&self) -> usize {
        match self {
            WarpUnit::Identity => 0,
            WarpUnit::Axial(a) => a.weights.len(),
            WarpUnit::RadialBasis { .. } | WarpUnit::Mobius { .. } => 1,
            WarpUnit::Affine { shift, .. } => shift.dim(),
        }
    }

    /// Checks the structural invariants of the unit. The radial-basis
    /// weight bound is not enforced here; see [`check_injective`].
    pub fn validate(&self) -> Result<()> {
        match self {
            WarpUnit::Identity => Ok(()),
            WarpUnit::Axial(a) => {
                let m = a.weights.len().saturating_sub(1);
                if a.weights.is_empty() || a.steepness.len() != m || a.centers.len() != m {
                    return Err(Error::InvalidWarp(
                        "axial warp needs r ≥ 1 weights and r-1 steepness/center values".into(),
                    ));
                }
                if !(a.weights[0] > 0.0) || a.weights[1..].iter().any(|w| !(*w >= 0.0)) {
                    return Err(Error::InvalidWarp(
                        "axial weights must satisfy w₁ > 0, wᵢ ≥ 0".into(),
                    ));
                }
                if a.steepness.iter().any(|k| !(*k > 0.0)) {
                    return Err(Error::InvalidWarp(
                        "axial steepness must be positive".into(),
                    ));
                }
                Ok(())
            }
            WarpUnit::RadialBasis {
                weight,
                center,
                precision,
            } => {
                if !(*precision > 0.0) || !weight.is_finite() || !center.is_finite() {
                    return Err(Error::InvalidWarp(
                        "radial basis needs finite weight/center and precision > 0".into(),
                    ));
                }
                Ok(())
            }
            WarpUnit::Mobius { theta } => {
                let det = cx(theta[0]) * cx(theta[3]) - cx(theta[1]) * cx(theta[2]);
                if det.norm() < EPS_DET {
                    return Err(Error::InvalidWarp(format!(
                        "degenerate Möbius transformation (|θ₁θ₄-θ₂θ₃| = {:e})",
                        det.norm()
                    )));
                }
                Ok(())
            }
            WarpUnit::Affine { matrix, shift } => {
                let d = shift.dim();
                if matrix.len() != d * d {
                    return Err(Error::InvalidWarp("affine matrix must be d×d".into()));
                }
                let det = determinant(matrix, d);
                if det.abs() < EPS_DET {
                    return Err(Error::InvalidWarp(format!(
                        "singular affine matrix (|det A| = {:e})",
                        det.abs()
                    )));
                }
                Ok(())
            }
        }
    }

    /// Applies the unit to a location.
    pub fn apply(&self, s: &Location) -> Result<Location> {
        match self {
            WarpUnit::Identity => Ok(s.clone()),
            WarpUnit::Axial(a) => {
                if a.axis >= s.dim() {
                    return Err(Error::DimensionMismatch(format!(
                        "axial axis {} for a {}-dimensional location",
                        a.axis,
                        s.dim()
                    )));
                }
                let mut out = s.clone();
                out[a.axis] = a.map(s[a.axis]);
                Ok(out)
            }
            WarpUnit::RadialBasis {
                weight,
                center,
                precision,
            } => {
                if center.dim() != s.dim() {
                    return Err(Error::DimensionMismatch("radial basis center".into()));
                }
                let r2: f64 = s
                    .iter()
                    .zip(center.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let k = weight * (-precision * r2).exp();
                Ok(s.iter()
                    .zip(center.iter())
                    .map(|(a, c)| a + k * (a - c))
                    .collect())
            }
            WarpUnit::Mobius { theta } => {
                if s.dim() != 2 {
                    return Err(Error::UnsupportedDimension {
                        unit: "mobius",
                        expected: 2,
                        got: s.dim(),
                    });
                }
                let z = Complex64::new(s[0], s[1]);
                let den = cx(theta[2]) * z + cx(theta[3]);
                if den.norm() < EPS_DIV {
                    return Err(Error::MobiusPole(den.norm()));
                }
                let w = (cx(theta[0]) * z + cx(theta[1])) / den;
                Ok(Location::xy(w.re, w.im))
            }
            WarpUnit::Affine { matrix, shift } => {
                let d = shift.dim();
                if s.dim() != d {
                    return Err(Error::DimensionMismatch("affine unit".into()));
                }
                Ok((0..d)
                    .map(|i| shift[i] + (0..d).map(|j| matrix[i * d + j] * s[j]).sum::<f64>())
                    .collect())
            }
        }
    }

    /// Number of unconstrained optimizer coordinates this unit owns.
    ///
    /// Axial steepness/centers and radial-basis centers/precisions are fixed
    /// hyperparameters; only weights are free.
    pub fn n_free(&self) -> usize {
        match self {
            WarpUnit::Identity => 0,
            WarpUnit::Axial(a) => a.weights.len(),
            WarpUnit::RadialBasis { .. } => 1,
            WarpUnit::Mobius { .. } => 8,
            WarpUnit::Affine { shift, .. } => shift.dim() * shift.dim() + shift.dim(),
        }
    }

    /// Unconstrained coordinates: `ln w` for axial weights, logit-squashed
    /// weight for radial basis units, raw values otherwise.
    pub fn free_params(&self) -> Vec<f64> {
        match self {
            WarpUnit::Identity => vec![],
            WarpUnit::Axial(a) => a.weights.iter().map(|w| w.ln()).collect(),
            WarpUnit::RadialBasis { weight, .. } => {
                let (lo, hi) = radial_weight_bounds();
                vec![logit((weight - lo) / (hi - lo))]
            }
            WarpUnit::Mobius { theta } => theta.iter().flat_map(|c| c.iter().copied()).collect(),
            WarpUnit::Affine { matrix, shift } => {
                matrix.iter().chain(shift.iter()).copied().collect()
            }
        }
    }

    /// Inverse of [`WarpUnit::free_params`].
    pub fn set_free_params(&mut self, free: &[f64]) {
        assert_eq!(free.len(), self.n_free());
        match self {
            WarpUnit::Identity => {}
            WarpUnit::Axial(a) => {
                for (w, f) in a.weights.iter_mut().zip(free) {
                    *w = f.exp();
                }
            }
            WarpUnit::RadialBasis { weight, .. } => {
                let (lo, hi) = radial_weight_bounds();
                *weight = lo + (hi - lo) * sigmoid(free[0]);
            }
            WarpUnit::Mobius { theta } => {
                for (k, c) in theta.iter_mut().enumerate() {
                    *c = [free[2 * k], free[2 * k + 1]];
                }
            }
            WarpUnit::Affine { matrix, shift } => {
                let dd = matrix.len();
                matrix.copy_from_slice(&free[..dd]);
                for (i, v) in free[dd..].iter().enumerate() {
                    shift[i] = *v;
                }
            }
        }
    }

    pub fn free_param_names(&self) -> Vec<String> {
        match self {
            WarpUnit::Identity => vec![],
            WarpUnit::Axial(a) => (0..a.weights.len())
                .map(|i| format!("log_w{}", i + 1))
                .collect(),
            WarpUnit::RadialBasis { .. } => vec!["logit_w".into()],
            WarpUnit::Mobius { .. } => (1..=4)
                .flat_map(|k| [format!("re_theta{k}"), format!("im_theta{k}")])
                .collect(),
            WarpUnit::Affine { shift, .. } => {
                let d = shift.dim();
                let mut names: Vec<String> = (0..d * d)
                    .map(|k| format!("A{}{}", k / d + 1, k % d + 1))
                    .collect();
                names.extend((0..d).map(|i| format!("d{}", i + 1)));
                names
            }
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, WarpUnit::Identity)
    }
}

fn determinant(m: &[f64], d: usize) -> f64 {
    // LU without pivot bookkeeping beyond sign; d is tiny.
    let mut a = m.to_vec();
    let mut det = 1.0;
    for c in 0..d {
        let p = (c..d)
            .max_by(|&i, &j| a[i * d + c].abs().total_cmp(&a[j * d + c].abs()))
            .unwrap();
        if a[p * d + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for k in 0..d {
                a.swap(p * d + k, c * d + k);
            }
            det = -det;
        }
        det *= a[c * d + c];
        for r in c + 1..d {
            let f = a[r * d + c] / a[c * d + c];
            for k in c..d {
                a[r * d + k] -= f * a[c * d + k];
            }
        }
    }
    det
}

/// Ordered composition `f_[L] ∘ … ∘ f_[1]`; `layers[0]` is applied first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WarpFunction {
    pub layers: Vec<WarpUnit>,
}

impl WarpFunction {
    pub fn identity() -> Self {
        Self { layers: vec![] }
    }

    pub fn new(layers: Vec<WarpUnit>) -> Self {
        Self { layers }
    }

    pub fn validate(&self) -> Result<()> {
        self.layers.iter().try_for_each(WarpUnit::validate)
    }

    pub fn is_identity(&self) -> bool {
        self.layers.iter().all(WarpUnit::is_identity)
    }

    pub fn apply(&self, s: &Location) -> Result<Location> {
        apply_warp(self, s)
    }

    /// `Σ r_l` over the layers.
    pub fn basis_count(&self) -> usize {
        self.layers.iter().map(WarpUnit::basis_count).sum()
    }

    pub fn n_free(&self) -> usize {
        self.layers.iter().map(WarpUnit::n_free).sum()
    }

    pub fn free_params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(WarpUnit::free_params).collect()
    }

    pub fn set_free_params(&mut self, free: &[f64]) {
        let mut off = 0;
        for layer in &mut self.layers {
            let n = layer.n_free();
            layer.set_free_params(&free[off..off + n]);
            off += n;
        }
    }

    /// Concatenation: `self` first, then `other`.
    pub fn then(&self, other: &WarpFunction) -> WarpFunction {
        let mut layers = self.layers.clone();
        layers.extend(other.layers.iter().cloned());
        WarpFunction { layers }
    }
}

pub fn apply_unit(u: &WarpUnit, s: &Location) -> Result<Location> {
    u.apply(s)
}

pub fn apply_warp(f: &WarpFunction, s: &Location) -> Result<Location> {
    let mut cur = s.clone();
    for layer in &f.layers {
        cur = layer.apply(&cur)?;
    }
    Ok(cur)
}

/// The shared warp `f` and the per-process aligners `gᵢ`; process `i` is
/// warped by `f ∘ gᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessWarpSet {
    pub shared: WarpFunction,
    pub aligners: Vec<WarpFunction>,
}

impl ProcessWarpSet {
    /// All-identity warps for `p` processes.
    pub fn identity(p: usize) -> Self {
        Self {
            shared: WarpFunction::identity(),
            aligners: vec![WarpFunction::identity(); p],
        }
    }

    pub fn new(shared: WarpFunction, aligners: Vec<WarpFunction>) -> Result<Self> {
        let set = Self { shared, aligners };
        set.validate()?;
        Ok(set)
    }

    pub fn n_processes(&self) -> usize {
        self.aligners.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.aligners.is_empty() {
            return Err(Error::InvalidWarp(
                "at least one process is required".into(),
            ));
        }
        if !self.aligners[0].is_identity() {
            return Err(Error::InvalidWarp(
                "the first process aligner must be the identity".into(),
            ));
        }
        for (i, g) in self.aligners.iter().enumerate() {
            let ok = g.is_identity()
                || (g.layers.len() == 1 && matches!(g.layers[0], WarpUnit::Affine { .. }));
            if !ok {
                return Err(Error::InvalidWarp(format!(
                    "aligner {} must be the identity or a single affine unit",
                    i + 1
                )));
            }
            g.validate()?;
        }
        self.shared.validate()
    }

    /// True when every aligner is the identity (symmetric model).
    pub fn is_symmetric(&self) -> bool {
        self.aligners.iter().all(WarpFunction::is_identity)
    }

    /// `f ∘ gᵢ(s)` for the zero-based process index `i`.
    pub fn warp(&self, i: usize, s: &Location) -> Result<Location> {
        let g = self.aligners.get(i).ok_or(Error::ProcessIndex {
            index: i,
            count: self.aligners.len(),
        })?;
        apply_warp(&self.shared, &apply_warp(g, s)?)
    }

    pub fn n_free(&self) -> usize {
        self.shared.n_free()
            + self
                .aligners
                .iter()
                .map(WarpFunction::n_free)
                .sum::<usize>()
    }
}

/// `f ∘ gᵢ(s)` with a 1-based process index.
pub fn warp_for_process(w: &ProcessWarpSet, i: usize, s: &Location) -> Result<Location> {
    if i == 0 || i > w.n_processes() {
        return Err(Error::ProcessIndex {
            index: i,
            count: w.n_processes(),
        });
    }
    w.warp(i - 1, s)
}

/// Outcome of [`check_injective`].
#[derive(Debug, Clone, PartialEq)]
pub struct InjectivityReport {
    pub injective: bool,
    pub min_det: f64,
    pub max_det: f64,
    /// Probe point where the determinant is closest to violating a
    /// consistent sign (or where evaluation failed).
    pub worst_point: Option<Location>,
    pub message: Option<String>,
}

/// Numerical Jacobian of `f` at `s` by central differences with step `h`,
/// row-major `d×d`.
pub fn numerical_jacobian(f: &WarpFunction, s: &Location, h: f64) -> Result<Vec<f64>> {
    let d = s.dim();
    let mut jac = vec![0.0; d * d];
    for j in 0..d {
        let mut plus = s.clone();
        let mut minus = s.clone();
        plus[j] += h;
        minus[j] -= h;
        let fp = f.apply(&plus)?;
        let fm = f.apply(&minus)?;
        for i in 0..d {
            jac[i * d + j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Checks that the Jacobian determinant of `f` keeps a strict, consistent
/// sign over the probe grid.
pub fn check_injective(f: &WarpFunction, probe_grid: &[Location]) -> InjectivityReport {
    let mut min_det = f64::INFINITY;
    let mut max_det = f64::NEG_INFINITY;
    let mut min_abs = f64::INFINITY;
    let mut worst: Option<Location> = None;
    let mut argmin: Option<Location> = None;
    let mut argmax: Option<Location> = None;
    for s in probe_grid {
        let det = match numerical_jacobian(f, s, H_FD) {
            Ok(j) => determinant(&j, s.dim()),
            Err(e) => {
                return InjectivityReport {
                    injective: false,
                    min_det,
                    max_det,
                    worst_point: Some(s.clone()),
                    message: Some(e.to_string()),
                }
            }
        };
        if det < min_det {
            min_det = det;
            argmin = Some(s.clone());
        }
        if det > max_det {
            max_det = det;
            argmax = Some(s.clone());
        }
        if det.abs() < min_abs {
            min_abs = det.abs();
            worst = Some(s.clone());
        }
    }
    if probe_grid.is_empty() {
        return InjectivityReport {
            injective: true,
            min_det: f64::NAN,
            max_det: f64::NAN,
            worst_point: None,
            message: None,
        };
    }
    let positive = min_det > 0.0;
    let negative = max_det < 0.0;
    let injective = positive || negative;
    let (worst_point, message) = if injective {
        (worst, None)
    } else if max_det > 0.0 {
        (
            argmin,
            Some(format!(
                "Jacobian determinant changes sign: min {min_det:e}, max {max_det:e}"
            )),
        )
    } else {
        (argmax, Some("Jacobian determinant vanishes".to_string()))
    };
    InjectivityReport {
        injective,
        min_det,
        max_det,
        worst_point,
        message,
    }
}

/// Regular `nx × ny` grid over `[x0, x1] × [y0, y1]`, x varying fastest.
pub fn regular_grid(extent: [f64; 4], nx: usize, ny: usize) -> Vec<Location> {
    let [x0, x1, y0, y1] = extent;
    let step = |lo: f64, hi: f64, n: usize, i: usize| {
        if n == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            out.push(Location::xy(step(x0, x1, nx, i), step(y0, y1, ny, j)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn loc(x: f64, y: f64) -> Location {
        Location::xy(x, y)
    }

    #[test]
    fn unit_examples() {
        let s = loc(0.3, -0.1);
        assert_eq!(WarpUnit::Identity.apply(&s).unwrap(), s);

        let rbf = WarpUnit::RadialBasis {
            weight: 0.0,
            center: loc(0.0, 0.0),
            precision: 1.0,
        };
        assert_eq!(rbf.apply(&loc(0.5, 0.5)).unwrap(), loc(0.5, 0.5));

        let mob = WarpUnit::Mobius {
            theta: [[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 0.0]],
        };
        let out = mob.apply(&loc(2.0, 0.0)).unwrap();
        assert!((out[0] - 0.5).abs() < 1e-15 && out[1].abs() < 1e-15);

        let axial = WarpUnit::Axial(AxialWarp {
            axis: 1,
            weights: vec![1.0],
            steepness: vec![],
            centers: vec![],
        });
        assert_eq!(axial.apply(&loc(0.2, 0.7)).unwrap(), loc(0.2, 0.7));
    }

    #[test]
    fn mobius_pole_and_dimension_errors() {
        let mob = WarpUnit::Mobius {
            theta: [[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 0.0]],
        };
        assert!(matches!(
            mob.apply(&loc(0.0, 0.0)),
            Err(Error::MobiusPole(_))
        ));
        let s3 = Location::new(&[0.1, 0.2, 0.3]);
        assert!(matches!(
            WarpUnit::mobius_identity().apply(&s3),
            Err(Error::UnsupportedDimension { .. })
        ));
    }

    #[test]
    fn dimension_generic_units() {
        let s3 = Location::new(&[0.1, 0.2, 0.3]);
        let rbf = WarpUnit::RadialBasis {
            weight: 0.5,
            center: Location::zeros(3),
            precision: 2.0,
        };
        assert_eq!(rbf.apply(&s3).unwrap().dim(), 3);
        let ax = WarpUnit::Axial(AxialWarp::with_basis(2, 4, -1.0, 1.0, 0.3));
        let out = ax.apply(&s3).unwrap();
        assert_eq!(out[0], 0.1);
        assert_eq!(out[1], 0.2);
        assert_ne!(out[2], 0.3);
        let aff = WarpUnit::affine_identity(3);
        assert_eq!(aff.apply(&s3).unwrap(), s3);
    }

    #[test]
    fn composition_examples() {
        assert_eq!(
            apply_warp(&WarpFunction::identity(), &loc(1.0, 2.0)).unwrap(),
            loc(1.0, 2.0)
        );
        let f = WarpFunction::new(vec![
            WarpUnit::translation(loc(1.0, 0.0)),
            WarpUnit::translation(loc(0.0, 1.0)),
        ]);
        assert_eq!(f.apply(&loc(0.0, 0.0)).unwrap(), loc(1.0, 1.0));
        let m = WarpFunction::new(vec![WarpUnit::mobius_identity()]);
        assert_eq!(m.apply(&loc(0.4, -0.4)).unwrap(), loc(0.4, -0.4));
    }

    #[test]
    fn process_warp_examples() {
        let aligners = vec![
            WarpFunction::identity(),
            WarpFunction::new(vec![WarpUnit::translation(loc(0.1, 0.0))]),
        ];
        let w = ProcessWarpSet::new(WarpFunction::identity(), aligners.clone()).unwrap();
        assert_eq!(
            warp_for_process(&w, 2, &loc(0.0, 0.0)).unwrap(),
            loc(0.1, 0.0)
        );
        assert_eq!(
            warp_for_process(&w, 1, &loc(0.0, 0.0)).unwrap(),
            loc(0.0, 0.0)
        );
        assert!(matches!(
            warp_for_process(&w, 3, &loc(0.0, 0.0)),
            Err(Error::ProcessIndex { .. })
        ));
        assert!(warp_for_process(&w, 0, &loc(0.0, 0.0)).is_err());

        let shared = WarpFunction::new(vec![WarpUnit::Affine {
            matrix: vec![2.0, 0.0, 0.0, 2.0],
            shift: loc(0.0, 0.0),
        }]);
        let w = ProcessWarpSet::new(shared, aligners).unwrap();
        let out = warp_for_process(&w, 2, &loc(0.0, 0.0)).unwrap();
        assert!((out[0] - 0.2).abs() < 1e-15 && out[1] == 0.0);
    }

    #[test]
    fn aligner_constraints() {
        let bad_first = ProcessWarpSet::new(
            WarpFunction::identity(),
            vec![WarpFunction::new(vec![WarpUnit::translation(loc(
                0.1, 0.0,
            ))])],
        );
        assert!(bad_first.is_err());
        let bad_kind = ProcessWarpSet::new(
            WarpFunction::identity(),
            vec![
                WarpFunction::identity(),
                WarpFunction::new(vec![WarpUnit::mobius_identity()]),
            ],
        );
        assert!(bad_kind.is_err());
    }

    #[test]
    fn injectivity_examples() {
        let grid = regular_grid([-0.5, 0.5, -0.5, 0.5], 21, 21);
        assert!(check_injective(&WarpFunction::identity(), &grid).injective);

        let folding = WarpFunction::new(vec![WarpUnit::RadialBasis {
            weight: -2.0,
            center: loc(0.0, 0.0),
            precision: 10.0,
        }]);
        let rep = check_injective(&folding, &grid);
        assert!(!rep.injective);
        assert!(rep.message.is_some());

        let shift = WarpFunction::new(vec![WarpUnit::translation(loc(3.0, -7.0))]);
        let rep = check_injective(&shift, &grid);
        assert!(rep.injective);
        assert!((rep.min_det - 1.0).abs() < 1e-8);

        // Reflection: consistently negative.
        let refl = WarpFunction::new(vec![WarpUnit::Affine {
            matrix: vec![1.0, 0.0, 0.0, -1.0],
            shift: loc(0.0, 0.0),
        }]);
        assert!(check_injective(&refl, &grid).injective);
    }

    #[test]
    fn radial_bound_is_sharp() {
        let (lo, hi) = radial_weight_bounds();
        let grid = regular_grid([-1.0, 1.0, -1.0, 1.0], 81, 81);
        for w in [lo * 0.98, hi * 0.98] {
            let f = WarpFunction::new(vec![WarpUnit::RadialBasis {
                weight: w,
                center: loc(0.0, 0.0),
                precision: 6.0,
            }]);
            assert!(check_injective(&f, &grid).injective, "w={w}");
        }
        // Slightly beyond the upper bound the radial derivative turns
        // negative on the ring θ₂r² = 3/2.
        let f = WarpFunction::new(vec![WarpUnit::RadialBasis {
            weight: hi * 1.1,
            center: loc(0.0, 0.0),
            precision: 6.0,
        }]);
        assert!(!check_injective(&f, &grid).injective);
    }

    #[test]
    fn free_params_round_trip() {
        let mut f = WarpFunction::new(vec![
            WarpUnit::Axial(AxialWarp::with_basis(0, 5, -0.5, 0.5, 0.2)),
            WarpUnit::RadialBasis {
                weight: 0.7,
                center: loc(0.1, 0.0),
                precision: 18.0,
            },
            WarpUnit::Mobius {
                theta: [[1.1, 0.1], [0.2, 0.0], [0.05, -0.1], [1.0, 0.3]],
            },
            WarpUnit::affine_identity(2),
        ]);
        let orig = f.clone();
        let free = f.free_params();
        assert_eq!(free.len(), 5 + 1 + 8 + 6);
        f.set_free_params(&free);
        for (a, b) in f.layers.iter().zip(&orig.layers) {
            let (fa, fb) = (a.free_params(), b.free_params());
            for (x, y) in fa.iter().zip(&fb) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        let s = loc(0.2, -0.3);
        let (x, y) = (f.apply(&s).unwrap(), orig.apply(&s).unwrap());
        assert!(x.distance(&y) < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_units() {
        let singular = WarpUnit::Affine {
            matrix: vec![1.0, 2.0, 2.0, 4.0],
            shift: loc(0.0, 0.0),
        };
        assert!(singular.validate().is_err());
        let mob = WarpUnit::Mobius {
            theta: [[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.0]],
        };
        assert!(mob.validate().is_err());
        let ax = WarpUnit::Axial(AxialWarp {
            axis: 0,
            weights: vec![0.0, 1.0],
            steepness: vec![1.0],
            centers: vec![0.0],
        });
        assert!(ax.validate().is_err());
    }
}
