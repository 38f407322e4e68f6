//! Fixed frame of reference for warped locations.
//!
//! `b₀ = b₃ ∘ b₂ ∘ b₁` shifts and scales so the anchor `s̃_k` lands on the
//! origin and `s̃_l` at unit distance, rotates `s̃_l` onto `(1, 0)`, and
//! reflects about the horizontal axis when needed so `s̃_m` has a positive
//! second coordinate. Two-dimensional only.

use serde::{Deserialize, Serialize};

use super::Location;
use crate::error::{Error, Result};

/// Minimum area of the homogenized anchor triangle.
pub const EPS_AREA: f64 = 1e-10;

/// Indices `k`, `l`, `m` of the three anchors in a reference location list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomogenizationAnchors {
    pub k: usize,
    pub l: usize,
    pub m: usize,
}

/// Default anchors: `k`, `l` the two points farthest apart, `m` the point
/// spanning the largest triangle with them.
pub fn select_anchors(points: &[Location]) -> Result<HomogenizationAnchors> {
    if points.len() < 3 {
        return Err(Error::DegenerateAnchors { area: 0.0 });
    }
    let mut best = (0, 1, -1.0);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = points[i].distance(&points[j]);
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    let (k, l, _) = best;
    let (pk, pl) = (&points[k], &points[l]);
    let mut m = usize::MAX;
    let mut area = -1.0;
    for (i, p) in points.iter().enumerate() {
        if i == k || i == l {
            continue;
        }
        let a = triangle_area(pk, pl, p);
        if a > area {
            area = a;
            m = i;
        }
    }
    Ok(HomogenizationAnchors { k, l, m })
}

fn triangle_area(a: &Location, b: &Location, c: &Location) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs()
}

/// The similarity transform `b₀` computed from a set of warped anchors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogenizedFrame {
    /// `s̃_k`.
    pub origin: [f64; 2],
    /// `‖s̃_l − s̃_k‖`; multiplies a scale parameter to give `ã`.
    pub scale: f64,
    /// Angle `ψ_l` of `b₁(s̃_l)`.
    pub psi: f64,
    /// `g_m ∈ {−1, +1}`.
    pub reflect: f64,
}

impl HomogenizedFrame {
    pub fn from_anchors(sk: &Location, sl: &Location, sm: &Location) -> Result<Self> {
        for p in [sk, sl, sm] {
            if p.dim() != 2 {
                return Err(Error::UnsupportedDimension {
                    unit: "homogenize",
                    expected: 2,
                    got: p.dim(),
                });
            }
        }
        let scale = sk.distance(sl);
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::DegenerateAnchors { area: 0.0 });
        }
        let b1l = [(sl[0] - sk[0]) / scale, (sl[1] - sk[1]) / scale];
        let psi = b1l[1].atan2(b1l[0]);
        let mut frame = Self {
            origin: [sk[0], sk[1]],
            scale,
            psi,
            reflect: 1.0,
        };
        let m = frame.rotate(frame.shift_scale(sm));
        // Area of the homogenized triangle (base of length 1 on the x axis).
        let area = 0.5 * m[1].abs();
        if !(area > EPS_AREA) {
            return Err(Error::DegenerateAnchors { area });
        }
        frame.reflect = m[1].signum();
        Ok(frame)
    }

    fn shift_scale(&self, s: &Location) -> [f64; 2] {
        [
            (s[0] - self.origin[0]) / self.scale,
            (s[1] - self.origin[1]) / self.scale,
        ]
    }

    fn rotate(&self, v: [f64; 2]) -> [f64; 2] {
        let (sin, cos) = self.psi.sin_cos();
        [cos * v[0] + sin * v[1], -sin * v[0] + cos * v[1]]
    }

    pub fn apply(&self, s: &Location) -> Location {
        let r = self.rotate(self.shift_scale(s));
        Location::xy(r[0], self.reflect * r[1])
    }

    /// `ã = a ‖s̃_l − s̃_k‖`.
    pub fn transformed_scale(&self, a: f64) -> f64 {
        a * self.scale
    }
}

/// Applies `b₀` built from `anchors` to every warped point.
pub fn homogenize(
    f_values: &[Location],
    anchors: &HomogenizationAnchors,
) -> Result<(Vec<Location>, HomogenizedFrame)> {
    let get = |i: usize| {
        f_values.get(i).ok_or_else(|| {
            Error::InvalidData(format!(
                "anchor index {i} outside {} points",
                f_values.len()
            ))
        })
    };
    let frame = HomogenizedFrame::from_anchors(get(anchors.k)?, get(anchors.l)?, get(anchors.m)?)?;
    Ok((f_values.iter().map(|s| frame.apply(s)).collect(), frame))
}
