use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

/// A point in `d`-dimensional Euclidean space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Location(SmallVec<[f64; 3]>);

impl Location {
    pub fn new(coords: &[f64]) -> Self {
        Self(SmallVec::from_slice(coords))
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Self(SmallVec::from_slice(&[x, y]))
    }

    pub fn zeros(d: usize) -> Self {
        Self(SmallVec::from_elem(0.0, d))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn distance(&self, other: &Location) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn sub(&self, other: &Location) -> Location {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a - b)
            .collect()
    }
}

impl Deref for Location {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Location {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl FromIterator<f64> for Location {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl From<[f64; 2]> for Location {
    fn from(v: [f64; 2]) -> Self {
        Self::xy(v[0], v[1])
    }
}
