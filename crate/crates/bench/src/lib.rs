//! Shared fixtures for the benchmarks.

use warpfield_core::covariance::ParsimoniousMaternParams;
use warpfield_core::model::{simulate, ModelSpec, MultivariateDataset, TrendCoefficients};
use warpfield_core::warp::{AxialWarp, Location, ProcessWarpSet, WarpFunction, WarpUnit};

pub fn table_params() -> ParsimoniousMaternParams {
    ParsimoniousMaternParams::bivariate([0.5, 1.5], 3.0, [1.0, 0.9], 0.45, [0.2, 0.1])
}

/// Axial, radial-basis and Möbius layers with nonzero weights.
pub fn warped_spec() -> ModelSpec {
    let mut ax = AxialWarp::with_basis(0, 10, -0.5, 0.5, 0.05);
    ax.weights[5] = 0.5;
    let ay = AxialWarp::with_basis(1, 10, -0.5, 0.5, 0.05);
    let f = WarpFunction::new(vec![
        WarpUnit::Axial(ax),
        WarpUnit::Axial(ay),
        WarpUnit::RadialBasis {
            weight: -0.5,
            center: Location::xy(0.0, 0.0),
            precision: 18.0,
        },
        WarpUnit::mobius_identity(),
    ]);
    ModelSpec::new(table_params(), ProcessWarpSet::new(f, vec![WarpFunction::identity(); 2]).unwrap(), 1).unwrap()
}

/// `n` pseudo-random locations per process over the unit square, with a
/// simulated response.
pub fn dataset(spec: &ModelSpec, n: usize, seed: u64) -> MultivariateDataset {
    let u = warpfield_core::model::standard_normals(seed, 2 * n);
    let locs: Vec<Location> = (0..n)
        .map(|k| Location::xy(0.5 * (u[2 * k] / 3.0).tanh(), 0.5 * (u[2 * k + 1] / 3.0).tanh()))
        .collect();
    let ds = MultivariateDataset::intercept_only(vec![locs; 2], None).unwrap();
    let z = simulate(spec, &ds, &TrendCoefficients::zeros(2, 1), seed).unwrap();
    ds.with_z(&z.concat()).unwrap()
}
