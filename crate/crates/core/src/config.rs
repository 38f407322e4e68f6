//! TOML configuration shared by the command-line workflows.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bootstrap::BootstrapOptions;
use crate::covariance::ParsimoniousMaternParams;
use crate::error::{Error, Result};
use crate::inference::FitOptions;
use crate::model::ModelSpec;
use crate::warp::{AxialWarp, Location, ProcessWarpSet, WarpFunction, WarpUnit};

/// A warp layer in a configuration: either a single unit written out in
/// full, or a generator that expands to one or more units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayerSpec {
    Generated(LayerGenerator),
    Unit(WarpUnit),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerGenerator {
    /// Axial unit with `r` basis functions whose sigmoid centers are spread
    /// evenly over `[lo, hi]`; `axis` is 0 for x and 1 for y.
    AxialBasis {
        axis: usize,
        r: usize,
        lo: f64,
        hi: f64,
        #[serde(default = "default_axial_init")]
        init: f64,
        /// Explicit weights `w₁…w_r`, overriding `init`.
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    /// `nx × ny` radial-basis units centered on a regular grid over
    /// `extent = [x0, x1, y0, y1]`.
    RadialGrid {
        nx: usize,
        ny: usize,
        extent: [f64; 4],
        precision: f64,
        #[serde(default)]
        weight: f64,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
}

fn default_axial_init() -> f64 {
    0.01
}

impl LayerSpec {
    pub fn expand(&self) -> Result<Vec<WarpUnit>> {
        match self {
            LayerSpec::Unit(u) => Ok(vec![u.clone()]),
            LayerSpec::Generated(LayerGenerator::AxialBasis {
                axis,
                r,
                lo,
                hi,
                init,
                weights,
            }) => {
                if *r == 0 || !(hi > lo) || *axis > 1 {
                    return Err(Error::InvalidWarp(
                        "axial_basis needs r ≥ 1, hi > lo and axis 0 or 1".into(),
                    ));
                }
                let mut a = AxialWarp::with_basis(*axis, *r, *lo, *hi, *init);
                if let Some(w) = weights {
                    if w.len() != *r {
                        return Err(Error::InvalidWarp(format!("axial_basis needs {r} weights")));
                    }
                    a.weights = w.clone();
                }
                Ok(vec![WarpUnit::Axial(a)])
            }
            LayerSpec::Generated(LayerGenerator::RadialGrid {
                nx,
                ny,
                extent,
                precision,
                weight,
                weights,
            }) => {
                let centers = crate::warp::regular_grid(*extent, *nx, *ny);
                if let Some(w) = weights {
                    if w.len() != centers.len() {
                        return Err(Error::InvalidWarp(format!(
                            "radial_grid needs {} weights",
                            centers.len()
                        )));
                    }
                }
                Ok(centers
                    .into_iter()
                    .enumerate()
                    .map(|(k, c)| WarpUnit::RadialBasis {
                        weight: weights.as_ref().map_or(*weight, |w| w[k]),
                        center: c,
                        precision: *precision,
                    })
                    .collect())
            }
        }
    }
}

fn expand_all(layers: &[LayerSpec]) -> Result<WarpFunction> {
    let mut units = Vec::new();
    for l in layers {
        units.extend(l.expand()?);
    }
    Ok(WarpFunction::new(units))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarpConfig {
    /// Layers of the shared warp `f`, applied in order.
    #[serde(default)]
    pub shared: Vec<LayerSpec>,
    /// Aligners of individual processes; unlisted processes get the
    /// identity. Process 1's aligner must be the identity.
    #[serde(default)]
    pub aligners: Vec<AlignerConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignerConfig {
    /// 1-based process id.
    pub process: usize,
    pub layers: Vec<LayerSpec>,
}

/// A named model: initial (or true) parameter values, warp architecture and
/// the parameters held fixed during fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub params: ParsimoniousMaternParams,
    #[serde(default)]
    pub warp: WarpConfig,
    #[serde(default)]
    pub fixed: Vec<String>,
    /// Overrides the iteration cap of `[fit]` for this model.
    #[serde(default)]
    pub max_iters: Option<usize>,
}

impl ModelConfig {
    /// `base` with this model's fixed parameters and iteration cap applied.
    pub fn fit_options(&self, base: &FitOptions) -> FitOptions {
        let mut opts = base.clone();
        opts.fixed.extend(self.fixed.iter().cloned());
        if let Some(n) = self.max_iters {
            opts.max_iters = n;
        }
        opts
    }

    pub fn build(&self, q: usize) -> Result<ModelSpec> {
        let p = self.params.p();
        let shared = expand_all(&self.warp.shared)?;
        let mut aligners = vec![WarpFunction::identity(); p];
        for a in &self.warp.aligners {
            if a.process == 0 || a.process > p {
                return Err(Error::ProcessIndex {
                    index: a.process,
                    count: p,
                });
            }
            aligners[a.process - 1] = expand_all(&a.layers)?;
        }
        ModelSpec::new(
            self.params.clone(),
            ProcessWarpSet::new(shared, aligners)?,
            q,
        )
    }
}

/// Grid simulation of a study: a regular grid over `extent`, `sample`
/// measurement locations drawn without replacement (outside `exclude`),
/// and hold-out locations drawn from the remaining grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub extent: [f64; 4],
    pub resolution: [usize; 2],
    /// Sampled measurement locations per process; all eligible points when absent.
    #[serde(default)]
    pub sample: Option<usize>,
    /// Rectangle `[x0, x1, y0, y1]` in which nothing is sampled.
    #[serde(default)]
    pub exclude: Option<[f64; 4]>,
    /// Number of unsampled grid points kept for scoring; all when absent.
    #[serde(default)]
    pub holdout: Option<usize>,
    pub truth: ModelConfig,
    /// Trend coefficients, one intercept per process; zeros when absent.
    #[serde(default)]
    pub beta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Observation CSV (`process_id,x,y,z[,cov_1..]`).
    #[serde(default)]
    pub csv: Option<PathBuf>,
    /// Locations to predict (`process_id,x,y[,cov_1..]`), optionally with a
    /// `z` column of held-out values for scoring.
    #[serde(default)]
    pub predict_csv: Option<PathBuf>,
    #[serde(default)]
    pub simulate: Option<SimulationConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    /// Emit plotting scripts next to the data files.
    #[serde(default)]
    pub plots: bool,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out(),
            plots: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Repetitions of a simulation study; `[seed]` when absent.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    pub data: DataConfig,
    /// Models to fit; the first is the one used by `fit`, `predict` and
    /// `bootstrap`.
    #[serde(default)]
    pub models: Vec<ModelConfig>,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default)]
    pub bootstrap: BootstrapOptions,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidData(format!("config: {e}")))
    }

    /// Parses `path` and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidData(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.data.csv.as_mut() {
            fix(p);
        }
        if let Some(p) = self.data.predict_csv.as_mut() {
            fix(p);
        }
        fix(&mut self.output.dir);
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| vec![self.seed])
    }

    /// Overrides the seed everywhere it is used.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.seeds = None;
        self.fit.seed = seed;
        self.bootstrap.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.csv.is_none() && self.data.simulate.is_none() {
            return Err(Error::InvalidData(
                "config: data needs `csv` or `simulate`".into(),
            ));
        }
        if let Some(sim) = &self.data.simulate {
            sim.truth.build(1)?;
            if sim.resolution[0] == 0 || sim.resolution[1] == 0 {
                return Err(Error::InvalidData(
                    "config: resolution must be positive".into(),
                ));
            }
        }
        for m in &self.models {
            m.build(1)?;
        }
        Ok(())
    }
}

/// The points of `grid` inside the rectangle `[x0, x1, y0, y1]`.
pub fn inside(rect: &[f64; 4], s: &Location) -> bool {
    s[0] >= rect[0] && s[0] <= rect[1] && s[1] >= rect[2] && s[1] <= rect[3]
}
