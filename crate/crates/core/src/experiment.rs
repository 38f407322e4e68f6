//! Simulation studies: sample a grid, simulate a truth, fit competing
//! models and score their predictions at held-out grid points.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{natural_names, natural_values};
use crate::config::{inside, ModelConfig, SimulationConfig};
use crate::error::{Error, Result};
use crate::inference::{fit, homogenize_fit, FitOptions, FitResult, Status};
use crate::model::{simulate_field, ModelSpec, MultivariateDataset, TrendCoefficients};
use crate::predict::{predict, score, PredictionResult, ProcessScore, Query, VarianceKind};
use crate::warp::{regular_grid, Location};

/// One simulated realization of a study design.
#[derive(Debug, Clone)]
pub struct Study {
    pub seed: u64,
    pub grid: Vec<Location>,
    /// Grid indices of the measurement locations (shared by all processes).
    pub sampled: Vec<usize>,
    /// Grid indices of the scoring locations.
    pub holdout: Vec<usize>,
    pub truth_spec: ModelSpec,
    /// Noisy observations at the sampled locations.
    pub train: MultivariateDataset,
    /// Every (process, hold-out location) pair.
    pub queries: Vec<Query>,
    /// Noise-free latent values at `queries`.
    pub latent: Vec<f64>,
    /// Latent values at the sampled locations, per process.
    pub train_latent: Vec<Vec<f64>>,
    /// Transformed scale of the truth in the frame anchored on `train`.
    pub true_a_tilde: Option<f64>,
}

/// Draws the measurement and hold-out locations, then simulates the truth
/// jointly at both.
pub fn simulate_study(sim: &SimulationConfig, seed: u64) -> Result<Study> {
    let truth_spec = sim.truth.build(1)?;
    let p = truth_spec.p();
    let [nx, ny] = sim.resolution;
    let grid = regular_grid(sim.extent, nx, ny);
    let eligible: Vec<usize> = (0..grid.len())
        .filter(|&k| sim.exclude.as_ref().is_none_or(|r| !inside(r, &grid[k])))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let n_sample = sim.sample.unwrap_or(eligible.len());
    if n_sample > eligible.len() {
        return Err(Error::InvalidData(format!(
            "cannot sample {n_sample} of {} eligible grid points",
            eligible.len()
        )));
    }
    let mut sampled: Vec<usize> = rand::seq::index::sample(&mut rng, eligible.len(), n_sample)
        .into_iter()
        .map(|k| eligible[k])
        .collect();
    sampled.sort_unstable();
    let taken: BTreeSet<usize> = sampled.iter().copied().collect();
    let rest: Vec<usize> = (0..grid.len()).filter(|k| !taken.contains(k)).collect();
    let mut holdout: Vec<usize> = match sim.holdout {
        Some(h) if h < rest.len() => rand::seq::index::sample(&mut rng, rest.len(), h)
            .into_iter()
            .map(|k| rest[k])
            .collect(),
        _ => rest,
    };
    holdout.sort_unstable();

    let sim_idx: Vec<usize> = sampled.iter().chain(&holdout).copied().collect();
    let sim_locs: Vec<Location> = sim_idx.iter().map(|&k| grid[k].clone()).collect();
    let sim_ds = MultivariateDataset::intercept_only(vec![sim_locs; p], None)?;
    let beta = TrendCoefficients(sim.beta.clone().unwrap_or_else(|| vec![0.0; p]));
    let field = simulate_field(&truth_spec, &sim_ds, &beta, seed)?;

    let ns = sampled.len();
    let train_locs: Vec<Vec<Location>> = (0..p)
        .map(|_| sampled.iter().map(|&k| grid[k].clone()).collect())
        .collect();
    let train_z: Vec<Vec<f64>> = field.observed.iter().map(|z| z[..ns].to_vec()).collect();
    let train = MultivariateDataset::intercept_only(train_locs, Some(train_z))?;
    let train_latent = field.latent.iter().map(|z| z[..ns].to_vec()).collect();
    let mut queries = Vec::with_capacity(p * holdout.len());
    let mut latent = Vec::with_capacity(p * holdout.len());
    for i in 0..p {
        for (j, &k) in holdout.iter().enumerate() {
            queries.push(Query::at(i, grid[k].clone()));
            latent.push(field.latent[i][ns + j]);
        }
    }
    let true_a_tilde = if ns >= 3 {
        homogenize_fit(&truth_spec, &train, None)
            .ok()
            .map(|h| h.transformed_scale)
    } else {
        None
    };
    Ok(Study {
        seed,
        grid,
        sampled,
        holdout,
        truth_spec,
        train,
        queries,
        latent,
        train_latent,
        true_a_tilde,
    })
}

/// Scores and estimates of one model on one data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutcome {
    pub model: String,
    pub seed: u64,
    pub scores: Vec<ProcessScore>,
    pub aic: f64,
    pub reml: f64,
    pub n_params: usize,
    pub seconds: f64,
    pub status: Status,
    pub iterations: usize,
    /// `nu…, sigma…, rho…, tau…, a_tilde`.
    pub estimates: Vec<(String, f64)>,
}

/// Fits one configured model to `train`, predicts `queries` and scores
/// against `truth` when given.
pub fn evaluate_model(
    model: &ModelConfig,
    fit_opts: &FitOptions,
    train: &MultivariateDataset,
    queries: &[Query],
    truth: Option<(&[f64], VarianceKind)>,
    seed: u64,
) -> Result<(FitResult, PredictionResult, ModelOutcome)> {
    let template = model.build(train.q)?;
    let mut opts = model.fit_options(fit_opts);
    opts.seed = seed;
    let fitted = fit(&template, train, &opts)?;
    let pred = predict(&fitted, train, queries)?;
    let scores = match truth {
        Some((y, kind)) => score(&pred, y, kind)?,
        None => vec![],
    };
    let estimates = natural_names(fitted.spec.p())
        .into_iter()
        .zip(natural_values(
            &fitted.spec,
            fitted.homogenized.as_ref().map(|h| h.transformed_scale),
        ))
        .collect();
    let outcome = ModelOutcome {
        model: model.name.clone(),
        seed,
        scores,
        aic: fitted.aic,
        reml: fitted.reml_value,
        n_params: fitted.n_params,
        seconds: fitted.fit_seconds,
        status: fitted.convergence.status,
        iterations: fitted.convergence.iterations,
        estimates,
    };
    Ok((fitted, pred, outcome))
}

/// Everything produced for one seed of a simulation study.
pub struct SeedRun {
    pub study: Study,
    pub fits: Vec<(FitResult, PredictionResult)>,
    pub outcomes: Vec<ModelOutcome>,
}

pub fn run_seed(
    sim: &SimulationConfig,
    models: &[ModelConfig],
    fit_opts: &FitOptions,
    seed: u64,
) -> Result<SeedRun> {
    let study = simulate_study(sim, seed)?;
    let mut fits = Vec::new();
    let mut outcomes = Vec::new();
    for m in models {
        log::info!("seed {seed}: fitting {}", m.name);
        let (f, p, o) = evaluate_model(
            m,
            fit_opts,
            &study.train,
            &study.queries,
            Some((&study.latent, VarianceKind::Latent)),
            seed,
        )?;
        log::info!(
            "seed {seed}: {} RMSPE {:?} in {:.1}s",
            m.name,
            o.scores.iter().map(|s| s.rmspe).collect::<Vec<_>>(),
            o.seconds
        );
        fits.push((f, p));
        outcomes.push(o);
    }
    Ok(SeedRun {
        study,
        fits,
        outcomes,
    })
}

/// Per-model means over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub runs: usize,
    pub rmspe: Vec<f64>,
    pub crps: Vec<f64>,
    pub aic: f64,
    pub seconds: f64,
}

pub fn summarize(outcomes: &[ModelOutcome]) -> Vec<SummaryRow> {
    let mut names: Vec<&str> = Vec::new();
    for o in outcomes {
        if !names.contains(&o.model.as_str()) {
            names.push(&o.model);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let rows: Vec<&ModelOutcome> = outcomes.iter().filter(|o| o.model == name).collect();
            let n = rows.len() as f64;
            let p = rows[0].scores.len();
            let mean_of =
                |f: &dyn Fn(&ModelOutcome) -> f64| rows.iter().map(|o| f(o)).sum::<f64>() / n;
            SummaryRow {
                model: name.to_string(),
                runs: rows.len(),
                rmspe: (0..p).map(|i| mean_of(&|o| o.scores[i].rmspe)).collect(),
                crps: (0..p).map(|i| mean_of(&|o| o.scores[i].crps)).collect(),
                aic: mean_of(&|o| o.aic),
                seconds: mean_of(&|o| o.seconds),
            }
        })
        .collect()
}

/// Comparison table in Markdown.
pub fn format_table(rows: &[SummaryRow]) -> String {
    let p = rows.first().map_or(0, |r| r.rmspe.len());
    let mut head = String::from("| model |");
    let mut rule = String::from("|---|");
    for i in 1..=p {
        head.push_str(&format!(" RMSPE{i} | CRPS{i} |"));
        rule.push_str("---|---|");
    }
    head.push_str(" AIC | time (s) |");
    rule.push_str("---|---|");
    let mut out = format!("{head}\n{rule}\n");
    for r in rows {
        out.push_str(&format!("| {} |", r.model));
        for i in 0..p {
            out.push_str(&format!(" {:.4} | {:.4} |", r.rmspe[i], r.crps[i]));
        }
        out.push_str(&format!(" {:.2} | {:.1} |\n", r.aic, r.seconds));
    }
    out
}

/// The same table as CSV.
pub fn table_csv(rows: &[SummaryRow]) -> String {
    let p = rows.first().map_or(0, |r| r.rmspe.len());
    let mut out = String::from("model,runs");
    for i in 1..=p {
        out.push_str(&format!(",rmspe_{i},crps_{i}"));
    }
    out.push_str(",aic,seconds\n");
    for r in rows {
        out.push_str(&format!("{},{}", r.model, r.runs));
        for i in 0..p {
            out.push_str(&format!(
                ",{},{}",
                crate::io::fmt(r.rmspe[i]),
                crate::io::fmt(r.crps[i])
            ));
        }
        out.push_str(&format!(
            ",{},{}\n",
            crate::io::fmt(r.aic),
            crate::io::fmt(r.seconds)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::ParsimoniousMaternParams;

    fn sim(resolution: usize, sample: Option<usize>) -> SimulationConfig {
        SimulationConfig {
            extent: [-0.5, 0.5, -0.5, 0.5],
            resolution: [resolution, resolution],
            sample,
            exclude: None,
            holdout: None,
            truth: ModelConfig {
                name: "truth".into(),
                params: ParsimoniousMaternParams::bivariate(
                    [0.5, 1.5],
                    3.0,
                    [1.0, 0.9],
                    0.45,
                    [0.2, 0.1],
                ),
                warp: Default::default(),
                fixed: vec![],
                max_iters: None,
            },
            beta: None,
        }
    }

    #[test]
    fn full_sampling_has_no_holdout() {
        let s = simulate_study(&sim(3, None), 1).unwrap();
        assert_eq!(s.train.counts(), vec![9, 9]);
        assert!(s.holdout.is_empty() && s.queries.is_empty());
    }

    #[test]
    fn block_is_never_sampled() {
        let mut c = sim(21, Some(100));
        c.exclude = Some([-0.28, -0.08, -0.48, -0.28]);
        let s = simulate_study(&c, 4).unwrap();
        assert_eq!(s.sampled.len(), 100);
        assert!(s.train.processes[0]
            .locations
            .iter()
            .all(|l| !inside(&[-0.28, -0.08, -0.48, -0.28], l)));
        assert_eq!(s.holdout.len(), 441 - 100);
        assert_eq!(s.queries.len(), 2 * 341);
    }

    #[test]
    fn studies_are_deterministic() {
        let a = simulate_study(&sim(11, Some(30)), 7).unwrap();
        let b = simulate_study(&sim(11, Some(30)), 7).unwrap();
        assert_eq!(a.sampled, b.sampled);
        assert_eq!(a.latent, b.latent);
        assert_eq!(a.train, b.train);
        let c = simulate_study(&sim(11, Some(30)), 8).unwrap();
        assert_ne!(a.sampled, c.sampled);
    }

    #[test]
    fn stationary_truth_scale_is_rescaled() {
        let s = simulate_study(&sim(11, Some(30)), 2).unwrap();
        let a = s.true_a_tilde.unwrap();
        assert!(a > 3.0);
    }
}
