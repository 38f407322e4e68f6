use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use warpfield_core::bootstrap::{bootstrap as run_bootstrap, natural_names, natural_values};
use warpfield_core::config::{ExperimentConfig, ModelConfig};
use warpfield_core::experiment::{format_table, run_seed, simulate_study, summarize, table_csv, ModelOutcome, Study};
use warpfield_core::inference::{fit as run_fit, homogenize_fit, FitResult};
use warpfield_core::io;
use warpfield_core::model::MultivariateDataset;
use warpfield_core::predict::{predict as run_predict, score, ProcessScore, Query, VarianceKind};

use crate::plots;
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// JSON fit report.
#[derive(Debug, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    /// Identifiable summaries: `nu…, sigma…, rho…, tau…, a_tilde`.
    pub estimates: Vec<(String, f64)>,
    pub fit: FitResult,
}

struct Inputs {
    train: MultivariateDataset,
    queries: Vec<Query>,
    truth: Option<(Vec<f64>, VarianceKind)>,
    study: Option<Study>,
}

fn first_model(cfg: &ExperimentConfig) -> Result<&ModelConfig> {
    cfg.models
        .first()
        .ok_or_else(|| CliError::Usage("config has no [[models]]".into()))
}

fn inputs(cfg: &ExperimentConfig) -> Result<Inputs> {
    if let Some(path) = &cfg.data.csv {
        let table = io::read_points(path)?;
        let p = cfg
            .models
            .first()
            .map_or(0, |m| m.params.p())
            .max(table.n_processes());
        let train = table.to_dataset(p)?;
        let (queries, truth) = match &cfg.data.predict_csv {
            Some(q) => {
                let t = io::read_points(q)?;
                let truth = t.z.clone().map(|z| (z, VarianceKind::Observation));
                (t.to_queries(), truth)
            }
            None => (vec![], None),
        };
        return Ok(Inputs {
            train,
            queries,
            truth,
            study: None,
        });
    }
    let sim = cfg
        .data
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::Usage("data needs `csv` or `simulate`".into()))?;
    let study = simulate_study(sim, cfg.seed)?;
    Ok(Inputs {
        train: study.train.clone(),
        queries: study.queries.clone(),
        truth: Some((study.latent.clone(), VarianceKind::Latent)),
        study: Some(study),
    })
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Usage(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

fn write_scores(dir: &Path, name: &str, scores: &[ProcessScore]) -> Result<()> {
    let mut w = create(dir, name)?;
    writeln!(w, "process_id,count,rmspe,crps")?;
    for s in scores {
        writeln!(w, "{},{},{},{}", s.process + 1, s.count, io::fmt(s.rmspe), io::fmt(s.crps))?;
    }
    Ok(())
}

/// `process_id,x,y,latent,observed,split` for sampled and hold-out points.
fn write_truth(dir: &Path, name: &str, study: &Study) -> Result<()> {
    let mut w = create(dir, name)?;
    writeln!(w, "process_id,x,y,latent,observed,split")?;
    let nh = study.holdout.len();
    for (i, pd) in study.train.processes.iter().enumerate() {
        let z = pd.z.as_ref().expect("simulated data are observed");
        for (r, s) in pd.locations.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},train",
                i + 1,
                io::fmt(s[0]),
                io::fmt(s[1]),
                io::fmt(study.train_latent[i][r]),
                io::fmt(z[r])
            )?;
        }
        for j in 0..nh {
            let q = &study.queries[i * nh + j];
            writeln!(
                w,
                "{},{},{},{},,holdout",
                i + 1,
                io::fmt(q.location[0]),
                io::fmt(q.location[1]),
                io::fmt(study.latent[i * nh + j])
            )?;
        }
    }
    Ok(())
}

fn fit_model(cfg: &ExperimentConfig, train: &MultivariateDataset) -> Result<FitReport> {
    let model = first_model(cfg)?;
    let template = model.build(train.q)?;
    let fit = run_fit(&template, train, &model.fit_options(&cfg.fit))?;
    let estimates = natural_names(fit.spec.p())
        .into_iter()
        .zip(natural_values(
            &fit.spec,
            fit.homogenized.as_ref().map(|h| h.transformed_scale),
        ))
        .collect();
    Ok(FitReport {
        model: model.name.clone(),
        estimates,
        fit,
    })
}

fn load_report(path: &Path) -> Result<FitReport> {
    let f = File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(f).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn fit_or_load(cfg: &ExperimentConfig, train: &MultivariateDataset, path: Option<&Path>) -> Result<FitReport> {
    match path {
        Some(p) => load_report(p),
        None => {
            let r = fit_model(cfg, train)?;
            write_json(&cfg.output.dir, "fit.json", &r)?;
            Ok(r)
        }
    }
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<()> {
    let sim = cfg
        .data
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::Usage("simulate needs [data.simulate]".into()))?;
    let study = simulate_study(sim, cfg.seed)?;
    let dir = &cfg.output.dir;
    io::write_dataset(create(dir, "data.csv")?, &study.train)?;
    write_truth(dir, "truth.csv", &study)?;
    let mut w = create(dir, "holdout.csv")?;
    writeln!(w, "process_id,x,y,z")?;
    for (q, y) in study.queries.iter().zip(&study.latent) {
        writeln!(w, "{},{},{},{}", q.process + 1, io::fmt(q.location[0]), io::fmt(q.location[1]), io::fmt(*y))?;
    }
    if cfg.output.plots {
        plots::write(dir, plots::Figure::Truth)?;
    }
    Ok(())
}

pub fn fit(cfg: &ExperimentConfig) -> Result<()> {
    let inp = inputs(cfg)?;
    let report = fit_model(cfg, &inp.train)?;
    let dir = &cfg.output.dir;
    write_json(dir, "fit.json", &report)?;
    if let Some(h) = &report.fit.homogenized {
        io::write_warped(create(dir, "warped_locations.csv")?, &inp.train.locations(), &h.locations)?;
        if cfg.output.plots {
            plots::write(dir, plots::Figure::Warp)?;
        }
    }
    println!("REML {:.6}  AIC {:.4}", report.fit.reml_value, report.fit.aic);
    for (n, v) in &report.estimates {
        println!("{n:>8} {v:.6}");
    }
    Ok(())
}

pub fn predict(cfg: &ExperimentConfig, fit_path: Option<&Path>) -> Result<()> {
    let inp = inputs(cfg)?;
    let dir = &cfg.output.dir;
    if inp.queries.is_empty() {
        io::write_predictions(create(dir, "predictions.csv")?, &Default::default())?;
        return Ok(());
    }
    let report = fit_or_load(cfg, &inp.train, fit_path)?;
    let pred = run_predict(&report.fit, &inp.train, &inp.queries)?;
    io::write_predictions(create(dir, "predictions.csv")?, &pred)?;
    if let Some((y, kind)) = &inp.truth {
        let scores = score(&pred, y, *kind)?;
        write_scores(dir, "scores.csv", &scores)?;
        for s in &scores {
            println!("process {}: RMSPE {:.5}  CRPS {:.5}", s.process + 1, s.rmspe, s.crps);
        }
    }
    if let Some(study) = &inp.study {
        write_truth(dir, "truth.csv", study)?;
    }
    if cfg.output.plots {
        plots::write(dir, plots::Figure::Predictions)?;
    }
    Ok(())
}

pub fn bootstrap(cfg: &ExperimentConfig) -> Result<()> {
    let inp = inputs(cfg)?;
    let report = fit_model(cfg, &inp.train)?;
    let dir = &cfg.output.dir;
    write_json(dir, "fit.json", &report)?;
    let res = run_bootstrap(&report.fit, &inp.train, &cfg.bootstrap)?;
    io::write_bootstrap_replicates(create(dir, "bootstrap_replicates.csv")?, &res)?;
    io::write_intervals(create(dir, "bootstrap_intervals.csv")?, &res)?;
    if res.failed > 0 {
        eprintln!("{} of {} replicates failed", res.failed, res.requested);
    }
    for i in &res.intervals {
        println!("{:>8} ({:.4}, {:.4})", i.parameter, i.lower, i.upper);
    }
    if cfg.output.plots {
        plots::write(dir, plots::Figure::Bootstrap)?;
    }
    Ok(())
}

pub fn homogenize(cfg: &ExperimentConfig, fit_path: Option<&Path>) -> Result<()> {
    let inp = inputs(cfg)?;
    let report = fit_or_load(cfg, &inp.train, fit_path)?;
    let h = homogenize_fit(&report.fit.spec, &inp.train, report.fit.homogenized.as_ref().map(|h| h.anchors))?;
    let dir = &cfg.output.dir;
    io::write_warped(create(dir, "warped_locations.csv")?, &inp.train.locations(), &h.locations)?;
    write_json(dir, "frame.json", &h.frame)?;
    println!("a_tilde {:.6}", h.transformed_scale);
    if cfg.output.plots {
        plots::write(dir, plots::Figure::Warp)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SeedRecord {
    seed: u64,
    true_a_tilde: Option<f64>,
    outcomes: Vec<ModelOutcome>,
}

pub fn experiment(cfg: &ExperimentConfig) -> Result<()> {
    let sim = cfg
        .data
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::Usage("experiment needs [data.simulate]".into()))?;
    if cfg.models.is_empty() {
        return Err(CliError::Usage("config has no [[models]]".into()));
    }
    let dir = &cfg.output.dir;
    let mut records = Vec::new();
    let mut all = Vec::new();
    for seed in cfg.seeds() {
        let run = run_seed(sim, &cfg.models, &cfg.fit, seed)?;
        write_truth(dir, &format!("truth_seed{seed}.csv"), &run.study)?;
        for ((_, pred), o) in run.fits.iter().zip(&run.outcomes) {
            io::write_predictions(create(dir, &format!("predictions_{}_seed{seed}.csv", o.model))?, pred)?;
        }
        all.extend(run.outcomes.clone());
        records.push(SeedRecord {
            seed,
            true_a_tilde: run.study.true_a_tilde,
            outcomes: run.outcomes,
        });
    }
    let rows = summarize(&all);
    let table = format_table(&rows);
    std::fs::write(dir.join("table.md"), &table)?;
    std::fs::write(dir.join("table.csv"), table_csv(&rows))?;
    write_json(dir, "outcomes.json", &records)?;
    if cfg.output.plots {
        plots::write(dir, plots::Figure::Experiment)?;
    }
    print!("{table}");
    Ok(())
}
