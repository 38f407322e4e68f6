//! Matplotlib scripts that redraw figures from the CSV outputs. Each script
//! runs from the output directory.

use std::path::Path;

#[derive(Debug, Clone, Copy)]
pub enum Figure {
    Truth,
    Predictions,
    Warp,
    Bootstrap,
    Experiment,
}

const HEADER: &str = "import sys\nimport glob\nimport pandas as pd\nimport matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\n";

const TRUTH: &str = r#"t = pd.read_csv("truth.csv")
ids = sorted(t.process_id.unique())
fig, axes = plt.subplots(1, len(ids), figsize=(5 * len(ids), 4.5), squeeze=False)
for ax, i in zip(axes[0], ids):
    d = t[t.process_id == i]
    sc = ax.scatter(d.x, d.y, c=d.latent, s=6, cmap="viridis")
    tr = d[d.split == "train"]
    ax.scatter(tr.x, tr.y, s=2, c="k")
    ax.set_title(f"process {i}: latent field and samples")
    ax.set_aspect("equal")
    fig.colorbar(sc, ax=ax)
fig.tight_layout()
fig.savefig("truth.png", dpi=150)
"#;

const PREDICTIONS: &str = r#"files = sorted(glob.glob("predictions*.csv"))
for f in files:
    p = pd.read_csv(f)
    ids = sorted(p.process_id.unique())
    if not ids:
        continue
    fig, axes = plt.subplots(2, len(ids), figsize=(5 * len(ids), 9), squeeze=False)
    for k, i in enumerate(ids):
        d = p[p.process_id == i]
        for row, col, title in [(0, "mean", "prediction"), (1, "sd", "prediction s.e.")]:
            ax = axes[row][k]
            sc = ax.scatter(d.x, d.y, c=d[col], s=6, cmap="viridis")
            ax.set_title(f"process {i}: {title}")
            ax.set_aspect("equal")
            fig.colorbar(sc, ax=ax)
    fig.tight_layout()
    fig.savefig(f.replace(".csv", ".png"), dpi=150)
"#;

const WARP: &str = r#"w = pd.read_csv("warped_locations.csv")
ids = sorted(w.process_id.unique())
fig, axes = plt.subplots(1, len(ids), figsize=(5 * len(ids), 4.5), squeeze=False)
for ax, i in zip(axes[0], ids):
    d = w[w.process_id == i]
    ax.scatter(d.wx, d.wy, c=d.x, s=5, cmap="coolwarm")
    ax.set_title(f"process {i}: homogenized warped locations")
    ax.set_aspect("equal")
fig.tight_layout()
fig.savefig("warped_locations.png", dpi=150)
"#;

const BOOTSTRAP: &str = r#"r = pd.read_csv("bootstrap_replicates.csv")
ci = pd.read_csv("bootstrap_intervals.csv").set_index("parameter")
names = list(dict.fromkeys(r.parameter))
cols = 4
rows = (len(names) + cols - 1) // cols
fig, axes = plt.subplots(rows, cols, figsize=(4 * cols, 3 * rows), squeeze=False)
for ax, n in zip(axes.flat, names):
    v = r[r.parameter == n].value
    ax.hist(v, bins=30, color="0.6")
    ax.axvline(ci.loc[n, "lower"], color="r")
    ax.axvline(ci.loc[n, "upper"], color="r")
    ax.set_title(n)
for ax in list(axes.flat)[len(names):]:
    ax.axis("off")
fig.tight_layout()
fig.savefig("bootstrap.png", dpi=150)
"#;

const EXPERIMENT: &str = r#"import json
rec = json.load(open("outcomes.json"))
rows = []
for r in rec:
    for o in r["outcomes"]:
        for s in o["scores"]:
            rows.append(dict(seed=r["seed"], model=o["model"], process=s["process"] + 1, rmspe=s["rmspe"], crps=s["crps"]))
df = pd.DataFrame(rows)
procs = sorted(df.process.unique())
fig, axes = plt.subplots(1, 2 * len(procs), figsize=(4 * 2 * len(procs), 4), squeeze=False)
k = 0
for i in procs:
    for m in ["rmspe", "crps"]:
        d = df[df.process == i]
        models = list(dict.fromkeys(d.model))
        axes[0][k].boxplot([d[d.model == mo][m] for mo in models], labels=models)
        axes[0][k].set_title(f"{m.upper()} process {i}")
        k += 1
fig.tight_layout()
fig.savefig("experiment_scores.png", dpi=150)
"#;

pub fn write(dir: &Path, fig: Figure) -> std::io::Result<()> {
    let (name, body) = match fig {
        Figure::Truth => ("plot_truth.py", TRUTH),
        Figure::Predictions => ("plot_predictions.py", PREDICTIONS),
        Figure::Warp => ("plot_warp.py", WARP),
        Figure::Bootstrap => ("plot_bootstrap.py", BOOTSTRAP),
        Figure::Experiment => ("plot_experiment.py", EXPERIMENT),
    };
    std::fs::write(dir.join(name), format!("{HEADER}{body}"))?;
    if matches!(fig, Figure::Experiment) {
        std::fs::write(dir.join("plot_predictions.py"), format!("{HEADER}{PREDICTIONS}"))?;
        std::fs::write(dir.join("plot_truth_fields.py"), format!("{HEADER}{}", TRUTH.replace("\"truth.csv\"", "sorted(glob.glob(\"truth_seed*.csv\"))[0]")))?;
    }
    Ok(())
}
