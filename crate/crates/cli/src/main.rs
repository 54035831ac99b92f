//! `cumi` command-line front end.
//!
//! Every command prints one JSON document on stdout; progress and diagnostics
//! go to stderr. Exit codes: 0 success, 2 bad input or arguments, 3 numeric
//! failure (divergence, eigensolver breakdown).

mod record;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use cumi::data::{self, Standardizer, DEMO_SEED};
use cumi::info::{gaussian_gram, renyi_entropy, BandwidthMode, DEFAULT_ALPHA};
use cumi::model::{save_checkpoint, CumiModel};
use cumi::par::{self, Exec};
use cumi::synthetic::{
    run_synthetic_with, synthetic_train_config, write_signals_csv, SyntheticConfig,
};
use cumi::train::{
    evaluate, train_with, write_metrics_csv, ClassMetrics, EpochMetrics, TrainConfig,
};
use cumi::CumiError;

use record::RunRecord;

#[derive(Parser)]
#[command(
    name = "cumi",
    version,
    about = "Learn common and unique information from multi-view data"
)]
struct Cli {
    /// Worker threads for data-parallel kernels and sweep cells.
    #[arg(long, env = "CUMI_THREADS", default_value_t = 1, global = true)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the two-view sinusoid benchmark.
    Synth(SynthArgs),
    /// Train on a dataset manifest and evaluate on a held-out split.
    Train(TrainArgs),
    /// Matrix-based Rényi entropy of the rows of a CSV file.
    Entropy(EntropyArgs),
    /// Grid search over β and γ.
    Sweep(SweepArgs),
    /// Write the bundled miniature dataset.
    DemoData(DemoArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    /// Right-multiply each view by a seeded invertible 20×20 matrix first.
    #[arg(long)]
    remix: bool,
    #[arg(long, default_value = "cumi-synth")]
    out_dir: PathBuf,
}

#[derive(Args, Clone)]
struct Hyper {
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    batch: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Fraction of each class held out for testing.
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    hyper: Hyper,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    #[arg(long, default_value_t = 0.01)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "cumi-train")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EntropyArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Fixed kernel width.
    #[arg(long, conflicts_with = "median")]
    sigma: Option<f64>,
    /// Median pairwise distance as the kernel width (the default).
    #[arg(long)]
    median: bool,
    /// The first CSV row is a header.
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [0.001, 0.01, 0.1])]
    beta_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [0.001, 0.01, 0.1])]
    gamma_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [0u64])]
    seeds: Vec<u64>,
    #[command(flatten)]
    hyper: Hyper,
    #[arg(long, default_value = "cumi-sweep")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = DEMO_SEED)]
    seed: u64,
    #[arg(long, default_value = "cumi-demo")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    par::init_threads(cli.threads);
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Entropy(a) => cmd_entropy(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::DemoData(a) => cmd_demo(a),
    };
    match result {
        Ok(doc) => {
            println!("{doc}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &CumiError) -> u8 {
    if e.is_numeric() {
        3
    } else {
        2
    }
}

fn out_dir(dir: &Path) -> cumi::Result<()> {
    fs::create_dir_all(dir).map_err(|e| CumiError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> cumi::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| CumiError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn progress(label: &str, total: usize) -> impl FnMut(&EpochMetrics) + '_ {
    move |m| {
        if m.epoch == 1 || m.epoch == total || m.epoch % 10 == 0 {
            eprintln!(
                "[{label}] epoch {}/{total}: loss {:.5} tc {:.4} h_c {:.4}",
                m.epoch, m.loss, m.tc, m.h_c
            );
        }
    }
}

fn cmd_synth(a: SynthArgs) -> cumi::Result<String> {
    let rec = RunRecord::start("synth", a.seed);
    let mut cfg = SyntheticConfig::with_seed(a.seed);
    cfg.remix = a.remix;
    cfg.train.epochs = a.epochs;
    let base = synthetic_train_config(a.seed);
    cfg.train.beta = a.beta.unwrap_or(base.beta);
    cfg.train.gamma = a.gamma.unwrap_or(base.gamma);
    cfg.train.lr = a.lr.unwrap_or(base.lr);
    cfg.train.batch_size = a.batch.unwrap_or(base.batch_size);
    cfg.train.validate()?;
    out_dir(&a.out_dir)?;

    let run = run_synthetic_with(&cfg, progress("synth", cfg.train.epochs))?;
    let files = [
        "synthetic_signals.csv",
        "synthetic_report.json",
        "synthetic_metrics.csv",
        "run.json",
    ];
    write_signals_csv(&a.out_dir.join(files[0]), &run.signals)?;
    write_json(&a.out_dir.join(files[1]), &run.report)?;
    write_metrics_csv(&a.out_dir.join(files[2]), &run.history, 2)?;
    let config = json!({
        "synthetic": cfg,
        "latent_dims": {"common": 1, "unique": 1},
        "standardization": "per-feature z-score over all 100 samples",
        "curves": "per epoch on the full sample set, C from view 1",
    });
    rec.finish(config, &files, &a.out_dir.join(files[3]))?;
    Ok(json!({
        "command": "synth",
        "seed": a.seed,
        "alignment": run.report.alignment,
        "cca": run.report.cca,
        "out_dir": a.out_dir,
        "outputs": files,
    })
    .to_string())
}

/// A trained model with its held-out evaluation.
struct Fitted {
    model: CumiModel,
    train_history: Vec<EpochMetrics>,
    test_history: Vec<EpochMetrics>,
    test: ClassMetrics,
    split: data::Split,
    standardizers: Vec<Standardizer>,
}

fn fit(
    ds: &data::MultiViewDataset,
    cfg: &TrainConfig,
    test_fraction: f64,
    on_epoch: impl FnMut(&EpochMetrics),
) -> cumi::Result<Fitted> {
    cfg.validate()?;
    let split = data::split(&ds.labels, test_fraction, cfg.seed)?;
    let mut scaled = ds.clone();
    let mut standardizers = Vec::new();
    for x in &mut scaled.views {
        let s = Standardizer::fit(&x.select_rows(&split.train))?;
        *x = s.apply(x)?;
        standardizers.push(s);
    }
    let train_set = scaled.batch(&split.train);
    let test_set = scaled.batch(&split.test);
    let mut model = CumiModel::init(&ds.view_specs(), ds.n_classes, cfg.seed)?;
    let history = train_with(&mut model, &train_set, Some(&test_set), cfg, on_epoch)?;
    let test = evaluate(&model, &test_set)?;
    Ok(Fitted {
        model,
        train_history: history.train,
        test_history: history.held_out,
        test,
        split,
        standardizers,
    })
}

fn train_config(h: &Hyper, beta: f64, gamma: f64, seed: u64) -> TrainConfig {
    TrainConfig {
        alpha: h.alpha,
        beta,
        gamma,
        lr: h.lr,
        epochs: h.epochs,
        batch_size: h.batch,
        seed,
        ..TrainConfig::default()
    }
}

fn cmd_train(a: TrainArgs) -> cumi::Result<String> {
    let rec = RunRecord::start("train", a.seed);
    let ds = data::load_manifest(&a.manifest)?;
    let cfg = train_config(&a.hyper, a.beta, a.gamma, a.seed);
    eprintln!(
        "[train] {}: {} rows, {} views, {} classes",
        ds.name,
        ds.len(),
        ds.views.len(),
        ds.n_classes
    );
    let fitted = fit(
        &ds,
        &cfg,
        a.hyper.test_fraction,
        progress("train", cfg.epochs),
    )?;
    out_dir(&a.out_dir)?;
    let files = [
        "checkpoint.json",
        "metrics.csv",
        "metrics_test.csv",
        "run.json",
    ];
    let v = ds.views.len();
    save_checkpoint(&fitted.model, &a.out_dir.join(files[0]))?;
    write_metrics_csv(&a.out_dir.join(files[1]), &fitted.train_history, v)?;
    write_metrics_csv(&a.out_dir.join(files[2]), &fitted.test_history, v)?;
    let config = json!({
        "train": cfg,
        "manifest": a.manifest,
        "dataset": ds.name,
        "test_fraction": a.hyper.test_fraction,
        "split": fitted.split,
        "standardization": fitted.standardizers,
        "latent_dims": fitted.model.latent,
        "curves": "per epoch on the training split (metrics.csv) and held-out split (metrics_test.csv), C from view 1",
    });
    rec.finish(config, &files, &a.out_dir.join(files[3]))?;
    eprintln!("[train] test accuracy {:.4}", fitted.test.accuracy);
    Ok(json!({
        "command": "train",
        "seed": a.seed,
        "test": fitted.test,
        "train": fitted.train_history.last().and_then(|m| m.classification),
        "out_dir": a.out_dir,
        "outputs": files,
    })
    .to_string())
}

fn cmd_entropy(a: EntropyArgs) -> cumi::Result<String> {
    let x = data::read_any_matrix_csv(&a.csv, ',', a.header)?;
    let mode = match a.sigma {
        Some(s) => BandwidthMode::Fixed(s),
        None => BandwidthMode::Median,
    }
    .validate()?;
    let sigma = mode.sigma_for(&x)?;
    let h = renyi_entropy(&gaussian_gram(&x, sigma)?, a.alpha)?;
    Ok(json!({
        "entropy_bits": h,
        "alpha": a.alpha,
        "sigma": sigma,
        "bandwidth": if a.sigma.is_some() { "fixed" } else { "median" },
        "samples": x.rows(),
    })
    .to_string())
}

#[derive(Serialize)]
struct SweepRun {
    beta: f64,
    gamma: f64,
    seed: u64,
    accuracy: Option<f64>,
    error: Option<String>,
    #[serde(skip)]
    numeric_failure: bool,
}

#[derive(Serialize)]
struct SweepCell {
    beta: f64,
    gamma: f64,
    runs: usize,
    failures: usize,
    acc_mean: Option<f64>,
    acc_std: Option<f64>,
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = if xs.len() < 2 {
        0.0
    } else {
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    };
    (Some(m), Some(var.sqrt()))
}

fn sorted_unique(mut v: Vec<f64>) -> cumi::Result<Vec<f64>> {
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
        return Err(CumiError::Contract(
            "grids must be non-empty and finite".into(),
        ));
    }
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

fn cmd_sweep(a: SweepArgs) -> cumi::Result<String> {
    let rec = RunRecord::start("sweep", a.seeds.first().copied().unwrap_or(0));
    let ds = data::load_manifest(&a.manifest)?;
    let betas = sorted_unique(a.beta_grid.clone())?;
    let gammas = sorted_unique(a.gamma_grid.clone())?;
    if a.seeds.is_empty() {
        return Err(CumiError::Contract("at least one seed is required".into()));
    }
    let mut jobs: Vec<(f64, f64, u64)> = Vec::new();
    for &b in &betas {
        for &g in &gammas {
            jobs.extend(a.seeds.iter().map(|&s| (b, g, s)));
        }
    }
    eprintln!(
        "[sweep] {} runs over {} cells",
        jobs.len(),
        betas.len() * gammas.len()
    );
    let runs: Vec<SweepRun> = par::map(Exec::Auto, &jobs, |&(beta, gamma, seed)| {
        let cfg = train_config(&a.hyper, beta, gamma, seed);
        match fit(&ds, &cfg, a.hyper.test_fraction, |_| {}) {
            Ok(f) => SweepRun {
                beta,
                gamma,
                seed,
                accuracy: Some(f.test.accuracy),
                error: None,
                numeric_failure: false,
            },
            Err(e) => SweepRun {
                beta,
                gamma,
                seed,
                accuracy: None,
                numeric_failure: e.is_numeric(),
                error: Some(e.to_string()),
            },
        }
    });
    for r in runs.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "[sweep] beta={} gamma={} seed={} failed: {}",
            r.beta,
            r.gamma,
            r.seed,
            r.error.as_deref().unwrap_or("")
        );
    }

    let mut cells = Vec::new();
    for &b in &betas {
        for &g in &gammas {
            let here: Vec<&SweepRun> = runs
                .iter()
                .filter(|r| r.beta == b && r.gamma == g)
                .collect();
            let accs: Vec<f64> = here.iter().filter_map(|r| r.accuracy).collect();
            let (acc_mean, acc_std) = mean_std(&accs);
            cells.push(SweepCell {
                beta: b,
                gamma: g,
                runs: here.len(),
                failures: here.len() - accs.len(),
                acc_mean,
                acc_std,
            });
        }
    }

    out_dir(&a.out_dir)?;
    let files = ["sweep.csv", "sweep_runs.csv", "run.json"];
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    let mut agg = String::from("beta,gamma,runs,failures,acc_mean,acc_std\n");
    for c in &cells {
        agg.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.beta,
            c.gamma,
            c.runs,
            c.failures,
            opt(c.acc_mean),
            opt(c.acc_std)
        ));
    }
    let mut per_run = String::from("beta,gamma,seed,accuracy,error\n");
    for r in &runs {
        let err = r.error.as_deref().unwrap_or("").replace(['"', '\n'], " ");
        per_run.push_str(&format!(
            "{},{},{},{},\"{}\"\n",
            r.beta,
            r.gamma,
            r.seed,
            opt(r.accuracy),
            err
        ));
    }
    for (name, text) in [(files[0], agg), (files[1], per_run)] {
        let p = a.out_dir.join(name);
        fs::write(&p, text).map_err(|e| CumiError::Io {
            path: p.clone(),
            source: e,
        })?;
    }
    let config = json!({
        "train": train_config(&a.hyper, betas[0], gammas[0], a.seeds[0]),
        "manifest": a.manifest,
        "beta_grid": betas,
        "gamma_grid": gammas,
        "seeds": a.seeds,
        "test_fraction": a.hyper.test_fraction,
    });
    rec.finish(config, &files, &a.out_dir.join(files[2]))?;

    if cells.iter().all(|c| c.acc_mean.is_none()) {
        let msg = format!("all {} sweep runs failed", runs.len());
        return Err(if runs.iter().any(|r| r.numeric_failure) {
            CumiError::Numeric(msg)
        } else {
            CumiError::Contract(msg)
        });
    }
    Ok(
        json!({ "command": "sweep", "cells": cells, "out_dir": a.out_dir, "outputs": files })
            .to_string(),
    )
}

fn cmd_demo(a: DemoArgs) -> cumi::Result<String> {
    let manifest = data::write_demo_dataset(&a.out_dir, a.seed)?;
    Ok(json!({ "command": "demo-data", "seed": a.seed, "manifest": manifest }).to_string())
}
