//! `msdest`: simulate data, fit estimators, run Monte Carlo designs and
//! print objective profiles from a JSON run configuration.

mod config;
mod data;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use msdest::harness::{
    objective_profile, run_estimator, run_mc, write_mc_outputs, write_profile_csv,
};
use msdest::rng::tags;
use msdest::RngHandle;
use serde_json::json;

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "msdest",
    version,
    about = "Minimum sliced distance estimation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed (overrides `mc.seed`).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a sample from the configured model.
    Simulate(Common),
    /// Fit the configured estimators to a data file.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run the Monte Carlo design.
    Mc {
        #[command(flatten)]
        common: Common,
        /// Maximum number of worker threads.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Population objective curves on a parameter grid.
    Profile(Common),
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.mc.seed = seed;
    }
    std::fs::create_dir_all(&cfg.output.dir)
        .with_context(|| format!("creating {}", cfg.output.dir.display()))?;
    write_json(&cfg.output.dir.join("config.json"), &cfg.to_json())?;
    Ok(cfg)
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn simulate(cfg: &RunConfig) -> Result<()> {
    let model = cfg.build_model()?;
    let rng = RngHandle::new(cfg.mc.seed, 0).child(tags::DATA);
    let sample = model.sample(&rng, cfg.model.t, &cfg.model.psi0)?;
    let path = cfg.output.dir.join("data.csv");
    let psi0: Vec<String> = cfg.model.psi0.iter().map(|p| p.to_string()).collect();
    let meta = format!(
        "model={} psi0={} T={} seed={}",
        model.id(),
        psi0.join(";"),
        cfg.model.t,
        cfg.mc.seed
    );
    data::write_sample(&path, &sample, &meta)?;
    println!("{}", path.display());
    Ok(())
}

fn estimate(cfg: &RunConfig, data_path: &Path) -> Result<()> {
    let model = cfg.build_model()?;
    let sample = data::read_sample(data_path, &model)?;
    let rng = RngHandle::new(cfg.mc.seed, 0);
    for est in &cfg.estimators {
        let out = run_estimator(&sample, &model, est, &cfg.model.psi0, rng, &cfg.inference)?;
        let id = est.id.as_str();
        let trace = if out.trace.is_empty() {
            None
        } else {
            let path = cfg.output.dir.join(format!("trace_{id}.csv"));
            let mut f = std::fs::File::create(&path)
                .with_context(|| format!("creating {}", path.display()))?;
            msdest::optimizer::EstimateResult::write_trace_rows(&out.trace, &mut f)?;
            Some(path)
        };
        let record = json!({
            "estimator": id,
            "psi_hat": out.psi_hat,
            "se": out.se,
            "ci": out.ci,
            "objective": out.objective,
            "epochs": out.epochs,
            "converged": out.converged,
            "flags": out.flags,
            "trace": trace,
            "sandwich": out.sandwich,
            "config_echo": cfg.to_json(),
        });
        write_json(&cfg.output.dir.join(format!("result_{id}.json")), &record)?;
        println!("{}", serde_json::to_string(&record)?);
    }
    Ok(())
}

fn mc(cfg: &RunConfig, jobs: Option<usize>) -> Result<()> {
    let summary = run_mc(&cfg.design(jobs))?;
    write_mc_outputs(&summary, &cfg.output.dir, cfg.output.emit_svg)?;
    for e in &summary.estimators {
        for (j, c) in e.coords.iter().enumerate() {
            println!(
                "{:<10} psi{} mean={:.5} sd={:.5} rmse={:.5} skew={} ks={} ok={} failed={}",
                e.id.as_str(),
                j + 1,
                c.mean,
                c.sd,
                c.rmse,
                c.skewness.map_or("n/a".into(), |v| format!("{v:.3}")),
                c.ks.map_or("n/a".into(), |v| format!("{v:.3}")),
                e.n_ok,
                e.n_failed
            );
        }
    }
    Ok(())
}

fn profile(cfg: &RunConfig) -> Result<()> {
    let model = cfg.build_model()?;
    let curve = objective_profile(&model, cfg.model.psi0[0], &cfg.profile_grid()?)?;
    let path = cfg.output.dir.join("profile.csv");
    write_profile_csv(&curve, &path)?;
    println!("{}", path.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(c) => simulate(&load(&c)?),
        Command::Estimate { common, data } => estimate(&load(&common)?, &data),
        Command::Mc { common, jobs } => mc(&load(&common)?, jobs),
        Command::Profile(c) => profile(&load(&c)?),
    }
}
