use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use doorstep::descent::DeliveryTarget;
use doorstep::harness::{
    build_report, emit_trajectory_svg, read_trials, run_corpus, write_report, HarnessConfig, Method,
};
use doorstep::simworld::generate_world;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "doorstep", version, about = "Seeded drone doorstep-delivery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the corpus worlds as JSON, one file per house.
    Generate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "out/worlds")]
        out: PathBuf,
    },
    /// Run every trial of the corpus and write the trial log and report.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Rebuild the report from a trial log.
    Report {
        #[arg(long)]
        trials: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Draw trials from a trial log as SVG.
    Render {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        trials: PathBuf,
        #[arg(long, default_value = "out/svg")]
        out: PathBuf,
        /// Only this house index.
        #[arg(long)]
        house: Option<usize>,
        /// Only this method (proposed, frontier).
        #[arg(long)]
        method: Option<Method>,
        /// Only this target (front_door, front_paved_area, front_yard, back_yard).
        #[arg(long)]
        target: Option<DeliveryTarget>,
    },
}

/// Config file plus the flags that override it.
#[derive(Args, Debug)]
struct ConfigArgs {
    /// TOML config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    corpus_size: Option<usize>,
    /// Descent clearance, metres.
    #[arg(long)]
    clearance: Option<f64>,
    #[arg(long)]
    hover_height: Option<f64>,
    #[arg(long)]
    max_speed: Option<f64>,
    /// Time cap for the proposed method, seconds.
    #[arg(long)]
    proposed_cap: Option<f64>,
    /// Time cap for the frontier baseline, seconds.
    #[arg(long)]
    frontier_cap: Option<f64>,
    /// Run the front door only.
    #[arg(long)]
    front_door_only: bool,
    /// Drop the segmentation noise model.
    #[arg(long)]
    no_noise: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<HarnessConfig> {
        let mut cfg = match &self.config {
            Some(p) => HarnessConfig::load(p)?,
            None => HarnessConfig::default(),
        };
        if let Some(v) = self.master_seed {
            cfg.master_seed = v;
        }
        if let Some(v) = self.corpus_size {
            cfg.corpus_size = v;
        }
        if let Some(v) = self.clearance {
            cfg.descent.clearance = v;
            cfg.frontier.descent_clearance = v;
        }
        if let Some(v) = self.hover_height {
            cfg.descent.hover_height = v;
            cfg.frontier.hover_height = v;
        }
        if let Some(v) = self.max_speed {
            cfg.max_speed = v;
        }
        if let Some(v) = self.proposed_cap {
            cfg.descent.time_cap = v;
        }
        if let Some(v) = self.frontier_cap {
            cfg.frontier.time_cap = v;
        }
        if self.front_door_only {
            cfg.extra_targets.clear();
        }
        if self.no_noise {
            cfg.descent.noise = None;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn generate(cfg: &HarnessConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for h in cfg.houses() {
        let world = generate_world(&cfg.world_params(&h)).with_context(|| format!("house {}", h.index))?;
        let path = out.join(format!("house_{:03}.json", h.index));
        fs::write(&path, world.to_json()?).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("wrote {} worlds to {}", cfg.corpus_size, out.display());
    Ok(())
}

fn render(
    cfg: &HarnessConfig,
    trials: &Path,
    out: &Path,
    house: Option<usize>,
    method: Option<Method>,
    target: Option<DeliveryTarget>,
) -> Result<()> {
    let trials = read_trials(trials)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let houses = cfg.houses();
    let mut written = 0;
    for t in &trials {
        if house.is_some_and(|h| h != t.house)
            || method.is_some_and(|m| m != t.method)
            || target.is_some_and(|g| g != t.target)
        {
            continue;
        }
        let Some(known) = houses.iter().find(|h| h.index == t.house && h.seed == t.seed) else {
            bail!("house {} (seed {}) is not part of the configured corpus", t.house, t.seed);
        };
        if t.trajectory.is_empty() {
            eprintln!("skipping house {} {} {}: empty trajectory", t.house, t.method.as_str(), t.target.as_str());
            continue;
        }
        let world = generate_world(&cfg.world_params(known))?;
        let path = out.join(format!("house_{:03}_{}_{}.svg", t.house, t.method.as_str(), t.target.as_str()));
        emit_trajectory_svg(t, &world, &path)?;
        written += 1;
    }
    println!("wrote {written} renderings to {}", out.display());
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate { config, out } => generate(&config.resolve()?, &out),
        Command::Run { config, out } => {
            let cfg = config.resolve()?;
            let report = run_corpus(&cfg, &out)?;
            print!("{}", report.summary());
            Ok(())
        }
        Command::Report { trials, out } => {
            let report = build_report(&read_trials(&trials)?);
            write_report(&out, &report)?;
            print!("{}", report.summary());
            Ok(())
        }
        Command::Render {
            config,
            trials,
            out,
            house,
            method,
            target,
        } => render(&config.resolve()?, &trials, &out, house, method, target),
    }
}
