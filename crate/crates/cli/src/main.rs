//! `brwcover`: branching random walk cover-time experiments on regular trees.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use brwcover_core::config::{Command, ExperimentConfig};
use brwcover_core::{experiments, report};

#[derive(Debug, Parser)]
#[command(name = "brwcover", version, about = "Cover and hitting times of branching random walks on regular trees")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Cover times of nested balls from coupled runs
    Cover,
    /// Hitting time of a vertex at distance L
    Hit,
    /// (x,k)-freezing runs
    Freeze,
    /// Per-boundary-vertex freeze census
    Census,
    /// Galton-Watson survival and total progeny diagnostics
    GwDiag,
    /// Tail table of the total-progeny limit law
    Pakes,
    /// Scale tables for the lower and upper bounds
    Scales,
    /// Slow-vertex frequencies on scale radii
    Lower,
    /// Covering events from many initial particles
    Upper,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Cover => Command::Cover,
            Cmd::Hit => Command::Hit,
            Cmd::Freeze => Command::Freeze,
            Cmd::Census => Command::Census,
            Cmd::GwDiag => Command::GwDiag,
            Cmd::Pakes => Command::Pakes,
            Cmd::Scales => Command::Scales,
            Cmd::Lower => Command::Lower,
            Cmd::Upper => Command::Upper,
        }
    }
}

/// Flags override values read from `--config`, which override defaults.
#[derive(Debug, Args)]
struct Flags {
    /// key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Tree degree
    #[arg(long, global = true)]
    d: Option<u32>,
    /// Offspring law: det:D, poisson:D, geom:D or table:j=p,...
    #[arg(long, global = true)]
    dist: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, visible_alias = "reps")]
    replicas: Option<u64>,
    /// Worker threads (0 = all cores); never changes results
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<String>,
    /// Radii, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    r: Option<Vec<u32>>,
    /// Freeze depth, or largest k for census, lower, upper and scales
    #[arg(long, global = true, visible_alias = "k-max")]
    k: Option<u32>,
    /// Distance to the target
    #[arg(long = "L", global = true)]
    l: Option<u32>,
    /// Tail thresholds, comma separated
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    gamma: Option<Vec<f64>>,
    /// Refuse approximate sampling paths
    #[arg(long, global = true)]
    strict_exact: bool,
    /// Horizon slack beyond r
    #[arg(long, global = true)]
    slack: Option<u32>,
    /// Initial particles at the root
    #[arg(long, global = true)]
    n0: Option<u64>,
    /// Generations for gw-diag
    #[arg(long, global = true)]
    n: Option<u32>,
    /// Upper-bound scale parameter a
    #[arg(long, global = true)]
    a: Option<f64>,
    /// Scale parameter delta
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Lower-bound scale base M
    #[arg(long = "M", global = true)]
    m: Option<f64>,
    /// Freeze mode: 1d or tree
    #[arg(long, global = true)]
    mode: Option<String>,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &cli.flags.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.merge_text(&text).with_context(|| format!("parsing {}", path.display()))?;
    }
    let f = &cli.flags;
    cfg.command = cli.command.into();
    if let Some(v) = f.d {
        cfg.d = v;
    }
    if let Some(v) = &f.dist {
        cfg.dist = Some(v.clone());
    }
    if let Some(v) = f.seed {
        cfg.seed = v;
    }
    if let Some(v) = f.replicas {
        cfg.replicas = v;
    }
    if let Some(v) = f.threads {
        cfg.threads = v;
    }
    if let Some(v) = &f.out {
        cfg.out = v.clone();
    }
    if let Some(v) = &f.r {
        cfg.r = v.clone();
    }
    if let Some(v) = f.k {
        cfg.k = v;
    }
    if let Some(v) = f.l {
        cfg.l = v;
    }
    if let Some(v) = &f.gamma {
        cfg.gamma = v.clone();
    }
    if f.strict_exact {
        cfg.strict_exact = true;
    }
    if let Some(v) = f.slack {
        cfg.slack = v;
    }
    if let Some(v) = f.n0 {
        cfg.n0 = Some(v);
    }
    if let Some(v) = f.n {
        cfg.n = v;
    }
    if let Some(v) = f.a {
        cfg.a = v;
    }
    if let Some(v) = f.delta {
        cfg.delta = Some(v);
    }
    if let Some(v) = f.m {
        cfg.m = v;
    }
    if let Some(v) = &f.mode {
        cfg.apply("mode", v)?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = build_config(cli)?;
    let start = Instant::now();
    let out = experiments::run(&cfg).with_context(|| format!("{} failed", cfg.command))?;
    let paths = report::write_output(std::path::Path::new(&cfg.out), &out, &cfg, start.elapsed())?;
    for p in paths {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
