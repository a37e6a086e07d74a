use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use s2rtbp::config::Overrides;
use s2rtbp::contact::AlphaMode;
use s2rtbp::runner::run;
use s2rtbp::RunConfig;

/// Symmetric restricted three-body problem on S²: Hill regions, contact-type
/// certification, Moser regularization, the neck at L1 and orbits.
#[derive(Debug, Parser)]
#[command(name = "s2rtbp", version)]
struct Cli {
    /// TOML configuration with every key present; `--print-default-config` gives a template.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed of the randomized checks.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Principal resolution: Hill mask cells, bound-grid radii and neck cells.
    #[arg(long, global = true, value_name = "N")]
    grid: Option<usize>,
    /// Energy of the subcommand (the level k for `kepler`).
    #[arg(long, global = true, value_name = "C", allow_negative_numbers = true)]
    energy: Option<f64>,
    #[arg(long, global = true, value_name = "MODE", value_parser = ["paper-21.96", "strict-87.85", "both"])]
    alpha_mode: Option<String>,
    /// Print the embedded default configuration and exit.
    #[arg(long)]
    print_default_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Hill masks, boundary profiles and disk containment.
    Hill,
    /// Bound certificates (alpha, beta) and contact scans.
    Certify,
    /// Moser chart and Kepler regularization checks.
    Kepler,
    /// Regularized restricted problem: identities, scans, star shape.
    Regularize,
    /// Quadratic forms, Liouville fields and Z(H) scans at L1.
    Neck,
    /// Long integration, chart overlap and periodic orbits.
    Orbit,
    /// CSV data behind the figures.
    Figures {
        /// Figure ids (fig2 .. fig10); all when omitted.
        ids: Vec<String>,
    },
    /// Full golden-value report.
    Golden,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Hill => "hill",
            Command::Certify => "certify",
            Command::Kepler => "kepler",
            Command::Regularize => "regularize",
            Command::Neck => "neck",
            Command::Orbit => "orbit",
            Command::Figures { .. } => "figures",
            Command::Golden => "golden",
        }
    }
}

fn configure(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let command = cli.command.as_ref().map_or(cfg.command.clone(), |c| c.name().to_string());
    if let Some(Command::Figures { ids }) = &cli.command {
        if !ids.is_empty() {
            cfg.figures.ids = ids.clone();
        }
    }
    let overrides = Overrides {
        out_dir: cli.out.clone(),
        seed: cli.seed,
        grid: cli.grid,
        energy: cli.energy,
        alpha_mode: cli.alpha_mode.as_deref().map(str::parse::<AlphaMode>).transpose()?,
    };
    cfg.apply(&overrides, &command)?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_default_config {
        print!("{}", RunConfig::default_toml());
        return ExitCode::SUCCESS;
    }
    let cfg = match configure(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let outcome = run(&cfg).and_then(|o| o.write(&cfg.out_dir).map(|paths| (o, paths)));
    match outcome.with_context(|| format!("`{}` failed", cfg.command)) {
        Ok((o, paths)) => {
            print!("{}", o.summary);
            for p in paths {
                println!("wrote {}", p.display());
            }
            if o.pass { ExitCode::SUCCESS } else { ExitCode::from(1) }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
