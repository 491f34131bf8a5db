use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cellfree_core::experiments::{
    compare_strategies, run_snapshots, snapshot_inputs, summary_csv, summary_table, sweep_alpha,
};
use cellfree_core::mc_oracle::validation_suite;
use cellfree_core::{ExperimentConfig, Preset, RandomStream, Strategy, SystemConfig};
use clap::{Args, Parser, Subcommand};

const DEFAULT_SNAPSHOTS: usize = 100;

#[derive(Parser)]
#[command(name = "cellfree", version, about = "Cell-free massive MIMO downlink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one strategy over a batch of snapshots.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        strategy: Option<Strategy>,
    },
    /// Sweep the channel inversion rate on paired snapshots.
    SweepAlpha {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        strategy: Option<Strategy>,
        /// Comma-separated list, default -1 to 1 in steps of 0.25.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alphas: Option<Vec<f64>>,
    },
    /// Compare power-control strategies on paired snapshots.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
        /// Comma-separated list, default all four.
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<Strategy>>,
    },
    /// Run the Monte-Carlo oracle against the closed forms.
    Validate {
        /// Draws per check.
        #[arg(long, default_value_t = 1_000_000)]
        draws: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Write the report as CSV here; the text report goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the geometry, gains and estimate variances of one snapshot.
    ExportSnapshot {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        id: u64,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    snapshots: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.preset) {
            (Some(path), _) => {
                ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?
            }
            (None, Some(p)) => ExperimentConfig::from_preset(p),
            (None, None) => ExperimentConfig::from_preset(Preset::Desk),
        };
        if let Some(seed) = self.seed {
            cfg.system.seed = seed;
        }
        if let Some(n) = self.snapshots {
            cfg.snapshots = Some(n);
        }
        Ok(cfg)
    }
}

fn with_alpha(mut system: SystemConfig, alpha: Option<f64>) -> Result<SystemConfig> {
    if let Some(a) = alpha {
        system.alpha = a;
    }
    system.validate()?;
    Ok(system)
}

/// `out/run.csv` -> `out/run_power.csv`
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{suffix}"),
    };
    path.with_file_name(name)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => stdout(text),
    }
}

/// A closed pipe (`| head`) ends output quietly.
fn stdout(text: &str) -> Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn default_alphas() -> Vec<f64> {
    (0..=8).map(|i| -1.0 + 0.25 * i as f64).collect()
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { common, alpha, strategy } => {
            let cfg = common.load()?;
            let system = with_alpha(cfg.system, alpha)?;
            let strategy = strategy.or(cfg.strategy).unwrap_or(Strategy::Mr);
            let result = run_snapshots(&system, strategy, cfg.snapshots.unwrap_or(DEFAULT_SNAPSHOTS))?;
            emit(common.out.as_deref(), &result.ue_csv())?;
            if let Some(out) = &common.out {
                let power = sibling(out, "power");
                fs::write(&power, result.power_csv()).with_context(|| format!("writing {}", power.display()))?;
            }
            eprint!("{}", result.summary());
        }
        Command::SweepAlpha { common, strategy, alphas } => {
            let cfg = common.load()?;
            let alphas = alphas.or(cfg.alphas).unwrap_or_else(default_alphas);
            let strategy = strategy.or(cfg.strategy).unwrap_or(Strategy::Mr);
            let results = sweep_alpha(&cfg.system, &alphas, strategy, cfg.snapshots.unwrap_or(DEFAULT_SNAPSHOTS))?;
            emit(common.out.as_deref(), &summary_csv(&cfg.system, &results))?;
            eprint!("{}", summary_table(&results));
        }
        Command::Compare { common, alpha, strategies } => {
            let cfg = common.load()?;
            let system = with_alpha(cfg.system, alpha)?;
            let strategies = strategies.unwrap_or_else(|| Strategy::ALL.to_vec());
            let results = compare_strategies(&system, &strategies, cfg.snapshots.unwrap_or(DEFAULT_SNAPSHOTS))?;
            emit(common.out.as_deref(), &summary_csv(&system, &results))?;
            eprint!("{}", summary_table(&results));
        }
        Command::Validate { draws, seed, out } => {
            let report = validation_suite(draws, &mut RandomStream::new(seed))?;
            stdout(&report.to_text())?;
            if let Some(path) = &out {
                fs::write(path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
            }
            if !report.all_pass() {
                bail!("{} oracle checks failed", report.failures().count());
            }
        }
        Command::ExportSnapshot { common, id } => {
            let cfg = common.load()?;
            let inputs = snapshot_inputs(&cfg.system, id)?;
            let tag = format!("# config_hash={} seed={} snapshot={id}\n", cfg.system.hash(), cfg.system.seed);
            emit(common.out.as_deref(), &(tag.clone() + &inputs.snapshot.to_csv()))?;
            let training = tag + &inputs.stats.to_csv();
            match &common.out {
                Some(out) => {
                    let path = sibling(out, "training");
                    fs::write(&path, training).with_context(|| format!("writing {}", path.display()))?;
                }
                None => stdout(&training)?,
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_keeps_extension() {
        assert_eq!(sibling(Path::new("a/run.csv"), "power"), Path::new("a/run_power.csv"));
        assert_eq!(sibling(Path::new("run"), "power"), Path::new("run_power"));
    }

    #[test]
    fn default_sweep_grid() {
        let a = default_alphas();
        assert_eq!(a.len(), 9);
        assert_eq!((a[0], a[4], a[8]), (-1.0, 0.0, 1.0));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
