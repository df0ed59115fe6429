use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gpfso_bench::config::SWEEP_KEYS;
use gpfso_bench::{
    apply_override, fit_slope, parse_config_text, read_column, run_experiment, sweep, sweep_grid,
    ConfigError, ExperimentConfig, HarnessError, RawConfig,
};

#[derive(Parser)]
#[command(name = "gpfso", version, about = "Run and summarize particle-filter optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a config file.
    Run {
        config: PathBuf,
        /// `--key=value` settings overriding the file.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run every combination of the listed alpha / c_sigma / nu values.
    Sweep {
        config: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Fit a log-log slope on a column of a trace or aggregate CSV.
    Slope {
        csv: PathBuf,
        #[arg(long, default_value = "err_bar_l2")]
        column: String,
        /// Window start; defaults to the last t divided by 100.
        #[arg(long)]
        lo: Option<f64>,
        /// Window end; defaults to the last t.
        #[arg(long)]
        hi: Option<f64>,
    },
}

fn load(config: &PathBuf, overrides: &[String]) -> Result<RawConfig, HarnessError> {
    let text = std::fs::read_to_string(config).map_err(|source| HarnessError::Io {
        path: config.clone(),
        source,
    })?;
    let mut raw = parse_config_text(&text)?;
    for o in overrides {
        apply_override(&mut raw, o)?;
    }
    Ok(raw)
}

fn print_report(cfg: &ExperimentConfig) {
    println!("wrote {}", cfg.output.join("summary.txt").display());
}

fn exec(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { config, overrides } => {
            let raw = load(&config, &overrides)?;
            let cfg = ExperimentConfig::from_raw(&raw)?;
            let report = run_experiment(&cfg)?;
            for o in &report.outcomes {
                if let Err(e) = &o.result {
                    eprintln!("replication {} (seed {}) failed: {e}", o.replication, o.seed);
                }
            }
            print_report(&cfg);
        }
        Command::Sweep { config, overrides } => {
            let raw = load(&config, &overrides)?;
            let base = ExperimentConfig::from_raw(&first_of_each(&raw))?;
            let grid = sweep_grid(&raw)
                .into_iter()
                .map(|(label, c)| Ok((label, ExperimentConfig::from_raw(&c)?)))
                .collect::<Result<Vec<_>, ConfigError>>()?;
            let entries = sweep(grid, &base.output)?;
            let failed = entries.iter().filter(|e| e.report.is_err()).count();
            if failed == entries.len() {
                return Err(HarnessError::AllFailed {
                    replications: entries.len() * base.replications,
                    first: entries[0].report.as_ref().err().cloned().unwrap_or_default(),
                });
            }
            println!("wrote {}", base.output.join("sweep.csv").display());
        }
        Command::Slope { csv, column, lo, hi } => {
            let rows = read_column(&csv, &column)?;
            let t_max = rows.iter().map(|r| r.0).fold(0.0, f64::max);
            let fit = fit_slope(rows, lo.unwrap_or(t_max / 100.0), hi.unwrap_or(t_max))?;
            println!("beta1 = {}", fit.beta1);
            println!("beta2 = {}", fit.beta2);
            println!("rse = {}", fit.rse);
            println!("points = {}", fit.points);
            println!("skipped = {}", fit.skipped);
        }
    }
    Ok(())
}

/// The grid's first point, used to validate shared settings up front.
fn first_of_each(raw: &RawConfig) -> RawConfig {
    let mut out = raw.clone();
    for key in SWEEP_KEYS {
        if let Some(toml::Value::Array(a)) = out.get(key) {
            if let Some(first) = a.first().cloned() {
                out.insert(key.to_string(), first);
            }
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match exec(cli).map_err(anyhow::Error::from) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.downcast_ref::<HarnessError>().map_or(1, HarnessError::exit_code);
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
