use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use homog_cli::config::ExperimentConfig;
use homog_cli::{oracles, report, run_config, CliError};

#[derive(Parser)]
#[command(name = "homog", version, about = "Numerical experiments on random Hamilton-Jacobi homogenization")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Cache {
    On,
    Off,
}

#[derive(Subcommand)]
enum Verb {
    /// Run one or more experiment configurations.
    Run {
        /// Path to a TOML file, or `oracle:<name>` for a shipped reference case.
        #[arg(long = "config", required = true)]
        configs: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads; defaults to the available cores.
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides `seed_base` in every configuration.
        #[arg(long)]
        seed_base: Option<u64>,
        #[arg(long, value_enum, default_value = "on")]
        cache: Cache,
    },
    /// Aggregate finished runs under `--out` into cross-run tables.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Destination directory; defaults to `<out>/report`.
        #[arg(long)]
        dest: Option<PathBuf>,
    },
    /// Parse and check configurations without running them.
    Validate {
        #[arg(long = "config", required = true)]
        configs: Vec<String>,
        #[arg(long)]
        seed_base: Option<u64>,
    },
    /// List the shipped reference cases.
    ListOracles,
}

fn load(arg: &str, seed_base: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match arg.strip_prefix("oracle:") {
        Some(name) => oracles::find(name)
            .ok_or_else(|| CliError::Config(format!("unknown oracle {name}")))?
            .parsed(),
        None => ExperimentConfig::load(Path::new(arg))?,
    };
    if let Some(s) = seed_base {
        cfg.seed_base = s;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(verb: Verb) -> Result<(), CliError> {
    match verb {
        Verb::Run {
            configs,
            out,
            workers,
            seed_base,
            cache,
        } => {
            if let Some(n) = workers {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build_global()
                    .map_err(|e| CliError::Config(e.to_string()))?;
            }
            // Validate everything before running anything.
            let cfgs = configs
                .iter()
                .map(|c| {
                    let cfg = load(c, seed_base)?;
                    cfg.validate()?;
                    Ok(cfg)
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let mut failed = Vec::new();
            for cfg in &cfgs {
                let o = run_config(cfg, &out, cache == Cache::On)?;
                let tag = if o.cached { "cached" } else { "done" };
                println!("{tag} {} ({:.2} s)", o.dir.display(), o.manifest.wall_time_s);
                for f in &o.manifest.failed_checks {
                    println!("  check failed: {f}");
                }
                if let Err(CliError::CheckFailed(f)) = o.check() {
                    failed.extend(f);
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::CheckFailed(failed))
            }
        }
        Verb::Report { out, dest } => {
            let dest = dest.unwrap_or_else(|| out.join("report"));
            let r = report::write_report(&out, &dest)?;
            println!("{} runs aggregated into {}", r.runs, dest.display());
            for c in &r.corrupt {
                println!("corrupt manifest skipped: {}", c.display());
            }
            Ok(())
        }
        Verb::Validate { configs, seed_base } => {
            for c in &configs {
                let cfg = load(c, seed_base)?;
                cfg.validate()?;
                println!("ok {} {} -> {}", c, cfg.experiment.kind(), cfg.dir_name());
            }
            Ok(())
        }
        Verb::ListOracles => {
            for o in oracles::ORACLES {
                println!("{}", o.name);
                println!("  {}", o.description);
                for (q, v) in o.expected {
                    println!("  {q} = {v}");
                }
            }
            Ok(())
        }
    }
}
