use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use censvine::estimation::FitMethod;
use censvine::Family;
use censvine_cli::commands::{self, compare_csv, format_compare};
use censvine_cli::data::{load_clusters, write_clusters};
use censvine_cli::{CliError, CliResult, ModelConfig};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

/// Vine-copula models for right-censored clustered event times.
#[derive(Parser, Debug)]
#[command(name = "censvine", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Overrides {
    /// Seed for resampling and simulation (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Gauss-Legendre nodes per integrated coordinate (overrides the config).
    #[arg(long = "quad-nodes")]
    quad_nodes: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a model and write fit.csv, fit_summary.txt and fitted.cfg.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// seq (first tree pairwise, rest by likelihood) or global.
        #[arg(long, default_value = "global")]
        method: String,
        /// Bootstrap replicates for standard errors.
        #[arg(long)]
        bootstrap: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Fit like `fit` with bootstrap standard errors (100 replicates by default).
    Bootstrap {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "seq")]
        method: String,
        #[arg(long, default_value_t = 100)]
        bootstrap: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Fit several configs to one dataset and rank them by loglikelihood.
    Compare {
        /// Repeat once per candidate model.
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "global")]
        method: String,
        /// Also write compare.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Loglikelihood of a fully specified model.
    Loglik {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Replication study; writes study.csv and the first replicate as data_r0.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "global")]
        method: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Convert between Kendall's tau and a family's parameter.
    Convert {
        family: String,
        #[arg(long, conflicts_with = "theta")]
        tau: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
    },
}

fn load_config(path: &Path, o: &Overrides) -> CliResult<ModelConfig> {
    let mut cfg = ModelConfig::from_path(path)?;
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(q) = o.quad_nodes {
        cfg.quad_nodes = q;
    }
    Ok(cfg)
}

fn method(s: &str) -> CliResult<FitMethod> {
    match s.parse::<FitMethod>() {
        Ok(m @ (FitMethod::T1Sequential | FitMethod::Global)) => Ok(m),
        _ => Err(CliError::Usage(format!("--method must be seq or global, got '{s}'"))),
    }
}

fn fit_and_report(
    config: &Path,
    data: &Path,
    method_name: &str,
    bootstrap: Option<usize>,
    out: &Path,
    overrides: &Overrides,
) -> CliResult<()> {
    let m = method(method_name)?;
    let cfg = load_config(config, overrides)?;
    let clusters = load_clusters(data)?;
    let result = commands::fit_model(&cfg, &clusters, m, bootstrap)?;
    commands::write_fit_report(out, &cfg, &result)?;
    print!("{}", result.summary());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit {
            config,
            data,
            method,
            bootstrap,
            out,
            overrides,
        } => fit_and_report(&config, &data, &method, bootstrap, &out, &overrides),
        Command::Bootstrap {
            config,
            data,
            method,
            bootstrap,
            out,
            overrides,
        } => fit_and_report(&config, &data, &method, Some(bootstrap), &out, &overrides),
        Command::Compare {
            config,
            data,
            method: method_name,
            out,
            overrides,
        } => {
            let m = method(&method_name)?;
            let configs = config
                .iter()
                .map(|p| {
                    let label = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
                    Ok((label, load_config(p, &overrides)?))
                })
                .collect::<CliResult<Vec<_>>>()?;
            let clusters = load_clusters(&data)?;
            let rows = commands::compare(&configs, &clusters, m)?;
            print!("{}", format_compare(&rows));
            if let Some(dir) = out {
                fs::create_dir_all(&dir)?;
                fs::write(dir.join("compare.csv"), compare_csv(&rows))?;
            }
            Ok(())
        }
        Command::Loglik { config, data, overrides } => {
            let cfg = load_config(&config, &overrides)?;
            let clusters = load_clusters(&data)?;
            println!("{}", commands::loglik(&cfg, &clusters)?);
            Ok(())
        }
        Command::Simulate {
            config,
            method: method_name,
            out,
            overrides,
        } => {
            let m = method(&method_name)?;
            let cfg = load_config(&config, &overrides)?;
            let (study, first) = commands::simulate(&cfg, m)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("study.csv"), study.to_csv())?;
            write_clusters(fs::File::create(out.join("data_r0.csv"))?, &first)?;
            print!("{}", study.to_csv());
            if study.failed > 0 {
                eprintln!("{} replicate(s) failed and were dropped", study.failed);
            }
            Ok(())
        }
        Command::Convert { family, tau, theta } => {
            let f: Family = family.parse().map_err(|e: censvine::Error| CliError::Usage(e.to_string()))?;
            println!("{}", commands::convert(f, tau, theta)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
