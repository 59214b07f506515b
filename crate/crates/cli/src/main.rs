//! Command-line runner for the cell-free experiments.
//!
//! Exit codes: 0 on success, 1 for configuration or usage errors, 2 for
//! runtime failures and failed validation.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use cellfree::config::{ExperimentConfig, StructureKind};
use cellfree::experiment::{run_experiment, run_validation};
use cellfree::Error;
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Run,
    Validate,
}

#[derive(Debug, Parser)]
#[command(name = "cellfree", version, about = "Cell-free massive MIMO NAFD/FD/HD simulator")]
struct Args {
    /// TOML experiment configuration; defaults apply to absent fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `experiment.output`.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Run)]
    mode: Mode,
    /// Comma-separated list (nafd,fd,hd,smallcell); overrides the configured one.
    #[arg(long)]
    structures: Option<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load_config(args: &Args) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(out) = &args.output {
        cfg.experiment.output = out.to_string_lossy().into_owned();
    }
    if let Some(list) = &args.structures {
        let parsed = list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(StructureKind::parse)
            .collect::<cellfree::Result<Vec<_>>>()?;
        match args.mode {
            Mode::Run => cfg.experiment.structures = parsed,
            Mode::Validate => cfg.validation.structures = parsed,
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &Args) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    let out_dir = PathBuf::from(&cfg.experiment.output);
    match args.mode {
        Mode::Run => {
            let result = run_experiment(&cfg)?;
            result.write_outputs(&out_dir)?;
            println!(
                "{} topologies x {} QoS levels written to {}",
                cfg.experiment.n_topologies,
                result.qos.len(),
                out_dir.display()
            );
            if cfg.experiment.structures.contains(&StructureKind::Nafd) {
                match result.crossover_qos() {
                    Some(q) => println!("crossover QoS: {q} bits/s/Hz"),
                    None => println!("crossover QoS: none on this grid"),
                }
                println!("NAFD feasibility dominates FD/HD: {}", result.nafd_feasibility_dominates());
            }
            Ok(())
        }
        Mode::Validate => {
            let report = run_validation(&cfg)?;
            fs::create_dir_all(&out_dir).map_err(Error::from)?;
            report
                .write_csv(fs::File::create(out_dir.join("validation.csv")).map_err(Error::from)?)?;
            let failed: Vec<_> = report.rows.iter().filter(|r| !r.pass()).collect();
            println!(
                "{} terms compared at {} draws, {} outside tolerance",
                report.rows.len(),
                report.draws,
                failed.len()
            );
            for r in &failed {
                println!(
                    "  {} upsilon={} {}[{}] {}: closed form {:.6e}, Monte-Carlo {:.6e}, rel. error {:.4}",
                    r.structure, r.upsilon, r.direction, r.ue_index, r.term, r.closed_form, r.monte_carlo, r.rel_error
                );
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Runtime("validation failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let outcome = match args.threads {
        Some(0) => Err(Failure::Config("--threads must be at least 1".into())),
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| run(&args)),
            Err(e) => Err(Failure::Runtime(format!("cannot start thread pool: {e}"))),
        },
        None => run(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
