use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kspec::experiments::{run, Experiment, ExperimentConfig};
use kspec::models::CorrelationModel;

#[derive(Parser)]
#[command(
    name = "kspec",
    version,
    about = "Spectra of high-dimensional Kendall correlation matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gap between the Kendall matrix and its Hoeffding approximation.
    Fig1(Common),
    /// Independent coordinates: Kendall, Pearson and Spearman spectra.
    Fig2(Common),
    /// Factor model under both loading scalings.
    Fig3(Common),
    /// MA(1) Kendall spectra against the solver's limiting density.
    Fig4(Common),
    /// Band-Toeplitz Kendall spectra against the solver's limiting density.
    Fig5(Common),
    /// Limiting density for the configured model and n.
    Lsd(Common),
    /// Run every oracle and write verdicts.json; exits 1 if any fails.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
    /// Model as JSON, e.g. '{"kind":"ma1","rho":0.5,"p":200}'.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
}

fn build_config(experiment: Experiment, args: &Common) -> Result<ExperimentConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            ExperimentConfig::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => ExperimentConfig::new(experiment),
    };
    cfg.experiment = experiment;
    if let Some(m) = &args.model {
        let model: CorrelationModel = serde_json::from_str(m).map_err(|e| format!("--model: {e}"))?;
        cfg.model = Some(model);
    }
    cfg.seed = args.seed.or(cfg.seed);
    cfg.output_dir = args.out.clone().or(cfg.output_dir);
    cfg.replications = args.replications.or(cfg.replications);
    cfg.n = args.n.or(cfg.n);
    if let Some(eta) = args.eta {
        cfg.grid.eta = eta;
    }
    if let Some(points) = args.grid_points {
        cfg.grid.points = points;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match &cli.command {
        Command::Fig1(a) => (Experiment::Fig1Gap, a),
        Command::Fig2(a) => (Experiment::Fig2Independent, a),
        Command::Fig3(a) => (Experiment::Fig3Factor, a),
        Command::Fig4(a) => (Experiment::Fig4Ma1, a),
        Command::Fig5(a) => (Experiment::Fig5BandToeplitz, a),
        Command::Lsd(a) => (Experiment::LsdCurve, a),
        Command::Verify(a) => (Experiment::Verify, a),
    };
    if let Some(t) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let resolved = match build_config(experiment, args).and_then(|c| c.resolve().map_err(|e| e.to_string())) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&resolved) {
        Ok(report) => {
            for v in &report.verdicts {
                println!("{}", v.line());
            }
            println!(
                "wrote {} files to {}",
                report.manifest.artifacts.len() + 1,
                resolved.output_dir.display()
            );
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
