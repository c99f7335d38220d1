use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fractal_cuntz::cli::{parse_levels, run_task, RawConfig, RunConfig, Task};

#[derive(Parser)]
#[command(name = "fractal-cuntz", version, about = "Cuntz operator models of affine IFS fractals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chaos-game sampling plus the measure diagnostics.
    Sample(Common),
    /// Empirical overlap of the first-level images.
    CheckSeparation(Common),
    /// Cuntz relation and covariance defects.
    VerifyRelations(Common),
    /// Convergence table for the word-expansion approximants.
    Approx(Common),
    /// All of the above.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Builtin system: example8, example9-tent, cantor3.
    #[arg(long)]
    builtin: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Chaos-game sample count.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    level: Option<usize>,
    /// Inclusive range A..B.
    #[arg(long, value_parser = parse_levels_arg)]
    levels: Option<String>,
    /// Expression for the symbol a, e.g. "x^2" or "sin(x0)*x1".
    #[arg(long)]
    function: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_levels_arg(s: &str) -> Result<String, String> {
    parse_levels(s).map(|_| s.to_string())
}

impl Common {
    fn into_config(self) -> Result<RunConfig, String> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::from_path(path).map_err(|e| e.to_string())?,
            None => RawConfig::default(),
        };
        if let Some(b) = self.builtin {
            raw.set_builtin(b);
        }
        raw.seed = self.seed.or(raw.seed);
        raw.samples = self.samples.or(raw.samples);
        raw.level = self.level.or(raw.level);
        raw.levels = self.levels.or(raw.levels);
        raw.function = self.function.or(raw.function);
        raw.output = self.out.or(raw.output);
        RunConfig::validate(raw).map_err(|e| e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, common) = match cli.command {
        Command::Sample(c) => (Task::Sample, c),
        Command::CheckSeparation(c) => (Task::CheckSeparation, c),
        Command::VerifyRelations(c) => (Task::VerifyRelations, c),
        Command::Approx(c) => (Task::Approx, c),
        Command::Report(c) => (Task::Report, c),
    };
    let cfg = match common.into_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_task(&cfg, task) {
        Ok(report) => {
            for c in &report.checks {
                let tag = if c.pass { "PASS" } else { "FAIL" };
                println!("{tag} {} value={:e} tolerance={:e}", c.name, c.value, c.tolerance);
            }
            println!("wrote {} files to {}", report.files.len(), cfg.output.display());
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {task}: {e}");
            ExitCode::from(2)
        }
    }
}
