use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use sv_extremogram::harness::{error_json, Command, ExperimentSpec, Format};
use sv_extremogram::Error;

#[derive(Parser)]
#[command(name = "svx", version, about = "Conditional extremograms for stochastic volatility models")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Simulate a path and write (j, x, y).
    Simulate(Common),
    /// Estimate the conditional extremogram from a CSV series or a simulated path.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// One numeric column, optional header `y`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Monte Carlo limit functional and its asymptotic variance.
    Limit(Common),
    /// Replicated confidence-interval coverage study.
    Coverage(Common),
    /// Conditional vs unconditional empirical distributions, SV and i.i.d.
    Figure1(Common),
    /// Hermite ranks and partial-sum variance rates.
    Hermite(Common),
    /// Second-order bound on the tail of a sum of two Pareto variables.
    CheckAppendixA(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment specification; built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Directory for output files; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn run(cli: Cli) -> Result<(), Error> {
    let (cmd, common, input) = match cli.command {
        Sub::Simulate(c) => (Command::Simulate, c, None),
        Sub::Estimate { common, input } => (Command::Estimate, common, input),
        Sub::Limit(c) => (Command::Limit, c, None),
        Sub::Coverage(c) => (Command::Coverage, c, None),
        Sub::Figure1(c) => (Command::Figure1, c, None),
        Sub::Hermite(c) => (Command::Hermite, c, None),
        Sub::CheckAppendixA(c) => (Command::CheckAppendixA, c, None),
    };
    let mut spec = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            ExperimentSpec::from_toml(&text)?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(seed) = common.seed {
        spec.master_seed = seed;
    }
    if let Some(path) = input {
        spec.outputs.input = Some(path.to_string_lossy().into_owned());
    }
    let report = cmd.run(&spec, common.threads)?;
    match common.out.or(spec.outputs.dir.map(PathBuf::from)) {
        Some(dir) => {
            for name in report.write_dir(&dir, common.format)? {
                eprintln!("wrote {}", dir.join(name).display());
            }
        }
        None => {
            let text = report.render(common.format)?;
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                _ => {}
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
