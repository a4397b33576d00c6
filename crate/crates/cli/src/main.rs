use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use popslab_cli::commands::{command_by_name, commands, Context};
use popslab_cli::descriptor::parse_descriptor;
use popslab_cli::{CliError, EXIT_TOLERANCE};

#[derive(Parser)]
#[command(name = "popslab", version, about = "Maximum-SINR multicarrier waveform design experiments")]
struct Args {
    /// One of: optimize, sweep, psd, sensitivity, codebook, validate.
    command: String,

    /// Experiment descriptor.
    #[arg(long)]
    config: PathBuf,

    /// Output directory; defaults to `output.path` in the descriptor, then `.`.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Seed for Monte-Carlo runs; overrides `output.seed`.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads.
    #[arg(long, env = "POPSLAB_THREADS")]
    threads: Option<usize>,
}

fn run(args: &Args) -> Result<Option<String>, CliError> {
    let command = command_by_name(&args.command).ok_or_else(|| CliError::Config {
        key: "command".into(),
        message: format!(
            "unknown command {:?}; expected one of {}",
            args.command,
            commands().iter().map(|c| c.name()).collect::<Vec<_>>().join(", ")
        ),
    })?;
    let text =
        std::fs::read_to_string(&args.config).map_err(|e| CliError::Io { path: args.config.clone(), source: e })?;
    let descriptor = parse_descriptor(&text)?;
    if let Some(c) = &descriptor.command {
        if c != command.name() {
            return Err(CliError::Config {
                key: "command".into(),
                message: format!("descriptor is for `{c}`, invoked as `{}`", command.name()),
            });
        }
    }
    let out_dir = args.out.clone().or_else(|| descriptor.output.clone()).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Io { path: out_dir.clone(), source: e })?;
    let seed = args.seed.unwrap_or(descriptor.seed);
    let outcome = command.run(&Context { descriptor: &descriptor, out_dir: &out_dir, seed })?;
    println!("{}", outcome.summary);
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(outcome.breach)
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error[E_CONFIG]: cannot start {n} worker threads");
            return ExitCode::from(2);
        }
    }
    match run(&args) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(breach)) => {
            eprintln!("tolerance breach: {breach}");
            ExitCode::from(EXIT_TOLERANCE)
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(e.exit_code())
        }
    }
}
