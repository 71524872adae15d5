use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ris_xmedia::baselines::{run_scheme, Scheme};
use ris_xmedia::channel::{apply_estimation_error, draw_channel_set};
use ris_xmedia::config::SystemConfig;
use ris_xmedia::harness::{self, Axis, Experiment};
use ris_xmedia::Error;

#[derive(Parser)]
#[command(name = "ris-xmedia", version, about = "Monte Carlo runner for the RIS cross-media relay model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config; omitted sections take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by the config.
    Run(Common),
    /// Sweep one axis over evenly spaced values.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: String,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Print the objective trace of one scheme on the first realization.
    Trace {
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: Option<&Path>) -> Result<(SystemConfig, Experiment), Error> {
    match path {
        Some(p) => harness::load_config(p),
        None => harness::parse_config("{}"),
    }
}

fn apply_common(common: &Common) -> Result<(SystemConfig, Experiment), Error> {
    let (mut system, mut experiment) = load(common.config.as_deref())?;
    if let Some(t) = common.trials {
        experiment.trials = t;
    }
    if let Some(s) = common.seed {
        system.seed = s;
    }
    if let Some(o) = &common.out {
        experiment.out_dir = o.clone();
    }
    experiment.validate()?;
    Ok((system, experiment))
}

fn run_and_write(system: &SystemConfig, experiment: &Experiment) -> Result<(), Error> {
    let output = harness::run_experiment(system, experiment)?;
    harness::write_results(&output, &experiment.out_dir)?;
    eprintln!(
        "{}: {} rows, {} failures -> {}",
        experiment.name,
        output.rows.len(),
        output.failures.len(),
        experiment.out_dir.display()
    );
    if output.rows.is_empty() && !output.failures.is_empty() {
        return Err(Error::InvalidInput(format!("every trial failed: {}", output.failures[0].message)));
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(common) => {
            let (system, experiment) = apply_common(&common)?;
            run_and_write(&system, &experiment)
        }
        Command::Sweep {
            common,
            axis,
            from,
            to,
            steps,
        } => {
            let (system, mut experiment) = apply_common(&common)?;
            experiment.axis = Axis::parse(&axis)?;
            let mut values = harness::linspace(from, to, steps)?;
            values.sort_by(f64::total_cmp);
            experiment.values = values;
            experiment.validate()?;
            run_and_write(&system, &experiment)
        }
        Command::Trace {
            scheme,
            config,
            seed,
            out,
        } => {
            let (mut system, _) = load(config.as_deref())?;
            if let Some(s) = seed {
                system.seed = s;
            }
            let scheme: Scheme = scheme
                .parse()
                .map_err(|e: Error| Error::Config {
                    field: "--scheme".into(),
                    reason: e.to_string(),
                })?;
            let trial_seed = harness::trial_seed(system.seed, 0, 0);
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let drawn = draw_channel_set(&system, &mut rng)?;
            let (channels, _) = apply_estimation_error(&drawn, system.rho_e, &system)?;
            let result = run_scheme(scheme, &system, &channels, trial_seed)?;
            let trace = &result.solution.trace;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    let path = dir.join(format!("trace_{}_0.csv", scheme.id()));
                    harness::write_trace(trace, &path)?;
                    eprintln!("wrote {}", path.display());
                }
                None => {
                    println!("iteration,F_bits");
                    for (i, v) in trace.iter().enumerate() {
                        println!("{i},{v}");
                    }
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
