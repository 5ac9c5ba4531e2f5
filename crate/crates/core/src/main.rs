use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mfc_lbm::bench;
use mfc_lbm::config::{parse_config, SimulationConfig};
use mfc_lbm::output::{load_checkpoint, load_geometry, progress_line, OutputWriter};
use mfc_lbm::sim::SimulationState;
use mfc_lbm::Error;

#[derive(Parser)]
#[command(name = "mfc-lbm", version, about = "Microbial fuel cell anode simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the hourly simulation and write outputs.
    Run(RunArgs),
    /// Parse and validate a config file, then print the resolved config.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run an analytic validation suite and print error norms.
    Bench {
        #[arg(value_enum)]
        suite: Suite,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Poiseuille,
    Diffusion,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML config; the reference parameter set when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for the biofilm draws (and the geometry unless `lattice.seed` is set).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    hours: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long)]
    snapshot_every: Option<usize>,
    /// Geometry mask replacing the random electrode.
    #[arg(long)]
    geometry: Option<PathBuf>,
    /// Continue from a checkpoint file.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Suppress per-hour progress lines.
    #[arg(long)]
    quiet: bool,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::GeometryParse { .. } | Error::NotPercolating => 2,
        Error::NonConvergence { .. } | Error::Blowup { .. } => 3,
        Error::Clogged { .. } => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Validate { config } => validate(&config),
        Command::Bench { suite } => run_bench(suite),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn validate(path: &Path) -> Result<u8, Error> {
    let config = parse_config(path)?;
    print!("{}", config.to_toml_string());
    Ok(0)
}

fn resolve(args: &RunArgs) -> Result<(SimulationConfig, Option<SimulationState>), Error> {
    let (mut config, state) = match &args.resume {
        Some(path) => {
            let (saved, state) = load_checkpoint(path)?;
            let config = match &args.config {
                Some(p) => parse_config(p)?,
                None => saved,
            };
            (config, Some(state))
        }
        None => {
            let config = match &args.config {
                Some(p) => parse_config(p)?,
                None => SimulationConfig::default(),
            };
            (config, None)
        }
    };
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    if let Some(hours) = args.hours {
        config.run.hours = hours;
    }
    if let Some(every) = args.snapshot_every {
        config.run.snapshot_every = every;
    }
    if let Some(mask) = &args.geometry {
        config.lattice.geometry = Some(mask.clone());
    }
    config.validate()?;
    Ok((config, state))
}

fn run(args: RunArgs) -> Result<u8, Error> {
    let (config, resumed) = resolve(&args)?;
    let mut state = match resumed {
        Some(state) => {
            state.lattice_matches(&config)?;
            state
        }
        None => {
            let geometry = config.lattice.geometry.as_deref().map(load_geometry).transpose()?;
            SimulationState::new(&config, geometry)?
        }
    };
    let mut out = OutputWriter::create(&args.out_dir, config.run.pgm)?;
    let every = config.run.snapshot_every;
    let ckpt_every = config.run.checkpoint_every;

    let mut failure = None;
    while !state.is_finished(&config) {
        let fields = match state.step_hour(&config) {
            Ok(f) => f,
            Err(err) => {
                failure = Some(err);
                break;
            }
        };
        let done = state.is_finished(&config);
        let hour = fields.hour;
        let written = (|| {
            out.timeseries(&state.records)?;
            if done || (every > 0 && hour % every == 0) {
                out.snapshot(&fields, &config)?;
            }
            if done || (ckpt_every > 0 && (hour + 1) % ckpt_every == 0) {
                out.checkpoint(&config, &state)?;
            }
            Ok::<_, Error>(())
        })();
        if let Err(err) = written {
            failure = Some(err);
            break;
        }
        if !args.quiet {
            if let Some(r) = state.records.last() {
                eprintln!("{}", progress_line(r));
            }
        }
    }
    if state.records.is_empty() || failure.is_some() {
        out.timeseries(&state.records)?;
    }
    let manifest = out.finish(&config, Some(&state), failure.as_ref())?;
    if let Some(err) = failure {
        return Err(err);
    }
    match manifest.termination {
        Some(mfc_lbm::sim::Termination::Clogged { hour, x, y }) => {
            eprintln!("warning: biofilm clogged the domain at ({x}, {y}) during hour {hour}");
            Ok(4)
        }
        _ => Ok(0),
    }
}

fn run_bench(suite: Suite) -> Result<u8, Error> {
    match suite {
        Suite::Poiseuille => {
            let (reports, order) = bench::poiseuille_suite(&[16, 32, 64], 0.6706)?;
            println!("width,steps,l2_error");
            for r in &reports {
                println!("{},{},{:.6e}", r.width, r.steps, r.l2_error);
            }
            println!("observed order {order:.3}");
        }
        Suite::Diffusion => {
            for tau_d in [1.0, 0.8] {
                let linf = bench::diffusion_step(tau_d, 2000)?;
                let d = bench::pulse_diffusivity(tau_d, 128, 3.0, 100, 1100)?;
                let exact = (tau_d - 0.5) / 3.0;
                println!(
                    "tau_D {tau_d}: step L_inf {linf:.3e}, pulse D {d:.6e} vs {exact:.6e} ({:+.3}%)",
                    100.0 * (d - exact) / exact
                );
            }
        }
    }
    Ok(0)
}
