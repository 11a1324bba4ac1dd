use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vfguide::commands::{self, CalibKind, CliError, SynthOptions, VfMode};
use vfguide::service::{self, ClockMode, ServiceConfig};
use vfguide::sim::{Scenario, Simulation};

#[derive(Parser)]
#[command(name = "vfguide", version, about = "Signed-distance virtual fixtures for cooperative drilling")]
struct Cli {
    /// Seed for synthetic data and operator scripts (overrides scenario seeds).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory or file.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for distance-field builds (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build signed distance caches for labels of a volume (.nrrd or phantom .json).
    SdfBuild {
        volume: PathBuf,
        /// Labels to build; all non-background labels when omitted.
        #[arg(long, value_delimiter = ',')]
        labels: Vec<u16>,
    },
    /// Rasterize a phantom spec to NRRD (written to --out, default out/phantom.nrrd).
    Phantom { spec: PathBuf },
    /// Calibration solvers; synthetic seeded data when no input is given.
    Calib {
        #[command(subcommand)]
        kind: CalibCmd,
    },
    /// Run a scenario's force script with and/or without the fixture.
    Experiment {
        scenario: PathBuf,
        /// Fixture on only.
        #[arg(long, conflicts_with = "no_vf")]
        vf: bool,
        /// Fixture off only.
        #[arg(long)]
        no_vf: bool,
        /// Both runs, same seed (default when neither flag is given).
        #[arg(long, conflicts_with_all = ["vf", "no_vf"])]
        paired: bool,
        /// Use the scenario's own vf_enabled setting.
        #[arg(long, conflicts_with_all = ["vf", "no_vf", "paired"])]
        as_written: bool,
        /// Also write trace.csv.
        #[arg(long)]
        csv: bool,
    },
    /// Summarize a trace.jsonl.
    Report {
        trace: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Host an interactive steering session over websocket.
    Serve {
        scenario: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8765")]
        bind: String,
        /// Advance only on client hand_force messages instead of the wall clock.
        #[arg(long)]
        lockstep: bool,
        #[arg(long, default_value_t = 20.0)]
        max_force: f64,
    },
}

#[derive(Subcommand)]
enum CalibCmd {
    Pivot(CalibArgs),
    HandEye(CalibArgs),
    Register(CalibArgs),
    Gravity(CalibArgs),
}

#[derive(Args)]
struct CalibArgs {
    /// JSON input; synthetic data when omitted.
    input: Option<PathBuf>,
    /// Synthetic noise: mm for positions, N for gravity forces.
    #[arg(long)]
    noise: Option<f64>,
    /// Synthetic sample count.
    #[arg(long)]
    samples: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::SdfBuild { volume, labels } => {
            for s in commands::sdf_build(&volume, &labels, &cli.out)? {
                println!(
                    "label {:>3}: min {:>9.4} mm  max {:>9.4} mm  {:>8.1} ms  -> {}",
                    s.label,
                    s.min_mm,
                    s.max_mm,
                    s.build_ms,
                    s.path.display()
                );
            }
        }
        Cmd::Phantom { spec } => {
            let out = if cli.out.extension().is_some() { cli.out } else { cli.out.join("phantom.nrrd") };
            let summary = commands::phantom(&spec, &out)?;
            for w in &summary.warnings {
                log::warn!("{w}");
            }
            println!("wrote {} ({:?} voxels)", out.display(), summary.dims);
            for (l, n) in summary.voxel_counts {
                println!("label {l:>3}: {n} voxels");
            }
        }
        Cmd::Calib { kind } => {
            let (kind, args) = match kind {
                CalibCmd::Pivot(a) => (CalibKind::Pivot, a),
                CalibCmd::HandEye(a) => (CalibKind::HandEye, a),
                CalibCmd::Register(a) => (CalibKind::Register, a),
                CalibCmd::Gravity(a) => (CalibKind::Gravity, a),
            };
            let (noise, samples) = match kind {
                CalibKind::Pivot => (0.01, 20),
                CalibKind::HandEye => (0.02, 30),
                CalibKind::Register => (0.1, 8),
                CalibKind::Gravity => (0.05, 400),
            };
            let opts = SynthOptions {
                seed: cli.seed.unwrap_or(0),
                noise: args.noise.unwrap_or(noise),
                samples: args.samples.unwrap_or(samples),
            };
            let report = commands::calibrate(kind, args.input.as_deref(), opts)?;
            print_json(&report);
        }
        Cmd::Experiment { scenario, vf, no_vf, paired: _, as_written, csv } => {
            let mode = match (vf, no_vf, as_written) {
                (true, _, _) => VfMode::On,
                (_, true, _) => VfMode::Off,
                (_, _, true) => VfMode::Scenario,
                _ => VfMode::Paired,
            };
            for run in commands::experiment(&scenario, mode, &cli.out, cli.seed, csv)? {
                let m = &run.metrics;
                println!(
                    "{} (vf {}): drilled {:.4} mm^3, damage {:.4} mm^3, min clearance {:.4} mm",
                    run.dir.display(),
                    if m.vf_enabled { "on" } else { "off" },
                    m.drilled_volume_mm3,
                    m.total_damage_mm3(),
                    m.min_clearance_mm()
                );
            }
        }
        Cmd::Report { trace, csv, json } => {
            let rep = commands::report(&trace, csv.as_deref())?;
            if json {
                print_json(&rep);
            } else {
                print!("{rep}");
            }
        }
        Cmd::Serve { scenario, bind, lockstep, max_force } => {
            let mut s = Scenario::load(&scenario)?;
            if let Some(seed) = cli.seed {
                s.seed = seed;
            }
            let sim = Simulation::from_scenario(&s)?;
            let mut config = if lockstep { ServiceConfig::lockstep() } else { ServiceConfig::default() };
            config.max_force_n = max_force;
            let handle = service::spawn(bind.as_str(), sim, &s.name, config)
                .map_err(|e| CliError::Io(format!("bind {bind}: {e}")))?;
            println!(
                "serving {} on ws://{} ({})",
                s.name,
                handle.local_addr(),
                if config.mode == ClockMode::Lockstep { "lockstep" } else { "realtime" }
            );
            handle.wait();
        }
    }
    Ok(())
}
