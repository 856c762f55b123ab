use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use irtrack_cloud::ply::{read_ply, write_ply};
use irtrack_cloud::{reference_robot, KinematicChain, ReferencingConfig};
use irtrack_core::io::{
    read_intrinsics, read_json, read_model, write_json, FrameDirectory, IoError,
};
use irtrack_core::{RigidTransform, UnitQuaternion, Vec3};
use irtrack_runtime::bench::bench;
use irtrack_runtime::posefile::write_pose_csv;
use irtrack_runtime::source::{directory_frames, load_all};
use irtrack_runtime::{Pipeline, PipelineConfig, PipelineError, PoseSink, TcpSink, UdpSink};
use irtrack_sim::cell::{arm_chain, cell_scene, CellConfig};
use irtrack_sim::experiment::{DYNAMIC_RUNS, DYNAMIC_SAMPLES_PER_RUN, STATIC_SAMPLES};
use irtrack_sim::output::{simulate, write_report, OutputError};
use irtrack_sim::{run_dynamic_experiment, run_static_experiment, ScenarioConfig, SimError};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "irtrack",
    version,
    about = "Infra-red marker tracking from headset depth sensor streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scenario into a frame directory with ground truth.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Track a rig through a frame directory and write the pose log.
    Track(TrackArgs),
    /// Run the static or dynamic accuracy experiment and write statistics.
    Experiment {
        kind: Kind,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
        /// Scored samples (static) or samples per run (dynamic).
        #[arg(long)]
        samples: Option<usize>,
        /// Independent runs of the dynamic experiment.
        #[arg(long, default_value_t = DYNAMIC_RUNS)]
        runs: usize,
    },
    /// Generate a robot cell: scene cloud, kinematic chain and joint state.
    Cell {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Register a robot model into a scene cloud from a seed pose.
    Refpipe {
        /// ASCII PLY scene cloud.
        #[arg(long)]
        scene: PathBuf,
        /// Kinematic chain JSON.
        #[arg(long)]
        chain: PathBuf,
        /// Comma-separated joint angles in radians.
        #[arg(long, allow_hyphen_values = true)]
        joints: String,
        /// "px py pz qw qx qy qz", scene ← robot base.
        #[arg(long, allow_hyphen_values = true)]
        seed: String,
        /// Filter and ICP settings as JSON.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Measure tracking throughput on a frame directory.
    Bench {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        intrinsics: Option<PathBuf>,
        /// Worker count compared against a single worker.
        #[arg(long, default_value_t = 2)]
        workers: usize,
        /// Times the frame set is replayed.
        #[arg(long, default_value_t = 1)]
        passes: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Static,
    Dynamic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Static,
    Dynamic,
    Noiseless,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON.
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario used when no file is given.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Seed for the built-in scenario.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrackArgs {
    #[arg(long)]
    frames: PathBuf,
    /// Marker model JSON; defaults to rig.json in the frame directory.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Camera intrinsics JSON; defaults to intrinsics.json in the frame directory.
    #[arg(long)]
    intrinsics: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Stream poses to this endpoint while tracking; implies --realtime.
    #[arg(long, value_name = "HOST:PORT")]
    serve: Option<String>,
    /// Send one datagram per pose instead of a byte stream.
    #[arg(long, requires = "serve")]
    datagram: bool,
    /// Replay frames at their recorded rate.
    #[arg(long)]
    realtime: bool,
    #[arg(long)]
    workers: Option<usize>,
    /// Pipeline settings as JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the run report here as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    const RUNTIME: u8 = 1;
    const CONFIG: u8 = 2;
    const FORMAT: u8 = 3;

    fn config(m: impl Display) -> Self {
        Self {
            code: Self::CONFIG,
            message: m.to_string(),
        }
    }

    fn format(m: impl Display) -> Self {
        Self {
            code: Self::FORMAT,
            message: m.to_string(),
        }
    }

    fn runtime(m: impl Display) -> Self {
        Self {
            code: Self::RUNTIME,
            message: m.to_string(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        if e.is_format_error() {
            Failure::format(e)
        } else {
            Failure::config(e)
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(_) | SimError::WrongMotion(_) | SimError::OutOfRange { .. } => {
                Failure::config(e)
            }
            _ => Failure::runtime(e),
        }
    }
}

impl From<OutputError> for Failure {
    fn from(e: OutputError) -> Self {
        match e {
            OutputError::Sim(e) => e.into(),
            OutputError::Io(e) => e.into(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Config(_) => Failure::config(e),
            PipelineError::Source(e) => e.into(),
        }
    }
}

fn write_failure(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::runtime(format!("{}: {e}", path.display()))
}

fn print_json<T: Serialize>(value: &T) {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    // a closed pipe downstream is not an error of ours
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn scenario(args: &ScenarioArgs, fallback: Preset) -> Result<ScenarioConfig, Failure> {
    let config = match &args.scenario {
        Some(path) => read_json::<ScenarioConfig>(path)?,
        None => match args.preset.unwrap_or(fallback) {
            Preset::Static => ScenarioConfig::static_preset(args.seed),
            Preset::Dynamic => ScenarioConfig::dynamic_preset(args.seed),
            Preset::Noiseless => ScenarioConfig::noiseless(args.seed),
        },
    };
    config.validate()?;
    Ok(config)
}

fn track(args: TrackArgs) -> Result<(), Failure> {
    let mut config: PipelineConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(w) = args.workers {
        config.computing_workers = w;
    }
    config.realtime |= args.realtime || args.serve.is_some();
    let (model, matching) =
        read_model(&args.model.unwrap_or_else(|| args.frames.join("rig.json")))?;
    config.tracker.matching = matching;
    let intrinsics = read_intrinsics(
        &args
            .intrinsics
            .unwrap_or_else(|| args.frames.join("intrinsics.json")),
    )?;
    let frames = FrameDirectory::open(&args.frames)?;

    let mut pipeline = Pipeline::new(model, intrinsics, config)?;
    if let Some(endpoint) = &args.serve {
        let sink: Box<dyn PoseSink> = if args.datagram {
            Box::new(
                UdpSink::new(endpoint).map_err(|e| Failure::config(format!("{endpoint}: {e}")))?,
            )
        } else {
            Box::new(
                TcpSink::new(endpoint).map_err(|e| Failure::config(format!("{endpoint}: {e}")))?,
            )
        };
        pipeline = pipeline.with_sink(sink);
    }
    let out = pipeline.run(directory_frames(&frames))?;
    write_pose_csv(&args.out, &out.poses).map_err(write_failure(&args.out))?;
    let r = &out.report;
    log::info!(
        "tracked {} of {} frames at {:.1} fps",
        r.tracked,
        r.frames,
        r.fps
    );
    match &args.report {
        Some(path) => write_json(path, r)?,
        None => print_json(r),
    }
    Ok(())
}

fn parse_numbers(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Failure::config(format!("{what}: cannot parse {s:?}")))
        })
        .collect()
}

#[derive(Serialize)]
struct RefpipeOutput {
    /// `[px, py, pz, qw, qx, qy, qz]`, scene ← robot base.
    transform: [f64; 7],
    rms: f64,
    iterations: usize,
    scene_points: usize,
    model_points: usize,
}

fn refpipe(
    scene: &Path,
    chain: &Path,
    joints: &str,
    seed: &str,
    config: Option<&Path>,
) -> Result<(), Failure> {
    let text = fs::read_to_string(scene)
        .map_err(|e| Failure::config(format!("{}: {e}", scene.display())))?;
    let cloud =
        read_ply(&text).map_err(|e| Failure::format(format!("{}: {e}", scene.display())))?;
    let chain: KinematicChain = read_json(chain)?;
    chain.validate().map_err(Failure::format)?;
    let joints = parse_numbers(joints, "--joints")?;
    let seed = parse_numbers(seed, "--seed")?;
    let seed: [f64; 7] = seed.try_into().map_err(|v: Vec<f64>| {
        Failure::config(format!("--seed needs 7 numbers, got {}", v.len()))
    })?;
    // a seed is a rough guess, so a hand-rounded quaternion is normalised
    let rotation = UnitQuaternion::new_normalize(seed[3], seed[4], seed[5], seed[6])
        .ok_or_else(|| Failure::config("--seed: zero or non-finite quaternion"))?;
    let seed = RigidTransform::new(rotation, Vec3::new(seed[0], seed[1], seed[2]));
    let config: ReferencingConfig = match config {
        Some(path) => read_json(path)?,
        None => ReferencingConfig::default(),
    };
    let r = reference_robot(&cloud, &chain, &joints, &seed, &config).map_err(|e| match e {
        irtrack_cloud::ReferencingError::Chain(e) => Failure::config(e),
        e => Failure::runtime(e),
    })?;
    print_json(&RefpipeOutput {
        transform: r.transform.to_array7(),
        rms: r.icp.rms,
        iterations: r.icp.iterations,
        scene_points: r.scene_points,
        model_points: r.model_points,
    });
    Ok(())
}

#[derive(Serialize)]
struct CellFile {
    joints: Vec<f64>,
    /// Scene ← robot base; what referencing should recover.
    truth: [f64; 7],
    seed: [f64; 7],
}

fn cell(seed: u64, out: &Path) -> Result<(), Failure> {
    let config = CellConfig::default();
    let chain = arm_chain(config.model_spacing, seed);
    let scene = cell_scene(&config, &chain, seed);
    fs::create_dir_all(out).map_err(write_failure(out))?;
    let ply = out.join("scene.ply");
    fs::write(&ply, write_ply(&scene.cloud)).map_err(write_failure(&ply))?;
    write_json(&out.join("robot.json"), &chain)?;
    write_json(
        &out.join("cell.json"),
        &CellFile {
            joints: scene.joints,
            truth: scene.truth.to_array7(),
            seed: scene.seed.to_array7(),
        },
    )?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate {
            scenario: args,
            out,
        } => {
            let config = scenario(&args, Preset::Static)?;
            print_json(&simulate(&config, &out)?);
        }
        Command::Track(args) => track(args)?,
        Command::Experiment {
            kind,
            scenario: args,
            out,
            samples,
            runs,
        } => {
            let report = match kind {
                Kind::Static => {
                    let config = scenario(&args, Preset::Static)?;
                    run_static_experiment(&config, samples.unwrap_or(STATIC_SAMPLES))?
                }
                Kind::Dynamic => {
                    let config = scenario(&args, Preset::Dynamic)?;
                    run_dynamic_experiment(
                        &config,
                        runs,
                        samples.unwrap_or(DYNAMIC_SAMPLES_PER_RUN),
                    )?
                }
            };
            write_report(&report, &out)?;
            print_json(&report.stats);
        }
        Command::Cell { seed, out } => cell(seed, &out)?,
        Command::Refpipe {
            scene,
            chain,
            joints,
            seed,
            config,
        } => refpipe(&scene, &chain, &joints, &seed, config.as_deref())?,
        Command::Bench {
            frames,
            model,
            intrinsics,
            workers,
            passes,
        } => {
            if workers == 0 || passes == 0 {
                return Err(Failure::config("--workers and --passes must be at least 1"));
            }
            let (model, matching) = read_model(&model.unwrap_or_else(|| frames.join("rig.json")))?;
            let intrinsics =
                read_intrinsics(&intrinsics.unwrap_or_else(|| frames.join("intrinsics.json")))?;
            let loaded = load_all(&FrameDirectory::open(&frames)?)?;
            let mut config = PipelineConfig::default();
            config.tracker.matching = matching;
            print_json(&bench(
                &model,
                &intrinsics,
                config,
                &loaded,
                workers,
                passes,
            )?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
