use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use manipseg::config::PipelineConfig;
use manipseg::error::FormatError;
use manipseg::formats::{read_json_file, write_json_file};
use manipseg::pipeline::{run_pipeline, run_stage, PipelineError, Stage};
use manipseg::synth::{self, RunOutputs, Scenario, Truth};

/// Extract actor contacts and manipulated rigid objects from point cloud sequences.
#[derive(Parser)]
#[command(name = "manipseg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Warp the first frame onto every later frame and write trajectories.
    Track(StageArgs),
    /// Label trajectories as actor or background.
    SegmentActor(StageArgs),
    /// Detect actor-background contact intervals.
    Contacts(StageArgs),
    /// Segment and track the object moved during each contact.
    SegmentObjects(StageArgs),
    /// All four stages in order.
    Run(StageArgs),
    /// Write a synthetic scene (frames, truth.json, config.json).
    Synth {
        /// One of pitcher, drawer, door, or a scenario JSON file.
        scenario: String,
        #[arg(long, short, default_value = ".")]
        out: PathBuf,
    },
    /// Compare a run directory with a synthetic scene's truth.json.
    Score {
        run: PathBuf,
        truth: PathBuf,
        /// Also write the score to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct StageArgs {
    #[arg(long, short)]
    config: PathBuf,
}

fn load(args: &StageArgs) -> Result<PipelineConfig, PipelineError> {
    Ok(PipelineConfig::load(&args.config)?)
}

fn stage(args: &StageArgs, stage: Stage) -> Result<(), PipelineError> {
    run_stage(&load(args)?, stage)
}

fn synth_cmd(scenario: &str, out: &Path) -> Result<(), PipelineError> {
    let scn = match synth::canned(scenario) {
        Some(s) => s,
        None => {
            let path = Path::new(scenario);
            if !path.is_file() {
                return Err(PipelineError::Config(manipseg::config::ConfigError(format!(
                    "unknown scenario '{scenario}' (expected one of {:?} or a JSON file)",
                    synth::CANNED
                ))));
            }
            read_json_file::<Scenario>(path)
                .map_err(|e| PipelineError::Config(manipseg::config::ConfigError(e.to_string())))?
        }
    };
    scn.validate()
        .map_err(|e| PipelineError::Config(manipseg::config::ConfigError(e.to_string())))?;
    let truth = synth::write_scenario(&scn, out).map_err(|source| PipelineError::Io { stage: "synth", source })?;
    log::info!(
        "{}: {} frames, {} points, {} contact(s) -> {}",
        scn.name,
        truth.frames,
        truth.point_count(),
        truth.contacts.len(),
        out.display()
    );
    Ok(())
}

fn score_cmd(run: &Path, truth: &Path, out: Option<&Path>) -> Result<(), PipelineError> {
    let io = |source: FormatError| PipelineError::Io { stage: "score", source };
    let truth: Truth = read_json_file(truth).map_err(io)?;
    let outputs = RunOutputs::load(run).map_err(|e| {
        if e.is_not_found() {
            PipelineError::Dependency {
                stage: "score",
                path: run.to_path_buf(),
            }
        } else {
            io(e)
        }
    })?;
    let score = synth::score(&outputs, &truth).map_err(|e| PipelineError::Input(e.to_string()))?;
    println!("{}", serde_json::to_string_pretty(&score).expect("score serializes"));
    if let Some(path) = out {
        write_json_file(path, &score).map_err(io)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Track(a) => stage(a, Stage::Track),
        Command::SegmentActor(a) => stage(a, Stage::SegmentActor),
        Command::Contacts(a) => stage(a, Stage::Contacts),
        Command::SegmentObjects(a) => stage(a, Stage::SegmentObjects),
        Command::Run(a) => load(a).and_then(|cfg| run_pipeline(&cfg)),
        Command::Synth { scenario, out } => synth_cmd(scenario, out),
        Command::Score { run, truth, out } => score_cmd(run, truth, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
