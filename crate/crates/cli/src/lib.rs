//! File formats and subcommands for the `pedcal` tool.
//!
//! Exit codes: 0 on success, 2 for unreadable or invalid input, 3 when the
//! input is valid but the computation fails (no RANSAC consensus, too few or
//! collinear correspondences, single-class labels).

pub mod commands;
pub mod config;
pub mod error;
pub mod records;
pub mod report;
pub mod scene;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

pub use config::RunConfig;
pub use error::CliError;

use records::{
    emit, read_detections, read_jsonl, read_positions, to_json_pretty, to_jsonl, ObjectClass,
};

#[derive(Debug, Parser)]
#[command(
    name = "pedcal",
    version,
    about = "Camera height calibration from pedestrians, ground localization and proximity scoring"
)]
pub struct Cli {
    /// Run configuration (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the RANSAC seed (calibrate) or the scene seed (simulate).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; stdout when omitted, except where noted.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Suppress the summary printed to stderr.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the camera height and projection matrix from person boxes.
    Calibrate { detections: PathBuf },
    /// Back-project detections to ground positions.
    Locate {
        detections: PathBuf,
        /// Report written by `calibrate`.
        #[arg(long)]
        calibration: PathBuf,
    },
    /// Distances and P(near) for person-vehicle pairs in each frame.
    Proximity {
        positions: PathBuf,
        /// True positions used to label the pairs.
        #[arg(long, requires = "pairs")]
        truth: Option<PathBuf>,
        /// Where to write the labeled pairs.
        #[arg(long, requires = "truth")]
        pairs: Option<PathBuf>,
    },
    /// Rigidly register estimated positions onto true positions.
    Align {
        estimated: PathBuf,
        truth: PathBuf,
        #[arg(long, value_enum)]
        class: Option<ClassArg>,
    },
    /// ROC curve (CSV, requires --output) and AUC of labeled pairs.
    Roc { pairs: PathBuf },
    /// Generate a synthetic scene. Requires --output; writes `<stem>.truth.json`
    /// and `<stem>.truth.jsonl` next to it.
    Simulate { scene: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ClassArg {
    Person,
    Vehicle,
}

impl From<ClassArg> for ObjectClass {
    fn from(c: ClassArg) -> Self {
        match c {
            ClassArg::Person => ObjectClass::Person,
            ClassArg::Vehicle => ObjectClass::Vehicle,
        }
    }
}

/// Sidecar paths for a simulated detections file.
pub fn truth_paths(output: &Path) -> (PathBuf, PathBuf) {
    (
        output.with_extension("truth.json"),
        output.with_extension("truth.jsonl"),
    )
}

fn required_output<'a>(cli: &'a Cli, command: &str) -> Result<&'a Path, CliError> {
    cli.output
        .as_deref()
        .ok_or_else(|| CliError::input(format!("{command} requires --output")))
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let output = cli.output.as_deref();
    let note = |msg: String| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };
    match &cli.command {
        Command::Calibrate { detections } => {
            if cli.config.is_none() {
                return Err(CliError::input("calibrate requires --config"));
            }
            let dets = read_detections(detections)?;
            let report = commands::calibrate(&dets, &config, cli.seed)?;
            emit(output, &to_json_pretty(&report))?;
            note(format!(
                "camera height {:.4} m, {}/{} inliers",
                report.camera_height_m, report.inlier_count, report.person_count
            ));
        }
        Command::Locate {
            detections,
            calibration,
        } => {
            let dets = read_detections(detections)?;
            let report = config::load_as(calibration, true)?;
            let positions = commands::locate(&dets, &report)?;
            emit(output, &to_jsonl(&positions))?;
            let degenerate = positions.iter().filter(|p| p.ground().is_none()).count();
            note(format!(
                "{} records located, {degenerate} degenerate",
                positions.len()
            ));
        }
        Command::Proximity {
            positions,
            truth,
            pairs,
        } => {
            let est = read_positions(positions)?;
            let truth = truth.as_deref().map(read_positions).transpose()?;
            let (report, labeled) =
                commands::proximity(&est, &config.predicate()?, truth.as_deref())?;
            emit(output, &to_json_pretty(&report))?;
            if let Some(path) = pairs {
                emit(Some(path), &to_jsonl(&labeled))?;
            }
            note(format!(
                "{} pairs, {} near events",
                report.pairs.len(),
                report.near_events.len()
            ));
        }
        Command::Align {
            estimated,
            truth,
            class,
        } => {
            let est = read_positions(estimated)?;
            let truth = read_positions(truth)?;
            let report = commands::align(&est, &truth, class.map(Into::into))?;
            emit(output, &to_json_pretty(&report))?;
            note(format!(
                "{} correspondences, mean error {:.4} m, std {:.4} m",
                report.count, report.mean_error_m, report.std_error_m
            ));
        }
        Command::Roc { pairs } => {
            let path = required_output(cli, "roc")?;
            let pairs: Vec<_> = read_jsonl(pairs)?.into_iter().map(|(_, p)| p).collect();
            let curve = commands::roc(&pairs, &config.eval)?;
            emit(Some(path), &commands::roc_csv(&curve))?;
            println!("AUC {:.4}", curve.auc);
        }
        Command::Simulate { scene } => {
            let path = required_output(cli, "simulate")?;
            let scene: scene::SceneFile = config::load_document(scene)?;
            let sim = commands::simulate(&scene, cli.seed)?;
            let (truth_json, truth_jsonl) = truth_paths(path);
            emit(Some(path), &to_jsonl(&sim.detections))?;
            emit(Some(&truth_json), &to_json_pretty(&sim.truth))?;
            emit(Some(&truth_jsonl), &to_jsonl(&sim.truth_positions))?;
            note(format!("{} detection records", sim.detections.len()));
        }
    }
    Ok(())
}
