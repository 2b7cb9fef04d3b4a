//! `handfit`: synthetic data, 2D keypoint fitting, hand masks, evaluation
//! and model-file utilities.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{eval, fit, mask, mesh, model, synth};
use crate::io::exit_code;

#[derive(Parser)]
#[command(name = "handfit", version, about = "Model-based hand pose fitting toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic keypoint dataset from a model.
    Synth(synth::Args),
    /// Fit the hand model to 2D keypoint detections.
    Fit(fit::Args),
    /// Hand mask from 2D joints via trimap + GrabCut.
    Mask(mask::Args),
    /// PCK curve and mean joint distance of predictions against ground truth.
    Eval(eval::Args),
    /// Pose the model and write the mesh as OBJ.
    ExportMesh(mesh::Args),
    /// Create, inspect and convert model files.
    #[command(subcommand)]
    Model(model::Command),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HANDFIT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth::run(a),
        Command::Fit(a) => fit::run(a),
        Command::Mask(a) => mask::run(a),
        Command::Eval(a) => eval::run(a),
        Command::ExportMesh(a) => mesh::run(a),
        Command::Model(c) => model::run(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Shared `--threads` handling: runs `f` in a pool of the requested size.
pub(crate) fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    match threads {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build()?.install(f)),
        None => Ok(f()),
    }
}

pub(crate) fn output_path(p: &PathBuf) -> anyhow::Result<std::io::BufWriter<std::fs::File>> {
    use anyhow::Context;
    let f = std::fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
    Ok(std::io::BufWriter::new(f))
}
