use std::path::PathBuf;

use clap::Subcommand;
use handfit_core::model_io::{load_model, save_model};
use handfit_core::synth::{make_rig, RigSpec};
use serde_json::json;

use crate::io::emit;

#[derive(Subcommand)]
pub enum Command {
    /// Generate a procedural rig (defaults match the 778-vertex, 16-joint hand).
    Make {
        #[arg(long, default_value_t = 16)]
        joints: usize,
        #[arg(long, default_value_t = 778)]
        vertices: usize,
        #[arg(long, default_value_t = 10)]
        shape: usize,
        #[arg(long, default_value_t = 10)]
        pose: usize,
        /// Face count; defaults to 2 * vertices - 18.
        #[arg(long)]
        faces: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; a `.json` extension selects the JSON mirror format.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a summary of a model file.
    Inspect { path: PathBuf },
    /// Convert between the binary and JSON model formats.
    Convert { input: PathBuf, output: PathBuf },
}

pub fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Make { joints, vertices, shape, pose, faces, seed, out } => {
            let spec = RigSpec {
                n_joints: joints,
                n_vertices: vertices,
                n_shape: shape,
                n_pose: pose,
                seed,
                n_faces: faces,
            };
            save_model(&make_rig(&spec)?, out)?;
        }
        Command::Inspect { path } => {
            let c = load_model(path)?;
            let summary = json!({
                "n_vertices": c.n_vertices(),
                "n_faces": c.n_faces(),
                "n_joints": c.n_joints(),
                "n_shape": c.n_shape(),
                "n_pose": c.n_pose(),
                "n_keypoints": c.n_keypoints(),
                "parent": c.parent,
                "fingertip_vertex_ids": c.fingertip_vertex_ids,
                "has_palm_center": c.palm_center_weights.is_some(),
            });
            emit(&(serde_json::to_string_pretty(&summary)? + "\n"))?;
        }
        Command::Convert { input, output } => save_model(&load_model(input)?, output)?,
    }
    Ok(())
}
