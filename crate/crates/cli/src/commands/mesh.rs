use std::path::PathBuf;

use anyhow::Context;
use handfit_core::hand_model::{pose_hand, HandParams};
use handfit_core::model_io::load_model;
use handfit_core::obj::write_obj;
use serde::Deserialize;

use crate::io::read_text;

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    model: PathBuf,
    /// JSON object with `beta` and `theta` (a fit result line works too).
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Deserialize)]
struct Params {
    beta: Vec<f64>,
    theta: Vec<f64>,
}

pub fn run(a: Args) -> anyhow::Result<()> {
    let c = load_model(&a.model)?;
    let p: Params = serde_json::from_str(read_text(&a.params)?.trim()).context("invalid params JSON")?;
    let posed = pose_hand(&HandParams { beta: p.beta, theta: p.theta }, &c)?;
    std::fs::write(&a.out, write_obj(&posed.vertices, &c.faces))
        .with_context(|| format!("cannot write {}", a.out.display()))?;
    Ok(())
}
