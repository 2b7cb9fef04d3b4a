use std::path::{Path, PathBuf};

use anyhow::Context;
use handfit_core::model_io::load_model;
use handfit_core::segmentation::{build_trimap_with_band, grabcut, GrabCutOptions, HandTopology, UNDECIDED_BAND_PX};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::io::{emit, jsonl_lines, read_text, usage};
use crate::with_threads;

#[derive(clap::Args)]
pub struct Args {
    /// JSON file with the 2D joints: an array of `[u, v]` / `[u, v, p]`, or
    /// an object with a `keypoints2d` field.
    #[arg(long, required_unless_present = "batch")]
    joints: Option<PathBuf>,
    #[arg(long, required_unless_present = "batch")]
    image: Option<PathBuf>,
    /// Output PNG; a run-length sidecar is written next to it as `<out>.rle`.
    #[arg(long, required_unless_present = "batch")]
    out: Option<PathBuf>,
    /// JSON-lines jobs `{"image": ..., "joints": [...], "out": ...}`.
    #[arg(long, conflicts_with_all = ["joints", "image", "out"])]
    batch: Option<PathBuf>,
    /// Skeleton of this model instead of the standard 21-keypoint hand.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = UNDECIDED_BAND_PX)]
    band: f64,
    #[arg(long, default_value_t = 5)]
    iterations: usize,
    #[arg(long, default_value_t = 5)]
    components: usize,
    #[arg(long, default_value_t = 50.0)]
    gamma: f64,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Deserialize)]
struct Job {
    image: PathBuf,
    joints: Value,
    out: PathBuf,
}

#[derive(Serialize)]
struct Summary {
    out: PathBuf,
    width: usize,
    height: usize,
    foreground_pixels: usize,
    iterations: usize,
    energies: Vec<f64>,
}

fn parse_joints(v: &Value) -> anyhow::Result<Vec<[f64; 2]>> {
    let list = match v {
        Value::Object(o) => o.get("keypoints2d").ok_or_else(|| usage("joints object has no keypoints2d"))?,
        other => other,
    };
    let rows: Vec<Vec<f64>> = serde_json::from_value(list.clone()).context("joints must be a list of [u, v]")?;
    rows.iter()
        .map(|r| match r.as_slice() {
            [u, v] | [u, v, _] => Ok([*u, *v]),
            _ => Err(usage("each joint must be [u, v] or [u, v, p]")),
        })
        .collect()
}

fn run_job(image: &Path, joints: &[[f64; 2]], out: &Path, topo: &HandTopology, a: &Args) -> anyhow::Result<Summary> {
    let img = image::open(image).with_context(|| format!("cannot read image {}", image.display()))?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let trimap = build_trimap_with_band(joints, topo, w, h, a.band)?;
    let options = GrabCutOptions {
        components: a.components,
        max_iterations: a.iterations,
        gamma: a.gamma,
        ..GrabCutOptions::default()
    };
    let r = grabcut(&img, &trimap, &options)?;
    r.mask.save_png(out)?;
    let mut rle = out.as_os_str().to_owned();
    rle.push(".rle");
    std::fs::write(&rle, r.mask.to_rle_string())?;
    Ok(Summary {
        out: out.to_owned(),
        width: w,
        height: h,
        foreground_pixels: r.mask.count(),
        iterations: r.iterations,
        energies: r.energies,
    })
}

pub fn run(a: Args) -> anyhow::Result<()> {
    if !(a.band >= 0.0) {
        return Err(usage("--band must be >= 0"));
    }
    let topo = match &a.model {
        Some(p) => HandTopology::for_model(&load_model(p)?),
        None => HandTopology::standard(),
    };
    let summaries = if let Some(batch) = &a.batch {
        let text = read_text(batch)?;
        let jobs: Vec<Job> = jsonl_lines(&text)
            .into_iter()
            .map(|(n, l)| serde_json::from_str(l).with_context(|| format!("{}:{n}", batch.display())))
            .collect::<anyhow::Result<_>>()?;
        if jobs.is_empty() {
            return Err(usage("no samples"));
        }
        with_threads(a.threads, || {
            jobs.par_iter()
                .map(|j| run_job(&j.image, &parse_joints(&j.joints)?, &j.out, &topo, &a))
                .collect::<anyhow::Result<Vec<_>>>()
        })??
    } else {
        let (Some(joints), Some(image), Some(out)) = (&a.joints, &a.image, &a.out) else {
            return Err(usage("--joints, --image and --out are required"));
        };
        let value: Value = serde_json::from_str(&read_text(joints)?).context("joints file is not JSON")?;
        vec![run_job(image, &parse_joints(&value)?, out, &topo, &a)?]
    };
    for s in summaries {
        emit(&(serde_json::to_string(&s)? + "\n"))?;
    }
    Ok(())
}
