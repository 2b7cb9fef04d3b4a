use std::io::Write;
use std::path::PathBuf;

use clap::ValueEnum;
use handfit_core::fitting::{fit_detections, Detections2D, FitOptions, FitReport, Termination};
use handfit_core::hand_model::{pose_hand, HandParams, ModelConstants};
use handfit_core::model_io::load_model;
use handfit_core::obj::write_obj;
use handfit_core::synth::rotated_keypoints;
use handfit_core::{project, ViewParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::io::{jsonl_lines, read_text, usage, write_json_line};
use crate::{output_path, with_threads};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Init {
    /// Weak-perspective alignment of the rest pose to the detections.
    Detections,
    /// The record's stored parameters, each scaled by `1 + noise * u`,
    /// `u ~ U[-1, 1]` (synthetic experiments only).
    PerturbedTruth,
}

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    model: Option<PathBuf>,
    /// JSON-lines detections (`keypoints2d: [[u, v, confidence], ...]`).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// TOML file with defaults for any of these options.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    gtol: Option<f64>,
    #[arg(long)]
    steptol: Option<f64>,
    #[arg(long)]
    trust_radius: Option<f64>,
    /// Skip the rigid-only first stage.
    #[arg(long)]
    no_two_stage: bool,
    #[arg(long, value_enum, default_value_t = Init::Detections)]
    init: Init,
    #[arg(long, default_value_t = 0.2)]
    init_noise: f64,
    /// Write the fitted mesh of every sample as `<id>.obj` here.
    #[arg(long)]
    obj_dir: Option<PathBuf>,
}

#[derive(Deserialize)]
struct FitInput {
    id: Option<u64>,
    keypoints2d: Vec<Vec<f64>>,
    beta: Option<Vec<f64>>,
    theta: Option<Vec<f64>>,
    rot: Option<[f64; 3]>,
    trans: Option<[f64; 2]>,
    scale: Option<f64>,
}

#[derive(Serialize)]
struct FitOutput {
    id: u64,
    beta: Vec<f64>,
    theta: Vec<f64>,
    rot: [f64; 3],
    trans: [f64; 2],
    scale: f64,
    objective: f64,
    data_term: f64,
    reprojection_rmse: f64,
    iterations: usize,
    termination: Termination,
    joints3d: Vec<Option<[f64; 3]>>,
    keypoints2d: Vec<[f64; 3]>,
}

fn detections(input: &FitInput) -> anyhow::Result<Detections2D> {
    let mut points = Vec::with_capacity(input.keypoints2d.len());
    let mut conf = Vec::with_capacity(input.keypoints2d.len());
    for k in &input.keypoints2d {
        match k.as_slice() {
            [u, v] => {
                points.push([*u, *v]);
                conf.push(1.0);
            }
            [u, v, p] => {
                points.push([*u, *v]);
                conf.push(*p);
            }
            _ => anyhow::bail!("keypoints must be [u, v] or [u, v, confidence]"),
        }
    }
    Ok(Detections2D::new(points, conf)?)
}

fn perturbed_truth(input: &FitInput, noise: f64, seed: u64, id: u64) -> anyhow::Result<(ViewParams, HandParams)> {
    let (Some(beta), Some(theta), Some(rot), Some(trans), Some(scale)) =
        (&input.beta, &input.theta, input.rot, input.trans, input.scale)
    else {
        return Err(usage("--init perturbed-truth needs beta, theta, rot, trans and scale in every record"));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ id);
    let mut jitter = |x: f64| x * (1.0 + noise * rng.random_range(-1.0..=1.0));
    let view = ViewParams {
        rot: rot.map(&mut jitter),
        trans: trans.map(&mut jitter),
        scale: jitter(scale),
    };
    let hand = HandParams {
        beta: beta.iter().map(|&b| jitter(b)).collect(),
        theta: theta.iter().map(|&t| jitter(t)).collect(),
    };
    Ok((view, hand))
}

fn output(c: &ModelConstants, id: u64, rep: &FitReport) -> anyhow::Result<FitOutput> {
    let joints3d = rotated_keypoints(c, &rep.hand, &rep.view.rot)?.into_iter().map(Some).collect();
    let kp = handfit_core::hand_model::pose_keypoints(&rep.hand, c)?;
    let keypoints2d = project(&kp, &rep.view)?.points.iter().map(|p| [p[0], p[1], 1.0]).collect();
    Ok(FitOutput {
        id,
        beta: rep.hand.beta.clone(),
        theta: rep.hand.theta.clone(),
        rot: rep.view.rot,
        trans: rep.view.trans,
        scale: rep.view.scale,
        objective: rep.objective,
        data_term: rep.data_term,
        reprojection_rmse: rep.reprojection_rmse,
        iterations: rep.iterations(),
        termination: rep.termination,
        joints3d,
        keypoints2d,
    })
}

fn fit_line(c: &ModelConstants, line: &str, index: usize, a: &Args, seed: u64, options: &FitOptions) -> anyhow::Result<FitOutput> {
    let input: FitInput = serde_json::from_str(line)?;
    let id = input.id.unwrap_or(index as u64);
    let det = detections(&input)?;
    let init = match a.init {
        Init::Detections => None,
        Init::PerturbedTruth => Some(perturbed_truth(&input, a.init_noise, seed, id)?),
    };
    let rep = fit_detections(c, &det, init, options)?;
    if let Some(dir) = &a.obj_dir {
        let posed = pose_hand(&rep.hand, c)?;
        std::fs::write(dir.join(format!("{id}.obj")), write_obj(&posed.vertices, &c.faces))?;
    }
    output(c, id, &rep)
}

pub fn run(a: Args) -> anyhow::Result<()> {
    let mut cfg = Config::load(a.config.as_deref())?;
    if let Some(v) = a.max_iter {
        cfg.solver.max_iterations = v;
    }
    if let Some(v) = a.gtol {
        cfg.solver.gtol = v;
    }
    if let Some(v) = a.steptol {
        cfg.solver.steptol = v;
    }
    if let Some(v) = a.trust_radius {
        cfg.solver.initial_radius = v;
    }
    if a.no_two_stage {
        cfg.two_stage = Some(false);
    }
    let model = a.model.clone().or(cfg.model.clone()).ok_or_else(|| usage("no model given (--model or config)"))?;
    let threads = a.threads.or(cfg.threads);
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let options = cfg.fit_options();
    options.solver.validate()?;
    cfg.weights.validate()?;
    if !(a.init_noise >= 0.0) {
        return Err(usage("--init-noise must be >= 0"));
    }
    let c = load_model(&model)?;
    let text = read_text(&a.input)?;
    let lines = jsonl_lines(&text);
    if lines.is_empty() {
        return Err(usage("no samples"));
    }
    if let Some(dir) = &a.obj_dir {
        std::fs::create_dir_all(dir)?;
    }
    let results: Vec<anyhow::Result<FitOutput>> = with_threads(threads, || {
        lines
            .par_iter()
            .enumerate()
            .map(|(i, (_, line))| fit_line(&c, line, i, &a, seed, &options))
            .collect()
    })?;
    let mut w = output_path(&a.out)?;
    let mut failed = 0;
    for ((lineno, _), r) in lines.iter().zip(results) {
        match r {
            Ok(rec) => write_json_line(&mut w, &rec)?,
            Err(e) => {
                failed += 1;
                eprintln!("line {lineno}: skipped: {e:#}");
            }
        }
    }
    w.flush()?;
    if failed == lines.len() {
        anyhow::bail!("all {failed} samples failed");
    }
    Ok(())
}
