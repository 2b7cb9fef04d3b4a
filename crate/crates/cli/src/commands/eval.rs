use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::ValueEnum;
use handfit_core::evaluation::{default_thresholds_2d, default_thresholds_3d, pck_from_errors, root_align};
use serde::{Deserialize, Serialize};

use crate::io::{emit, jsonl_lines, read_text, usage};
use crate::output_path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Space {
    #[value(name = "3d")]
    #[serde(rename = "3d")]
    ThreeD,
    #[value(name = "2d")]
    #[serde(rename = "2d")]
    TwoD,
}

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, value_enum)]
    space: Space,
    /// `start:stop:step` or a comma-separated list; defaults to 20:50:1 mm
    /// (3d) or 0:30:1 px (2d).
    #[arg(long)]
    thresholds: Option<String>,
    /// Skeleton root used for 3D alignment.
    #[arg(long, default_value_t = 0)]
    root: usize,
    /// CSV output with `threshold,pck` rows (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Summary JSON output (stdout when absent).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Deserialize)]
struct Record {
    id: Option<u64>,
    joints3d: Option<Vec<Option<[f64; 3]>>>,
    keypoints2d: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize)]
struct Summary {
    space: Space,
    n_samples: usize,
    n_joints: usize,
    mean_distance: f64,
    auc: f64,
}

fn parse_thresholds(s: &str) -> anyhow::Result<Vec<f64>> {
    let bad = || usage(format!("invalid thresholds '{s}'"));
    if s.contains(':') {
        let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
        let [start, stop, step] = parts[..] else { return Err(bad()) };
        if !(step > 0.0) || !(stop >= start) {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| start + i as f64 * step).collect())
    } else {
        s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
    }
}

fn load(path: &PathBuf) -> anyhow::Result<Vec<(u64, Record)>> {
    let text = read_text(path)?;
    jsonl_lines(&text)
        .into_iter()
        .enumerate()
        .map(|(i, (n, l))| {
            let r: Record = serde_json::from_str(l).with_context(|| format!("{}:{n}", path.display()))?;
            Ok((r.id.unwrap_or(i as u64), r))
        })
        .collect()
}

/// Points with availability flags for one record in the requested space.
fn points(r: &Record, space: Space) -> anyhow::Result<Vec<Option<Vec<f64>>>> {
    match space {
        Space::ThreeD => Ok(r
            .joints3d
            .as_ref()
            .ok_or_else(|| usage("record has no joints3d"))?
            .iter()
            .map(|p| p.map(|p| p.to_vec()))
            .collect()),
        Space::TwoD => r
            .keypoints2d
            .as_ref()
            .ok_or_else(|| usage("record has no keypoints2d"))?
            .iter()
            .map(|k| match k.as_slice() {
                [u, v] => Ok(Some(vec![*u, *v])),
                // zero confidence marks an unannotated joint
                [u, v, p] => Ok((*p > 0.0).then(|| vec![*u, *v])),
                _ => Err(usage("keypoints must be [u, v] or [u, v, p]")),
            })
            .collect(),
    }
}

pub fn run(a: Args) -> anyhow::Result<()> {
    let thresholds = match (&a.thresholds, a.space) {
        (Some(s), _) => parse_thresholds(s)?,
        (None, Space::ThreeD) => default_thresholds_3d(),
        (None, Space::TwoD) => default_thresholds_2d(),
    };
    let gt: HashMap<u64, Record> = load(&a.gt)?.into_iter().collect();
    let pred = load(&a.pred)?;
    if pred.is_empty() {
        return Err(usage("no samples"));
    }
    let mut errors = Vec::new();
    let mut n_samples = 0;
    for (id, p) in &pred {
        let g = gt.get(id).ok_or_else(|| usage(format!("no ground truth for sample {id}")))?;
        let (pp, gp) = (points(p, a.space)?, points(g, a.space)?);
        if pp.len() != gp.len() {
            return Err(usage(format!("sample {id}: {} predicted vs {} ground-truth joints", pp.len(), gp.len())));
        }
        let pairs: Vec<(usize, Vec<f64>, Vec<f64>)> = pp
            .into_iter()
            .zip(gp)
            .enumerate()
            .filter_map(|(i, (p, g))| Some((i, p?, g?)))
            .collect();
        let shift = if a.space == Space::ThreeD {
            match pairs.iter().find(|(i, _, _)| *i == a.root) {
                Some((_, p, g)) => {
                    let pr = root_align(&[[p[0], p[1], p[2]]], &[[g[0], g[1], g[2]]], 0)?;
                    vec![pr[0][0] - p[0], pr[0][1] - p[1], pr[0][2] - p[2]]
                }
                None => {
                    log::warn!("sample {id}: root joint missing, skipped");
                    continue;
                }
            }
        } else {
            vec![0.0, 0.0]
        };
        n_samples += 1;
        for (_, p, g) in pairs {
            let d2: f64 = p.iter().zip(&g).zip(&shift).map(|((p, g), s)| (p + s - g).powi(2)).sum();
            errors.push(d2.sqrt());
        }
    }
    let curve = pck_from_errors(&errors, &thresholds)?;
    let mut csv = String::from("threshold,pck\n");
    for (t, v) in curve.thresholds.iter().zip(&curve.values) {
        csv.push_str(&format!("{t},{v}\n"));
    }
    let summary = Summary {
        space: a.space,
        n_samples,
        n_joints: errors.len(),
        mean_distance: errors.iter().sum::<f64>() / errors.len() as f64,
        auc: curve.auc,
    };
    let summary = serde_json::to_string_pretty(&summary)?;
    match &a.out {
        Some(p) => {
            let mut w = output_path(p)?;
            w.write_all(csv.as_bytes())?;
            w.flush()?;
        }
        None => emit(&csv)?,
    }
    match &a.summary {
        Some(p) => std::fs::write(p, summary + "\n")?,
        None => emit(&(summary + "\n"))?,
    }
    Ok(())
}
