use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use handfit_core::model_io::load_model;
use handfit_core::synth::{generate_sample, sample_silhouette, SamplerConfig};
use rayon::prelude::*;

use crate::io::write_json_line;
use crate::{output_path, with_threads};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    model: PathBuf,
    /// Number of samples.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standard deviation of the pixel noise added to the keypoints.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    /// Output JSON-lines file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    /// Also write a silhouette PNG per sample into this directory.
    #[arg(long)]
    masks_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 320)]
    image_size: usize,
}

pub fn run(a: Args) -> anyhow::Result<()> {
    let c = load_model(&a.model)?;
    let cfg = SamplerConfig {
        image_size: a.image_size,
        ..SamplerConfig::default()
    };
    if let Some(dir) = &a.masks_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let records = with_threads(a.threads, || {
        (0..a.n as u64)
            .into_par_iter()
            .map(|i| {
                let r = generate_sample(&c, a.seed, i, &cfg, a.sigma)?;
                if let Some(dir) = &a.masks_dir {
                    let mask = sample_silhouette(&c, &r, a.image_size, a.image_size)?;
                    mask.save_png(dir.join(format!("{i:06}.png")))?;
                }
                Ok(r)
            })
            .collect::<handfit_core::Result<Vec<_>>>()
    })??;
    let mut w = output_path(&a.out)?;
    for r in &records {
        write_json_line(&mut w, r)?;
    }
    w.flush()?;
    Ok(())
}
