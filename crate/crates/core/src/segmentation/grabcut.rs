//! GrabCut: alternating colour-GMM fitting and s-t min-cut labelling of the
//! undecided trimap region.
//!
//! The energy minimized is
//! `E = sum_p min_k D(label_p, k, z_p) + sum_{p~q, label_p != label_q} V(p, q)`
//! with `D = -log pi_k - log N(z; mu_k, Sigma_k)` and the contrast-sensitive
//! `V = gamma * exp(-beta |z_p - z_q|^2) / dist(p, q)` over 8-neighbours.
//! Component reassignment, maximum-likelihood refitting and the exact cut
//! each lower `E`, so the recorded energies never increase unless a
//! covariance had to be floored.

use image::RgbImage;
use log::warn;
use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::mask::HandMask;
use super::maxflow::FlowGraph;
use super::trimap::{Trimap, TrimapLabel};
use crate::error::{check_len, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GrabCutOptions {
    pub components: usize,
    pub max_iterations: usize,
    pub gamma: f64,
    /// Smallest eigenvalue allowed in a component covariance.
    pub covariance_floor: f64,
}

impl Default for GrabCutOptions {
    fn default() -> Self {
        GrabCutOptions {
            components: 5,
            max_iterations: 5,
            gamma: 50.0,
            covariance_floor: 1e-3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GrabCutResult {
    pub mask: HandMask,
    /// Energy after each graph cut.
    pub energies: Vec<f64>,
    /// Max-flow value minus cut capacity for each solve.
    pub cut_gaps: Vec<f64>,
    pub iterations: usize,
    /// Number of covariance matrices that had to be floored.
    pub floored_covariances: usize,
}

type Color = Vector3<f64>;

#[derive(Clone, Debug)]
struct Gaussian {
    mean: Color,
    inv_cov: Matrix3<f64>,
    // -log(weight) + 0.5 log det + 1.5 log(2 pi)
    offset: f64,
}

#[derive(Clone, Debug)]
struct Gmm {
    components: Vec<Gaussian>,
}

impl Gmm {
    fn cost(&self, k: usize, z: &Color) -> f64 {
        let g = &self.components[k];
        let d = z - g.mean;
        g.offset + 0.5 * d.dot(&(g.inv_cov * d))
    }

    /// Cheapest component and its cost.
    fn best(&self, z: &Color) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for k in 0..self.components.len() {
            let c = self.cost(k, z);
            if c < best.1 {
                best = (k, c);
            }
        }
        best
    }

    /// Maximum-likelihood fit given hard component assignments.
    fn fit(samples: &[Color], assign: &[usize], n_comp: usize, floor: f64, floored: &mut usize) -> Gmm {
        let mut count = vec![0usize; n_comp];
        let mut sum = vec![Color::zeros(); n_comp];
        for (z, &k) in samples.iter().zip(assign) {
            count[k] += 1;
            sum[k] += z;
        }
        let mut cov = vec![Matrix3::zeros(); n_comp];
        let means: Vec<Color> = (0..n_comp)
            .map(|k| if count[k] > 0 { sum[k] / count[k] as f64 } else { Color::zeros() })
            .collect();
        for (z, &k) in samples.iter().zip(assign) {
            let d = z - means[k];
            cov[k] += d * d.transpose();
        }
        let total = samples.len() as f64;
        let components = (0..n_comp)
            .filter(|&k| count[k] > 0)
            .map(|k| {
                let mut c = cov[k] / count[k] as f64;
                let eig = SymmetricEigen::new(c);
                if eig.eigenvalues.min() < floor {
                    *floored += 1;
                    let clamped = eig.eigenvalues.map(|v| v.max(floor));
                    c = eig.eigenvectors * Matrix3::from_diagonal(&clamped) * eig.eigenvectors.transpose();
                }
                let det = c.determinant();
                let inv_cov = c.try_inverse().unwrap_or_else(|| Matrix3::identity() / floor);
                let weight = count[k] as f64 / total;
                Gaussian {
                    mean: means[k],
                    inv_cov,
                    offset: -weight.ln() + 0.5 * det.ln() + 1.5 * (2.0 * std::f64::consts::PI).ln(),
                }
            })
            .collect();
        Gmm { components }
    }
}

/// Deterministic k-means used to seed component assignments.
fn kmeans(samples: &[Color], k: usize) -> Vec<usize> {
    let k = k.min(samples.len()).max(1);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].sum().total_cmp(&samples[b].sum()));
    let mut centers: Vec<Color> = (0..k)
        .map(|i| samples[order[(2 * i + 1) * samples.len() / (2 * k)]])
        .collect();
    let mut assign = vec![0usize; samples.len()];
    for _ in 0..10 {
        let mut changed = false;
        for (z, a) in samples.iter().zip(assign.iter_mut()) {
            let best = (0..k)
                .min_by(|&i, &j| (z - centers[i]).norm_squared().total_cmp(&(z - centers[j]).norm_squared()))
                .unwrap_or(0);
            if best != *a {
                *a = best;
                changed = true;
            }
        }
        let mut sum = vec![Color::zeros(); k];
        let mut count = vec![0usize; k];
        for (z, &a) in samples.iter().zip(&assign) {
            sum[a] += z;
            count[a] += 1;
        }
        for i in 0..k {
            if count[i] > 0 {
                centers[i] = sum[i] / count[i] as f64;
            }
        }
        if !changed {
            break;
        }
    }
    assign
}

// right, down-left, down, down-right
const NEIGHBOURS: [(i64, i64); 4] = [(1, 0), (-1, 1), (0, 1), (1, 1)];

struct PairwiseTerms {
    /// (p, q, weight) for each unordered 8-neighbour pair.
    pairs: Vec<(usize, usize, f64)>,
}

fn pairwise_terms(colors: &[Color], width: usize, height: usize, gamma: f64) -> PairwiseTerms {
    let mut raw = Vec::with_capacity(4 * colors.len());
    let mut total = 0.0;
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            for (dx, dy) in NEIGHBOURS {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= width as i64 || ny >= height as i64 {
                    continue;
                }
                let p = y as usize * width + x as usize;
                let q = ny as usize * width + nx as usize;
                let d2 = (colors[p] - colors[q]).norm_squared();
                total += d2;
                let dist = ((dx * dx + dy * dy) as f64).sqrt();
                raw.push((p, q, d2, dist));
            }
        }
    }
    let mean = if raw.is_empty() { 0.0 } else { total / raw.len() as f64 };
    let beta = if mean > 0.0 { 1.0 / (2.0 * mean) } else { 0.0 };
    PairwiseTerms {
        pairs: raw
            .into_iter()
            .map(|(p, q, d2, dist)| (p, q, gamma * (-beta * d2).exp() / dist))
            .collect(),
    }
}

fn energy(data: &[[f64; 2]], fg: &[bool], pairs: &PairwiseTerms) -> f64 {
    let unary: f64 = data
        .iter()
        .zip(fg)
        .map(|(d, &f)| if f { d[1] } else { d[0] })
        .sum();
    let binary: f64 = pairs
        .pairs
        .iter()
        .filter(|&&(p, q, _)| fg[p] != fg[q])
        .map(|&(_, _, w)| w)
        .sum();
    unary + binary
}

pub fn grabcut(image: &RgbImage, trimap: &Trimap, options: &GrabCutOptions) -> Result<GrabCutResult> {
    let (width, height) = (trimap.width, trimap.height);
    check_len("image width", width, image.width() as usize)?;
    check_len("image height", height, image.height() as usize)?;
    if trimap.count(TrimapLabel::Foreground) == 0 || trimap.count(TrimapLabel::Background) == 0 {
        return Err(Error::MissingSeeds);
    }
    if options.components == 0 {
        return Err(Error::Contract("GrabCut needs at least one component".into()));
    }
    let n = width * height;
    let colors: Vec<Color> = image
        .pixels()
        .map(|p| Color::new(p[0] as f64, p[1] as f64, p[2] as f64))
        .collect();
    let pairs = pairwise_terms(&colors, width, height, options.gamma);
    let pairwise_total: f64 = pairs.pairs.iter().map(|p| 2.0 * p.2).sum();

    let mut fg: Vec<bool> = trimap.labels.iter().map(|&l| l != TrimapLabel::Background).collect();
    let mut assign = vec![0usize; n];
    let mut floored = 0usize;
    let mut energies = Vec::new();
    let mut cut_gaps = Vec::new();
    let mut iterations = 0;

    // initial component assignment per region
    for region in [true, false] {
        let idx: Vec<usize> = (0..n).filter(|&i| fg[i] == region).collect();
        let samples: Vec<Color> = idx.iter().map(|&i| colors[i]).collect();
        for (&i, a) in idx.iter().zip(kmeans(&samples, options.components)) {
            assign[i] = a;
        }
    }

    for iter in 0..options.max_iterations {
        iterations = iter + 1;
        let mut models = Vec::with_capacity(2);
        for region in [false, true] {
            let idx: Vec<usize> = (0..n).filter(|&i| fg[i] == region).collect();
            let samples: Vec<Color> = idx.iter().map(|&i| colors[i]).collect();
            let comp: Vec<usize> = idx.iter().map(|&i| assign[i]).collect();
            models.push(Gmm::fit(&samples, &comp, options.components, options.covariance_floor, &mut floored));
        }
        let (bg_model, fg_model) = (&models[0], &models[1]);

        // data[p] = [cost as background, cost as foreground]
        let data: Vec<[f64; 2]> = colors
            .iter()
            .map(|z| [bg_model.best(z).1, fg_model.best(z).1])
            .collect();

        // Hard seeds must never be cut away: their links outweigh every
        // other capacity in the graph combined.
        let unary_total: f64 = (0..n)
            .filter(|&p| trimap.labels[p] == TrimapLabel::Undecided)
            .map(|p| (data[p][0] - data[p][1]).abs())
            .sum();
        let hard_cap = 1.0 + pairwise_total + unary_total;
        let source = n;
        let sink = n + 1;
        let mut graph = FlowGraph::with_capacity(n + 2, 2 * n + pairs.pairs.len());
        for p in 0..n {
            let (to_source, to_sink) = match trimap.labels[p] {
                TrimapLabel::Foreground => (hard_cap, 0.0),
                TrimapLabel::Background => (0.0, hard_cap),
                TrimapLabel::Undecided => {
                    let m = data[p][0].min(data[p][1]);
                    // choosing foreground cuts p->t, background cuts s->p
                    (data[p][0] - m, data[p][1] - m)
                }
            };
            if to_source > 0.0 {
                graph.add_edge(source, p, to_source);
            }
            if to_sink > 0.0 {
                graph.add_edge(p, sink, to_sink);
            }
        }
        for &(p, q, w) in &pairs.pairs {
            graph.add_edge_pair(p, q, w, w);
        }
        let flow = graph.max_flow(source, sink);
        cut_gaps.push(flow.value - flow.cut_value);
        debug_assert!(
            (flow.value - flow.cut_value).abs() <= 1e-9 * flow.value.abs().max(1.0),
            "max-flow {} != min-cut {}",
            flow.value,
            flow.cut_value
        );

        let new_fg: Vec<bool> = flow.source_side[..n].to_vec();
        let changed = new_fg != fg;
        fg = new_fg;
        energies.push(energy(&data, &fg, &pairs));

        // component reassignment for the next refit
        for p in 0..n {
            let model = if fg[p] { fg_model } else { bg_model };
            assign[p] = model.best(&colors[p]).0;
        }
        if !changed {
            break;
        }
    }
    if floored > 0 {
        warn!("GrabCut floored {floored} degenerate colour covariance(s)");
    }
    let mut mask = HandMask::new(width, height);
    for (m, &f) in mask.data.iter_mut().zip(&fg) {
        *m = f as u8;
    }
    Ok(GrabCutResult {
        mask,
        energies,
        cut_gaps,
        iterations,
        floored_covariances: floored,
    })
}
