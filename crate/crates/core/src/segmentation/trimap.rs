//! Trimap seeding from 2D joint annotations.
//!
//! Foreground is the 1-pixel skeleton plus the filled palm triangles; every
//! other pixel within [`UNDECIDED_BAND_PX`] (Euclidean) of the foreground is
//! undecided, the rest is background.

use serde::{Deserialize, Serialize};

use super::raster::{bresenham, fill_triangle};
use crate::error::{Error, Result};
use crate::hand_model::{finger_chain_parents, ModelConstants, NUM_FINGERTIPS};

pub const UNDECIDED_BAND_PX: f64 = 70.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum TrimapLabel {
    Background = 0,
    Foreground = 1,
    Undecided = 2,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trimap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<TrimapLabel>,
}

impl Trimap {
    pub fn filled(width: usize, height: usize, label: TrimapLabel) -> Self {
        Trimap {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> TrimapLabel {
        self.labels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, label: TrimapLabel) {
        self.labels[y * self.width + x] = label;
    }

    pub fn count(&self, label: TrimapLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }
}

/// Skeleton edges and palm triangles over keypoint indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HandTopology {
    pub edges: Vec<(usize, usize)>,
    pub palm_triangles: Vec<[usize; 3]>,
}

impl HandTopology {
    /// Topology for keypoints laid out as `K` tree joints followed by five
    /// fingertips. Fingertip `f` hangs off the `f`-th leaf joint; the palm is
    /// fanned from the root over its children in index order.
    pub fn from_parents(parent: &[Option<usize>]) -> Self {
        let k = parent.len();
        let mut edges: Vec<(usize, usize)> = parent
            .iter()
            .enumerate()
            .filter_map(|(j, p)| p.map(|p| (p, j)))
            .collect();
        let leaves: Vec<usize> = (0..k).filter(|&j| !parent.contains(&Some(j))).collect();
        if !leaves.is_empty() {
            for f in 0..NUM_FINGERTIPS {
                edges.push((leaves[f % leaves.len()], k + f));
            }
        }
        let bases: Vec<usize> = (0..k).filter(|&j| parent[j] == Some(0)).collect();
        let palm_triangles = bases.windows(2).map(|w| [0, w[0], w[1]]).collect();
        HandTopology {
            edges,
            palm_triangles,
        }
    }

    pub fn for_model(c: &ModelConstants) -> Self {
        Self::from_parents(&c.parent)
    }

    /// The 21-keypoint hand: wrist, five 3-joint fingers (thumb first), tips.
    pub fn standard() -> Self {
        Self::from_parents(&finger_chain_parents(16))
    }
}

/// Exact squared Euclidean distance transform (two separable passes of the
/// lower-envelope-of-parabolas algorithm). `seeds` marks zero-distance pixels.
pub fn squared_distance_transform(seeds: &[bool], width: usize, height: usize) -> Vec<f64> {
    const FAR: f64 = 1e20;
    let mut grid: Vec<f64> = seeds.iter().map(|&s| if s { 0.0 } else { FAR }).collect();
    let mut buf_in = vec![0.0; width.max(height)];
    let mut buf_out = vec![0.0; width.max(height)];
    for x in 0..width {
        for y in 0..height {
            buf_in[y] = grid[y * width + x];
        }
        edt_1d(&buf_in[..height], &mut buf_out[..height]);
        for y in 0..height {
            grid[y * width + x] = buf_out[y];
        }
    }
    for y in 0..height {
        let row = &mut grid[y * width..(y + 1) * width];
        buf_in[..width].copy_from_slice(row);
        edt_1d(&buf_in[..width], row);
    }
    grid
}

fn edt_1d(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let qf = q as f64;
        loop {
            let p = v[k];
            let pf = p as f64;
            let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf);
            if s <= z[k] {
                if k == 0 {
                    // cannot happen: z[0] is -inf
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *out = (qf - p) * (qf - p) + f[v[k]];
    }
}

fn round_px(p: [f64; 2]) -> (i64, i64) {
    (p[0].round() as i64, p[1].round() as i64)
}

pub fn build_trimap(
    joints2d: &[[f64; 2]],
    topology: &HandTopology,
    width: usize,
    height: usize,
) -> Result<Trimap> {
    build_trimap_with_band(joints2d, topology, width, height, UNDECIDED_BAND_PX)
}

pub fn build_trimap_with_band(
    joints2d: &[[f64; 2]],
    topology: &HandTopology,
    width: usize,
    height: usize,
    band_px: f64,
) -> Result<Trimap> {
    if joints2d.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Domain("joint coordinates must be finite".into()));
    }
    let needed = topology
        .edges
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .chain(topology.palm_triangles.iter().flatten().copied())
        .max()
        .map_or(0, |m| m + 1);
    if joints2d.len() < needed {
        return Err(Error::Dimension {
            what: "trimap joints",
            expected: needed,
            got: joints2d.len(),
        });
    }
    let mut fg = vec![false; width * height];
    // Segments far outside the image would make Bresenham walk huge ranges.
    let reach = 4 * (width + height) as i64;
    for &(a, b) in &topology.edges {
        let (x0, y0) = round_px(joints2d[a]);
        let (x1, y1) = round_px(joints2d[b]);
        if [x0, y0, x1, y1].iter().any(|v| v.abs() > reach) {
            continue;
        }
        for (x, y) in bresenham(x0, y0, x1, y1) {
            if x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height {
                fg[y as usize * width + x as usize] = true;
            }
        }
    }
    for tri in &topology.palm_triangles {
        let corners = tri.map(|i| joints2d[i]);
        fill_triangle(corners, width, height, |x, y| fg[y * width + x] = true);
    }
    if !fg.iter().any(|&f| f) {
        return Err(Error::EmptyForeground);
    }
    let dist2 = squared_distance_transform(&fg, width, height);
    let band2 = band_px * band_px;
    let labels = fg
        .iter()
        .zip(&dist2)
        .map(|(&f, &d)| {
            if f {
                TrimapLabel::Foreground
            } else if d <= band2 {
                TrimapLabel::Undecided
            } else {
                TrimapLabel::Background
            }
        })
        .collect();
    Ok(Trimap {
        width,
        height,
        labels,
    })
}
