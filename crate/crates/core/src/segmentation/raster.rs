//! Integer rasterization helpers shared by trimap construction and
//! silhouette rendering.

/// Pixels of the Bresenham line between two integer endpoints, inclusive.
pub fn bresenham(x0: i64, y0: i64, x1: i64, y1: i64) -> Vec<(i64, i64)> {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let (mut x, mut y) = (x0, y0);
    let mut out = Vec::with_capacity((dx.max(-dy) + 1) as usize);
    loop {
        out.push((x, y));
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    out
}

const EDGE_EPS: f64 = 1e-9;

/// Scanline fill of a triangle: calls `plot(x, y)` for every integer pixel
/// whose centre lies inside or on the boundary, clipped to
/// `[0, width) x [0, height)`.
pub fn fill_triangle(
    tri: [[f64; 2]; 3],
    width: usize,
    height: usize,
    mut plot: impl FnMut(usize, usize),
) {
    if tri.iter().flatten().any(|v| !v.is_finite()) || width == 0 || height == 0 {
        return;
    }
    let ymin = tri.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let ymax = tri.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    let row_lo = (ymin - EDGE_EPS).ceil().max(0.0);
    let row_hi = (ymax + EDGE_EPS).floor().min(height as f64 - 1.0);
    if row_lo > row_hi {
        return;
    }
    for y in row_lo as usize..=row_hi as usize {
        let yf = y as f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for e in 0..3 {
            let a = tri[e];
            let b = tri[(e + 1) % 3];
            let (y0, y1) = (a[1].min(b[1]), a[1].max(b[1]));
            if yf < y0 - EDGE_EPS || yf > y1 + EDGE_EPS {
                continue;
            }
            if (b[1] - a[1]).abs() < EDGE_EPS {
                lo = lo.min(a[0].min(b[0]));
                hi = hi.max(a[0].max(b[0]));
            } else {
                let t = ((yf - a[1]) / (b[1] - a[1])).clamp(0.0, 1.0);
                let x = a[0] + t * (b[0] - a[0]);
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        if lo > hi {
            continue;
        }
        let x_lo = (lo - EDGE_EPS).ceil().max(0.0);
        let x_hi = (hi + EDGE_EPS).floor().min(width as f64 - 1.0);
        if x_lo > x_hi {
            continue;
        }
        for x in x_lo as usize..=x_hi as usize {
            plot(x, y);
        }
    }
}
