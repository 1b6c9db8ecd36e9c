//! Exact Euclidean distance transform on a raster with per-axis spacing.
//!
//! Separable lower-envelope-of-parabolas formulation (Felzenszwalb and
//! Huttenlocher). Distances are measured between pixel centres, with a column
//! step of `spacing_x` and a row step of `spacing_y`.

/// Squared distance from every pixel to the nearest `true` pixel of `feature`.
///
/// Pixels are row-major, `width * height`. Returns `f64::INFINITY` everywhere
/// when the mask has no feature pixel.
pub fn squared_distance_transform(
    feature: &[bool],
    width: usize,
    height: usize,
    spacing_x: f64,
    spacing_y: f64,
) -> Vec<f64> {
    assert_eq!(feature.len(), width * height, "mask size mismatch");
    let mut grid: Vec<f64> = feature
        .iter()
        .map(|&f| if f { 0.0 } else { f64::INFINITY })
        .collect();

    let mut column = vec![0.0; height];
    let mut out = vec![0.0; width.max(height)];
    let mut scratch = Envelope::with_capacity(width.max(height));

    for x in 0..width {
        for y in 0..height {
            column[y] = grid[y * width + x];
        }
        scratch.transform(&column, spacing_y, &mut out[..height]);
        for y in 0..height {
            grid[y * width + x] = out[y];
        }
    }
    let mut row = vec![0.0; width];
    for y in 0..height {
        row.copy_from_slice(&grid[y * width..(y + 1) * width]);
        scratch.transform(&row, spacing_x, &mut out[..width]);
        grid[y * width..(y + 1) * width].copy_from_slice(&out[..width]);
    }
    grid
}

/// Euclidean (not squared) distance to the nearest feature pixel.
pub fn distance_transform(
    feature: &[bool],
    width: usize,
    height: usize,
    spacing_x: f64,
    spacing_y: f64,
) -> Vec<f64> {
    squared_distance_transform(feature, width, height, spacing_x, spacing_y)
        .into_iter()
        .map(f64::sqrt)
        .collect()
}

struct Envelope {
    vertices: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            vertices: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n + 1),
        }
    }

    /// 1-D transform `d(p) = min_q f(q) + (s (p - q))^2`.
    fn transform(&mut self, f: &[f64], s: f64, d: &mut [f64]) {
        let s2 = s * s;
        self.vertices.clear();
        self.bounds.clear();
        let intersect = |q: usize, v: usize| -> f64 {
            let (qf, vf) = (q as f64, v as f64);
            ((f[q] + s2 * qf * qf) - (f[v] + s2 * vf * vf)) / (2.0 * s2 * (qf - vf))
        };
        for q in 0..f.len() {
            if !f[q].is_finite() {
                continue;
            }
            loop {
                match self.vertices.last() {
                    None => {
                        self.vertices.push(q);
                        self.bounds.push(f64::NEG_INFINITY);
                        break;
                    }
                    Some(&v) => {
                        let x = intersect(q, v);
                        if x <= *self.bounds.last().unwrap() {
                            self.vertices.pop();
                            self.bounds.pop();
                        } else {
                            self.vertices.push(q);
                            self.bounds.push(x);
                            break;
                        }
                    }
                }
            }
        }
        if self.vertices.is_empty() {
            d.iter_mut().for_each(|v| *v = f64::INFINITY);
            return;
        }
        let mut k = 0;
        for (p, dp) in d.iter_mut().enumerate() {
            let pf = p as f64;
            while k + 1 < self.vertices.len() && self.bounds[k + 1] < pf {
                k += 1;
            }
            let v = self.vertices[k];
            let dv = pf - v as f64;
            *dp = s2 * dv * dv + f[v];
        }
    }
}
