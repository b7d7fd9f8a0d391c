//! Exact Euclidean distance transform (separable lower-envelope method of
//! Felzenszwalb and Huttenlocher).

use crate::imaging::BinaryImage;

const FAR: f64 = 1e20;

/// Squared distance transform of a sampled function along one line.
fn transform_line(f: &[f64], out: &mut [f64], hull: &mut Vec<usize>, cuts: &mut Vec<f64>) {
    let n = f.len();
    hull.clear();
    cuts.clear();
    hull.push(0);
    cuts.push(f64::NEG_INFINITY);
    cuts.push(f64::INFINITY);
    for q in 1..n {
        let qf = q as f64;
        loop {
            let v = *hull.last().expect("hull never empties");
            let vf = v as f64;
            let s = ((f[q] + qf * qf) - (f[v] + vf * vf)) / (2.0 * qf - 2.0 * vf);
            if s <= cuts[hull.len() - 1] && hull.len() > 1 {
                hull.pop();
                cuts.pop();
            } else {
                hull.push(q);
                *cuts.last_mut().expect("non-empty") = s;
                cuts.push(f64::INFINITY);
                break;
            }
        }
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while cuts[k + 1] < qf {
            k += 1;
        }
        let v = hull[k] as f64;
        *o = (qf - v) * (qf - v) + f[hull[k]];
    }
}

/// Euclidean distance from every pixel to the nearest `true` pixel.
///
/// When the image has no `true` pixel every entry is the image diagonal.
pub fn distance_transform(bin: &BinaryImage) -> Vec<f64> {
    let (w, h) = (bin.width(), bin.height());
    if bin.count_true() == 0 {
        return vec![diagonal(w, h); w * h];
    }
    let mut grid: Vec<f64> = bin
        .data()
        .iter()
        .map(|&b| if b { 0.0 } else { FAR })
        .collect();
    let n = w.max(h);
    let (mut line, mut out) = (vec![0.0; n], vec![0.0; n]);
    let (mut hull, mut cuts) = (Vec::with_capacity(n), Vec::with_capacity(n + 1));

    for x in 0..w {
        for y in 0..h {
            line[y] = grid[y * w + x];
        }
        transform_line(&line[..h], &mut out[..h], &mut hull, &mut cuts);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        let row = &mut grid[y * w..(y + 1) * w];
        line[..w].copy_from_slice(row);
        transform_line(&line[..w], row, &mut hull, &mut cuts);
    }
    grid.iter_mut().for_each(|d| *d = d.sqrt());
    grid
}

pub fn diagonal(width: usize, height: usize) -> f64 {
    (width as f64).hypot(height as f64)
}
