//! Edge detection: gradient operators with non-maximum thinning, and
//! zero-crossing detectors over a Laplacian response.
//!
//! Derivative kernels read the nearest in-bounds pixel outside the image
//! (border replication), so a constant image has an exactly zero response.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BinaryImage, GrayImage};
use crate::error::{Error, Result};

/// Standard deviation of the Laplacian-of-Gaussian kernel.
pub const LOG_SIGMA: f64 = 2.0;

/// Laplacian responses at or below this magnitude count as exactly zero.
const RESPONSE_FLOOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMethod {
    Sobel,
    Prewitt,
    ZeroCross,
    Log,
}

impl EdgeMethod {
    pub const ALL: [EdgeMethod; 4] = [
        EdgeMethod::Sobel,
        EdgeMethod::Prewitt,
        EdgeMethod::ZeroCross,
        EdgeMethod::Log,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EdgeMethod::Sobel => "sobel",
            EdgeMethod::Prewitt => "prewitt",
            EdgeMethod::ZeroCross => "zerocross",
            EdgeMethod::Log => "log",
        }
    }
}

impl fmt::Display for EdgeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EdgeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EdgeMethod::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown edge method {s:?}")))
    }
}

/// Copy of `img` extended by `pad` replicated pixels on every side.
struct Padded {
    stride: usize,
    pad: usize,
    data: Vec<f64>,
}

impl Padded {
    fn new(img: &GrayImage, pad: usize) -> Self {
        let stride = img.width() + 2 * pad;
        let rows = img.height() + 2 * pad;
        let mut data = Vec::with_capacity(stride * rows);
        for y in 0..rows as isize {
            for x in 0..stride as isize {
                data.push(img.get_replicated(x - pad as isize, y - pad as isize));
            }
        }
        Padded { stride, pad, data }
    }

    /// Value at image coordinates offset by `(dx, dy)`.
    #[inline]
    fn at(&self, x: usize, y: usize, dx: isize, dy: isize) -> f64 {
        let px = (x + self.pad) as isize + dx;
        let py = (y + self.pad) as isize + dy;
        self.data[py as usize * self.stride + px as usize]
    }
}

/// Horizontal and vertical derivative responses of a 3×3 gradient operator
/// whose smoothing weights are `(1, centre, 1)`.
fn gradients(img: &GrayImage, centre: f64) -> (Vec<f64>, Vec<f64>) {
    let p = Padded::new(img, 1);
    let n = img.width() * img.height();
    let (mut gx, mut gy) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let side = |a: f64, b: f64, c: f64| a + centre * b + c;
    for y in 0..img.height() {
        for x in 0..img.width() {
            // Both sides are summed in the same order so flat regions cancel exactly.
            let right = side(p.at(x, y, 1, -1), p.at(x, y, 1, 0), p.at(x, y, 1, 1));
            let left = side(p.at(x, y, -1, -1), p.at(x, y, -1, 0), p.at(x, y, -1, 1));
            let down = side(p.at(x, y, -1, 1), p.at(x, y, 0, 1), p.at(x, y, 1, 1));
            let up = side(p.at(x, y, -1, -1), p.at(x, y, 0, -1), p.at(x, y, 1, -1));
            gx.push(right - left);
            gy.push(down - up);
        }
    }
    (gx, gy)
}

/// Gradient magnitude under the Sobel kernels, or Prewitt for
/// [`EdgeMethod::Prewitt`]. The Laplacian-based methods report the Sobel
/// magnitude.
pub fn gradient_magnitude(img: &GrayImage, method: EdgeMethod) -> Vec<f64> {
    let centre = if method == EdgeMethod::Prewitt {
        1.0
    } else {
        2.0
    };
    let (gx, gy) = gradients(img, centre);
    gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect()
}

/// Marks contour pixels of `img`.
///
/// Sobel/Prewitt keep pixels whose magnitude, normalised by the image-wide
/// maximum, reaches `threshold`, then thin them to one pixel by
/// non-maximum suppression along the quantised gradient direction.
/// LoG and ZeroCross mark sign changes of the filtered image between
/// 4-neighbours whose jump reaches `threshold` times the largest absolute
/// response.
pub fn detect_edges(img: &GrayImage, method: EdgeMethod, threshold: f64) -> Result<BinaryImage> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::invalid(format!(
            "edge threshold must be >= 0, got {threshold}"
        )));
    }
    let out = match method {
        EdgeMethod::Sobel => gradient_edges(img, 2.0, threshold),
        EdgeMethod::Prewitt => gradient_edges(img, 1.0, threshold),
        EdgeMethod::Log => {
            let response = convolve_replicated(img, &log_kernel(LOG_SIGMA));
            zero_crossings(img.width(), img.height(), response, threshold)
        }
        EdgeMethod::ZeroCross => {
            let response = convolve_replicated(img, &laplacian_kernel());
            zero_crossings(img.width(), img.height(), response, threshold)
        }
    };
    Ok(out)
}

fn gradient_edges(img: &GrayImage, centre: f64, threshold: f64) -> BinaryImage {
    let (w, h) = (img.width(), img.height());
    let (gx, gy) = gradients(img, centre);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();
    let max = mag.iter().copied().fold(0.0, f64::max);
    let mut out = BinaryImage::empty(w, h);
    if max <= 0.0 {
        return out;
    }
    let mag_at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m <= 0.0 || m / max < threshold {
                continue;
            }
            let (dx, dy) = quantised_direction(gx[i], gy[i]);
            let (xi, yi) = (x as isize, y as isize);
            let behind = mag_at(xi - dx, yi - dy);
            let ahead = mag_at(xi + dx, yi + dy);
            // Asymmetric comparison so a two-pixel plateau keeps exactly one pixel.
            if m >= behind && m > ahead {
                out.set(x, y, true);
            }
        }
    }
    out
}

/// Unit step along the gradient, snapped to one of four axes.
fn quantised_direction(gx: f64, gy: f64) -> (isize, isize) {
    let mut angle = gy.atan2(gx).to_degrees();
    if angle < 0.0 {
        angle += 180.0;
    }
    if !(22.5..157.5).contains(&angle) {
        (1, 0)
    } else if angle < 67.5 {
        (1, 1)
    } else if angle < 112.5 {
        (0, 1)
    } else {
        (-1, 1)
    }
}

struct Kernel {
    side: usize,
    weights: Vec<f64>,
}

/// Zero-sum Laplacian-of-Gaussian kernel of side `2*ceil(3*sigma)+1`.
fn log_kernel(sigma: f64) -> Kernel {
    let half = (3.0 * sigma).ceil() as isize;
    let side = (2 * half + 1) as usize;
    let s2 = sigma * sigma;
    let mut gauss = Vec::with_capacity(side * side);
    let mut r2s = Vec::with_capacity(side * side);
    for y in -half..=half {
        for x in -half..=half {
            let r2 = (x * x + y * y) as f64;
            gauss.push((-r2 / (2.0 * s2)).exp());
            r2s.push(r2);
        }
    }
    let total: f64 = gauss.iter().sum();
    let mut weights: Vec<f64> = gauss
        .iter()
        .zip(&r2s)
        .map(|(g, r2)| g / total * (r2 - 2.0 * s2) / (s2 * s2))
        .collect();
    let mean = weights.iter().sum::<f64>() / weights.len() as f64;
    for w in &mut weights {
        *w -= mean;
    }
    Kernel { side, weights }
}

fn laplacian_kernel() -> Kernel {
    Kernel {
        side: 3,
        weights: vec![0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0],
    }
}

fn convolve_replicated(img: &GrayImage, k: &Kernel) -> Vec<f64> {
    let half = k.side / 2;
    let p = Padded::new(img, half);
    let mut out = Vec::with_capacity(img.width() * img.height());
    for y in 0..img.height() {
        for x in 0..img.width() {
            let mut acc = 0.0;
            for ky in 0..k.side {
                let row = (y + ky) * p.stride + x;
                let krow = &k.weights[ky * k.side..(ky + 1) * k.side];
                for (kv, pv) in krow.iter().zip(&p.data[row..row + k.side]) {
                    acc += kv * pv;
                }
            }
            out.push(if acc.abs() <= RESPONSE_FLOOR {
                0.0
            } else {
                acc
            });
        }
    }
    out
}

/// Marks sign changes between right/down neighbours. Of each crossing pair
/// the pixel closer to zero is marked (first pixel on ties).
fn zero_crossings(w: usize, h: usize, response: Vec<f64>, threshold: f64) -> BinaryImage {
    let mut out = BinaryImage::empty(w, h);
    let max = response.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max <= 0.0 {
        return out;
    }
    let min_slope = threshold * max;
    for y in 0..h {
        for x in 0..w {
            let a = response[y * w + x];
            let mut check = |qx: usize, qy: usize| {
                let b = response[qy * w + qx];
                let opposite = (a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0);
                if opposite && (a - b).abs() >= min_slope {
                    if a.abs() <= b.abs() {
                        out.set(x, y, true);
                    } else {
                        out.set(qx, qy, true);
                    }
                }
            };
            if x + 1 < w {
                check(x + 1, y);
            }
            if y + 1 < h {
                check(x, y + 1);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step8() -> GrayImage {
        let data = (0..64)
            .map(|i| if i % 8 >= 4 { 1.0 } else { 0.0 })
            .collect();
        GrayImage::new(8, 8, data).unwrap()
    }

    #[test]
    fn constant_image_has_no_edges() {
        for v in [0.0, 0.3, 0.7, 1.0] {
            let img = GrayImage::constant(12, 9, v).unwrap();
            for m in EdgeMethod::ALL {
                for t in [0.0, 0.02, 0.1] {
                    assert_eq!(
                        detect_edges(&img, m, t).unwrap().count_true(),
                        0,
                        "{m} {v} {t}"
                    );
                }
            }
        }
    }

    #[test]
    fn sobel_step_gives_single_column() {
        // Sobel x-response is 4 on both columns 3 and 4, zero elsewhere;
        // thinning keeps the first bright column.
        let mag = gradient_magnitude(&step8(), EdgeMethod::Sobel);
        for y in 0..8 {
            for x in 0..8 {
                let expected = if x == 3 || x == 4 { 4.0 } else { 0.0 };
                assert_eq!(mag[y * 8 + x], expected);
            }
        }
        let edges = detect_edges(&step8(), EdgeMethod::Sobel, 0.02).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                assert_eq!(edges.get(x, y), x == 4, "({x},{y})");
            }
        }
    }

    #[test]
    fn prewitt_step_gives_single_column() {
        let edges = detect_edges(&step8(), EdgeMethod::Prewitt, 0.1).unwrap();
        assert_eq!(edges.count_true(), 8);
        assert!((0..8).all(|y| edges.get(4, y)));
    }

    #[test]
    fn laplacian_methods_find_step() {
        let data = (0..16 * 16)
            .map(|i| if i % 16 >= 8 { 0.8 } else { 0.2 })
            .collect();
        let img = GrayImage::new(16, 16, data).unwrap();
        for m in [EdgeMethod::ZeroCross, EdgeMethod::Log] {
            let e = detect_edges(&img, m, 0.05).unwrap();
            assert_eq!(e.count_true(), 16, "{m}");
            assert!((0..16).all(|y| e.get(7, y) || e.get(8, y)));
        }
    }

    #[test]
    fn log_kernel_shape() {
        let k = log_kernel(LOG_SIGMA);
        assert_eq!(k.side, 13);
        assert!(k.weights.iter().sum::<f64>().abs() < 1e-12);
        // Negative at the centre, like the continuous operator.
        assert!(k.weights[6 * 13 + 6] < 0.0);
    }

    #[test]
    fn threshold_one_keeps_only_maxima() {
        let data = (0..100).map(|i| ((i * 37 % 17) as f64) / 16.0).collect();
        let img = GrayImage::new(10, 10, data).unwrap();
        for m in [EdgeMethod::Sobel, EdgeMethod::Prewitt] {
            let mag = gradient_magnitude(&img, m);
            let max = mag.iter().copied().fold(0.0, f64::max);
            let e = detect_edges(&img, m, 1.0).unwrap();
            for (i, &b) in e.data().iter().enumerate() {
                if b {
                    assert_eq!(mag[i], max);
                }
            }
        }
    }

    #[test]
    fn negative_threshold_rejected() {
        assert!(detect_edges(&step8(), EdgeMethod::Sobel, -0.1).is_err());
        assert!(detect_edges(&step8(), EdgeMethod::Sobel, f64::NAN).is_err());
    }

    #[test]
    fn method_names_parse() {
        for m in EdgeMethod::ALL {
            assert_eq!(m.name().parse::<EdgeMethod>().unwrap(), m);
        }
        assert_eq!(
            "Prewitt".parse::<EdgeMethod>().unwrap(),
            EdgeMethod::Prewitt
        );
        assert!("canny".parse::<EdgeMethod>().is_err());
    }

    proptest! {
        #[test]
        fn no_edges_where_gradient_vanishes(
            w in 1usize..=16, h in 1usize..=16,
            seed in proptest::collection::vec(0u8..4, 256),
            t in 0.0f64..0.2,
        ) {
            // Few distinct levels so flat patches are common.
            let data: Vec<f64> = seed[..w * h].iter().map(|&v| f64::from(v) / 3.0).collect();
            let img = GrayImage::new(w, h, data).unwrap();
            for m in [EdgeMethod::Sobel, EdgeMethod::Prewitt] {
                let mag = gradient_magnitude(&img, m);
                let e = detect_edges(&img, m, t).unwrap();
                for (i, &b) in e.data().iter().enumerate() {
                    prop_assert!(!b || mag[i] > 0.0);
                }
            }
            for m in EdgeMethod::ALL {
                let e = detect_edges(&img, m, t).unwrap();
                prop_assert_eq!((e.width(), e.height()), (w, h));
            }
        }
    }
}
