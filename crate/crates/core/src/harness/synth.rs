//! Synthetic segmentation dataset: filled rectangles and discs on a flat
//! background, Gaussian noise, and exact one-pixel boundary ground truth.
//!
//! Within one dataset the number of shapes, the gray levels and the noise
//! level are fixed, so all images share the same statistics.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::pgm;
use crate::error::{Error, Result};
use crate::imaging::{BinaryImage, GrayImage};

const BACKGROUND: f64 = 0.2;
const SHAPE_LEVELS: [f64; 3] = [0.5, 0.7, 0.9];
/// Free pixels kept between shapes, and between shapes and the border.
const GAP: i64 = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthOptions {
    pub count: usize,
    pub size: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            count: 10,
            size: 64,
            noise_sigma: 0.05,
            seed: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Shape {
    Rect { x0: i64, y0: i64, w: i64, h: i64 },
    Disc { cx: i64, cy: i64, r: i64 },
}

impl Shape {
    fn contains(&self, x: i64, y: i64) -> bool {
        match *self {
            Shape::Rect { x0, y0, w, h } => x >= x0 && x < x0 + w && y >= y0 && y < y0 + h,
            Shape::Disc { cx, cy, r } => (x - cx).pow(2) + (y - cy).pow(2) <= r * r,
        }
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)`.
    fn bounds(&self) -> (i64, i64, i64, i64) {
        match *self {
            Shape::Rect { x0, y0, w, h } => (x0, y0, x0 + w - 1, y0 + h - 1),
            Shape::Disc { cx, cy, r } => (cx - r, cy - r, cx + r, cy + r),
        }
    }

    fn clear_of(&self, other: &Shape) -> bool {
        let (a0, b0, a1, b1) = self.bounds();
        let (c0, d0, c1, d1) = other.bounds();
        a1 + GAP < c0 || c1 + GAP < a0 || b1 + GAP < d0 || d1 + GAP < b0
    }
}

fn random_shape(rng: &mut ChaCha8Rng, size: i64) -> Shape {
    let lo = (size / 6).max(3);
    let hi = (size / 3).max(lo + 1);
    if rng.random_bool(0.5) {
        let w = rng.random_range(lo..=hi);
        let h = rng.random_range(lo..=hi);
        Shape::Rect {
            x0: rng.random_range(GAP..=size - GAP - w),
            y0: rng.random_range(GAP..=size - GAP - h),
            w,
            h,
        }
    } else {
        let r = rng.random_range(lo / 2..=hi / 2).max(2);
        Shape::Disc {
            cx: rng.random_range(GAP + r..=size - 1 - GAP - r),
            cy: rng.random_range(GAP + r..=size - 1 - GAP - r),
            r,
        }
    }
}

fn place_shapes(rng: &mut ChaCha8Rng, size: i64, n: usize) -> Vec<Shape> {
    'retry: loop {
        let mut shapes: Vec<Shape> = Vec::with_capacity(n);
        for _ in 0..n {
            let mut placed = false;
            for _ in 0..200 {
                let s = random_shape(rng, size);
                if shapes.iter().all(|o| s.clear_of(o)) {
                    shapes.push(s);
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'retry;
            }
        }
        return shapes;
    }
}

/// One noisy image with its boundary map.
#[derive(Clone, Debug)]
pub struct SynthImage {
    pub id: String,
    pub image: GrayImage,
    pub edges: BinaryImage,
}

/// Builds the dataset in memory. Images are already quantised to 8 bits,
/// so writing and reloading them is lossless.
pub fn synthesize(opts: &SynthOptions) -> Result<Vec<SynthImage>> {
    if opts.count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    if opts.size < 32 {
        return Err(Error::invalid(format!(
            "size must be >= 32, got {}",
            opts.size
        )));
    }
    if !(opts.noise_sigma >= 0.0 && opts.noise_sigma.is_finite()) {
        return Err(Error::invalid("noise sigma must be finite and >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n_shapes = rng.random_range(1..=SHAPE_LEVELS.len());
    let noise = Normal::new(0.0, opts.noise_sigma).expect("sigma checked above");
    let size = opts.size as i64;
    let digits = opts.count.saturating_sub(1).to_string().len().max(3);

    (0..opts.count)
        .map(|k| {
            let shapes = place_shapes(&mut rng, size, n_shapes);
            let mut clean = vec![BACKGROUND; opts.size * opts.size];
            let mut edges = BinaryImage::empty(opts.size, opts.size);
            for (shape, level) in shapes.iter().zip(SHAPE_LEVELS) {
                for y in 0..size {
                    for x in 0..size {
                        if !shape.contains(x, y) {
                            continue;
                        }
                        clean[(y * size + x) as usize] = level;
                        let boundary = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                            .iter()
                            .any(|(dx, dy)| !shape.contains(x + dx, y + dy));
                        if boundary {
                            edges.set(x as usize, y as usize, true);
                        }
                    }
                }
            }
            let pixels: Vec<u8> = clean
                .iter()
                .map(|&v| {
                    let v = if opts.noise_sigma > 0.0 {
                        v + noise.sample(&mut rng)
                    } else {
                        v
                    };
                    (v.clamp(0.0, 1.0) * 255.0).round() as u8
                })
                .collect();
            Ok(SynthImage {
                id: format!("img{k:0digits$}"),
                image: GrayImage::from_u8(opts.size, opts.size, &pixels)?,
                edges,
            })
        })
        .collect()
}

/// Writes `<id>.pgm` and `<id>.gt.pgm` for every synthetic image into `dir`
/// and returns the written paths.
pub fn generate_synthetic_dataset(opts: &SynthOptions, dir: &Path) -> Result<Vec<PathBuf>> {
    let images = synthesize(opts)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(2 * images.len());
    for img in &images {
        let path = dir.join(format!("{}.pgm", img.id));
        pgm::write(&path, opts.size, opts.size, &img.image.to_u8())?;
        written.push(path);
        let path = dir.join(format!("{}.gt.pgm", img.id));
        pgm::write(&path, opts.size, opts.size, &img.edges.to_u8())?;
        written.push(path);
    }
    Ok(written)
}
