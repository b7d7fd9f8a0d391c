//! Windowed smoothing filters. Every window reads zeros outside the image.

use super::{check_window, GrayImage};
use crate::error::{Error, Result};

/// Rank used by the order-statistic pre-processing operator for a window
/// side: the window maximum.
pub fn ordfilt_rank(size: usize) -> usize {
    size * size
}

/// Collects the zero-padded `size`×`size` window centred on `(x, y)` into `buf`.
fn gather_window(img: &GrayImage, x: usize, y: usize, size: usize, buf: &mut Vec<f64>) {
    let half = (size / 2) as isize;
    buf.clear();
    for dy in -half..=half {
        for dx in -half..=half {
            buf.push(img.get_padded(x as isize + dx, y as isize + dy));
        }
    }
}

fn rank_filter(img: &GrayImage, size: usize, order: usize) -> GrayImage {
    let mut window = Vec::with_capacity(size * size);
    let mut out = Vec::with_capacity(img.data().len());
    for y in 0..img.height() {
        for x in 0..img.width() {
            gather_window(img, x, y, size, &mut window);
            let (_, v, _) = window.select_nth_unstable_by(order - 1, f64::total_cmp);
            out.push(*v);
        }
    }
    GrayImage::from_clamped(img.width(), img.height(), out)
}

/// Median of the zero-padded `size`×`size` window around each pixel.
pub fn median_filter(img: &GrayImage, size: usize) -> Result<GrayImage> {
    check_window(size)?;
    Ok(rank_filter(img, size, (size * size).div_ceil(2)))
}

/// `order`-th smallest value (1-based) of the zero-padded window around each pixel.
pub fn order_statistic_filter(img: &GrayImage, size: usize, order: usize) -> Result<GrayImage> {
    check_window(size)?;
    if order == 0 || order > size * size {
        return Err(Error::invalid(format!(
            "rank {order} outside 1..={} for a {size}x{size} window",
            size * size
        )));
    }
    Ok(rank_filter(img, size, order))
}

/// Adaptive local Wiener filter.
///
/// Local mean and variance come from the zero-padded window; the noise
/// power is the mean of all local variances. Each pixel is pulled toward
/// its local mean by `max(var - noise, 0) / max(var, noise)`.
pub fn wiener_filter(img: &GrayImage, size: usize) -> Result<GrayImage> {
    check_window(size)?;
    let (w, h) = (img.width(), img.height());
    let n = (size * size) as f64;
    let half = (size / 2) as isize;

    let mut means = Vec::with_capacity(w * h);
    let mut vars = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for dy in -half..=half {
                for dx in -half..=half {
                    let v = img.get_padded(x + dx, y + dy);
                    sum += v;
                    sum_sq += v * v;
                }
            }
            let mean = sum / n;
            means.push(mean);
            vars.push((sum_sq / n - mean * mean).max(0.0));
        }
    }
    let noise = vars.iter().sum::<f64>() / vars.len() as f64;

    let out = img
        .data()
        .iter()
        .zip(means.iter().zip(&vars))
        .map(|(&v, (&mean, &var))| {
            let denom = var.max(noise);
            let gain = if denom > 0.0 {
                (var - noise).max(0.0) / denom
            } else {
                0.0
            };
            mean + gain * (v - mean)
        })
        .collect();
    Ok(GrayImage::from_clamped(w, h, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Builds the padded window explicitly and fully sorts it.
    fn sort_oracle(img: &GrayImage, size: usize, order: usize) -> Vec<f64> {
        let (w, h) = (img.width() as i64, img.height() as i64);
        let r = (size / 2) as i64;
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let mut win = Vec::new();
                for yy in y - r..=y + r {
                    for xx in x - r..=x + r {
                        let inside = (0..w).contains(&xx) && (0..h).contains(&yy);
                        win.push(if inside {
                            img.data()[(yy * w + xx) as usize]
                        } else {
                            0.0
                        });
                    }
                }
                win.sort_by(|a, b| a.partial_cmp(b).unwrap());
                out.push(win[order - 1]);
            }
        }
        out
    }

    fn grid3() -> GrayImage {
        GrayImage::from_rows(&[&[0.1, 0.2, 0.3], &[0.4, 1.0, 0.6], &[0.7, 0.8, 0.9]]).unwrap()
    }

    #[test]
    fn median_constant_with_padding() {
        let img = GrayImage::constant(3, 3, 0.5).unwrap();
        let out = median_filter(&img, 3).unwrap();
        assert_eq!(out.get(1, 1), 0.5);
        for (x, y) in [(0, 0), (2, 0), (0, 2), (2, 2)] {
            assert_eq!(out.get(x, y), 0.0);
        }
    }

    #[test]
    fn median_center_of_full_window() {
        let out = median_filter(&grid3(), 3).unwrap();
        assert_eq!(out.get(1, 1), sort_oracle(&grid3(), 3, 5)[4]);
        assert_eq!(out.get(1, 1), 0.6);
    }

    #[test]
    fn median_of_zeros() {
        let img = GrayImage::constant(7, 4, 0.0).unwrap();
        assert!(median_filter(&img, 5)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn window_size_checked() {
        let img = grid3();
        assert!(median_filter(&img, 4).is_err());
        assert!(median_filter(&img, 1).is_err());
        assert!(wiener_filter(&img, 2).is_err());
        assert!(order_statistic_filter(&img, 3, 0).is_err());
        assert!(order_statistic_filter(&img, 3, 10).is_err());
    }

    #[test]
    fn order_statistic_extremes() {
        let half = GrayImage::constant(5, 5, 0.5).unwrap();
        let max = order_statistic_filter(&half, 3, 9).unwrap();
        assert_eq!(max.get(2, 2), 0.5);
        let min = order_statistic_filter(&half, 3, 1).unwrap();
        for y in 0..5 {
            for x in 0..5 {
                let border = x == 0 || y == 0 || x == 4 || y == 4;
                assert_eq!(min.get(x, y), if border { 0.0 } else { 0.5 });
            }
        }
        let img =
            GrayImage::from_rows(&[&[0.1, 0.2, 0.3], &[0.4, 0.5, 0.6], &[0.7, 0.8, 0.9]]).unwrap();
        assert_eq!(order_statistic_filter(&img, 3, 9).unwrap().get(1, 1), 0.9);
    }

    #[test]
    fn wiener_constant_interior_stays_constant() {
        let img = GrayImage::constant(9, 9, 0.4).unwrap();
        let out = wiener_filter(&img, 3).unwrap();
        for y in 1..8 {
            for x in 1..8 {
                assert!((out.get(x, y) - 0.4).abs() < 1e-12);
            }
        }
    }

    /// Direct evaluation of the adaptive gain formula, pixel by pixel.
    fn wiener_oracle(img: &GrayImage, size: usize) -> Vec<f64> {
        let (w, h) = (img.width() as i64, img.height() as i64);
        let r = (size / 2) as i64;
        let stats: Vec<(f64, f64)> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| {
                let mut vals = Vec::new();
                for yy in y - r..=y + r {
                    for xx in x - r..=x + r {
                        let inside = (0..w).contains(&xx) && (0..h).contains(&yy);
                        vals.push(if inside {
                            img.data()[(yy * w + xx) as usize]
                        } else {
                            0.0
                        });
                    }
                }
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                (mean, var)
            })
            .collect();
        let noise = stats.iter().map(|s| s.1).sum::<f64>() / stats.len() as f64;
        stats
            .iter()
            .zip(img.data())
            .map(|(&(m, v), &x)| {
                let g = if v.max(noise) > 0.0 {
                    (v - noise).max(0.0) / v.max(noise)
                } else {
                    0.0
                };
                (m + g * (x - m)).clamp(0.0, 1.0)
            })
            .collect()
    }

    #[test]
    fn wiener_attenuates_isolated_spike() {
        let mut data = vec![0.0; 25];
        data[12] = 1.0;
        let img = GrayImage::new(5, 5, data).unwrap();
        let out = wiener_filter(&img, 3).unwrap();
        let oracle = wiener_oracle(&img, 3);
        // mean 1/9, var 8/81, noise 72/2025 -> gain 0.64 -> 1/9 + 0.64 * 8/9
        assert!((oracle[12] - 0.68).abs() < 1e-12);
        assert!((out.get(2, 2) - 0.68).abs() < 1e-12);
        for (a, b) in out.data().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn wiener_dominant_noise_gives_local_mean() {
        // Every pixel shares the same local variance, so the gain is zero.
        let img = GrayImage::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let out = wiener_filter(&img, 3).unwrap();
        for &v in out.data() {
            assert!((v - 2.0 / 9.0).abs() < 1e-12);
        }
    }

    fn small_image() -> impl Strategy<Value = GrayImage> {
        (1usize..=16, 1usize..=16).prop_flat_map(|(w, h)| {
            proptest::collection::vec(0u8..=255, w * h)
                .prop_map(move |px| GrayImage::from_u8(w, h, &px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn rank_filters_match_sort_oracle(img in small_image(), big in any::<bool>(), order_seed in any::<usize>()) {
            let size = if big { 5 } else { 3 };
            let order = order_seed % (size * size) + 1;
            let ranked = order_statistic_filter(&img, size, order).unwrap();
            prop_assert_eq!(ranked.data(), &sort_oracle(&img, size, order)[..]);
            let median = median_filter(&img, size).unwrap();
            prop_assert_eq!(median.data(), &sort_oracle(&img, size, (size * size).div_ceil(2))[..]);
        }

        #[test]
        fn median3_is_rank5(img in small_image()) {
            prop_assert_eq!(median_filter(&img, 3).unwrap(), order_statistic_filter(&img, 3, 5).unwrap());
        }

        #[test]
        fn wiener_matches_oracle(img in small_image()) {
            let out = wiener_filter(&img, 3).unwrap();
            for (a, b) in out.data().iter().zip(wiener_oracle(&img, 3)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
