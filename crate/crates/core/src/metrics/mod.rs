//! Contour segmentation quality: error measures against a ground-truth
//! edge map, the weighted error and reward, and the discretised state.
//!
//! A contour is one 8-connected component of a binary edge map and its
//! length is the component's pixel count.

mod distance;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{connected_components, BinaryImage, Connectivity};

pub use distance::{diagonal, distance_transform};

/// Default matching tolerance in pixels.
pub const DEFAULT_TOLERANCE: f64 = 2.0;

/// Number of state ids produced by [`discretize_state`], plus the start state.
pub const STATE_COUNT: usize = 513;
/// State before any action has been evaluated in an episode.
pub const START_STATE: usize = 512;

const BINS: usize = 8;
const RATIO_CAP: f64 = 2.0;

/// Reference edge map with its precomputed features.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub edges: BinaryImage,
    pub contour_count: usize,
    pub white_pixels: usize,
    pub longest_contour: usize,
    /// Euclidean distance to the nearest edge pixel; the image diagonal
    /// everywhere when the map is empty.
    pub distance_map: Vec<f64>,
}

pub fn build_ground_truth(edges: BinaryImage) -> GroundTruth {
    let cc = connected_components(&edges, Connectivity::Eight);
    GroundTruth {
        contour_count: cc.count(),
        white_pixels: edges.count_true(),
        longest_contour: cc.largest(),
        distance_map: distance_transform(&edges),
        edges,
    }
}

impl GroundTruth {
    pub fn diagonal(&self) -> f64 {
        diagonal(self.edges.width(), self.edges.height())
    }
}

fn check_dims(result: &BinaryImage, gt: &GroundTruth) -> Result<()> {
    if !result.same_dims(&gt.edges) {
        return Err(Error::contract(format!(
            "result is {}x{}, ground truth is {}x{}",
            result.width(),
            result.height(),
            gt.edges.width(),
            gt.edges.height()
        )));
    }
    Ok(())
}

/// Fraction of detected pixels farther than `tol` from every ground-truth pixel.
pub fn over_detection_error(result: &BinaryImage, gt: &GroundTruth, tol: f64) -> Result<f64> {
    check_dims(result, gt)?;
    // Nothing is near an empty ground truth, whatever the tolerance.
    let no_gt = gt.white_pixels == 0;
    let (mut detected, mut far) = (0usize, 0usize);
    for (&r, &d) in result.data().iter().zip(&gt.distance_map) {
        if r {
            detected += 1;
            if no_gt || d > tol {
                far += 1;
            }
        }
    }
    Ok(if detected == 0 {
        0.0
    } else {
        far as f64 / detected as f64
    })
}

/// Fraction of ground-truth pixels with no detected pixel within `tol`.
pub fn under_detection_error(result: &BinaryImage, gt: &GroundTruth, tol: f64) -> Result<f64> {
    check_dims(result, gt)?;
    if gt.white_pixels == 0 {
        return Ok(0.0);
    }
    if result.count_true() == 0 {
        return Ok(1.0);
    }
    let to_result = distance_transform(result);
    let missed = gt
        .edges
        .data()
        .iter()
        .zip(&to_result)
        .filter(|&(&g, &d)| g && d > tol)
        .count();
    Ok(missed as f64 / gt.white_pixels as f64)
}

/// Mean distance from detected pixels to the ground truth, as a fraction of
/// the image diagonal.
pub fn localization_error(result: &BinaryImage, gt: &GroundTruth) -> Result<f64> {
    check_dims(result, gt)?;
    let diag = gt.diagonal();
    let (mut n, mut sum) = (0usize, 0.0);
    for (&r, &d) in result.data().iter().zip(&gt.distance_map) {
        if r {
            n += 1;
            sum += d.min(diag) / diag;
        }
    }
    Ok(match (n, gt.white_pixels) {
        (0, 0) => 0.0,
        (0, _) => 1.0,
        _ => sum / n as f64,
    })
}

/// Non-negative weights of the three error measures, summing to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights(pub [f64; 3]);

impl Default for Weights {
    fn default() -> Self {
        Weights([1.0 / 3.0; 3])
    }
}

impl Weights {
    pub fn new(w: [f64; 3]) -> Result<Self> {
        let weights = Weights(w);
        weights.validate()?;
        Ok(weights)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid(format!(
                "weights must be finite and >= 0, got {:?}",
                self.0
            )));
        }
        let sum: f64 = self.0.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("weights sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Ratios of result features to ground-truth features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFeatures {
    /// Contour count ratio.
    pub chi1: f64,
    /// White pixel ratio.
    pub chi2: f64,
    /// Longest contour length ratio.
    pub chi3: f64,
}

/// `computed / reference`, with an empty reference giving 1 for an empty
/// result and the ratio cap otherwise.
fn ratio(computed: usize, reference: usize) -> f64 {
    match (computed, reference) {
        (0, 0) => 1.0,
        (_, 0) => RATIO_CAP,
        (c, r) => c as f64 / r as f64,
    }
}

pub fn state_features(result: &BinaryImage, gt: &GroundTruth) -> Result<StateFeatures> {
    check_dims(result, gt)?;
    let cc = connected_components(result, Connectivity::Eight);
    Ok(StateFeatures {
        chi1: ratio(cc.count(), gt.contour_count),
        chi2: ratio(result.count_true(), gt.white_pixels),
        chi3: ratio(cc.largest(), gt.longest_contour),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub d_over: f64,
    pub d_under: f64,
    pub d_loc: f64,
    pub weights: Weights,
    pub d_total: f64,
    pub reward: f64,
    pub features: StateFeatures,
}

/// Weighted error `w1*D1 + w2*D2 + w3*D3` and reward `1 - D`.
pub fn combine(d: [f64; 3], weights: Weights) -> (f64, f64) {
    let total = weights.0.iter().zip(&d).map(|(w, e)| w * e).sum::<f64>();
    let total = total.clamp(0.0, 1.0);
    (total, 1.0 - total)
}

pub fn evaluate(
    result: &BinaryImage,
    gt: &GroundTruth,
    weights: Weights,
    tol: f64,
) -> Result<EvalReport> {
    weights.validate()?;
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::invalid(format!("tolerance must be >= 0, got {tol}")));
    }
    let d_over = over_detection_error(result, gt, tol)?;
    let d_under = under_detection_error(result, gt, tol)?;
    let d_loc = localization_error(result, gt)?;
    let (d_total, reward) = combine([d_over, d_under, d_loc], weights);
    Ok(EvalReport {
        d_over,
        d_under,
        d_loc,
        weights,
        d_total,
        reward,
        features: state_features(result, gt)?,
    })
}

/// Bins each ratio (clamped to `[0, 2]`) into eight bins of width 0.25 and
/// encodes the three bin indices in base 8, giving ids `0..512`.
pub fn discretize_state(features: &StateFeatures) -> usize {
    let bin = |v: f64| {
        let v = if v.is_nan() {
            0.0
        } else {
            v.clamp(0.0, RATIO_CAP)
        };
        ((v / (RATIO_CAP / BINS as f64)) as usize).min(BINS - 1)
    };
    (bin(features.chi1) * BINS + bin(features.chi2)) * BINS + bin(features.chi3)
}
