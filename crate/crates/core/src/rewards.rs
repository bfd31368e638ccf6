//! Reward stack: pluggable canvas-similarity scorer, background and
//! foreground rewards as score differences between successive canvases, the
//! GBP-weighted focus reward, and the weighted total.
//!
//! Every reward is a difference of scores, so rewards telescope over an
//! episode: the sum of per-step rewards equals the net score change.

use serde::{Deserialize, Serialize};

use crate::align::{zoom_canvas, zoom_map, BBox};
use crate::canvas::{check_dims, Canvas, CanvasDims, GbpMap, SegMap};
use crate::error::{Error, Result};

/// Canvas-similarity score: higher means more similar. Implementations must
/// be deterministic, thread-safe and bounded on `[0,1]`-valued inputs.
///
/// This is the substitution point for a learned critic; the built-in
/// implementations are training-free stand-ins that keep the
/// difference-of-scores reward structure intact.
pub trait SimilarityScorer: Send + Sync {
    fn score(&self, reference: &Canvas, candidate: &Canvas) -> Result<f64>;
}

/// Negative mean squared difference; the default scorer. Self-similarity is
/// maximal at 0 and the score lies in `[-1, 0]`.
#[derive(Debug, Default, Clone, Copy)]
pub struct NegL2Scorer;

impl SimilarityScorer for NegL2Scorer {
    fn score(&self, reference: &Canvas, candidate: &Canvas) -> Result<f64> {
        Ok(-reference.mse(candidate)?)
    }
}

/// Negative mean absolute difference on 4x box-downsampled images: a crude
/// perceptual stand-in that ignores pixel-level texture.
#[derive(Debug, Default, Clone, Copy)]
pub struct DownsampledAbsScorer;

fn box_downsample(img: &Canvas, factor: usize) -> Canvas {
    let dims = img.dims();
    let oh = dims.height.div_ceil(factor);
    let ow = dims.width.div_ceil(factor);
    let mut data = Vec::with_capacity(oh * ow * 3);
    for by in 0..oh {
        for bx in 0..ow {
            let r0 = by * factor;
            let c0 = bx * factor;
            let r1 = (r0 + factor).min(dims.height);
            let c1 = (c0 + factor).min(dims.width);
            let count = ((r1 - r0) * (c1 - c0)) as f64;
            for ch in 0..3 {
                let mut sum = 0.0;
                for row in r0..r1 {
                    for col in c0..c1 {
                        sum += img.get(row, col, ch);
                    }
                }
                data.push(sum / count);
            }
        }
    }
    // Downsampled buffers can drop below the 8x8 floor; bypass CanvasDims.
    Canvas::from_data(CanvasDims { height: oh, width: ow }, data)
        .expect("downsample buffer matches dims")
}

impl SimilarityScorer for DownsampledAbsScorer {
    fn score(&self, reference: &Canvas, candidate: &Canvas) -> Result<f64> {
        check_dims(reference.dims(), candidate.dims())?;
        let a = box_downsample(reference, 4);
        let b = box_downsample(candidate, 4);
        let sum: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs())
            .sum();
        Ok(-sum / a.data().len() as f64)
    }
}

/// Built-in scorer selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    #[default]
    NegL2,
    DownsampledAbs,
}

impl ScorerKind {
    pub fn build(&self) -> Box<dyn SimilarityScorer> {
        match self {
            ScorerKind::NegL2 => Box::new(NegL2Scorer),
            ScorerKind::DownsampledAbs => Box::new(DownsampledAbsScorer),
        }
    }
}

/// Convenience wrapper for the default scorer.
pub fn neg_l2_score(reference: &Canvas, candidate: &Canvas) -> Result<f64> {
    NegL2Scorer.score(reference, candidate)
}

/// Background reward: score change of the full canvas against the target.
pub fn background_reward(
    scorer: &dyn SimilarityScorer,
    target: &Canvas,
    canvas_before: &Canvas,
    canvas_after: &Canvas,
) -> Result<f64> {
    Ok(scorer.score(target, canvas_after)? - scorer.score(target, canvas_before)?)
}

/// Foreground reward without alignment: score change on mask-multiplied
/// images.
pub fn foreground_reward_unaligned(
    scorer: &dyn SimilarityScorer,
    target: &Canvas,
    canvas_before: &Canvas,
    canvas_after: &Canvas,
    seg: &SegMap,
) -> Result<f64> {
    let masked_target = target.masked(seg)?;
    let before = canvas_before.masked(seg)?;
    let after = canvas_after.masked(seg)?;
    Ok(scorer.score(&masked_target, &after)? - scorer.score(&masked_target, &before)?)
}

/// Foreground reward on the aligned (zoomed) views: all images and the mask
/// are zoomed onto the bounding box before masking and scoring.
pub fn foreground_reward_aligned(
    scorer: &dyn SimilarityScorer,
    target: &Canvas,
    canvas_before: &Canvas,
    canvas_after: &Canvas,
    seg: &SegMap,
    bbox: &BBox,
    out_dims: CanvasDims,
) -> Result<f64> {
    let z_seg = zoom_map(seg, bbox, out_dims)?;
    let z_target = zoom_canvas(target, bbox, out_dims)?.masked(&z_seg)?;
    let z_before = zoom_canvas(canvas_before, bbox, out_dims)?.masked(&z_seg)?;
    let z_after = zoom_canvas(canvas_after, bbox, out_dims)?.masked(&z_seg)?;
    Ok(scorer.score(&z_target, &z_after)? - scorer.score(&z_target, &z_before)?)
}

/// Normalization of the GBP distance denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GbpNorm {
    /// Frobenius norm of the map, as the distance formula is printed.
    #[default]
    Frobenius,
    /// Number of non-zero map pixels.
    Count,
}

/// GBP distance: squared Frobenius norm of the importance-weighted
/// target/canvas difference (the single-channel map broadcast over the three
/// channels), normalized by the map's Frobenius norm or non-zero count.
pub fn gbp_distance(
    zoomed_gbp: &GbpMap,
    zoomed_target: &Canvas,
    zoomed_canvas: &Canvas,
    norm: GbpNorm,
) -> Result<f64> {
    check_dims(zoomed_gbp.dims(), zoomed_target.dims())?;
    check_dims(zoomed_gbp.dims(), zoomed_canvas.dims())?;

    let mut numerator = 0.0;
    for (px, &g) in zoomed_gbp.data().iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        for ch in 0..3 {
            let diff = zoomed_target.data()[px * 3 + ch] - zoomed_canvas.data()[px * 3 + ch];
            let weighted = g * diff;
            numerator += weighted * weighted;
        }
    }

    let denominator = match norm {
        GbpNorm::Frobenius => zoomed_gbp.data().iter().map(|&g| g * g).sum::<f64>().sqrt(),
        GbpNorm::Count => zoomed_gbp.data().iter().filter(|&&g| g != 0.0).count() as f64,
    };
    if denominator == 0.0 {
        return Err(Error::ZeroGbpMap);
    }
    Ok(numerator / denominator)
}

/// Focus reward: decrease in GBP distance across the step.
pub fn focus_reward(distance_before: f64, distance_after: f64) -> f64 {
    distance_before - distance_after
}

/// Reward weights. Defaults match the bi-level total `r_b + 2 r_f + 10
/// r_focus`; `kappa` only applies in ablation mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub eta: f64,
    pub nu: f64,
    pub kappa: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            eta: 2.0,
            nu: 10.0,
            kappa: 0.0,
        }
    }
}

/// Total-reward composition mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// `total = background + eta * foreground + nu * focus`.
    #[default]
    BiLevel,
    /// `total = background + kappa * focus`, with the background slot holding
    /// the unmasked full-canvas score difference.
    Ablation,
}

impl RewardMode {
    /// Effective `(foreground, focus)` multipliers for the mode.
    pub fn effective_weights(&self, weights: &RewardWeights) -> (f64, f64) {
        match self {
            RewardMode::BiLevel => (weights.eta, weights.nu),
            RewardMode::Ablation => (0.0, weights.kappa),
        }
    }
}

/// Per-bundle reward components and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub background: f64,
    pub foreground: f64,
    pub focus: f64,
    pub total: f64,
}

impl RewardBreakdown {
    /// Recompute the total from the components under the active weights.
    pub fn recompute_total(&self, weights: &RewardWeights, mode: RewardMode) -> f64 {
        let (eta, nu) = mode.effective_weights(weights);
        self.background + eta * self.foreground + nu * self.focus
    }
}

/// Combine component rewards into a breakdown under the given weights and
/// mode.
pub fn total_reward(
    background: f64,
    foreground: f64,
    focus: f64,
    weights: &RewardWeights,
    mode: RewardMode,
) -> RewardBreakdown {
    let (eta, nu) = mode.effective_weights(weights);
    RewardBreakdown {
        background,
        foreground,
        focus,
        total: background + eta * foreground + nu * focus,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canvas::ScalarMap;

    fn dims() -> CanvasDims {
        CanvasDims::new(16, 16).unwrap()
    }

    #[test]
    fn neg_l2_examples() {
        let a = Canvas::filled(dims(), 0.0);
        let b = Canvas::filled(dims(), 1.0);
        let c = Canvas::filled(dims(), 0.5);
        assert_eq!(neg_l2_score(&a, &a).unwrap(), 0.0);
        assert_eq!(neg_l2_score(&a, &b).unwrap(), -1.0);
        assert_eq!(neg_l2_score(&a, &c).unwrap(), -0.25);
    }

    #[test]
    fn background_reward_examples() {
        let scorer = NegL2Scorer;
        let target = Canvas::filled(dims(), 1.0);
        let before = Canvas::filled(dims(), 0.0);
        let after = Canvas::filled(dims(), 0.5);
        assert_eq!(
            background_reward(&scorer, &target, &before, &before).unwrap(),
            0.0
        );
        assert_eq!(
            background_reward(&scorer, &target, &before, &after).unwrap(),
            0.75
        );
        assert!(background_reward(&scorer, &target, &before, &target).unwrap() > 0.0);
    }

    #[test]
    fn unaligned_foreground_degenerate_masks() {
        let scorer = NegL2Scorer;
        let target = Canvas::filled(dims(), 1.0);
        let before = Canvas::filled(dims(), 0.0);
        let after = Canvas::filled(dims(), 0.4);

        let zeros = ScalarMap::filled(dims(), 0.0);
        assert_eq!(
            foreground_reward_unaligned(&scorer, &target, &before, &after, &zeros).unwrap(),
            0.0
        );

        let ones = ScalarMap::filled(dims(), 1.0);
        assert_eq!(
            foreground_reward_unaligned(&scorer, &target, &before, &after, &ones).unwrap(),
            background_reward(&scorer, &target, &before, &after).unwrap()
        );
    }

    #[test]
    fn aligned_foreground_ignores_outside_changes() {
        let scorer = NegL2Scorer;
        let d = CanvasDims::new(64, 64).unwrap();
        let target = Canvas::filled(d, 0.8);
        let before = Canvas::filled(d, 0.1);
        let mut after = before.clone();
        // Change pixels strictly outside the box.
        for row in 0..8 {
            for col in 0..8 {
                for ch in 0..3 {
                    after.set(row, col, ch, 0.9);
                }
            }
        }
        let seg = ScalarMap::filled(d, 1.0);
        let bbox = BBox::new(16.0, 16.0, 32.0, 32.0, d).unwrap();
        let r =
            foreground_reward_aligned(&scorer, &target, &before, &after, &seg, &bbox, d).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn aligned_equals_background_for_full_box() {
        let scorer = NegL2Scorer;
        let d = CanvasDims::new(32, 32).unwrap();
        let mut target = Canvas::filled(d, 0.3);
        target.set(4, 20, 1, 0.9);
        let before = Canvas::filled(d, 0.0);
        let after = Canvas::filled(d, 0.25);
        let seg = ScalarMap::filled(d, 1.0);
        let full = BBox::full(d);
        let aligned =
            foreground_reward_aligned(&scorer, &target, &before, &after, &seg, &full, d).unwrap();
        let plain = background_reward(&scorer, &target, &before, &after).unwrap();
        assert!((aligned - plain).abs() < 1e-15);
    }

    #[test]
    fn gbp_distance_examples() {
        let d = dims();
        let target = Canvas::filled(d, 1.0);
        let canvas = Canvas::filled(d, 0.0);

        let mut single = ScalarMap::filled(d, 0.0);
        single.set(3, 3, 1.0);
        assert_eq!(
            gbp_distance(&single, &target, &canvas, GbpNorm::Frobenius).unwrap(),
            3.0
        );
        assert_eq!(
            gbp_distance(&single, &target, &target, GbpNorm::Frobenius).unwrap(),
            0.0
        );

        let zero = ScalarMap::filled(d, 0.0);
        assert!(matches!(
            gbp_distance(&zero, &target, &canvas, GbpNorm::Frobenius),
            Err(Error::ZeroGbpMap)
        ));
        // Count normalization: one non-zero pixel.
        assert_eq!(
            gbp_distance(&single, &target, &canvas, GbpNorm::Count).unwrap(),
            3.0
        );
    }

    #[test]
    fn gbp_distance_scales_linearly_with_map() {
        let d = dims();
        let mut target = Canvas::filled(d, 0.9);
        target.set(2, 2, 0, 0.1);
        let canvas = Canvas::filled(d, 0.3);
        let mut gbp = ScalarMap::filled(d, 0.0);
        for i in 0..6 {
            gbp.set(i, i, 0.5 + 0.05 * i as f64);
        }
        let base = gbp_distance(&gbp, &target, &canvas, GbpNorm::Frobenius).unwrap();
        let mut scaled = gbp.clone();
        for v in scaled.data_mut() {
            *v *= 0.5;
        }
        let half = gbp_distance(&scaled, &target, &canvas, GbpNorm::Frobenius).unwrap();
        assert!((half - 0.5 * base).abs() < 1e-12 * base.max(1.0));
    }

    #[test]
    fn focus_reward_examples() {
        assert_eq!(focus_reward(0.4, 0.4), 0.0);
        assert_eq!(focus_reward(3.0, 0.0), 3.0);
        assert_eq!(focus_reward(0.2, 0.5), -0.3);
    }

    #[test]
    fn total_reward_paper_arithmetic() {
        let w = RewardWeights::default();
        let b = total_reward(0.1, 0.05, 0.02, &w, RewardMode::BiLevel);
        assert!((b.total - 0.4).abs() < 1e-15);
        assert_eq!(b.recompute_total(&w, RewardMode::BiLevel), b.total);

        let zero = total_reward(0.0, 0.0, 0.0, &w, RewardMode::BiLevel);
        assert_eq!(zero.total, 0.0);

        let w = RewardWeights {
            kappa: 5.0,
            ..RewardWeights::default()
        };
        let a = total_reward(0.1, 0.0, 0.02, &w, RewardMode::Ablation);
        assert!((a.total - 0.2).abs() < 1e-15);
    }

    #[test]
    fn downsampled_scorer_is_maximal_on_self() {
        let mut img = Canvas::filled(dims(), 0.2);
        img.set(3, 7, 2, 0.9);
        img.set(11, 1, 0, 0.6);
        let other = Canvas::filled(dims(), 0.5);
        let scorer = DownsampledAbsScorer;
        let self_score = scorer.score(&img, &img).unwrap();
        assert_eq!(self_score, 0.0);
        assert!(scorer.score(&img, &other).unwrap() < self_score);
    }

    #[test]
    fn rewards_telescope_over_a_sequence() {
        let scorer = NegL2Scorer;
        let d = dims();
        let target = Canvas::filled(d, 0.77);
        let states: Vec<Canvas> = (0..6)
            .map(|i| Canvas::filled(d, 0.1 * i as f64))
            .collect();
        let mut sum = 0.0;
        for pair in states.windows(2) {
            sum += background_reward(&scorer, &target, &pair[0], &pair[1]).unwrap();
        }
        let net = scorer.score(&target, states.last().unwrap()).unwrap()
            - scorer.score(&target, &states[0]).unwrap();
        assert!((sum - net).abs() <= 1e-9 * net.abs().max(1.0));
    }
}
