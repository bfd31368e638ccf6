//! Episode engine: painting state, per-bundle derivative-free stroke search,
//! and the multi-instance foreground scheduler.
//!
//! Each timestep searches for one action bundle with a cross-entropy method
//! over the flattened stroke vector, scoring candidates by the weighted total
//! reward. Bundles whose best result would lower either the total reward or
//! the plain canvas similarity are replaced by a zero-opacity no-op, which
//! makes the per-step canvas score non-decreasing over an episode.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{bbox_from_mask, zoom_canvas, zoom_map, BBox};
use crate::canvas::{Canvas, CanvasDims, GbpMap, ScalarMap, SegMap};
use crate::compositor::{apply_bundle_into, ActionBundle, StrokeRole};
use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::rewards::{total_reward, RewardBreakdown, RewardMode, RewardWeights, SimilarityScorer};
use crate::stroke::STROKE_DIM;

/// Everything a painting episode consumes: the target image with its semantic
/// annotations.
#[derive(Debug, Clone)]
pub struct SceneData {
    pub target: Canvas,
    pub seg: SegMap,
    pub gbp: GbpMap,
    pub bbox: BBox,
    /// Per-instance masks; empty for single-instance scenes.
    pub instances: Vec<SegMap>,
}

impl SceneData {
    /// Minimal scene: full-image mask, uniform importance, full-image box.
    pub fn from_target(target: Canvas) -> Self {
        let dims = target.dims();
        Self {
            target,
            seg: SegMap::filled(dims, 1.0),
            gbp: GbpMap::filled(dims, 1.0),
            bbox: BBox::full(dims),
            instances: Vec::new(),
        }
    }
}

/// The painting MDP state tuple: evolving canvas, target, semantic map, GBP
/// map and timestep, plus the instance masks and reward weights carried
/// through the episode.
#[derive(Debug, Clone)]
pub struct EpisodeState {
    pub canvas: Canvas,
    pub target: Canvas,
    pub seg: SegMap,
    pub gbp: GbpMap,
    pub bbox: BBox,
    pub instances: Vec<SegMap>,
    pub step: usize,
    pub weights: RewardWeights,
}

impl EpisodeState {
    pub fn new(scene: SceneData, cfg: &EngineConfig) -> Result<Self> {
        let dims = scene.target.dims();
        crate::canvas::check_dims(dims, scene.seg.dims())?;
        crate::canvas::check_dims(dims, scene.gbp.dims())?;
        scene.bbox.validate_for(dims)?;
        for mask in &scene.instances {
            crate::canvas::check_dims(dims, mask.dims())?;
        }
        Ok(Self {
            canvas: Canvas::filled(dims, cfg.init_canvas),
            target: scene.target,
            seg: scene.seg,
            gbp: scene.gbp,
            bbox: scene.bbox,
            instances: scene.instances,
            step: 0,
            weights: cfg.weights,
        })
    }

    pub fn dims(&self) -> CanvasDims {
        self.target.dims()
    }
}

/// Cross-entropy search settings and the episode length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub population: usize,
    pub elite_frac: f64,
    pub generations: usize,
    pub init_sigma: f64,
    pub seed: u64,
    /// Episode length in bundles.
    pub episode_len: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            population: 64,
            elite_frac: 0.125,
            generations: 30,
            init_sigma: 0.25,
            seed: 0,
            episode_len: 40,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 {
            return Err(Error::InvalidConfig(
                "optimizer.population must be at least 4".into(),
            ));
        }
        if !(self.elite_frac > 0.0 && self.elite_frac < 1.0) {
            return Err(Error::InvalidConfig(
                "optimizer.elite_frac must lie in (0,1)".into(),
            ));
        }
        if self.generations < 1 {
            return Err(Error::InvalidConfig(
                "optimizer.generations must be at least 1".into(),
            ));
        }
        if !(self.init_sigma > 0.0) {
            return Err(Error::InvalidConfig(
                "optimizer.init_sigma must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn elite_count(&self) -> usize {
        ((self.population as f64 * self.elite_frac) as usize).max(1)
    }
}

/// Pick the foreground instance whose masked region currently differs most
/// from the target: `argmax_i || S_i * (I - C) ||_F`, ties broken by lowest
/// index.
pub fn select_instance(target: &Canvas, canvas: &Canvas, masks: &[SegMap]) -> Result<usize> {
    if masks.is_empty() {
        return Err(Error::InvalidInput("empty instance mask list".into()));
    }
    crate::canvas::check_dims(target.dims(), canvas.dims())?;
    let mut best = 0usize;
    let mut best_sq = -1.0f64;
    for (idx, mask) in masks.iter().enumerate() {
        crate::canvas::check_dims(target.dims(), mask.dims())?;
        let mut sq = 0.0;
        for (px, &m) in mask.data().iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for ch in 0..3 {
                let diff = target.data()[px * 3 + ch] - canvas.data()[px * 3 + ch];
                let weighted = m * diff;
                sq += weighted * weighted;
            }
        }
        if sq > best_sq {
            best_sq = sq;
            best = idx;
        }
    }
    Ok(best)
}

// Cached per-step context: everything about the pre-bundle canvas that every
// candidate evaluation shares.
struct StepEval<'a> {
    cfg: &'a EngineConfig,
    scorer: &'a dyn SimilarityScorer,
    target: &'a Canvas,
    canvas: &'a Canvas,
    seg: &'a SegMap,
    weights: RewardWeights,
    out_dims: CanvasDims,
    bbox: BBox,
    score_full_before: f64,
    z_seg: ScalarMap,
    z_target: Canvas,
    z_target_masked: Canvas,
    z_gbp: GbpMap,
    gbp_denominator: f64,
    score_fg_before: f64,
    gbp_before: f64,
}

impl<'a> StepEval<'a> {
    fn new(
        cfg: &'a EngineConfig,
        scorer: &'a dyn SimilarityScorer,
        target: &'a Canvas,
        canvas: &'a Canvas,
        seg: &'a SegMap,
        gbp: &'a GbpMap,
        bbox: BBox,
        weights: RewardWeights,
    ) -> Result<Self> {
        let out_dims = cfg.zoom_dims(target.dims());
        let z_seg = zoom_map(seg, &bbox, out_dims)?;
        let z_target = zoom_canvas(target, &bbox, out_dims)?;
        let z_target_masked = z_target.masked(&z_seg)?;
        let z_gbp = zoom_map(gbp, &bbox, out_dims)?;
        // The zoomed importance map can lose all support when the box misses
        // it; the focus term is simply inert then.
        let gbp_denominator = match cfg.gbp_norm {
            crate::rewards::GbpNorm::Frobenius => {
                z_gbp.data().iter().map(|&g| g * g).sum::<f64>().sqrt()
            }
            crate::rewards::GbpNorm::Count => {
                z_gbp.data().iter().filter(|&&g| g != 0.0).count() as f64
            }
        };
        let z_canvas = zoom_canvas(canvas, &bbox, out_dims)?;
        let score_full_before = scorer.score(target, canvas)?;
        let score_fg_before = if cfg.reward_mode == RewardMode::BiLevel {
            scorer.score(&z_target_masked, &z_canvas.masked(&z_seg)?)?
        } else {
            0.0
        };
        let gbp_before = gbp_numerator(&z_gbp, &z_target, &z_canvas);
        Ok(Self {
            cfg,
            scorer,
            target,
            canvas,
            seg,
            weights,
            out_dims,
            bbox,
            score_full_before,
            z_seg,
            z_target,
            z_target_masked,
            z_gbp,
            gbp_denominator,
            score_fg_before,
            gbp_before,
        })
    }

    fn gbp_distance_of(&self, numerator: f64) -> f64 {
        if self.gbp_denominator == 0.0 {
            0.0
        } else {
            numerator / self.gbp_denominator
        }
    }

    /// Apply a bundle to a copy of the canvas and compute the reward
    /// breakdown of the step.
    fn evaluate(&self, bundle: &ActionBundle) -> Result<(RewardBreakdown, Canvas)> {
        let mut next = self.canvas.clone();
        apply_bundle_into(&mut next, bundle, self.seg, &self.cfg.render, &self.cfg.compositor)?;

        let background = self.scorer.score(self.target, &next)? - self.score_full_before;

        let z_next = zoom_canvas(&next, &self.bbox, self.out_dims)?;
        let foreground = if self.cfg.reward_mode == RewardMode::BiLevel {
            self.scorer.score(&self.z_target_masked, &z_next.masked(&self.z_seg)?)?
                - self.score_fg_before
        } else {
            0.0
        };

        let gbp_after = gbp_numerator(&self.z_gbp, &self.z_target, &z_next);
        let focus = self.gbp_distance_of(self.gbp_before) - self.gbp_distance_of(gbp_after);

        let breakdown =
            total_reward(background, foreground, focus, &self.weights, self.cfg.reward_mode);
        Ok((breakdown, next))
    }
}

fn gbp_numerator(gbp: &GbpMap, target: &Canvas, canvas: &Canvas) -> f64 {
    let mut sum = 0.0;
    for (px, &g) in gbp.data().iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        for ch in 0..3 {
            let diff = target.data()[px * 3 + ch] - canvas.data()[px * 3 + ch];
            let weighted = g * diff;
            sum += weighted * weighted;
        }
    }
    sum
}

// A bundle whose best achievable outcome regresses the canvas gets a heavy
// fitness penalty so the search steers back toward feasible strokes.
const INFEASIBLE_PENALTY: f64 = 1e9;

fn fitness_of(breakdown: &RewardBreakdown) -> f64 {
    if breakdown.background < 0.0 {
        breakdown.total - INFEASIBLE_PENALTY
    } else {
        breakdown.total
    }
}

struct SearchOutcome {
    bundle: ActionBundle,
    reward: RewardBreakdown,
    canvas: Option<Canvas>,
}

fn cem_search(
    eval: &StepEval<'_>,
    cfg: &EngineConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SearchOutcome> {
    let shape = cfg.bundle;
    let opt = &cfg.optimizer;
    opt.validate()?;
    shape.validate()?;

    let dim = shape.total() * STROKE_DIM;
    let mut mean = vec![0.5f64; dim];
    let mut sigma = vec![opt.init_sigma; dim];
    let elite_count = opt.elite_count();

    let mut best: Option<(f64, RewardBreakdown, Vec<f64>, Canvas)> = None;

    for _gen in 0..opt.generations {
        let candidates: Vec<Vec<f64>> = (0..opt.population)
            .map(|_| {
                (0..dim)
                    .map(|d| {
                        let z: f64 = rng.sample(StandardNormal);
                        (mean[d] + sigma[d] * z).clamp(0.0, 1.0)
                    })
                    .collect()
            })
            .collect();

        let evals: Vec<Result<(RewardBreakdown, Canvas)>> = candidates
            .par_iter()
            .map(|flat| {
                let bundle = ActionBundle::from_flat(flat, shape)?;
                eval.evaluate(&bundle)
            })
            .collect();

        let mut scored: Vec<(usize, f64)> = Vec::with_capacity(opt.population);
        for (idx, e) in evals.iter().enumerate() {
            let (breakdown, _) = e.as_ref().map_err(clone_error)?;
            scored.push((idx, fitness_of(breakdown)));
        }
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal).then(a.0.cmp(&b.0)));

        let (top_idx, top_fit) = scored[0];
        if best.as_ref().map_or(true, |(f, ..)| top_fit > *f) {
            let (breakdown, canvas) = evals[top_idx].as_ref().map_err(clone_error)?;
            best = Some((
                top_fit,
                *breakdown,
                candidates[top_idx].clone(),
                canvas.clone(),
            ));
        }

        let elites: Vec<&Vec<f64>> = scored[..elite_count]
            .iter()
            .map(|&(idx, _)| &candidates[idx])
            .collect();
        for d in 0..dim {
            let m = elites.iter().map(|c| c[d]).sum::<f64>() / elite_count as f64;
            let var = elites
                .iter()
                .map(|c| (c[d] - m) * (c[d] - m))
                .sum::<f64>()
                / elite_count as f64;
            mean[d] = m;
            sigma[d] = var.sqrt().max(1e-6);
        }
    }

    let (best_fit, reward, flat, canvas) = best.expect("generations >= 1");
    if best_fit >= 0.0 {
        Ok(SearchOutcome {
            bundle: ActionBundle::from_flat(&flat, shape)?,
            reward,
            canvas: Some(canvas),
        })
    } else {
        Ok(SearchOutcome {
            bundle: ActionBundle::no_op(shape),
            reward: RewardBreakdown::default(),
            canvas: None,
        })
    }
}

fn clone_error(e: &Error) -> Error {
    Error::InvalidInput(format!("candidate evaluation failed: {e}"))
}

/// Search for the best action bundle from the current state.
///
/// Runs a cross-entropy method over the flattened `13 * K` bundle vector:
/// candidates are drawn from an axis-aligned Gaussian (initial mean 0.5,
/// sigma `init_sigma`), clipped to `[0,1]`, scored by the weighted total
/// reward of the resulting canvas, and the elite fraction refits the
/// distribution each generation. If the best candidate's total reward is
/// negative, or its canvas-similarity change is, a zero-opacity no-op bundle
/// with zero reward is returned instead.
pub fn optimize_bundle(
    state: &EpisodeState,
    cfg: &EngineConfig,
    scorer: &dyn SimilarityScorer,
) -> Result<(ActionBundle, RewardBreakdown)> {
    let eval = StepEval::new(
        cfg,
        scorer,
        &state.target,
        &state.canvas,
        &state.seg,
        &state.gbp,
        state.bbox,
        state.weights,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.optimizer.seed);
    let outcome = cem_search(&eval, cfg, &mut rng)?;
    Ok((outcome.bundle, outcome.reward))
}

/// One applied stroke in the episode log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrokeRecord {
    pub step: usize,
    pub role: StrokeRole,
    pub instance: usize,
    pub params: [f64; STROKE_DIM],
    /// Component rewards of the bundle this stroke belonged to.
    pub reward: RewardBreakdown,
}

/// Per-bundle reward trace entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BundleTrace {
    pub step: usize,
    pub instance: usize,
    #[serde(flatten)]
    pub reward: RewardBreakdown,
}

/// A running painting episode. Steps either search for bundles internally
/// ([`Episode::step_auto`]) or apply externally supplied bundles
/// ([`Episode::step_external`]); both advance the same state and log.
pub struct Episode {
    state: EpisodeState,
    cfg: EngineConfig,
    scorer: Box<dyn SimilarityScorer>,
    rng: ChaCha8Rng,
    instance_bboxes: Vec<BBox>,
    strokes: Vec<StrokeRecord>,
    trace: Vec<BundleTrace>,
}

impl Episode {
    pub fn new(scene: SceneData, cfg: EngineConfig) -> Result<Self> {
        cfg.validate()?;
        let instance_bboxes = scene
            .instances
            .iter()
            .map(|mask| bbox_from_mask(mask, cfg.mask_threshold, cfg.pad_frac))
            .collect::<Result<Vec<_>>>()?;
        let scorer = cfg.scorer.build();
        let rng = ChaCha8Rng::seed_from_u64(cfg.optimizer.seed);
        let state = EpisodeState::new(scene, &cfg)?;
        Ok(Self {
            state,
            cfg,
            scorer,
            rng,
            instance_bboxes,
            strokes: Vec::new(),
            trace: Vec::new(),
        })
    }

    pub fn state(&self) -> &EpisodeState {
        &self.state
    }

    pub fn canvas(&self) -> &Canvas {
        &self.state.canvas
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn step_count(&self) -> usize {
        self.state.step
    }

    pub fn is_done(&self) -> bool {
        self.state.step >= self.cfg.optimizer.episode_len
    }

    pub fn strokes(&self) -> &[StrokeRecord] {
        &self.strokes
    }

    pub fn trace(&self) -> &[BundleTrace] {
        &self.trace
    }

    /// Instance scheduled for the next bundle, with its mask and box.
    fn current_selection(&self) -> Result<(usize, SegMap, BBox)> {
        if self.state.instances.is_empty() {
            Ok((0, self.state.seg.clone(), self.state.bbox))
        } else {
            let u = select_instance(&self.state.target, &self.state.canvas, &self.state.instances)?;
            Ok((u, self.state.instances[u].clone(), self.instance_bboxes[u]))
        }
    }

    fn log_bundle(&mut self, bundle: &ActionBundle, reward: RewardBreakdown, instance: usize) {
        let step = self.state.step;
        for (role, stroke) in bundle.iter_ordered() {
            self.strokes.push(StrokeRecord {
                step,
                role,
                instance,
                params: stroke.as_array(),
                reward,
            });
        }
        self.trace.push(BundleTrace {
            step,
            instance,
            reward,
        });
    }

    fn ensure_running(&self) -> Result<()> {
        if self.is_done() {
            return Err(Error::InvalidInput(format!(
                "episode is done after {} bundles",
                self.state.step
            )));
        }
        Ok(())
    }

    fn advance(
        &mut self,
        bundle: &ActionBundle,
        reward: RewardBreakdown,
        instance: usize,
        seg: &SegMap,
        next_canvas: Option<Canvas>,
    ) -> Result<()> {
        match next_canvas {
            Some(next) => self.state.canvas = next,
            None => apply_bundle_into(
                &mut self.state.canvas,
                bundle,
                seg,
                &self.cfg.render,
                &self.cfg.compositor,
            )?,
        }
        self.log_bundle(bundle, reward, instance);
        self.state.step += 1;
        Ok(())
    }

    /// Run the internal bundle search and apply the outcome.
    pub fn step_auto(&mut self) -> Result<BundleTrace> {
        let (instance, seg, bbox) = self.current_selection()?;
        let eval = StepEval::new(
            &self.cfg,
            self.scorer.as_ref(),
            &self.state.target,
            &self.state.canvas,
            &seg,
            &self.state.gbp,
            bbox,
            self.state.weights,
        )?;
        let outcome = cem_search(&eval, &self.cfg, &mut self.rng)?;
        let SearchOutcome {
            bundle,
            reward,
            canvas,
        } = outcome;
        self.advance(&bundle, reward, instance, &seg, canvas)?;
        Ok(*self.trace.last().expect("bundle just logged"))
    }

    /// Apply an externally supplied bundle (flat `13 * K` vector) and return
    /// its reward. No feasibility floor applies: the caller owns the policy.
    pub fn step_external(&mut self, flat: &[f64]) -> Result<BundleTrace> {
        let bundle = ActionBundle::from_flat(flat, self.cfg.bundle)?;
        let (instance, seg, bbox) = self.current_selection()?;
        let eval = StepEval::new(
            &self.cfg,
            self.scorer.as_ref(),
            &self.state.target,
            &self.state.canvas,
            &seg,
            &self.state.gbp,
            bbox,
            self.state.weights,
        )?;
        let (reward, next) = eval.evaluate(&bundle)?;
        self.advance(&bundle, reward, instance, &seg, Some(next))?;
        Ok(*self.trace.last().expect("bundle just logged"))
    }
}

/// Full episode result: final canvas, the replayable stroke log and the
/// reward trace.
#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub final_canvas: Canvas,
    pub strokes: Vec<StrokeRecord>,
    pub trace: Vec<BundleTrace>,
}

/// Paint a whole episode, invoking `on_step(step, canvas, trace)` after each
/// bundle.
pub fn run_episode_with<F>(
    scene: SceneData,
    cfg: EngineConfig,
    mut on_step: F,
) -> Result<EpisodeResult>
where
    F: FnMut(usize, &Canvas, &BundleTrace),
{
    let mut episode = Episode::new(scene, cfg)?;
    while !episode.is_done() {
        let trace = episode.step_auto()?;
        on_step(episode.step_count(), episode.canvas(), &trace);
    }
    Ok(EpisodeResult {
        final_canvas: episode.state.canvas.clone(),
        strokes: episode.strokes,
        trace: episode.trace,
    })
}

/// Paint a whole episode with the configured defaults.
pub fn run_episode(scene: SceneData, cfg: EngineConfig) -> Result<EpisodeResult> {
    run_episode_with(scene, cfg, |_, _, _| {})
}

/// Re-render a stroke log onto a blank canvas. Strokes are applied in log
/// order; each uses the instance mask its record names, falling back to the
/// scene mask. Replaying the exact masks and configuration of the original
/// episode reproduces its final canvas bit-exactly.
pub fn replay(
    records: &[StrokeRecord],
    dims: CanvasDims,
    seg: &SegMap,
    instances: &[SegMap],
    cfg: &EngineConfig,
) -> Result<Canvas> {
    let mut canvas = Canvas::filled(dims, cfg.init_canvas);
    for record in records {
        let stroke = crate::stroke::StrokeParams::from_array(record.params)?;
        let mask = if instances.is_empty() {
            seg
        } else {
            instances.get(record.instance).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "stroke record names instance {} but only {} masks given",
                    record.instance,
                    instances.len()
                ))
            })?
        };
        let raster = crate::stroke::rasterize_with_rect(&stroke, dims, &cfg.render);
        crate::compositor::composite_density_rect(
            &mut canvas,
            &raster.map,
            raster.rect,
            stroke.color(),
            mask,
            record.role,
            &cfg.compositor,
        )?;
    }
    Ok(canvas)
}
