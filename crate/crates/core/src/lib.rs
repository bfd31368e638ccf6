//! Semantic-guided stroke painting engine.
//!
//! Decomposes a target image into quadratic Bezier brush strokes through a
//! bi-level painting process: background strokes deposit color outside a
//! semantic mask, foreground strokes inside it. Foreground progress is scored
//! on an affine zoom of the canvas onto the object bounding box, a
//! GBP-importance-weighted focus reward amplifies small distinguishing
//! features, and a derivative-free search picks each stroke bundle. Episodes
//! are replayable stroke by stroke and drivable by external agents through a
//! JSON-lines protocol.

pub mod align;
pub mod canvas;
pub mod cli;
pub mod compositor;
pub mod config;
pub mod error;
pub mod painter;
pub mod rewards;
pub mod scene;
pub mod stroke;
pub mod verify;

pub use align::{bbox_from_mask, normalized_affine, pixel_affine, zoom_canvas, zoom_map, AffineMatrix, BBox, NormalizedBBox};
pub use canvas::{Canvas, CanvasDims, DensityMap, GbpMap, ScalarMap, SegMap};
pub use compositor::{
    apply_background_stroke, apply_bundle, apply_foreground_stroke, ActionBundle, BundleShape,
    CompositorConfig, StrokeRole,
};
pub use config::EngineConfig;
pub use error::{Error, Result};
pub use painter::{
    optimize_bundle, run_episode, run_episode_with, select_instance, BundleTrace, Episode,
    EpisodeResult, EpisodeState, OptimizerConfig, SceneData, StrokeRecord,
};
pub use rewards::{
    background_reward, focus_reward, foreground_reward_aligned, foreground_reward_unaligned,
    gbp_distance, neg_l2_score, total_reward, GbpNorm, RewardBreakdown, RewardMode, RewardWeights,
    ScorerKind, SimilarityScorer,
};
pub use scene::{load_scene, SceneAnnotation};
pub use stroke::{
    bezier_point, colorize, rasterize_density, smoothness_report, RenderConfig, SmoothnessReport,
    StrokeParams, STROKE_DIM,
};
