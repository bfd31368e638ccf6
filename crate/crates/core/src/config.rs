//! Engine configuration: one struct of knobs covering every module, with a
//! flat `key = value` text format so runs are reproducible from a single
//! file.

use std::path::Path;

use crate::canvas::CanvasDims;
use crate::compositor::{BundleShape, CompositorConfig};
use crate::error::{Error, Result};
use crate::painter::OptimizerConfig;
use crate::rewards::{GbpNorm, RewardMode, RewardWeights, ScorerKind};
use crate::stroke::RenderConfig;

/// All engine defaults in one place. Every field maps to a config-file key;
/// see [`EngineConfig::apply_kv`] for the key list.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub render: RenderConfig,
    pub compositor: CompositorConfig,
    pub bundle: BundleShape,
    pub weights: RewardWeights,
    pub reward_mode: RewardMode,
    pub gbp_norm: GbpNorm,
    pub scorer: ScorerKind,
    pub optimizer: OptimizerConfig,
    /// Zoom output resolution; `None` means the input resolution.
    pub zoom_height: Option<usize>,
    pub zoom_width: Option<usize>,
    /// Constant value of the blank starting canvas.
    pub init_canvas: f64,
    /// Threshold for deriving bounding boxes from masks.
    pub mask_threshold: f64,
    /// Padding fraction for derived bounding boxes.
    pub pad_frac: f64,
    /// Stroke counts at which `paint` writes intermediate canvases.
    pub checkpoints: Vec<usize>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            render: RenderConfig::default(),
            compositor: CompositorConfig::default(),
            bundle: BundleShape::default(),
            weights: RewardWeights::default(),
            reward_mode: RewardMode::default(),
            gbp_norm: GbpNorm::default(),
            scorer: ScorerKind::default(),
            optimizer: OptimizerConfig::default(),
            zoom_height: None,
            zoom_width: None,
            init_canvas: 0.0,
            mask_threshold: 0.5,
            pad_frac: 0.05,
            checkpoints: vec![10, 20, 30, 50, 100, 200],
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.render.validate()?;
        self.bundle.validate()?;
        self.optimizer.validate()?;
        if !(0.0..=1.0).contains(&self.init_canvas) {
            return Err(Error::InvalidConfig(
                "painter.init_canvas must lie in [0,1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.mask_threshold) {
            return Err(Error::InvalidConfig(
                "scene.mask_threshold must lie in [0,1]".into(),
            ));
        }
        if !(self.pad_frac >= 0.0) {
            return Err(Error::InvalidConfig(
                "scene.pad_frac must be non-negative".into(),
            ));
        }
        for dim in [self.zoom_height, self.zoom_width].into_iter().flatten() {
            if dim < 8 {
                return Err(Error::InvalidConfig(
                    "align zoom output must be at least 8 pixels".into(),
                ));
            }
        }
        for w in [self.weights.eta, self.weights.nu, self.weights.kappa] {
            if !w.is_finite() {
                return Err(Error::InvalidConfig("reward weights must be finite".into()));
            }
        }
        Ok(())
    }

    /// Resolution zooms are rendered at; defaults to the input resolution.
    pub fn zoom_dims(&self, input: CanvasDims) -> CanvasDims {
        CanvasDims {
            height: self.zoom_height.unwrap_or(input.height),
            width: self.zoom_width.unwrap_or(input.width),
        }
    }

    /// Apply one `key = value` setting.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::InvalidConfig(format!("bad value `{value}` for {what}"));
        let parse_usize =
            |what: &str| -> Result<usize> { value.parse().map_err(|_| bad(what)) };
        let parse_f64 = |what: &str| -> Result<f64> { value.parse().map_err(|_| bad(what)) };
        let parse_bool = |what: &str| -> Result<bool> {
            match value {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(bad(what)),
            }
        };

        match key {
            "render.samples" => self.render.samples = parse_usize(key)?,
            "render.max_radius_frac" => self.render.max_radius_frac = parse_f64(key)?,
            "render.min_radius_px" => self.render.min_radius_px = parse_f64(key)?,
            "render.aa_halfwidth_px" => self.render.aa_halfwidth_px = parse_f64(key)?,
            "compositor.masked_attenuation" => {
                self.compositor.masked_attenuation = parse_bool(key)?
            }
            "bundle.background" => self.bundle.background = parse_usize(key)?,
            "bundle.foreground" => self.bundle.foreground = parse_usize(key)?,
            "rewards.eta" => self.weights.eta = parse_f64(key)?,
            "rewards.nu" => self.weights.nu = parse_f64(key)?,
            "rewards.kappa" => self.weights.kappa = parse_f64(key)?,
            "rewards.mode" => {
                self.reward_mode = match value {
                    "bilevel" => RewardMode::BiLevel,
                    "ablation" => RewardMode::Ablation,
                    _ => return Err(bad(key)),
                }
            }
            "rewards.gbp_norm" => {
                self.gbp_norm = match value {
                    "frobenius" => GbpNorm::Frobenius,
                    "count" => GbpNorm::Count,
                    _ => return Err(bad(key)),
                }
            }
            "rewards.scorer" => {
                self.scorer = match value {
                    "neg_l2" => ScorerKind::NegL2,
                    "downsampled_abs" => ScorerKind::DownsampledAbs,
                    _ => return Err(bad(key)),
                }
            }
            "optimizer.population" => self.optimizer.population = parse_usize(key)?,
            "optimizer.elite_frac" => self.optimizer.elite_frac = parse_f64(key)?,
            "optimizer.generations" => self.optimizer.generations = parse_usize(key)?,
            "optimizer.init_sigma" => self.optimizer.init_sigma = parse_f64(key)?,
            "optimizer.seed" => {
                self.optimizer.seed = value.parse().map_err(|_| bad(key))?
            }
            "optimizer.episode_len" => self.optimizer.episode_len = parse_usize(key)?,
            "align.zoom_height" => self.zoom_height = Some(parse_usize(key)?),
            "align.zoom_width" => self.zoom_width = Some(parse_usize(key)?),
            "painter.init_canvas" => self.init_canvas = parse_f64(key)?,
            "painter.checkpoints" => {
                self.checkpoints = value
                    .split(',')
                    .map(|s| s.trim().parse::<usize>().map_err(|_| bad(key)))
                    .collect::<Result<Vec<_>>>()?
            }
            "scene.mask_threshold" => self.mask_threshold = parse_f64(key)?,
            "scene.pad_frac" => self.pad_frac = parse_f64(key)?,
            _ => {
                return Err(Error::InvalidConfig(format!("unknown config key `{key}`")));
            }
        }
        Ok(())
    }

    /// Parse a flat `key = value` config text. Blank lines and `#` comments
    /// are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let value = value.split('#').next().unwrap_or("").trim();
            self.apply_kv(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_text(&text)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_file(path)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        EngineConfig::default().validate().unwrap();
    }

    #[test]
    fn parse_round_trip() {
        let mut cfg = EngineConfig::default();
        cfg.apply_text(
            "# comment\n\
             render.samples = 50\n\
             bundle.foreground = 4   # inline note\n\
             rewards.mode = ablation\n\
             rewards.kappa = 5\n\
             optimizer.seed = 99\n",
        )
        .unwrap();
        assert_eq!(cfg.render.samples, 50);
        assert_eq!(cfg.bundle.foreground, 4);
        assert_eq!(cfg.reward_mode, RewardMode::Ablation);
        assert_eq!(cfg.weights.kappa, 5.0);
        assert_eq!(cfg.optimizer.seed, 99);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut cfg = EngineConfig::default();
        assert!(cfg.apply_text("nope.nope = 1\n").is_err());
    }

    #[test]
    fn invalid_settings_fail_validation() {
        let mut cfg = EngineConfig::default();
        cfg.apply_text("optimizer.population = 2\n").unwrap();
        assert!(cfg.validate().is_err());
    }
}
