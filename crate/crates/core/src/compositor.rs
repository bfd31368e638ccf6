//! Bi-level canvas updates: background strokes deposit color only outside the
//! semantic mask, foreground strokes only inside it.
//!
//! For a stroke with density map `d` and color `c`, the canvas update is
//!
//! ```text
//! background:  out = (1 - d) * C + d * c * (1 - S)
//! foreground:  out = (1 - d) * C + d * c * S
//! ```
//!
//! applied per pixel and channel with the soft mask `S` used as-is. Note the
//! `(1 - d)` attenuation applies to the whole canvas, so a stroke crossing
//! the opposite region darkens it; `masked_attenuation` switches to
//! `out = (1 - d*m) * C + d * c * m` which confines the stroke entirely to
//! its own region.

use serde::{Deserialize, Serialize};

use crate::canvas::{check_dims, Canvas, DensityMap, SegMap};
use crate::error::{Error, Result};
use crate::stroke::{rasterize_density, RenderConfig, StrokeParams, STROKE_DIM};

/// Which side of the semantic mask a stroke paints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrokeRole {
    Background,
    Foreground,
}

/// Per-bundle stroke counts. The paper's split is 3 foreground : 2 background
/// for a bundle of K = 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BundleShape {
    pub background: usize,
    pub foreground: usize,
}

impl Default for BundleShape {
    fn default() -> Self {
        Self {
            background: 2,
            foreground: 3,
        }
    }
}

impl BundleShape {
    pub fn total(&self) -> usize {
        self.background + self.foreground
    }

    pub fn validate(&self) -> Result<()> {
        if self.total() < 1 {
            return Err(Error::InvalidConfig(
                "bundle must contain at least one stroke".into(),
            ));
        }
        Ok(())
    }
}

/// The K strokes emitted at one timestep, split into background and
/// foreground sub-lists.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionBundle {
    pub background: Vec<StrokeParams>,
    pub foreground: Vec<StrokeParams>,
}

impl ActionBundle {
    /// Decode a flat `13 * K` vector: background strokes first, then
    /// foreground strokes, each 13 consecutive components.
    pub fn from_flat(values: &[f64], shape: BundleShape) -> Result<Self> {
        shape.validate()?;
        let expected = shape.total() * STROKE_DIM;
        if values.len() != expected {
            return Err(Error::InvalidInput(format!(
                "bundle vector has {} components, expected {}",
                values.len(),
                expected
            )));
        }
        let mut chunks = values.chunks_exact(STROKE_DIM);
        let mut decode = |n: usize| -> Result<Vec<StrokeParams>> {
            (0..n)
                .map(|_| {
                    let chunk = chunks.next().expect("length checked above");
                    let mut arr = [0.0; STROKE_DIM];
                    arr.copy_from_slice(chunk);
                    StrokeParams::from_array(arr)
                })
                .collect()
        };
        let background = decode(shape.background)?;
        let foreground = decode(shape.foreground)?;
        Ok(Self {
            background,
            foreground,
        })
    }

    /// Flatten back to the wire layout.
    pub fn to_flat(&self) -> Vec<f64> {
        self.background
            .iter()
            .chain(self.foreground.iter())
            .flat_map(|s| s.as_array())
            .collect()
    }

    /// A bundle of zero-opacity strokes: applying it is the identity.
    pub fn no_op(shape: BundleShape) -> Self {
        Self {
            background: vec![StrokeParams::no_op(); shape.background],
            foreground: vec![StrokeParams::no_op(); shape.foreground],
        }
    }

    pub fn len(&self) -> usize {
        self.background.len() + self.foreground.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Strokes in application order with their roles.
    pub fn iter_ordered(&self) -> impl Iterator<Item = (StrokeRole, &StrokeParams)> {
        self.background
            .iter()
            .map(|s| (StrokeRole::Background, s))
            .chain(self.foreground.iter().map(|s| (StrokeRole::Foreground, s)))
    }
}

/// Compositing options.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CompositorConfig {
    /// Confine the `(1 - d)` attenuation to the stroke's own mask region
    /// instead of the whole canvas.
    pub masked_attenuation: bool,
}

/// Deposit an already-rasterized stroke onto the canvas in place.
pub fn composite_density(
    canvas: &mut Canvas,
    density: &DensityMap,
    color: (f64, f64, f64),
    seg: &SegMap,
    role: StrokeRole,
    cfg: &CompositorConfig,
) -> Result<()> {
    let full = (0, canvas.height() - 1, 0, canvas.width() - 1);
    composite_density_rect(canvas, density, Some(full), color, seg, role, cfg)
}

// Same update restricted to the given inclusive pixel rectangle; pixels with
// zero density are untouched either way.
pub(crate) fn composite_density_rect(
    canvas: &mut Canvas,
    density: &DensityMap,
    rect: Option<(usize, usize, usize, usize)>,
    color: (f64, f64, f64),
    seg: &SegMap,
    role: StrokeRole,
    cfg: &CompositorConfig,
) -> Result<()> {
    check_dims(canvas.dims(), density.dims())?;
    check_dims(canvas.dims(), seg.dims())?;
    let Some((row_lo, row_hi, col_lo, col_hi)) = rect else {
        return Ok(());
    };

    let width = canvas.width();
    let color = [color.0, color.1, color.2];
    let seg_data = seg.data();
    let density_data = density.data();
    let data = canvas.data_mut();

    for row in row_lo..=row_hi {
        for col in col_lo..=col_hi {
            let px = row * width + col;
            let d = density_data[px];
            if d == 0.0 {
                continue;
            }
            let s = seg_data[px];
            let m = match role {
                StrokeRole::Background => 1.0 - s,
                StrokeRole::Foreground => s,
            };
            let keep = if cfg.masked_attenuation {
                1.0 - d * m
            } else {
                1.0 - d
            };
            for ch in 0..3 {
                let v = &mut data[px * 3 + ch];
                *v = (keep * *v + d * color[ch] * m).clamp(0.0, 1.0);
            }
        }
    }
    Ok(())
}

/// Background update: `out = (1 - d) * C + d * c * (1 - S)`.
pub fn apply_background_stroke(
    canvas: &Canvas,
    stroke: &StrokeParams,
    seg: &SegMap,
    render: &RenderConfig,
    cfg: &CompositorConfig,
) -> Result<Canvas> {
    let mut out = canvas.clone();
    let density = rasterize_density(stroke, canvas.dims(), render);
    composite_density(&mut out, &density, stroke.color(), seg, StrokeRole::Background, cfg)?;
    Ok(out)
}

/// Foreground update: `out = (1 - d) * C + d * c * S`.
pub fn apply_foreground_stroke(
    canvas: &Canvas,
    stroke: &StrokeParams,
    seg: &SegMap,
    render: &RenderConfig,
    cfg: &CompositorConfig,
) -> Result<Canvas> {
    let mut out = canvas.clone();
    let density = rasterize_density(stroke, canvas.dims(), render);
    composite_density(&mut out, &density, stroke.color(), seg, StrokeRole::Foreground, cfg)?;
    Ok(out)
}

/// Apply a full bundle in place: all background strokes in order, then all
/// foreground strokes in order.
pub fn apply_bundle_into(
    canvas: &mut Canvas,
    bundle: &ActionBundle,
    seg: &SegMap,
    render: &RenderConfig,
    cfg: &CompositorConfig,
) -> Result<()> {
    for (role, stroke) in bundle.iter_ordered() {
        let raster = crate::stroke::rasterize_with_rect(stroke, canvas.dims(), render);
        composite_density_rect(canvas, &raster.map, raster.rect, stroke.color(), seg, role, cfg)?;
    }
    Ok(())
}

/// Functional form of [`apply_bundle_into`].
pub fn apply_bundle(
    canvas: &Canvas,
    bundle: &ActionBundle,
    seg: &SegMap,
    render: &RenderConfig,
    cfg: &CompositorConfig,
) -> Result<Canvas> {
    let mut out = canvas.clone();
    apply_bundle_into(&mut out, bundle, seg, render, cfg)?;
    Ok(out)
}

/// Plain alpha-over deposit, used by [`colorize`]-style replays where no mask
/// applies and by tests as the degenerate-mask reference.
pub fn alpha_over(canvas: &Canvas, density: &DensityMap, color: (f64, f64, f64)) -> Result<Canvas> {
    check_dims(canvas.dims(), density.dims())?;
    let mut out = canvas.clone();
    let color = [color.0, color.1, color.2];
    let data = out.data_mut();
    for (px, &d) in density.data().iter().enumerate() {
        for ch in 0..3 {
            let v = &mut data[px * 3 + ch];
            *v = (1.0 - d) * *v + d * color[ch];
        }
    }
    Ok(out)
}
