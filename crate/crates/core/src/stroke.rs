//! Quadratic Bezier brush strokes and their rasterization.
//!
//! A stroke is swept as a sequence of discs along the curve: at each curve
//! sample the disc radius and opacity are interpolated between the stroke's
//! endpoint values, and the per-pixel density is the maximum over samples of
//! `opacity * coverage`, where coverage falls off smoothly across an
//! anti-aliasing band at the disc rim. The result is the stroke density map;
//! its colored rendering is the density times the stroke RGB on an empty
//! canvas.

use crate::canvas::{Canvas, CanvasDims, DensityMap};
use crate::error::{Error, Result};

/// Number of parameters in a stroke vector.
pub const STROKE_DIM: usize = 13;

/// Component names in vector-layout order.
pub const STROKE_PARAM_NAMES: [&str; STROKE_DIM] = [
    "x0", "y0", "x1", "y1", "x2", "y2", "z0", "z2", "w0", "w2", "r", "g", "b",
];

/// One brush stroke: a quadratic Bezier curve with endpoint opacity, endpoint
/// width and an RGB color, all components in `[0,1]`.
///
/// Layout order is `(x0,y0,x1,y1,x2,y2,z0,z2,w0,w2,r,g,b)`. The `x` values
/// are fractions of the canvas width and the `y` values fractions of the
/// height; `z0,z2` are the opacities and `w0,w2` the widths at the two curve
/// endpoints, interpolated linearly along the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrokeParams {
    values: [f64; STROKE_DIM],
}

impl StrokeParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        z0: f64,
        z2: f64,
        w0: f64,
        w2: f64,
        r: f64,
        g: f64,
        b: f64,
    ) -> Result<Self> {
        Self::from_array([x0, y0, x1, y1, x2, y2, z0, z2, w0, w2, r, g, b])
    }

    /// Build from the 13-vector layout, rejecting components outside `[0,1]`.
    pub fn from_array(values: [f64; STROKE_DIM]) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(Error::InvalidStroke {
                    name: STROKE_PARAM_NAMES[i],
                    value: v,
                });
            }
        }
        Ok(Self { values })
    }

    /// A stroke that deposits nothing: zero opacity at both endpoints.
    pub fn no_op() -> Self {
        Self {
            values: [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn as_array(&self) -> [f64; STROKE_DIM] {
        self.values
    }

    pub fn x0(&self) -> f64 {
        self.values[0]
    }
    pub fn y0(&self) -> f64 {
        self.values[1]
    }
    pub fn x1(&self) -> f64 {
        self.values[2]
    }
    pub fn y1(&self) -> f64 {
        self.values[3]
    }
    pub fn x2(&self) -> f64 {
        self.values[4]
    }
    pub fn y2(&self) -> f64 {
        self.values[5]
    }
    pub fn z0(&self) -> f64 {
        self.values[6]
    }
    pub fn z2(&self) -> f64 {
        self.values[7]
    }
    pub fn w0(&self) -> f64 {
        self.values[8]
    }
    pub fn w2(&self) -> f64 {
        self.values[9]
    }
    pub fn color(&self) -> (f64, f64, f64) {
        (self.values[10], self.values[11], self.values[12])
    }
}

/// Rasterizer knobs. All defaults target visual granularity around 128x128
/// canvases and can be overridden through the engine configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    /// Curve sample count along the Bezier parameter.
    pub samples: usize,
    /// Maximum brush radius as a fraction of `min(H, W)`.
    pub max_radius_frac: f64,
    /// Radius floor in pixels.
    pub min_radius_px: f64,
    /// Half-width of the smoothstep anti-aliasing band, in pixels.
    pub aa_halfwidth_px: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            samples: 100,
            max_radius_frac: 0.125,
            min_radius_px: 0.5,
            aa_halfwidth_px: 1.0,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::InvalidConfig(
                "render.samples must be at least 2".into(),
            ));
        }
        if !(self.max_radius_frac > 0.0) || !(self.min_radius_px > 0.0) {
            return Err(Error::InvalidConfig(
                "render radii must be strictly positive".into(),
            ));
        }
        if !(self.aa_halfwidth_px > 0.0) {
            return Err(Error::InvalidConfig(
                "render.aa_halfwidth_px must be strictly positive".into(),
            ));
        }
        Ok(())
    }

    fn max_radius_px(&self, dims: CanvasDims) -> f64 {
        self.max_radius_frac * dims.height.min(dims.width) as f64
    }
}

/// Evaluate the quadratic Bezier `B(u) = (1-u)^2 p0 + 2u(1-u) p1 + u^2 p2`.
///
/// Endpoints are interpolated exactly: `u=0` returns `p0`, `u=1` returns `p2`.
pub fn bezier_point(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64), u: f64) -> (f64, f64) {
    debug_assert!((0.0..=1.0).contains(&u));
    bezier_point_uv(p0, p1, p2, u, 1.0 - u)
}

// The (u, v) form keeps the evaluation symmetric under swapping the stroke's
// endpoints: callers that can compute v = 1-u exactly (like the rasterizer's
// mirrored sample grid) get bit-identical mirrored curves.
#[inline]
fn bezier_point_uv(
    p0: (f64, f64),
    p1: (f64, f64),
    p2: (f64, f64),
    u: f64,
    v: f64,
) -> (f64, f64) {
    let w0 = v * v;
    let w2 = u * u;
    let mid = 2.0 * u * v;
    (
        (w0 * p0.0 + w2 * p2.0) + mid * p1.0,
        (w0 * p0.1 + w2 * p2.1) + mid * p1.1,
    )
}

// Radial falloff on the squared distance: the sqrt only happens inside the
// anti-aliasing band.
#[inline]
fn coverage_sq(r_sq: f64, rho: f64, aa: f64) -> f64 {
    let inner = rho - aa;
    let outer = rho + aa;
    if r_sq >= outer * outer {
        return 0.0;
    }
    if inner > 0.0 && r_sq <= inner * inner {
        return 1.0;
    }
    let s = (r_sq.sqrt() - inner) / (outer - inner);
    if s >= 1.0 {
        0.0
    } else {
        1.0 - s * s * (3.0 - 2.0 * s)
    }
}

/// Rasterize a stroke into its density map.
///
/// The curve is sampled at `u_k = k/(N-1)` with `alpha` interpolating the
/// endpoint opacities and the disc radius interpolating the endpoint widths
/// scaled by the maximum brush radius (floored at `min_radius_px`). The brush
/// sweeps the sample chain: each pixel takes the maximum of
/// `alpha * cov(distance)` over the capsules spanned by consecutive samples
/// (with alpha and radius interpolated to the nearest point on the chord)
/// together with the sample discs themselves, clamped to `[0,1]`. `cov` is 1
/// inside `rho - aa`, 0 outside `rho + aa` and a cubic smoothstep in between.
/// Sweeping the segments rather than stamping isolated discs keeps the result
/// converged in `N`: thin fast strokes would otherwise scallop between
/// samples. Pixel centers sit at `(col + 0.5, row + 0.5)`; stroke coordinates
/// are fractions of the canvas extent.
pub fn rasterize_density(stroke: &StrokeParams, dims: CanvasDims, cfg: &RenderConfig) -> DensityMap {
    rasterize_raw(&stroke.values, dims, cfg).map
}

/// Rasterization output with the inclusive pixel rectangle that was touched,
/// `(row_lo, row_hi, col_lo, col_hi)`; `None` when the stroke deposited
/// nothing. Lets compositing skip the untouched canvas.
pub(crate) struct RasterOutput {
    pub map: DensityMap,
    pub rect: Option<(usize, usize, usize, usize)>,
}

pub(crate) fn rasterize_with_rect(
    stroke: &StrokeParams,
    dims: CanvasDims,
    cfg: &RenderConfig,
) -> RasterOutput {
    rasterize_raw(&stroke.values, dims, cfg)
}

// One flattened brush sample: center in pixel coordinates, opacity, radius.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct BrushSample {
    x: f64,
    y: f64,
    alpha: f64,
    rho: f64,
}

// Evaluation on a raw parameter vector, without the [0,1] range check. The
// finite-difference probe below needs to nudge parameters slightly outside
// the valid box; negative opacities simply clamp away.
fn rasterize_raw(p: &[f64; STROKE_DIM], dims: CanvasDims, cfg: &RenderConfig) -> RasterOutput {
    let (h, w) = (dims.height, dims.width);
    let mut values = vec![0.0f64; h * w];
    let mut rect: Option<(usize, usize, usize, usize)> = None;

    let n = cfg.samples.max(2);
    let rmax = cfg.max_radius_px(dims);
    let denom = (n - 1) as f64;

    let p0 = (p[0], p[1]);
    let p1 = (p[2], p[3]);
    let p2 = (p[4], p[5]);
    let (z0, z2, w0, w2) = (p[6], p[7], p[8], p[9]);

    // The (u, v) index pair makes sample k of the endpoint-swapped stroke
    // bit-identical to sample n-1-k of this one.
    let samples: Vec<BrushSample> = (0..n)
        .map(|k| {
            let u = k as f64 / denom;
            let v = (n - 1 - k) as f64 / denom;
            let (bx, by) = bezier_point_uv(p0, p1, p2, u, v);
            BrushSample {
                x: bx * w as f64,
                y: by * h as f64,
                alpha: v * z0 + u * z2,
                rho: (v * w0 + u * w2) * rmax,
            }
        })
        .collect();

    let aa = cfg.aa_halfwidth_px;
    let floor = cfg.min_radius_px;
    for pair in samples.windows(2) {
        // Canonical orientation: the swapped stroke walks the same segments
        // in reverse, so ordering the pair makes the evaluation identical.
        let (a, b) = if pair[1] < pair[0] {
            (pair[1], pair[0])
        } else {
            (pair[0], pair[1])
        };
        if a.alpha <= 0.0 && b.alpha <= 0.0 {
            continue;
        }

        // The radius floor makes rho(t) piecewise linear; split the segment
        // at the crossing so each piece has a truly linear radius.
        let crossing = {
            let da = a.rho - floor;
            let db = b.rho - floor;
            if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
                Some(da / (da - db))
            } else {
                None
            }
        };
        let lerp = |a: &BrushSample, b: &BrushSample, t: f64| BrushSample {
            x: (1.0 - t) * a.x + t * b.x,
            y: (1.0 - t) * a.y + t * b.y,
            alpha: (1.0 - t) * a.alpha + t * b.alpha,
            rho: (1.0 - t) * a.rho + t * b.rho,
        };
        let mut pieces: [Option<(BrushSample, BrushSample)>; 2] = [None, None];
        match crossing {
            Some(tc) => {
                let mid = lerp(&a, &b, tc);
                pieces[0] = Some((a, mid));
                pieces[1] = Some((mid, b));
            }
            None => pieces[0] = Some((a, b)),
        }

        for (a, b) in pieces.iter().flatten() {
            // The interior evaluation point optimizes coverage alone, so a
            // steep opacity taper shifts the true product optimum; splitting
            // the piece bounds that error.
            let subs = (((b.alpha - a.alpha).abs() / 0.003) as usize).clamp(1, 4);
            if subs == 1 {
                rasterize_piece(&mut values, h, w, a, b, floor, aa, &mut rect);
            } else {
                for j in 0..subs {
                    let lo = lerp(a, b, j as f64 / subs as f64);
                    let hi = lerp(a, b, (j + 1) as f64 / subs as f64);
                    rasterize_piece(&mut values, h, w, &lo, &hi, floor, aa, &mut rect);
                }
            }
        }
    }

    for v in values.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    RasterOutput {
        map: DensityMap::from_data(dims, values).expect("rasterizer buffer matches dims"),
        rect,
    }
}

// Sweep one linear-radius capsule piece into the buffer. Each pixel takes the
// maximum of the two end discs and the tapered interior, where the interior
// evaluation point is the exact minimizer of `|p - c(t)| - rho(t)` over the
// chord (the cone-distance solution).
#[allow(clippy::too_many_arguments)]
fn rasterize_piece(
    values: &mut [f64],
    h: usize,
    w: usize,
    a: &BrushSample,
    b: &BrushSample,
    floor: f64,
    aa: f64,
    rect: &mut Option<(usize, usize, usize, usize)>,
) {
    let rho_a = a.rho.max(floor);
    let rho_b = b.rho.max(floor);
    let reach = rho_a.max(rho_b) + aa;

    let col_lo = (a.x.min(b.x) - reach - 0.5).ceil().max(0.0) as usize;
    let col_hi = ((a.x.max(b.x) + reach - 0.5).floor() as isize).min(w as isize - 1);
    let row_lo = (a.y.min(b.y) - reach - 0.5).ceil().max(0.0) as usize;
    let row_hi = ((a.y.max(b.y) + reach - 0.5).floor() as isize).min(h as isize - 1);
    if col_hi < col_lo as isize || row_hi < row_lo as isize {
        return;
    }
    let (col_hi, row_hi) = (col_hi as usize, row_hi as usize);
    *rect = Some(match *rect {
        None => (row_lo, row_hi, col_lo, col_hi),
        Some((r0, r1, c0, c1)) => (
            r0.min(row_lo),
            r1.max(row_hi),
            c0.min(col_lo),
            c1.max(col_hi),
        ),
    });

    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len_sq = dx * dx + dy * dy;
    let d_rho = rho_b - rho_a;
    // When the radius grows faster than the center moves, the wider end disc
    // contains the whole sweep and the interior adds nothing.
    let cone_scale = if len_sq > d_rho * d_rho {
        Some(1.0 / (len_sq - d_rho * d_rho).sqrt())
    } else {
        None
    };

    // No pixel can exceed the endpoint opacity maximum, and nothing within
    // reach of the piece lies further from `a` than its length plus reach.
    let cap = a.alpha.max(b.alpha);
    let far = len_sq.sqrt() + reach;
    let far_sq = far * far;

    for row in row_lo..=row_hi {
        let py = (row as f64 + 0.5) - a.y;
        let base = row * w;
        for col in col_lo..=col_hi {
            let cell = &mut values[base + col];
            if *cell >= cap {
                continue;
            }
            let px = (col as f64 + 0.5) - a.x;
            let r_a_sq = px * px + py * py;
            if r_a_sq >= far_sq {
                continue;
            }

            let mut d = a.alpha * coverage_sq(r_a_sq, rho_a, aa);
            let qx = px - dx;
            let qy = py - dy;
            let r_b_sq = qx * qx + qy * qy;
            d = d.max(b.alpha * coverage_sq(r_b_sq, rho_b, aa));

            if let Some(scale) = cone_scale {
                let m = px * dx + py * dy;
                let perp_sq = (len_sq * r_a_sq - m * m).max(0.0);
                let t = ((m + d_rho * perp_sq.sqrt() * scale) / len_sq).clamp(0.0, 1.0);
                let ex = px - t * dx;
                let ey = py - t * dy;
                let alpha = (1.0 - t) * a.alpha + t * b.alpha;
                let rho = (1.0 - t) * rho_a + t * rho_b;
                d = d.max(alpha * coverage_sq(ex * ex + ey * ey, rho, aa));
            }

            if d > *cell {
                *cell = d;
            }
        }
    }
}

/// Colored rendering of a density map on an empty canvas: each channel is the
/// density times the corresponding color component.
pub fn colorize(density: &DensityMap, color: (f64, f64, f64)) -> Canvas {
    let dims = density.dims();
    let mut data = Vec::with_capacity(dims.pixels() * 3);
    for &d in density.data() {
        data.push(d * color.0);
        data.push(d * color.1);
        data.push(d * color.2);
    }
    Canvas::from_data(dims, data).expect("colorize buffer matches dims")
}

/// Finite-difference estimates for one stroke parameter.
#[derive(Debug, Clone, Copy)]
pub struct SmoothnessEntry {
    pub name: &'static str,
    /// Central difference of the density-map sum at step `eps`.
    pub coarse: f64,
    /// Central difference at step `eps / 10`.
    pub fine: f64,
    pub rel_diff: f64,
    pub flagged: bool,
}

/// Numerical smoothness check over the 10 non-color parameters.
#[derive(Debug, Clone)]
pub struct SmoothnessReport {
    pub eps: f64,
    pub entries: Vec<SmoothnessEntry>,
}

impl SmoothnessReport {
    pub fn flagged(&self) -> usize {
        self.entries.iter().filter(|e| e.flagged).count()
    }
}

/// Probe the differentiability of the rasterizer: for each of the 10
/// shape/opacity/width parameters, compare central finite differences of the
/// density-map sum at steps `eps` and `eps/10`. A parameter is flagged when
/// the two estimates disagree by more than 25% relative while both exceed
/// `1e-6` in magnitude.
pub fn smoothness_report(
    stroke: &StrokeParams,
    dims: CanvasDims,
    eps: f64,
    cfg: &RenderConfig,
) -> Result<SmoothnessReport> {
    if !(eps > 0.0 && eps <= 0.05) {
        return Err(Error::InvalidInput(format!(
            "smoothness eps {eps} outside (0, 0.05]"
        )));
    }

    let density_sum = |p: &[f64; STROKE_DIM]| -> f64 {
        rasterize_raw(p, dims, cfg).map.data().iter().sum()
    };

    let central = |idx: usize, step: f64| -> f64 {
        let mut hi = stroke.values;
        let mut lo = stroke.values;
        hi[idx] += step;
        lo[idx] -= step;
        (density_sum(&hi) - density_sum(&lo)) / (2.0 * step)
    };

    let mut entries = Vec::with_capacity(10);
    for idx in 0..10 {
        let coarse = central(idx, eps);
        let fine = central(idx, eps / 10.0);
        let scale = coarse.abs().max(fine.abs());
        let rel_diff = if scale > 0.0 {
            (coarse - fine).abs() / scale
        } else {
            0.0
        };
        let flagged = coarse.abs() > 1e-6 && fine.abs() > 1e-6 && rel_diff > 0.25;
        entries.push(SmoothnessEntry {
            name: STROKE_PARAM_NAMES[idx],
            coarse,
            fine,
            rel_diff,
            flagged,
        });
    }

    Ok(SmoothnessReport { eps, entries })
}
