//! Affine foreground alignment: zoom the canvas, target, mask and GBP images
//! onto the foreground bounding box via bilinear resampling.
//!
//! Two matrix conventions are provided. The pixel convention maps bounding
//! box pixel coordinates onto the full output raster; the normalized
//! convention is the `[-1,1]` output-to-input form used by spatial
//! transformer samplers. Both describe the same geometric map under the
//! half-pixel-center convention used here, and [`zoom_canvas`]/[`zoom_map`]
//! implement that shared map directly.

use serde::{Deserialize, Serialize};

use crate::canvas::{Canvas, CanvasDims, ScalarMap, SegMap};
use crate::error::{Error, Result};

/// Foreground bounding box in pixel coordinates (top-left corner + extent).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    /// A box must span at least one pixel on each axis and lie inside the
    /// image.
    pub fn new(x: f64, y: f64, w: f64, h: f64, dims: CanvasDims) -> Result<Self> {
        let bbox = Self { x, y, w, h };
        bbox.validate_for(dims)?;
        Ok(bbox)
    }

    pub fn full(dims: CanvasDims) -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            w: dims.width as f64,
            h: dims.height as f64,
        }
    }

    pub fn validate_for(&self, dims: CanvasDims) -> Result<()> {
        if !(self.w >= 1.0 && self.h >= 1.0) {
            return Err(Error::InvalidBBox(format!(
                "extent {}x{} below one pixel",
                self.w, self.h
            )));
        }
        let (w, h) = (dims.width as f64, dims.height as f64);
        if !(self.x >= 0.0 && self.y >= 0.0 && self.x + self.w <= w && self.y + self.h <= h) {
            return Err(Error::InvalidBBox(format!(
                "box ({}, {}, {}, {}) not contained in {}x{}",
                self.x, self.y, self.w, self.h, h, w
            )));
        }
        Ok(())
    }

    /// Coordinates as fractions of the image extent.
    pub fn normalized(&self, dims: CanvasDims) -> NormalizedBBox {
        let (w, h) = (dims.width as f64, dims.height as f64);
        NormalizedBBox {
            x: self.x / w,
            y: self.y / h,
            w: self.w / w,
            h: self.h / h,
        }
    }
}

/// Bounding box in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedBBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl NormalizedBBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        for v in [x, y, w, h] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidBBox(format!(
                    "normalized coordinate {v} outside [0,1]"
                )));
            }
        }
        if !(w > 0.0 && h > 0.0) {
            return Err(Error::InvalidBBox("degenerate normalized extent".into()));
        }
        Ok(Self { x, y, w, h })
    }
}

/// Six-entry affine transform, stored as the two rows of the 2x3 map (the
/// transpose of the 3x2 layout used by spatial transformer APIs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMatrix {
    pub rows: [[f64; 3]; 2],
}

impl AffineMatrix {
    pub fn identity() -> Self {
        Self {
            rows: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        }
    }
}

/// Pixel-convention matrix: maps bounding-box pixel coordinates onto the full
/// output raster,
/// `A = [[W/w_b, 0, -W*x_b/w_b], [0, H/h_b, -H*y_b/h_b]]`.
pub fn pixel_affine(bbox: &BBox, dims: CanvasDims) -> Result<AffineMatrix> {
    bbox.validate_for(dims)?;
    let (w, h) = (dims.width as f64, dims.height as f64);
    Ok(AffineMatrix {
        rows: [
            [w / bbox.w, 0.0, -w * bbox.x / bbox.w],
            [0.0, h / bbox.h, -h * bbox.y / bbox.h],
        ],
    })
}

/// Normalized-convention matrix for samplers that map output to input in
/// `[-1,1]` coordinates,
/// `A~ = [[w~, 0, 2x~ + w~ - 1], [0, h~, 2y~ + h~ - 1]]`.
pub fn normalized_affine(bbox: &NormalizedBBox) -> AffineMatrix {
    AffineMatrix {
        rows: [
            [bbox.w, 0.0, 2.0 * bbox.x + bbox.w - 1.0],
            [0.0, bbox.h, 2.0 * bbox.y + bbox.h - 1.0],
        ],
    }
}

/// Per-axis source positions for the shared geometric map: output pixel `i`
/// samples the input at `offset + (i + 0.5) * extent / out_len - 0.5`.
fn axis_positions(offset: f64, extent: f64, out_len: usize) -> Vec<f64> {
    let scale = extent / out_len as f64;
    (0..out_len)
        .map(|i| offset + (i as f64 + 0.5) * scale - 0.5)
        .collect()
}

fn zoom_planes(
    data: &[f64],
    channels: usize,
    in_dims: CanvasDims,
    xs: &[f64],
    ys: &[f64],
) -> Vec<f64> {
    let (h, w) = (in_dims.height as isize, in_dims.width as isize);
    let row_stride = in_dims.width * channels;
    // Tap index and fraction per output axis position; out-of-range taps
    // read zero.
    let taps = |positions: &[f64]| -> Vec<(isize, f64)> {
        positions
            .iter()
            .map(|&p| {
                let f = p.floor();
                (f as isize, p - f)
            })
            .collect()
    };
    let xt = taps(xs);
    let yt = taps(ys);

    let mut out = Vec::with_capacity(xs.len() * ys.len() * channels);
    for &(yi, uy) in &yt {
        let rows_inside = yi >= 0 && yi + 1 < h;
        let row0 = (yi >= 0 && yi < h).then(|| yi as usize * row_stride);
        let row1 = (yi + 1 >= 0 && yi + 1 < h).then(|| (yi + 1) as usize * row_stride);
        for &(xi, ux) in &xt {
            if rows_inside && xi >= 0 && xi + 1 < w {
                let i00 = yi as usize * row_stride + xi as usize * channels;
                let i10 = i00 + row_stride;
                for ch in 0..channels {
                    let top = data[i00 + ch] * (1.0 - ux) + data[i00 + channels + ch] * ux;
                    let bot = data[i10 + ch] * (1.0 - ux) + data[i10 + channels + ch] * ux;
                    out.push(top * (1.0 - uy) + bot * uy);
                }
                continue;
            }
            let col0 = (xi >= 0 && xi < w).then(|| xi as usize * channels);
            let col1 = (xi + 1 >= 0 && xi + 1 < w).then(|| (xi + 1) as usize * channels);
            for ch in 0..channels {
                let at = |row: Option<usize>, col: Option<usize>| -> f64 {
                    match (row, col) {
                        (Some(r), Some(c)) => data[r + c + ch],
                        _ => 0.0,
                    }
                };
                let top = at(row0, col0) * (1.0 - ux) + at(row0, col1) * ux;
                let bot = at(row1, col0) * (1.0 - ux) + at(row1, col1) * ux;
                out.push(top * (1.0 - uy) + bot * uy);
            }
        }
    }
    out
}

/// Zoom a canvas onto a bounding box: the output covers exactly the box
/// region rescaled to `out`, with bilinear sampling and zero reads outside
/// the input.
pub fn zoom_canvas(img: &Canvas, bbox: &BBox, out: CanvasDims) -> Result<Canvas> {
    bbox.validate_for(img.dims())?;
    let xs = axis_positions(bbox.x, bbox.w, out.width);
    let ys = axis_positions(bbox.y, bbox.h, out.height);
    Canvas::from_data(out, zoom_planes(img.data(), 3, img.dims(), &xs, &ys))
}

/// Scalar-map variant of [`zoom_canvas`]; masks and GBP maps are resampled
/// bilinearly as well.
pub fn zoom_map(map: &ScalarMap, bbox: &BBox, out: CanvasDims) -> Result<ScalarMap> {
    bbox.validate_for(map.dims())?;
    let xs = axis_positions(bbox.x, bbox.w, out.width);
    let ys = axis_positions(bbox.y, bbox.h, out.height);
    ScalarMap::from_data(out, zoom_planes(map.data(), 1, map.dims(), &xs, &ys))
}

/// Zoom driven by the pixel-convention matrix: output raster coordinates are
/// pulled back through the inverse of `A`.
pub fn zoom_canvas_via_pixel_matrix(
    img: &Canvas,
    bbox: &BBox,
    out: CanvasDims,
) -> Result<Canvas> {
    let matrix = pixel_affine(bbox, img.dims())?;
    let (in_h, in_w) = (img.height() as f64, img.width() as f64);
    let [sx_row, sy_row] = matrix.rows;
    let xs: Vec<f64> = (0..out.width)
        .map(|j| {
            let raster = (j as f64 + 0.5) * in_w / out.width as f64;
            (raster - sx_row[2]) / sx_row[0] - 0.5
        })
        .collect();
    let ys: Vec<f64> = (0..out.height)
        .map(|i| {
            let raster = (i as f64 + 0.5) * in_h / out.height as f64;
            (raster - sy_row[2]) / sy_row[1] - 0.5
        })
        .collect();
    Canvas::from_data(out, zoom_planes(img.data(), 3, img.dims(), &xs, &ys))
}

/// Zoom driven by the normalized-convention matrix: output `[-1,1]`
/// coordinates map to input `[-1,1]` coordinates, which land on pixel
/// indices under the half-pixel-center convention.
pub fn zoom_canvas_via_normalized_matrix(
    img: &Canvas,
    bbox: &NormalizedBBox,
    out: CanvasDims,
) -> Result<Canvas> {
    let matrix = normalized_affine(bbox);
    let (in_h, in_w) = (img.height() as f64, img.width() as f64);
    let [sx_row, sy_row] = matrix.rows;
    let xs: Vec<f64> = (0..out.width)
        .map(|j| {
            let out_norm = 2.0 * (j as f64 + 0.5) / out.width as f64 - 1.0;
            let in_norm = sx_row[0] * out_norm + sx_row[2];
            (in_norm + 1.0) * in_w / 2.0 - 0.5
        })
        .collect();
    let ys: Vec<f64> = (0..out.height)
        .map(|i| {
            let out_norm = 2.0 * (i as f64 + 0.5) / out.height as f64 - 1.0;
            let in_norm = sy_row[1] * out_norm + sy_row[2];
            (in_norm + 1.0) * in_h / 2.0 - 0.5
        })
        .collect();
    Canvas::from_data(out, zoom_planes(img.data(), 3, img.dims(), &xs, &ys))
}

/// Tight bounding box over the mask values at or above `threshold`, expanded
/// by `ceil(pad_frac * extent)` pixels split across the two sides of each
/// axis, then clipped to the image.
pub fn bbox_from_mask(mask: &SegMap, threshold: f64, pad_frac: f64) -> Result<BBox> {
    let dims = mask.dims();
    let mut min_row = usize::MAX;
    let mut max_row = 0usize;
    let mut min_col = usize::MAX;
    let mut max_col = 0usize;
    for row in 0..dims.height {
        for col in 0..dims.width {
            if mask.get(row, col) >= threshold {
                min_row = min_row.min(row);
                max_row = max_row.max(row);
                min_col = min_col.min(col);
                max_col = max_col.max(col);
            }
        }
    }
    if min_row == usize::MAX {
        return Err(Error::NoForeground);
    }

    let expand = |lo: usize, hi: usize, limit: usize| -> (usize, usize) {
        let extent = hi - lo + 1;
        let total = (pad_frac * extent as f64).ceil().max(0.0) as usize;
        let left = total / 2;
        let right = total - left;
        let new_lo = lo.saturating_sub(left);
        let new_hi = (hi + 1 + right).min(limit);
        (new_lo, new_hi)
    };
    let (x0, x1) = expand(min_col, max_col, dims.width);
    let (y0, y1) = expand(min_row, max_row, dims.height);

    BBox::new(
        x0 as f64,
        y0 as f64,
        (x1 - x0) as f64,
        (y1 - y0) as f64,
        dims,
    )
}
