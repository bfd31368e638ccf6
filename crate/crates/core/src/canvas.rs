//! Image buffers: RGB canvases and single-channel scalar maps.
//!
//! All pixel data is `f64` in `[0,1]`, row-major. `Canvas` interleaves the
//! three color channels per pixel; `ScalarMap` holds one value per pixel and
//! doubles as stroke density map, segmentation mask and GBP importance map.

use crate::error::{Error, Result};

/// Raster dimensions in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CanvasDims {
    pub height: usize,
    pub width: usize,
}

impl CanvasDims {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height < 8 || width < 8 {
            return Err(Error::InvalidDims {
                h: height,
                w: width,
            });
        }
        Ok(Self { height, width })
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }
}

/// H x W x 3 image with components in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Canvas {
    dims: CanvasDims,
    data: Vec<f64>,
}

impl Canvas {
    /// Constant-valued canvas (the blank starting state of an episode).
    pub fn filled(dims: CanvasDims, value: f64) -> Self {
        Self {
            dims,
            data: vec![value.clamp(0.0, 1.0); dims.pixels() * 3],
        }
    }

    pub fn from_data(dims: CanvasDims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.pixels() * 3 {
            return Err(Error::InvalidInput(format!(
                "canvas data length {} does not match {}x{}x3",
                data.len(),
                dims.height,
                dims.width
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> CanvasDims {
        self.dims
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.dims.width + col) * 3 + ch]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, value: f64) {
        self.data[(row * self.dims.width + col) * 3 + ch] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Mean squared difference over all pixels and channels.
    pub fn mse(&self, other: &Canvas) -> Result<f64> {
        check_dims(self.dims, other.dims)?;
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum / self.data.len() as f64)
    }

    /// Per-pixel/channel product with a broadcast scalar map.
    pub fn masked(&self, mask: &ScalarMap) -> Result<Canvas> {
        check_dims(self.dims, mask.dims)?;
        let mut out = self.clone();
        for (i, v) in out.data.iter_mut().enumerate() {
            *v *= mask.data[i / 3];
        }
        Ok(out)
    }
}

/// H x W map with values in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    dims: CanvasDims,
    data: Vec<f64>,
}

/// Stroke density map Phi(a).
pub type DensityMap = ScalarMap;
/// Per-pixel foreground probability map.
pub type SegMap = ScalarMap;
/// Normalized guided-backpropagation importance map.
pub type GbpMap = ScalarMap;

impl ScalarMap {
    pub fn filled(dims: CanvasDims, value: f64) -> Self {
        Self {
            dims,
            data: vec![value.clamp(0.0, 1.0); dims.pixels()],
        }
    }

    pub fn from_data(dims: CanvasDims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.pixels() {
            return Err(Error::InvalidInput(format!(
                "map data length {} does not match {}x{}",
                data.len(),
                dims.height,
                dims.width
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> CanvasDims {
        self.dims
    }

    pub fn height(&self) -> usize {
        self.dims.height
    }

    pub fn width(&self) -> usize {
        self.dims.width
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dims.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.dims.width + col] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Rescale so the maximum becomes 1. Errors on an all-zero map.
    pub fn max_normalized(&self) -> Result<ScalarMap> {
        let m = self.max_value();
        if m <= 0.0 {
            return Err(Error::ZeroGbpMap);
        }
        let mut out = self.clone();
        for v in out.data.iter_mut() {
            *v /= m;
        }
        Ok(out)
    }
}

pub(crate) fn check_dims(a: CanvasDims, b: CanvasDims) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected_h: a.height,
            expected_w: a.width,
            got_h: b.height,
            got_w: b.width,
        });
    }
    Ok(())
}
