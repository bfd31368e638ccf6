//! Python bindings for the sempaint painting engine.
//!
//! Exposes stroke rasterization and the episode engine to Python in-process:
//! build a `PaintEngine` from scene files, then either drive it with your own
//! 13K-float bundles (`step`) or let the built-in search paint (`step_auto`,
//! `paint`).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use sempaint::{
    bezier_point as bezier_point_rs, rasterize_density, scene, BundleTrace, CanvasDims,
    EngineConfig, Episode, SceneAnnotation, StrokeParams, STROKE_DIM,
};

fn err(e: sempaint::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn trace_dict<'py>(py: Python<'py>, trace: &BundleTrace) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("step", trace.step)?;
    d.set_item("instance", trace.instance)?;
    let reward = PyDict::new(py);
    reward.set_item("background", trace.reward.background)?;
    reward.set_item("foreground", trace.reward.foreground)?;
    reward.set_item("focus", trace.reward.focus)?;
    reward.set_item("total", trace.reward.total)?;
    d.set_item("reward", reward)?;
    Ok(d)
}

/// A painting episode over one target image.
///
/// Usage from Python:
///
///     from sempaint_py import PaintEngine
///     engine = PaintEngine("bird.png", mask="bird_mask.png", seed=7)
///     while not engine.is_done():
///         engine.step_auto()
///     open("out.png", "wb").write(engine.observe_png())
#[pyclass]
struct PaintEngine {
    episode: Episode,
}

#[pymethods]
impl PaintEngine {
    /// Load a scene and start an episode on a blank canvas.
    ///
    /// Args:
    ///     target: path to an 8-bit RGB image.
    ///     mask: optional grayscale foreground mask path.
    ///     gbp: optional grayscale importance map path.
    ///     bbox: optional (x, y, w, h) foreground box in pixels.
    ///     instances: optional list of per-instance mask paths.
    ///     config: optional path to a `key = value` config file.
    ///     seed: search seed (overrides the config file).
    #[new]
    #[pyo3(signature = (target, mask=None, gbp=None, bbox=None, instances=None, config=None, seed=None))]
    fn new(
        target: String,
        mask: Option<String>,
        gbp: Option<String>,
        bbox: Option<(f64, f64, f64, f64)>,
        instances: Option<Vec<String>>,
        config: Option<String>,
        seed: Option<u64>,
    ) -> PyResult<Self> {
        let mut cfg = EngineConfig::default();
        if let Some(path) = config {
            cfg.apply_file(path.as_ref()).map_err(err)?;
        }
        if let Some(seed) = seed {
            cfg.optimizer.seed = seed;
        }
        cfg.validate().map_err(err)?;

        let ann = SceneAnnotation {
            target: target.into(),
            mask: mask.map(Into::into),
            gbp: gbp.map(Into::into),
            bbox,
            instances: instances
                .unwrap_or_default()
                .into_iter()
                .map(Into::into)
                .collect(),
        };
        let scene_data = scene::load_scene(&ann, &cfg).map_err(err)?;
        let episode = Episode::new(scene_data, cfg).map_err(err)?;
        Ok(Self { episode })
    }

    /// Canvas size as (height, width).
    fn dims(&self) -> (usize, usize) {
        let d = self.episode.canvas().dims();
        (d.height, d.width)
    }

    /// Length of the flat bundle vector expected by `step` (13 * K).
    fn bundle_len(&self) -> usize {
        self.episode.config().bundle.total() * STROKE_DIM
    }

    /// Bundles painted so far.
    fn step_count(&self) -> usize {
        self.episode.step_count()
    }

    /// Whether the configured episode length has been reached.
    fn is_done(&self) -> bool {
        self.episode.is_done()
    }

    /// Apply an externally chosen bundle (background strokes first, then
    /// foreground, 13 floats each) and return its reward breakdown.
    fn step<'py>(&mut self, py: Python<'py>, bundle: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let trace = self.episode.step_external(&bundle).map_err(err)?;
        trace_dict(py, &trace)
    }

    /// Run the built-in bundle search for one step and apply the result.
    fn step_auto<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let trace = self.episode.step_auto().map_err(err)?;
        trace_dict(py, &trace)
    }

    /// Paint all remaining bundles; returns the per-bundle reward trace.
    fn paint<'py>(&mut self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let mut traces = Vec::new();
        while !self.episode.is_done() {
            let trace = self.episode.step_auto().map_err(err)?;
            traces.push(trace_dict(py, &trace)?);
        }
        Ok(traces)
    }

    /// Current canvas encoded as PNG bytes.
    fn observe_png<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let png = scene::encode_canvas_png(self.episode.canvas()).map_err(err)?;
        Ok(PyBytes::new(py, &png))
    }

    /// Current canvas as a flat row-major H*W*3 float list.
    fn canvas(&self) -> Vec<f64> {
        self.episode.canvas().data().to_vec()
    }

    /// The stroke log so far, one JSON object per line (the same schema as
    /// the CLI's strokes.jsonl).
    fn strokes_jsonl(&self) -> PyResult<String> {
        let mut out = String::new();
        for record in self.episode.strokes() {
            out.push_str(
                &serde_json::to_string(record).map_err(|e| PyValueError::new_err(e.to_string()))?,
            );
            out.push('\n');
        }
        Ok(out)
    }

    fn __repr__(&self) -> String {
        let d = self.episode.canvas().dims();
        format!(
            "PaintEngine({}x{}, step={}/{}, strokes={})",
            d.height,
            d.width,
            self.episode.step_count(),
            self.episode.config().optimizer.episode_len,
            self.episode.strokes().len(),
        )
    }
}

/// Rasterize one stroke's density map.
///
/// `params` is the 13-float stroke vector; returns the flat row-major H*W
/// density values in [0, 1].
#[pyfunction]
#[pyo3(signature = (params, height, width, samples=100))]
fn render_stroke(
    params: Vec<f64>,
    height: usize,
    width: usize,
    samples: usize,
) -> PyResult<Vec<f64>> {
    if params.len() != STROKE_DIM {
        return Err(PyValueError::new_err(format!(
            "expected {STROKE_DIM} stroke parameters, got {}",
            params.len()
        )));
    }
    let mut arr = [0.0; STROKE_DIM];
    arr.copy_from_slice(&params);
    let stroke = StrokeParams::from_array(arr).map_err(err)?;
    let dims = CanvasDims::new(height, width).map_err(err)?;
    let cfg = sempaint::RenderConfig {
        samples,
        ..Default::default()
    };
    cfg.validate().map_err(err)?;
    Ok(rasterize_density(&stroke, dims, &cfg).data().to_vec())
}

/// Evaluate the quadratic Bezier point at parameter u.
#[pyfunction]
fn bezier_point(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64), u: f64) -> (f64, f64) {
    bezier_point_rs(p0, p1, p2, u)
}

#[pymodule]
fn sempaint_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PaintEngine>()?;
    m.add_function(wrap_pyfunction!(render_stroke, m)?)?;
    m.add_function(wrap_pyfunction!(bezier_point, m)?)?;
    Ok(())
}
