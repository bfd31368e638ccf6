//! Self-check battery: independent oracles for the rasterizer, the affine
//! zoom, the compositing algebra and the instance scheduler, runnable from
//! the `check` subcommand and reused by the acceptance tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::align::{zoom_canvas, zoom_canvas_via_normalized_matrix, zoom_canvas_via_pixel_matrix, BBox};
use crate::canvas::{Canvas, CanvasDims, ScalarMap, SegMap};
use crate::compositor::{alpha_over, apply_background_stroke, apply_foreground_stroke, CompositorConfig};
use crate::config::EngineConfig;
use crate::error::Result;
use crate::painter::select_instance;
use crate::rewards::{total_reward, RewardMode, RewardWeights};
use crate::stroke::{rasterize_density, smoothness_report, RenderConfig, StrokeParams, STROKE_DIM};

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn pass(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: true,
            detail,
        }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: false,
            detail,
        }
    }
}

/// Uniform random stroke with all components in `[lo, hi]`.
pub fn random_stroke(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> StrokeParams {
    let mut v = [0.0; STROKE_DIM];
    for x in v.iter_mut() {
        *x = rng.random_range(lo..=hi);
    }
    StrokeParams::from_array(v).expect("components sampled in range")
}

/// Random canvas with independent uniform pixels.
pub fn random_canvas(rng: &mut ChaCha8Rng, dims: CanvasDims) -> Canvas {
    let data = (0..dims.pixels() * 3).map(|_| rng.random::<f64>()).collect();
    Canvas::from_data(dims, data).expect("buffer sized to dims")
}

/// Random scalar map with independent uniform pixels.
pub fn random_map(rng: &mut ChaCha8Rng, dims: CanvasDims) -> ScalarMap {
    let data = (0..dims.pixels()).map(|_| rng.random::<f64>()).collect();
    ScalarMap::from_data(dims, data).expect("buffer sized to dims")
}

/// Random integer-aligned box inside `dims`, at least 8 pixels on a side.
pub fn random_bbox(rng: &mut ChaCha8Rng, dims: CanvasDims) -> BBox {
    let w = rng.random_range(8..=dims.width) as f64;
    let h = rng.random_range(8..=dims.height) as f64;
    let x = rng.random_range(0..=(dims.width - w as usize)) as f64;
    let y = rng.random_range(0..=(dims.height - h as usize)) as f64;
    BBox::new(x, y, w, h, dims).expect("box constructed inside dims")
}

/// Independent crop-then-resize oracle for the affine zoom.
///
/// Extracts the box region with a one-pixel zero-filled margin, then runs a
/// separable bilinear resize (horizontal pass, then vertical) against the
/// crop. Arithmetic is ordered differently from the production sampler, so
/// agreement is a genuine cross-check of the geometry.
pub fn crop_resize_oracle(img: &Canvas, bbox: &BBox, out: CanvasDims) -> Result<Canvas> {
    bbox.validate_for(img.dims())?;
    let ix0 = bbox.x.floor() as isize - 1;
    let iy0 = bbox.y.floor() as isize - 1;
    let cw = ((bbox.x + bbox.w).ceil() as isize - ix0 + 1) as usize;
    let ch = ((bbox.y + bbox.h).ceil() as isize - iy0 + 1) as usize;

    // Crop with zero fill outside the image.
    let mut crop = vec![0.0f64; ch * cw * 3];
    for row in 0..ch {
        let src_row = iy0 + row as isize;
        if src_row < 0 || src_row >= img.height() as isize {
            continue;
        }
        for col in 0..cw {
            let src_col = ix0 + col as isize;
            if src_col < 0 || src_col >= img.width() as isize {
                continue;
            }
            for c in 0..3 {
                crop[(row * cw + col) * 3 + c] = img.get(src_row as usize, src_col as usize, c);
            }
        }
    }

    let sample_1d = |j: usize, out_len: usize, offset: f64, extent: f64| -> f64 {
        ((j as f64 + 0.5) * extent + offset * out_len as f64) / out_len as f64 - 0.5
    };

    // Horizontal pass: ch rows x out.width columns.
    let off_x = bbox.x - ix0 as f64;
    let mut horiz = vec![0.0f64; ch * out.width * 3];
    for row in 0..ch {
        for j in 0..out.width {
            let s = sample_1d(j, out.width, off_x, bbox.w);
            let f = s.floor();
            let u = s - f;
            let i0 = f as isize;
            for c in 0..3 {
                let at = |col: isize| -> f64 {
                    if col < 0 || col >= cw as isize {
                        0.0
                    } else {
                        crop[(row * cw + col as usize) * 3 + c]
                    }
                };
                horiz[(row * out.width + j) * 3 + c] = at(i0) * (1.0 - u) + at(i0 + 1) * u;
            }
        }
    }

    // Vertical pass: out.height x out.width.
    let off_y = bbox.y - iy0 as f64;
    let mut data = vec![0.0f64; out.height * out.width * 3];
    for i in 0..out.height {
        let s = sample_1d(i, out.height, off_y, bbox.h);
        let f = s.floor();
        let u = s - f;
        let r0 = f as isize;
        for j in 0..out.width {
            for c in 0..3 {
                let at = |row: isize| -> f64 {
                    if row < 0 || row >= ch as isize {
                        0.0
                    } else {
                        horiz[(row as usize * out.width + j) * 3 + c]
                    }
                };
                data[(i * out.width + j) * 3 + c] = at(r0) * (1.0 - u) + at(r0 + 1) * u;
            }
        }
    }
    Canvas::from_data(out, data)
}

/// Brute-force reference for the instance scheduler: evaluate the Frobenius
/// norm of every masked difference and take the argmax, lowest index first.
pub fn brute_force_instance_argmax(
    target: &Canvas,
    canvas: &Canvas,
    masks: &[SegMap],
) -> usize {
    let mut scores = Vec::with_capacity(masks.len());
    for mask in masks {
        let mut sq = 0.0;
        for row in 0..target.height() {
            for col in 0..target.width() {
                let m = mask.get(row, col);
                for c in 0..3 {
                    let d = m * (target.get(row, col, c) - canvas.get(row, col, c));
                    sq += d * d;
                }
            }
        }
        scores.push(sq.sqrt());
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn check_rasterizer_oracle(cfg: &EngineConfig, rng: &mut ChaCha8Rng, strokes: usize) -> CheckOutcome {
    let dims = CanvasDims::new(64, 64).unwrap();
    let fine = RenderConfig {
        samples: cfg.render.samples * 10,
        ..cfg.render
    };
    let mut worst = 0.0f64;
    for _ in 0..strokes {
        let stroke = random_stroke(rng, 0.0, 1.0);
        let a = rasterize_density(&stroke, dims, &cfg.render);
        let b = rasterize_density(&stroke, dims, &fine);
        worst = worst.max(max_abs_diff(a.data(), b.data()));
    }
    let detail = format!("{strokes} strokes, max |production - 10x oracle| = {worst:.3e}");
    if worst <= 1e-2 {
        CheckOutcome::pass("rasterizer sample-count oracle", detail)
    } else {
        CheckOutcome::fail("rasterizer sample-count oracle", detail)
    }
}

fn check_smoothness(cfg: &EngineConfig, rng: &mut ChaCha8Rng, strokes: usize) -> CheckOutcome {
    let dims = CanvasDims::new(64, 64).unwrap();
    let mut flagged = 0usize;
    let mut detail = String::new();
    for _ in 0..strokes {
        let stroke = random_stroke(rng, 0.05, 0.95);
        match smoothness_report(&stroke, dims, 1e-5, &cfg.render) {
            Ok(report) => {
                if report.flagged() > 0 {
                    flagged += report.flagged();
                    for e in report.entries.iter().filter(|e| e.flagged) {
                        detail.push_str(&format!(
                            "{}: {:.3e} vs {:.3e}; ",
                            e.name, e.coarse, e.fine
                        ));
                    }
                }
            }
            Err(e) => return CheckOutcome::fail("gradient smoothness", e.to_string()),
        }
    }
    if flagged == 0 {
        CheckOutcome::pass(
            "gradient smoothness",
            format!("{strokes} interior strokes, 0 flagged parameters"),
        )
    } else {
        CheckOutcome::fail(
            "gradient smoothness",
            format!("{flagged} flagged: {detail}"),
        )
    }
}

fn check_affine(rng: &mut ChaCha8Rng, boxes: usize) -> CheckOutcome {
    let dims = CanvasDims::new(64, 64).unwrap();
    let img = random_canvas(rng, dims);

    let identity = zoom_canvas(&img, &BBox::full(dims), dims).unwrap();
    let id_err = max_abs_diff(identity.data(), img.data());
    if id_err > 1e-6 {
        return CheckOutcome::fail(
            "affine identities",
            format!("full-box zoom not identity: {id_err:.3e}"),
        );
    }

    let mut worst_convention = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for _ in 0..boxes {
        let bbox = random_bbox(rng, dims);
        let base = zoom_canvas(&img, &bbox, dims).unwrap();
        let px = zoom_canvas_via_pixel_matrix(&img, &bbox, dims).unwrap();
        let nm =
            zoom_canvas_via_normalized_matrix(&img, &bbox.normalized(dims), dims).unwrap();
        worst_convention = worst_convention
            .max(max_abs_diff(base.data(), px.data()))
            .max(max_abs_diff(base.data(), nm.data()));
        let oracle = crop_resize_oracle(&img, &bbox, dims).unwrap();
        worst_oracle = worst_oracle.max(max_abs_diff(base.data(), oracle.data()));
    }
    let detail = format!(
        "identity {id_err:.1e}, conventions {worst_convention:.3e}, crop+resize oracle {worst_oracle:.3e}"
    );
    if worst_convention <= 1e-5 && worst_oracle <= 1e-3 {
        CheckOutcome::pass("affine identities", detail)
    } else {
        CheckOutcome::fail("affine identities", detail)
    }
}

fn check_compositing(cfg: &EngineConfig, rng: &mut ChaCha8Rng, strokes: usize) -> CheckOutcome {
    let dims = CanvasDims::new(32, 32).unwrap();
    let comp = CompositorConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..strokes {
        let canvas = random_canvas(rng, dims);
        let stroke = random_stroke(rng, 0.0, 1.0);
        let density = rasterize_density(&stroke, dims, &cfg.render);
        let reference = alpha_over(&canvas, &density, stroke.color()).unwrap();

        let bg = apply_background_stroke(
            &canvas,
            &stroke,
            &SegMap::filled(dims, 0.0),
            &cfg.render,
            &comp,
        )
        .unwrap();
        let fg = apply_foreground_stroke(
            &canvas,
            &stroke,
            &SegMap::filled(dims, 1.0),
            &cfg.render,
            &comp,
        )
        .unwrap();
        worst = worst
            .max(max_abs_diff(bg.data(), reference.data()))
            .max(max_abs_diff(fg.data(), reference.data()));

        let noop = apply_background_stroke(
            &canvas,
            &StrokeParams::no_op(),
            &SegMap::filled(dims, 0.5),
            &cfg.render,
            &comp,
        )
        .unwrap();
        if noop.data() != canvas.data() {
            return CheckOutcome::fail(
                "compositing algebra",
                "zero-opacity stroke not bit-identity".into(),
            );
        }
    }
    let detail = format!("{strokes} strokes, max deviation from alpha-over {worst:.3e}");
    if worst <= 1e-9 {
        CheckOutcome::pass("compositing algebra", detail)
    } else {
        CheckOutcome::fail("compositing algebra", detail)
    }
}

fn check_instance_argmax(rng: &mut ChaCha8Rng, scenes: usize) -> CheckOutcome {
    let dims = CanvasDims::new(16, 16).unwrap();
    for i in 0..scenes {
        let target = random_canvas(rng, dims);
        let canvas = random_canvas(rng, dims);
        let count = rng.random_range(1..=8);
        let masks: Vec<SegMap> = (0..count).map(|_| random_map(rng, dims)).collect();
        let got = select_instance(&target, &canvas, &masks).unwrap();
        let want = brute_force_instance_argmax(&target, &canvas, &masks);
        if got != want {
            return CheckOutcome::fail(
                "instance selection oracle",
                format!("scene {i}: got {got}, brute force {want}"),
            );
        }
    }
    CheckOutcome::pass(
        "instance selection oracle",
        format!("{scenes} random scenes agree with brute force"),
    )
}

fn check_reward_arithmetic() -> CheckOutcome {
    let w = RewardWeights::default();
    let b = total_reward(0.1, 0.05, 0.02, &w, RewardMode::BiLevel);
    let bilevel_ok = (b.total - 0.4).abs() < 1e-12;
    let w_ablation = RewardWeights {
        kappa: 5.0,
        ..RewardWeights::default()
    };
    let a = total_reward(0.1, 0.0, 0.02, &w_ablation, RewardMode::Ablation);
    let ablation_ok = (a.total - 0.2).abs() < 1e-12;
    if bilevel_ok && ablation_ok {
        CheckOutcome::pass(
            "reward arithmetic",
            format!("bi-level total {} / ablation total {}", b.total, a.total),
        )
    } else {
        CheckOutcome::fail(
            "reward arithmetic",
            format!("bi-level total {} / ablation total {}", b.total, a.total),
        )
    }
}

/// Run the full battery with the given seed. Each outcome carries a pass flag
/// and a one-line detail.
pub fn run_battery(cfg: &EngineConfig, seed: u64) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        check_rasterizer_oracle(cfg, &mut rng, 25),
        check_smoothness(cfg, &mut rng, 12),
        check_affine(&mut rng, 20),
        check_compositing(cfg, &mut rng, 20),
        check_instance_argmax(&mut rng, 20),
        check_reward_arithmetic(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes_with_defaults() {
        let outcomes = run_battery(&EngineConfig::default(), 17);
        for o in &outcomes {
            assert!(o.passed, "{}: {}", o.name, o.detail);
        }
    }

    #[test]
    fn gradient_image_zoom_matches_oracle_tightly() {
        let dims = CanvasDims::new(64, 64).unwrap();
        let mut img = Canvas::filled(dims, 0.0);
        for row in 0..64 {
            for col in 0..64 {
                img.set(row, col, 0, row as f64 / 63.0);
                img.set(row, col, 1, col as f64 / 63.0);
                img.set(row, col, 2, (row + col) as f64 / 126.0);
            }
        }
        let bbox = BBox::new(16.0, 16.0, 32.0, 32.0, dims).unwrap();
        let out = zoom_canvas(&img, &bbox, dims).unwrap();
        let oracle = crop_resize_oracle(&img, &bbox, dims).unwrap();
        let diff = max_abs_diff(out.data(), oracle.data());
        assert!(diff <= 1e-5, "gradient-image zoom vs oracle: {diff:.3e}");
    }
}
