//! Scene ingestion and file boundaries: PNG decode/encode, annotation
//! handling and JSON-lines stroke/reward logs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::ImageReader;

use crate::align::{bbox_from_mask, BBox};
use crate::canvas::{Canvas, CanvasDims, GbpMap, ScalarMap, SegMap};
use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::painter::{BundleTrace, SceneData, StrokeRecord};

/// Pointers to a scene's files: the target image plus optional mask, GBP map,
/// bounding box and per-instance masks.
#[derive(Debug, Clone, Default)]
pub struct SceneAnnotation {
    pub target: PathBuf,
    pub mask: Option<PathBuf>,
    pub gbp: Option<PathBuf>,
    /// Pixel coordinates `(x, y, w, h)`.
    pub bbox: Option<(f64, f64, f64, f64)>,
    pub instances: Vec<PathBuf>,
}

impl SceneAnnotation {
    pub fn for_target(target: impl Into<PathBuf>) -> Self {
        Self {
            target: target.into(),
            ..Self::default()
        }
    }
}

/// Decode an 8-bit RGB image into a unit-range canvas.
pub fn load_canvas(path: &Path) -> Result<Canvas> {
    let img = ImageReader::open(path)?.decode()?.to_rgb8();
    let dims = CanvasDims::new(img.height() as usize, img.width() as usize)?;
    let data = img.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
    Canvas::from_data(dims, data)
}

/// Decode a grayscale image into a unit-range scalar map.
pub fn load_map(path: &Path) -> Result<ScalarMap> {
    let img = ImageReader::open(path)?.decode()?.to_luma8();
    let dims = CanvasDims::new(img.height() as usize, img.width() as usize)?;
    let data = img.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
    ScalarMap::from_data(dims, data)
}

/// Assemble the episode inputs from annotation files.
///
/// A missing mask degenerates to single-level painting (`S = 1` everywhere,
/// with a warning); a missing GBP map means uniform importance; a missing
/// bounding box is derived from the mask, or spans the full image.
pub fn load_scene(ann: &SceneAnnotation, cfg: &EngineConfig) -> Result<SceneData> {
    let target = load_canvas(&ann.target)?;
    let dims = target.dims();

    let seg: SegMap = match &ann.mask {
        Some(path) => {
            let mask = load_map(path)?;
            crate::canvas::check_dims(dims, mask.dims())?;
            mask
        }
        None => {
            log::warn!(
                "{}: no mask given, painting single-level with S = 1",
                ann.target.display()
            );
            SegMap::filled(dims, 1.0)
        }
    };

    let gbp: GbpMap = match &ann.gbp {
        Some(path) => {
            let raw = load_map(path)?;
            crate::canvas::check_dims(dims, raw.dims())?;
            raw.max_normalized()?
        }
        None => GbpMap::filled(dims, 1.0),
    };

    let bbox = match ann.bbox {
        Some((x, y, w, h)) => BBox::new(x, y, w, h, dims)?,
        None => {
            if ann.mask.is_some() {
                bbox_from_mask(&seg, cfg.mask_threshold, cfg.pad_frac)?
            } else {
                BBox::full(dims)
            }
        }
    };

    let instances = ann
        .instances
        .iter()
        .map(|path| {
            let mask = load_map(path)?;
            crate::canvas::check_dims(dims, mask.dims())?;
            Ok(mask)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SceneData {
        target,
        seg,
        gbp,
        bbox,
        instances,
    })
}

/// Quantize a canvas to 8-bit RGB with round-to-nearest.
pub fn canvas_to_rgb8(canvas: &Canvas) -> image::RgbImage {
    let (h, w) = (canvas.height() as u32, canvas.width() as u32);
    image::RgbImage::from_fn(w, h, |x, y| {
        let px = |ch: usize| -> u8 {
            (canvas.get(y as usize, x as usize, ch).clamp(0.0, 1.0) * 255.0).round() as u8
        };
        image::Rgb([px(0), px(1), px(2)])
    })
}

pub fn save_canvas_png(canvas: &Canvas, path: &Path) -> Result<()> {
    canvas_to_rgb8(canvas).save(path)?;
    Ok(())
}

/// PNG-encode a canvas in memory (for the environment protocol's `observe`).
pub fn encode_canvas_png(canvas: &Canvas) -> Result<Vec<u8>> {
    let img = canvas_to_rgb8(canvas);
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)?;
    Ok(buf.into_inner())
}

/// Write one JSON object per stroke.
pub fn write_stroke_log(records: &[StrokeRecord], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_stroke_log(path: &Path) -> Result<Vec<StrokeRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: StrokeRecord = serde_json::from_str(&line).map_err(|e| {
            Error::Scene(format!("stroke log line {}: {e}", lineno + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Write one JSON object per bundle.
pub fn write_reward_trace(trace: &[BundleTrace], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for entry in trace {
        serde_json::to_writer(&mut out, entry)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compositor::StrokeRole;
    use crate::rewards::RewardBreakdown;

    #[test]
    fn stroke_log_round_trip_is_lossless() {
        let records: Vec<StrokeRecord> = (0..7)
            .map(|i| StrokeRecord {
                step: i,
                role: if i % 2 == 0 {
                    StrokeRole::Background
                } else {
                    StrokeRole::Foreground
                },
                instance: i % 3,
                params: std::array::from_fn(|j| {
                    ((i * 13 + j) as f64 / 97.0).fract()
                }),
                reward: RewardBreakdown {
                    background: 0.1 / (i + 1) as f64,
                    foreground: -0.3e-9,
                    focus: 1.0 / 3.0,
                    total: 0.123456789123456789,
                },
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("strokes.jsonl");
        write_stroke_log(&records, &path).unwrap();
        let back = read_stroke_log(&path).unwrap();
        assert_eq!(records, back);
    }

    #[test]
    fn png_round_trip_quantizes_once() {
        let dims = CanvasDims::new(16, 16).unwrap();
        let mut canvas = Canvas::filled(dims, 0.0);
        for row in 0..16 {
            for col in 0..16 {
                for ch in 0..3 {
                    canvas.set(row, col, ch, ((row * 16 + col + ch) as f64 / 300.0).min(1.0));
                }
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        save_canvas_png(&canvas, &path).unwrap();
        let decoded = load_canvas(&path).unwrap();
        // Re-encoding the decoded image must be exact: quantization happens
        // only once.
        let reencoded = canvas_to_rgb8(&decoded);
        assert_eq!(canvas_to_rgb8(&canvas).as_raw(), reencoded.as_raw());
    }

    #[test]
    fn scene_defaults_without_annotations() {
        let dims = CanvasDims::new(32, 32).unwrap();
        let canvas = Canvas::filled(dims, 0.5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        save_canvas_png(&canvas, &path).unwrap();

        let scene = load_scene(
            &SceneAnnotation::for_target(&path),
            &EngineConfig::default(),
        )
        .unwrap();
        assert!(scene.seg.data().iter().all(|&v| v == 1.0));
        assert!(scene.gbp.data().iter().all(|&v| v == 1.0));
        assert_eq!(scene.bbox, BBox::full(dims));
        assert!(scene.instances.is_empty());
    }

    #[test]
    fn scene_derives_bbox_from_mask() {
        let dims = CanvasDims::new(32, 32).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let target_path = dir.path().join("t.png");
        save_canvas_png(&Canvas::filled(dims, 0.2), &target_path).unwrap();

        let mut mask = SegMap::filled(dims, 0.0);
        for row in 10..20 {
            for col in 6..14 {
                mask.set(row, col, 1.0);
            }
        }
        let mask_path = dir.path().join("m.png");
        let img = image::GrayImage::from_fn(32, 32, |x, y| {
            image::Luma([if mask.get(y as usize, x as usize) > 0.5 {
                255
            } else {
                0
            }])
        });
        img.save(&mask_path).unwrap();

        let cfg = EngineConfig::default();
        let ann = SceneAnnotation {
            target: target_path,
            mask: Some(mask_path),
            ..Default::default()
        };
        let scene = load_scene(&ann, &cfg).unwrap();
        let expected = bbox_from_mask(&scene.seg, cfg.mask_threshold, cfg.pad_frac).unwrap();
        assert_eq!(scene.bbox, expected);
    }

    #[test]
    fn mismatched_mask_dims_fail() {
        let dir = tempfile::tempdir().unwrap();
        let target_path = dir.path().join("t.png");
        save_canvas_png(
            &Canvas::filled(CanvasDims::new(32, 32).unwrap(), 0.2),
            &target_path,
        )
        .unwrap();
        let mask_path = dir.path().join("m.png");
        image::GrayImage::new(16, 16).save(&mask_path).unwrap();

        let ann = SceneAnnotation {
            target: target_path,
            mask: Some(mask_path),
            ..Default::default()
        };
        assert!(load_scene(&ann, &EngineConfig::default()).is_err());
    }

    #[test]
    fn all_zero_gbp_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let target_path = dir.path().join("t.png");
        save_canvas_png(
            &Canvas::filled(CanvasDims::new(16, 16).unwrap(), 0.2),
            &target_path,
        )
        .unwrap();
        let gbp_path = dir.path().join("g.png");
        image::GrayImage::new(16, 16).save(&gbp_path).unwrap();

        let ann = SceneAnnotation {
            target: target_path,
            gbp: Some(gbp_path),
            ..Default::default()
        };
        assert!(matches!(
            load_scene(&ann, &EngineConfig::default()),
            Err(Error::ZeroGbpMap)
        ));
    }
}
