//! Command-line interface: `paint`, `render`, `env` and `check`.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use base64::Engine as _;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::canvas::CanvasDims;
use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::painter::{run_episode_with, Episode};
use crate::scene::{
    encode_canvas_png, load_map, load_scene, read_stroke_log, save_canvas_png, write_reward_trace,
    write_stroke_log, SceneAnnotation,
};

#[derive(Parser)]
#[command(name = "sempaint", version, about = "Semantic-guided stroke painting engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Paint a target image and write the canvas, stroke log and reward trace.
    Paint {
        /// Target image (8-bit RGB PNG).
        #[arg(long)]
        target: PathBuf,
        /// Foreground mask (grayscale PNG).
        #[arg(long)]
        mask: Option<PathBuf>,
        /// GBP importance map (grayscale PNG).
        #[arg(long)]
        gbp: Option<PathBuf>,
        /// Foreground box as `x,y,w,h` pixel coordinates.
        #[arg(long)]
        bbox: Option<String>,
        /// Comma-separated per-instance mask paths.
        #[arg(long, value_delimiter = ',')]
        instances: Vec<PathBuf>,
        /// Config file (flat `key = value` lines).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Random seed (overrides `optimizer.seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a stroke log onto a blank canvas.
    Render {
        /// Stroke log written by `paint` (JSON lines).
        #[arg(long)]
        strokes: PathBuf,
        /// Canvas size as `HxW`.
        #[arg(long)]
        dims: String,
        /// Foreground mask used when painting.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Per-instance masks for multi-instance logs.
        #[arg(long, value_delimiter = ',')]
        instances: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output PNG path.
        #[arg(long)]
        out: PathBuf,
    },
    /// JSON-lines episode protocol on stdin/stdout for external agents.
    Env,
    /// Run the self-check battery; nonzero exit on any failure.
    Check {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Entry point; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Paint {
            target,
            mask,
            gbp,
            bbox,
            instances,
            config,
            seed,
            out,
        } => {
            let cfg = build_config(config.as_deref(), seed)?;
            let ann = SceneAnnotation {
                target,
                mask,
                gbp,
                bbox: bbox.as_deref().map(parse_bbox).transpose()?,
                instances,
            };
            paint(&ann, cfg, &out)?;
            Ok(0)
        }
        Command::Render {
            strokes,
            dims,
            mask,
            instances,
            config,
            out,
        } => {
            let cfg = build_config(config.as_deref(), None)?;
            render(&strokes, &dims, mask.as_deref(), &instances, cfg, &out)?;
            Ok(0)
        }
        Command::Env => {
            let stdin = std::io::stdin();
            let stdout = std::io::stdout();
            env_loop(stdin.lock(), stdout.lock())?;
            Ok(0)
        }
        Command::Check { config, seed } => {
            let cfg = build_config(config.as_deref(), None)?;
            let outcomes = crate::verify::run_battery(&cfg, seed);
            let mut failed = 0;
            for o in &outcomes {
                let tag = if o.passed { "PASS" } else { "FAIL" };
                println!("{tag} {} - {}", o.name, o.detail);
                if !o.passed {
                    failed += 1;
                }
            }
            Ok(if failed == 0 { 0 } else { 1 })
        }
    }
}

fn build_config(path: Option<&Path>, seed: Option<u64>) -> Result<EngineConfig> {
    let mut cfg = EngineConfig::default();
    if let Some(path) = path {
        cfg.apply_file(path)?;
    }
    if let Some(seed) = seed {
        cfg.optimizer.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_bbox(text: &str) -> Result<(f64, f64, f64, f64)> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidInput(format!("bad bbox `{text}`, expected x,y,w,h")))?;
    if parts.len() != 4 {
        return Err(Error::InvalidInput(format!(
            "bad bbox `{text}`, expected 4 comma-separated values"
        )));
    }
    Ok((parts[0], parts[1], parts[2], parts[3]))
}

fn parse_dims(text: &str) -> Result<CanvasDims> {
    let (h, w) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::InvalidInput(format!("bad dims `{text}`, expected HxW")))?;
    let h = h.trim().parse::<usize>();
    let w = w.trim().parse::<usize>();
    match (h, w) {
        (Ok(h), Ok(w)) => CanvasDims::new(h, w),
        _ => Err(Error::InvalidInput(format!(
            "bad dims `{text}`, expected HxW"
        ))),
    }
}

fn paint(ann: &SceneAnnotation, cfg: EngineConfig, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let scene = load_scene(ann, &cfg)?;
    let per_bundle = cfg.bundle.total();

    let mut pending: Vec<usize> = cfg.checkpoints.clone();
    pending.sort_unstable();
    pending.dedup();
    let mut saves: Vec<(usize, PathBuf)> = Vec::new();

    let result = run_episode_with(scene, cfg.clone(), |step, canvas, _trace| {
        let strokes_done = step * per_bundle;
        while let Some(&next) = pending.first() {
            if strokes_done < next {
                break;
            }
            pending.remove(0);
            let path = out_dir.join(format!("canvas_{next:04}.png"));
            if save_canvas_png(canvas, &path).is_ok() {
                saves.push((next, path));
            }
        }
    })?;

    save_canvas_png(&result.final_canvas, &out_dir.join("final.png"))?;
    write_stroke_log(&result.strokes, &out_dir.join("strokes.jsonl"))?;
    write_reward_trace(&result.trace, &out_dir.join("rewards.jsonl"))?;

    let improvement: f64 = result.trace.iter().map(|t| t.reward.background).sum();
    println!(
        "painted {} bundles ({} strokes); net canvas score gain {improvement:.6}; {} checkpoints",
        result.trace.len(),
        result.strokes.len(),
        saves.len()
    );
    Ok(())
}

fn render(
    strokes_path: &Path,
    dims_text: &str,
    mask: Option<&Path>,
    instances: &[PathBuf],
    cfg: EngineConfig,
    out: &Path,
) -> Result<()> {
    let records = read_stroke_log(strokes_path)?;
    let dims = parse_dims(dims_text)?;
    let seg = match mask {
        Some(path) => {
            let m = load_map(path)?;
            crate::canvas::check_dims(dims, m.dims())?;
            m
        }
        None => crate::canvas::SegMap::filled(dims, 1.0),
    };
    let instance_maps = instances
        .iter()
        .map(|p| {
            let m = load_map(p)?;
            crate::canvas::check_dims(dims, m.dims())?;
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    let canvas = crate::painter::replay(&records, dims, &seg, &instance_maps, &cfg)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    save_canvas_png(&canvas, out)?;
    println!("replayed {} strokes onto {dims_text}", records.len());
    Ok(())
}

// One JSON object per request line, one JSON response line each.
fn env_loop<R: BufRead, W: Write>(input: R, mut output: W) -> Result<()> {
    let mut episode: Option<Episode> = None;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Value>(&line) {
            Ok(request) => handle_request(&request, &mut episode),
            Err(e) => json!({"ok": false, "error": format!("bad request: {e}")}),
        };
        serde_json::to_writer(&mut output, &response)?;
        writeln!(output)?;
        output.flush()?;
    }
    Ok(())
}

fn handle_request(request: &Value, episode: &mut Option<Episode>) -> Value {
    match request.get("cmd").and_then(Value::as_str) {
        Some("reset") => match env_reset(request) {
            Ok(ep) => {
                let dims = ep.canvas().dims();
                *episode = Some(ep);
                json!({"ok": true, "dims": {"height": dims.height, "width": dims.width}})
            }
            Err(e) => json!({"ok": false, "error": e.to_string()}),
        },
        Some("step") => match episode.as_mut() {
            Some(ep) => match env_step(request, ep) {
                Ok(v) => v,
                Err(e) => json!({"ok": false, "error": e.to_string()}),
            },
            None => json!({"ok": false, "error": "no episode: send reset first"}),
        },
        Some("observe") => match episode.as_ref() {
            Some(ep) => match encode_canvas_png(ep.canvas()) {
                Ok(png) => {
                    let b64 = base64::engine::general_purpose::STANDARD.encode(png);
                    json!({"ok": true, "canvas": b64})
                }
                Err(e) => json!({"ok": false, "error": e.to_string()}),
            },
            None => json!({"ok": false, "error": "no episode: send reset first"}),
        },
        Some(other) => json!({"ok": false, "error": format!("unknown cmd `{other}`")}),
        None => json!({"ok": false, "error": "missing `cmd` field"}),
    }
}

fn env_reset(request: &Value) -> Result<Episode> {
    let get_path = |key: &str| -> Option<PathBuf> {
        request.get(key).and_then(Value::as_str).map(PathBuf::from)
    };
    let target = get_path("target")
        .ok_or_else(|| Error::InvalidInput("reset requires `target`".into()))?;

    let bbox = match request.get("bbox") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(parse_bbox(s)?),
        Some(Value::Array(arr)) if arr.len() == 4 => {
            let mut vals = [0.0f64; 4];
            for (i, v) in arr.iter().enumerate() {
                vals[i] = v
                    .as_f64()
                    .ok_or_else(|| Error::InvalidInput("bbox entries must be numbers".into()))?;
            }
            Some((vals[0], vals[1], vals[2], vals[3]))
        }
        Some(_) => {
            return Err(Error::InvalidInput(
                "bbox must be `x,y,w,h` or a 4-number array".into(),
            ))
        }
    };

    let instances = match request.get("instances") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(arr)) => arr
            .iter()
            .map(|v| {
                v.as_str().map(PathBuf::from).ok_or_else(|| {
                    Error::InvalidInput("instances must be path strings".into())
                })
            })
            .collect::<Result<Vec<_>>>()?,
        Some(_) => {
            return Err(Error::InvalidInput(
                "instances must be an array of paths".into(),
            ))
        }
    };

    let config_path = get_path("config");
    let seed = request.get("seed").and_then(Value::as_u64);
    let cfg = build_config(config_path.as_deref(), seed)?;

    let ann = SceneAnnotation {
        target,
        mask: get_path("mask"),
        gbp: get_path("gbp"),
        bbox,
        instances,
    };
    let scene = load_scene(&ann, &cfg)?;
    Episode::new(scene, cfg)
}

fn env_step(request: &Value, episode: &mut Episode) -> Result<Value> {
    let bundle = request
        .get("bundle")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::InvalidInput("step requires a `bundle` array".into()))?;
    let flat: Vec<f64> = bundle
        .iter()
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| Error::InvalidInput("bundle entries must be numbers".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    let trace = episode.step_external(&flat)?;
    Ok(json!({
        "reward": {
            "background": trace.reward.background,
            "foreground": trace.reward.foreground,
            "focus": trace.reward.focus,
            "total": trace.reward.total,
        },
        "step": trace.step + 1,
        "instance": trace.instance,
        "done": episode.is_done(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bbox_and_dims_parsing() {
        assert_eq!(parse_bbox("1, 2,3,4").unwrap(), (1.0, 2.0, 3.0, 4.0));
        assert!(parse_bbox("1,2,3").is_err());
        assert!(parse_bbox("a,b,c,d").is_err());
        let d = parse_dims("64x128").unwrap();
        assert_eq!((d.height, d.width), (64, 128));
        assert!(parse_dims("64").is_err());
    }

    #[test]
    fn env_requires_reset_before_step() {
        let input = b"{\"cmd\":\"step\",\"bundle\":[]}\n{\"cmd\":\"nope\"}\nnot json\n" as &[u8];
        let mut out = Vec::new();
        env_loop(input, &mut out).unwrap();
        let lines: Vec<&str> = std::str::from_utf8(&out).unwrap().trim().lines().collect();
        assert_eq!(lines.len(), 3);
        for line in lines {
            let v: Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["ok"], Value::Bool(false));
        }
    }
}
