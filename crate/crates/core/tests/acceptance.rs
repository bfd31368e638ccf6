//! Acceptance suite: each test prints one pass/fail line and enforces its
//! tolerance. Run with `cargo test --test acceptance -- --nocapture` to see
//! every line.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sempaint::compositor::{
    alpha_over, apply_background_stroke, apply_foreground_stroke, CompositorConfig,
};
use sempaint::painter::select_instance;
use sempaint::rewards::{gbp_distance, total_reward, GbpNorm, RewardMode, RewardWeights};
use sempaint::scene::load_scene;
use sempaint::verify::{
    brute_force_instance_argmax, crop_resize_oracle, random_bbox, random_canvas, random_map,
    random_stroke,
};
use sempaint::{
    bbox_from_mask, rasterize_density, run_episode, smoothness_report, zoom_canvas, zoom_map,
    BBox, Canvas, CanvasDims, EngineConfig, GbpMap, RenderConfig, SceneAnnotation, SceneData,
    ScorerKind, SegMap, SimilarityScorer, StrokeParams,
};

fn report(id: u32, name: &str, passed: bool, detail: &str) {
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("criterion {id:02} {name}: {tag} ({detail})");
    assert!(passed, "criterion {id:02} {name} failed: {detail}");
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn scenes_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/scenes")
}

#[test]
fn criterion_01_rasterizer_oracle() {
    let dims = CanvasDims::new(64, 64).unwrap();
    let production = RenderConfig::default();
    let oracle = RenderConfig {
        samples: production.samples * 10,
        ..production
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let stroke = random_stroke(&mut rng, 0.0, 1.0);
        let a = rasterize_density(&stroke, dims, &production);
        let b = rasterize_density(&stroke, dims, &oracle);
        worst = worst.max(max_abs_diff(a.data(), b.data()));
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        1,
        "rasterizer oracle",
        worst <= 1e-2 && elapsed < 10.0,
        &format!("200 strokes, max |N=100 - N=1000| = {worst:.2e}, {elapsed:.1}s"),
    );
}

#[test]
fn criterion_02_compositing_algebra() {
    let dims = CanvasDims::new(64, 64).unwrap();
    let render = RenderConfig::default();
    let comp = CompositorConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut identity_ok = true;
    for _ in 0..100 {
        let canvas = random_canvas(&mut rng, dims);
        let stroke = random_stroke(&mut rng, 0.0, 1.0);
        let density = rasterize_density(&stroke, dims, &render);
        let reference = alpha_over(&canvas, &density, stroke.color()).unwrap();

        let bg = apply_background_stroke(
            &canvas,
            &stroke,
            &SegMap::filled(dims, 0.0),
            &render,
            &comp,
        )
        .unwrap();
        let fg = apply_foreground_stroke(
            &canvas,
            &stroke,
            &SegMap::filled(dims, 1.0),
            &render,
            &comp,
        )
        .unwrap();
        worst = worst
            .max(max_abs_diff(bg.data(), reference.data()))
            .max(max_abs_diff(fg.data(), reference.data()));

        let noop = apply_foreground_stroke(
            &canvas,
            &StrokeParams::no_op(),
            &SegMap::filled(dims, 0.5),
            &render,
            &comp,
        )
        .unwrap();
        identity_ok &= noop.data() == canvas.data();
    }
    report(
        2,
        "compositing algebra",
        worst <= 1e-9 && identity_ok,
        &format!("100 strokes, max deviation from alpha-over {worst:.2e}, zero-opacity bit-identity {identity_ok}"),
    );
}

#[test]
fn criterion_03_affine_identities() {
    let dims = CanvasDims::new(64, 64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let img = random_canvas(&mut rng, dims);

    let identity = zoom_canvas(&img, &BBox::full(dims), dims).unwrap();
    let id_err = max_abs_diff(identity.data(), img.data());

    let mut conventions = 0.0f64;
    let mut oracle_err = 0.0f64;
    for _ in 0..50 {
        let bbox = random_bbox(&mut rng, dims);
        let base = zoom_canvas(&img, &bbox, dims).unwrap();
        let px = sempaint::align::zoom_canvas_via_pixel_matrix(&img, &bbox, dims).unwrap();
        let nm = sempaint::align::zoom_canvas_via_normalized_matrix(
            &img,
            &bbox.normalized(dims),
            dims,
        )
        .unwrap();
        conventions = conventions
            .max(max_abs_diff(base.data(), px.data()))
            .max(max_abs_diff(base.data(), nm.data()));
        let oracle = crop_resize_oracle(&img, &bbox, dims).unwrap();
        oracle_err = oracle_err.max(max_abs_diff(base.data(), oracle.data()));
    }
    report(
        3,
        "affine identities",
        id_err <= 1e-6 && conventions <= 1e-5 && oracle_err <= 1e-3,
        &format!(
            "identity {id_err:.1e}, conventions {conventions:.2e} (50 boxes), crop+resize oracle {oracle_err:.2e}"
        ),
    );
}

#[test]
fn criterion_04_reward_telescoping() {
    let dims = CanvasDims::new(64, 64).unwrap();
    let mut target = Canvas::filled(dims, 0.15);
    for row in 16..48 {
        for col in 12..52 {
            target.set(row, col, 0, 0.85);
            target.set(row, col, 1, 0.55);
        }
    }
    let mut seg = SegMap::filled(dims, 0.0);
    for row in 16..48 {
        for col in 12..52 {
            seg.set(row, col, 1.0);
        }
    }
    let bbox = bbox_from_mask(&seg, 0.5, 0.05).unwrap();
    let scene = SceneData {
        target: target.clone(),
        seg,
        gbp: GbpMap::filled(dims, 1.0),
        bbox,
        instances: Vec::new(),
    };

    let mut cfg = EngineConfig::default();
    cfg.optimizer.episode_len = 40;
    cfg.optimizer.population = 16;
    cfg.optimizer.generations = 3;
    cfg.optimizer.seed = 23;
    let gbp = scene.gbp.clone();
    let result = run_episode(scene, cfg.clone()).unwrap();

    let scorer = ScorerKind::NegL2.build();
    let initial = Canvas::filled(dims, cfg.init_canvas);
    let net_score = scorer.score(&target, &result.final_canvas).unwrap()
        - scorer.score(&target, &initial).unwrap();
    let sum_bg: f64 = result.trace.iter().map(|t| t.reward.background).sum();
    let bg_err = (sum_bg - net_score).abs() / net_score.abs().max(1e-9);

    let zoom_dims = cfg.zoom_dims(dims);
    let z_gbp = zoom_map(&gbp, &bbox, zoom_dims).unwrap();
    let z_target = zoom_canvas(&target, &bbox, zoom_dims).unwrap();
    let l_of = |canvas: &Canvas| -> f64 {
        let z = zoom_canvas(canvas, &bbox, zoom_dims).unwrap();
        gbp_distance(&z_gbp, &z_target, &z, GbpNorm::Frobenius).unwrap()
    };
    let net_focus = l_of(&initial) - l_of(&result.final_canvas);
    let sum_focus: f64 = result.trace.iter().map(|t| t.reward.focus).sum();
    let focus_err = (sum_focus - net_focus).abs() / net_focus.abs().max(1e-9);

    report(
        4,
        "reward telescoping",
        bg_err <= 1e-6 && focus_err <= 1e-6,
        &format!(
            "40 bundles: background rel err {bg_err:.2e}, focus rel err {focus_err:.2e}"
        ),
    );
}

#[test]
fn criterion_05_total_reward_arithmetic() {
    let weights = RewardWeights::default();
    let b = total_reward(0.1, 0.05, 0.02, &weights, RewardMode::BiLevel);
    report(
        5,
        "total-reward arithmetic",
        b.total == 0.4,
        &format!("0.1 + 2*0.05 + 10*0.02 = {}", b.total),
    );
}

#[test]
fn criterion_06_instance_selection_oracle() {
    let dims = CanvasDims::new(16, 16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut agreements = 0;
    for _ in 0..50 {
        let target = random_canvas(&mut rng, dims);
        let canvas = random_canvas(&mut rng, dims);
        let count = rng.random_range(1..=8);
        let masks: Vec<SegMap> = (0..count).map(|_| random_map(&mut rng, dims)).collect();
        let got = select_instance(&target, &canvas, &masks).unwrap();
        let want = brute_force_instance_argmax(&target, &canvas, &masks);
        if got == want {
            agreements += 1;
        }
    }
    report(
        6,
        "instance selection oracle",
        agreements == 50,
        &format!("{agreements}/50 scenes match the brute-force argmax"),
    );
}

#[test]
fn criterion_07_gradient_smoothness() {
    let dims = CanvasDims::new(64, 64).unwrap();
    let render = RenderConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut flags = 0;
    for _ in 0..50 {
        let stroke = random_stroke(&mut rng, 0.05, 0.95);
        let rep = smoothness_report(&stroke, dims, 1e-5, &render).unwrap();
        flags += rep.flagged();
    }
    report(
        7,
        "gradient smoothness",
        flags == 0,
        &format!("50 interior strokes at eps 1e-5: {flags} flagged parameters"),
    );
}

#[test]
fn criterion_08_desk_scale_painting() {
    let dir = scenes_dir();
    let scenes: [(&str, Vec<&str>); 3] = [
        ("blob", vec![]),
        ("wagon", vec![]),
        ("duo", vec!["duo_instance0.png", "duo_instance1.png"]),
    ];
    let mut detail = String::new();
    let mut ok = true;
    for (name, instances) in scenes {
        let ann = SceneAnnotation {
            target: dir.join(format!("{name}_target.png")),
            mask: Some(dir.join(format!("{name}_mask.png"))),
            gbp: Some(dir.join(format!("{name}_gbp.png"))),
            bbox: None,
            instances: instances.iter().map(|f| dir.join(f)).collect(),
        };
        let mut cfg = EngineConfig::default();
        cfg.optimizer.seed = 5;
        let scene = load_scene(&ann, &cfg).unwrap();
        let target = scene.target.clone();
        let initial = Canvas::filled(target.dims(), cfg.init_canvas);
        let mse_initial = target.mse(&initial).unwrap();

        let start = Instant::now();
        let result = run_episode(scene, cfg).unwrap();
        let elapsed = start.elapsed().as_secs_f64();

        let mse_final = target.mse(&result.final_canvas).unwrap();
        let monotone = result.trace.iter().all(|t| t.reward.background >= 0.0);
        let reduced = mse_final <= 0.5 * mse_initial;
        let in_time = elapsed <= 300.0;
        ok &= monotone && reduced && in_time;
        detail.push_str(&format!(
            "{name}: mse {mse_initial:.4}->{mse_final:.4} ({:.0}% down), monotone {monotone}, {elapsed:.0}s; ",
            100.0 * (1.0 - mse_final / mse_initial)
        ));
    }
    report(8, "desk-scale painting", ok, detail.trim_end_matches("; "));
}

#[test]
fn criterion_09_replay_determinism() {
    let bin = env!("CARGO_BIN_EXE_sempaint");
    let dir = scenes_dir();
    let tmp = tempfile::tempdir().unwrap();
    let config_path = tmp.path().join("fast.cfg");
    std::fs::write(
        &config_path,
        "optimizer.population = 16\noptimizer.generations = 4\noptimizer.episode_len = 6\n",
    )
    .unwrap();

    let paint = |out: &Path| {
        let status = std::process::Command::new(bin)
            .args([
                "paint",
                "--target",
                dir.join("blob_target.png").to_str().unwrap(),
                "--mask",
                dir.join("blob_mask.png").to_str().unwrap(),
                "--gbp",
                dir.join("blob_gbp.png").to_str().unwrap(),
                "--config",
                config_path.to_str().unwrap(),
                "--seed",
                "123",
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    };
    let out1 = tmp.path().join("run1");
    let out2 = tmp.path().join("run2");
    paint(&out1);
    paint(&out2);

    let final1 = std::fs::read(out1.join("final.png")).unwrap();
    let final2 = std::fs::read(out2.join("final.png")).unwrap();
    let repeat_identical = final1 == final2;

    let rendered = tmp.path().join("replayed.png");
    let status = std::process::Command::new(bin)
        .args([
            "render",
            "--strokes",
            out1.join("strokes.jsonl").to_str().unwrap(),
            "--dims",
            "128x128",
            "--mask",
            dir.join("blob_mask.png").to_str().unwrap(),
            "--config",
            config_path.to_str().unwrap(),
            "--out",
            rendered.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let replayed = std::fs::read(&rendered).unwrap();
    let replay_identical = replayed == final1;

    report(
        9,
        "replay determinism",
        repeat_identical && replay_identical,
        &format!("seed-repeat byte-identical {repeat_identical}, paint->render byte-identical {replay_identical}"),
    );
}

#[test]
fn criterion_10_focus_reward_sensitivity() {
    let dims = CanvasDims::new(64, 64).unwrap();
    let mut target = Canvas::filled(dims, 0.25);
    let mut gbp = GbpMap::filled(dims, 0.0);
    for row in 28..32 {
        for col in 36..40 {
            for ch in 0..3 {
                target.set(row, col, ch, 1.0);
            }
            gbp.set(row, col, 1.0);
        }
    }
    let scene = SceneData {
        target: target.clone(),
        seg: SegMap::filled(dims, 1.0),
        gbp: gbp.clone(),
        bbox: BBox::full(dims),
        instances: Vec::new(),
    };

    let run_with_nu = |nu: f64| -> f64 {
        let mut cfg = EngineConfig::default();
        cfg.weights.nu = nu;
        cfg.optimizer.seed = 9;
        cfg.optimizer.episode_len = 10;
        cfg.optimizer.population = 48;
        cfg.optimizer.generations = 12;
        let result = run_episode(scene.clone(), cfg).unwrap();
        gbp_distance(&gbp, &target, &result.final_canvas, GbpNorm::Frobenius).unwrap()
    };

    let with_focus = run_with_nu(10.0);
    let without_focus = run_with_nu(0.0);
    report(
        10,
        "focus-reward sensitivity",
        with_focus < without_focus,
        &format!("final GBP distance: nu=10 -> {with_focus:.4}, nu=0 -> {without_focus:.4}"),
    );
}
