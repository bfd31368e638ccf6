#!/usr/bin/env python3
"""Smoke test for the sempaint_py extension module.

Builds the cdylib if needed, imports it, and exercises the main surface:
stroke rasterization, external steps, the built-in search, PNG observation
and determinism. Exits nonzero on any failure.
"""

import io
import shutil
import subprocess
import sys
import tempfile
import os

import numpy as np
from PIL import Image

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def build_and_import():
    lib = os.path.join(REPO, "target", "release", "libsempaint_py.so")
    if not os.path.exists(lib):
        subprocess.run(
            ["cargo", "build", "--release", "-p", "sempaint-py"],
            cwd=REPO,
            check=True,
        )
    stage = tempfile.mkdtemp(prefix="sempaint_py_")
    shutil.copy(lib, os.path.join(stage, "sempaint_py.so"))
    sys.path.insert(0, stage)
    import sempaint_py

    return sempaint_py


def make_scene(tmp):
    size = 64
    ys, xs = np.mgrid[0:size, 0:size] / (size - 1)
    target = np.zeros((size, size, 3))
    target[..., 0] = 0.2 + 0.3 * ys
    target[..., 1] = 0.3
    target[..., 2] = 0.6 - 0.3 * xs
    blob = (xs - 0.5) ** 2 + (ys - 0.5) ** 2 <= 0.08
    target[blob] = [0.9, 0.6, 0.1]

    target_path = os.path.join(tmp, "target.png")
    mask_path = os.path.join(tmp, "mask.png")
    Image.fromarray((target * 255).round().astype(np.uint8)).save(target_path)
    Image.fromarray((blob * 255).astype(np.uint8)).save(mask_path)
    return target_path, mask_path


def main():
    sempaint_py = build_and_import()
    print(f"imported sempaint_py {sempaint_py.__version__}")

    # Bezier endpoints are interpolated exactly.
    assert sempaint_py.bezier_point((0.1, 0.2), (0.5, 0.9), (0.8, 0.3), 0.0) == (0.1, 0.2)
    assert sempaint_py.bezier_point((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), 0.5) == (0.5, 0.25)
    print("PASS bezier_point")

    # A centered full-opacity dot covers the canvas center.
    dot = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 1.0, 1.0, 0.5, 0.5, 1.0, 0.0, 0.0]
    density = np.array(sempaint_py.render_stroke(dot, 64, 64)).reshape(64, 64)
    assert density[32, 32] == 1.0 and density[0, 0] == 0.0
    assert 0.0 <= density.min() and density.max() <= 1.0
    print("PASS render_stroke")

    tmp = tempfile.mkdtemp(prefix="sempaint_scene_")
    target_path, mask_path = make_scene(tmp)

    # A config to keep the smoke test fast.
    config_path = os.path.join(tmp, "fast.cfg")
    with open(config_path, "w") as f:
        f.write("optimizer.population = 16\n")
        f.write("optimizer.generations = 4\n")
        f.write("optimizer.episode_len = 3\n")

    engine = sempaint_py.PaintEngine(
        target_path, mask=mask_path, config=config_path, seed=7
    )
    assert engine.dims() == (64, 64)
    assert engine.bundle_len() == 5 * 13

    # Zero-opacity bundle: every reward component is exactly zero.
    noop = ([0.5] * 6 + [0.0, 0.0, 0.0, 0.0] + [0.0] * 3) * 5
    result = engine.step(noop)
    assert result["reward"] == {
        "background": 0.0,
        "foreground": 0.0,
        "focus": 0.0,
        "total": 0.0,
    }, result
    print("PASS zero-opacity step")

    # The built-in search never regresses canvas similarity.
    while not engine.is_done():
        result = engine.step_auto()
        assert result["reward"]["background"] >= 0.0, result
    print(f"PASS auto painting ({engine.step_count()} bundles)")

    png = engine.observe_png()
    img = Image.open(io.BytesIO(bytes(png)))
    assert img.size == (64, 64)
    print("PASS observe_png")

    log = engine.strokes_jsonl()
    assert len(log.strip().splitlines()) == engine.step_count() * 5
    canvas = np.array(engine.canvas())
    assert canvas.shape == (64 * 64 * 3,)
    assert 0.0 <= canvas.min() and canvas.max() <= 1.0

    # Same seed, same scene: bit-identical canvases.
    twin = sempaint_py.PaintEngine(
        target_path, mask=mask_path, config=config_path, seed=7
    )
    twin.step(noop)
    twin.paint()
    assert bytes(twin.observe_png()) == bytes(png)
    print("PASS determinism")

    print("smoke test OK")


if __name__ == "__main__":
    main()
