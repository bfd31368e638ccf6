#!/usr/bin/env python3
"""Generate the bundled 128x128 test scenes under assets/scenes/.

Every map is computed from closed-form expressions, so regenerating the
files is fully deterministic.
"""

import os

import numpy as np
from PIL import Image

SIZE = 128
OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "assets", "scenes")


def save(name, array):
    path = os.path.join(OUT_DIR, name)
    img = Image.fromarray(np.round(np.clip(array, 0.0, 1.0) * 255.0).astype(np.uint8))
    img.save(path)
    print("wrote", path)


def grid():
    ys, xs = np.mgrid[0:SIZE, 0:SIZE].astype(np.float64)
    return ys / (SIZE - 1), xs / (SIZE - 1)


def scene_blob():
    """Bird-like blob on a sky gradient, eye feature carries the GBP map."""
    ys, xs = grid()
    target = np.zeros((SIZE, SIZE, 3))
    target[..., 0] = 0.55 + 0.25 * ys
    target[..., 1] = 0.70 + 0.15 * ys
    target[..., 2] = 0.90 - 0.20 * ys

    body = ((xs - 0.55) / 0.28) ** 2 + ((ys - 0.52) / 0.20) ** 2 <= 1.0
    head = ((xs - 0.33) / 0.12) ** 2 + ((ys - 0.38) / 0.12) ** 2 <= 1.0
    mask = body | head
    target[mask] = [0.45, 0.28, 0.12]
    wing = (((xs - 0.60) / 0.16) ** 2 + ((ys - 0.50) / 0.09) ** 2 <= 1.0) & mask
    target[wing] = [0.25, 0.15, 0.08]

    eye = ((xs - 0.31) / 0.025) ** 2 + ((ys - 0.36) / 0.025) ** 2 <= 1.0
    target[eye] = [0.95, 0.85, 0.20]

    gbp = np.exp(-(((xs - 0.31) / 0.05) ** 2 + ((ys - 0.36) / 0.05) ** 2))
    gbp[gbp < 0.05] = 0.0

    save("blob_target.png", target)
    save("blob_mask.png", mask.astype(np.float64))
    save("blob_gbp.png", gbp)


def scene_wagon():
    """Boxy vehicle on a road gradient; headlight carries the GBP map."""
    ys, xs = grid()
    target = np.zeros((SIZE, SIZE, 3))
    target[..., 0] = 0.80 - 0.35 * ys
    target[..., 1] = 0.80 - 0.30 * ys
    target[..., 2] = 0.85 - 0.25 * ys
    road = ys > 0.68
    target[road] = [0.35, 0.34, 0.36]

    body = (xs > 0.22) & (xs < 0.78) & (ys > 0.42) & (ys < 0.66)
    cabin = (xs > 0.34) & (xs < 0.64) & (ys > 0.30) & (ys < 0.44)
    mask = body | cabin
    target[body] = [0.70, 0.12, 0.10]
    target[cabin] = [0.60, 0.75, 0.85]

    for cx in (0.32, 0.68):
        wheel = ((xs - cx) / 0.06) ** 2 + ((ys - 0.68) / 0.06) ** 2 <= 1.0
        mask |= wheel
        target[wheel] = [0.08, 0.08, 0.10]

    light = ((xs - 0.76) / 0.03) ** 2 + ((ys - 0.50) / 0.03) ** 2 <= 1.0
    target[light] = [1.00, 0.95, 0.55]

    gbp = np.exp(-(((xs - 0.76) / 0.06) ** 2 + ((ys - 0.50) / 0.06) ** 2))
    gbp[gbp < 0.05] = 0.0

    save("wagon_target.png", target)
    save("wagon_mask.png", mask.astype(np.float64))
    save("wagon_gbp.png", gbp)


def scene_duo():
    """Two foreground instances on a striped background."""
    ys, xs = grid()
    target = np.zeros((SIZE, SIZE, 3))
    stripes = 0.5 + 0.12 * np.sin(10.0 * np.pi * (xs + ys))
    target[..., 0] = 0.30 + 0.25 * stripes
    target[..., 1] = 0.45 + 0.20 * stripes
    target[..., 2] = 0.35 + 0.15 * stripes

    disc = ((xs - 0.30) / 0.16) ** 2 + ((ys - 0.34) / 0.16) ** 2 <= 1.0
    box = (xs > 0.58) & (xs < 0.86) & (ys > 0.56) & (ys < 0.84)
    target[disc] = [0.90, 0.55, 0.10]
    target[box] = [0.15, 0.25, 0.80]
    corner = (xs > 0.58) & (xs < 0.66) & (ys > 0.56) & (ys < 0.64)
    target[corner] = [0.95, 0.95, 0.95]

    gbp = np.exp(-(((xs - 0.62) / 0.07) ** 2 + ((ys - 0.60) / 0.07) ** 2))
    gbp[gbp < 0.05] = 0.0

    save("duo_target.png", target)
    save("duo_mask.png", (disc | box).astype(np.float64))
    save("duo_instance0.png", disc.astype(np.float64))
    save("duo_instance1.png", box.astype(np.float64))
    save("duo_gbp.png", gbp)


def main():
    os.makedirs(OUT_DIR, exist_ok=True)
    scene_blob()
    scene_wagon()
    scene_duo()


if __name__ == "__main__":
    main()
