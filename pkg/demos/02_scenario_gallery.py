"""Generate every offline scenario variant of one synthetic scene.

Run from the repository root:

    python demos/02_scenario_gallery.py

Writes demo_output/gallery/<kind>.png for the twelve variants that need no
generation service: a disk "object" on a textured gradient background, so
each transformation's effect on foreground vs background is easy to see.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from scenebench import OFFLINE_KINDS, ScenarioParams, generate

OUT = Path("demo_output/gallery")


def synthetic_scene(size=128):
    """A warm disk on a cool striped gradient, plus its mask."""
    yy, xx = np.mgrid[0:size, 0:size]
    background = np.stack([
        40 + 60 * np.sin(xx / 9.0) + xx * 120.0 / size,
        80 + yy * 100.0 / size,
        160 - xx * 80.0 / size,
    ], axis=-1)
    img = np.clip(background, 0, 255).astype(np.uint8)
    cy = cx = size // 2
    disk = (yy - cy) ** 2 + (xx - cx) ** 2 <= (size // 4) ** 2
    img[disk] = (230, 120, 40)
    rim = ((yy - cy) ** 2 + (xx - cx) ** 2 <= (size // 4) ** 2) & \
          ((yy - cy) ** 2 + (xx - cx) ** 2 >= (size // 5) ** 2)
    img[rim] = (250, 220, 80)
    return img, disk


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    img, mask = synthetic_scene()
    Image.fromarray(img).save(OUT / "original.png")

    params = ScenarioParams(blur_sigma=6.0, gain=1.6, usm_amount=0.8)
    donor = np.clip(
        np.random.default_rng(4).normal(128, 55, (96, 160, 3)), 0, 255
    ).astype(np.uint8)

    for kind in OFFLINE_KINDS:
        result = generate(kind, img, mask, params, seed=11, donor=donor)
        Image.fromarray(result.image).save(OUT / f"{kind.value}.png")
        print(f"wrote {OUT / (kind.value + '.png')}")

    print(f"\n{len(OFFLINE_KINDS)} variants plus the original in {OUT}/")


if __name__ == "__main__":
    main()
