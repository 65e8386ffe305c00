"""Produce generated-background variants without any network service.

Run from the repository root:

    python demos/05_generated_backgrounds_offline.py

Uses the client's offline mode (a deterministic local stand-in for a
diffusion backend) to fill in backgrounds behind a transparent foreground
cut-out, and shows the fidelity filter accepting a faithful result and
rejecting one whose foreground was painted over.  Point GEN_ENDPOINT and
GEN_API_KEY at a real service and drop offline=True to go live.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from scenebench import (
    GenConfig,
    GenerationClient,
    build_prompt,
    fidelity_filter,
    make_transparent,
)

OUT = Path("demo_output/generated")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(2)
    img = rng.integers(40, 220, (96, 96, 3)).astype(np.uint8)
    mask = np.zeros((96, 96), dtype=bool)
    mask[24:72, 24:72] = True

    transparent = make_transparent(img, mask)
    Image.fromarray(transparent).save(OUT / "foreground_cutout.png")

    prompt = build_prompt("airship")
    print(f"prompt: {prompt}\n")

    client = GenerationClient(GenConfig(offline=True))
    for seed in (1, 2, 3):
        generated = client.request_background(transparent, prompt, seed=seed)
        verdict = fidelity_filter(generated, img, mask)
        Image.fromarray(generated).save(OUT / f"generated_seed{seed}.png")
        print(f"seed {seed}: fg_mad={verdict.fg_mad:.2f} "
              f"area={verdict.fg_area_ratio:.2f} accept={verdict.accept}")

    # a bad generation: background service repainted the object too
    bad = client.request_background(transparent, prompt, seed=1)
    bad[mask] = 255
    verdict = fidelity_filter(bad, img, mask)
    print(f"\npainted-over foreground: fg_mad={verdict.fg_mad:.2f} "
          f"accept={verdict.accept}  (filtered out, recorded as a skip)")
    print(f"\nimages in {OUT}/")


if __name__ == "__main__":
    main()
