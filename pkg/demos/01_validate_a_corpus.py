"""Build a tiny image+mask corpus on disk, then validate its manifest.

Run from the repository root:

    python demos/01_validate_a_corpus.py

Creates ./demo_output/corpus with a manifest, one deliberately degenerate
mask, and one dimension mismatch, then shows how the validation report
distinguishes hard errors from tolerated oddities.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from scenebench import CorpusRecord, build_manifest, validate_corpus, write_manifest

OUT = Path("demo_output/corpus")


def save(array, path, mode=None):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(array, mode=mode).save(path)


def main():
    rng = np.random.default_rng(0)
    records = []
    for label in ("dog", "fox"):
        for i in range(3):
            rec_id = f"{label}_{i}"
            img = rng.integers(0, 256, (32, 32, 3)).astype(np.uint8)
            mask = np.zeros((32, 32), dtype=np.uint8)
            mask[8:24, 8:24] = 255
            if rec_id == "dog_2":
                mask[:] = 0  # empty foreground: degenerate, not an error
            save(img, OUT / "images" / f"{rec_id}.png")
            if rec_id == "fox_2":
                # wrong mask dimensions: a hard validation error
                save(np.zeros((16, 16), np.uint8), OUT / "masks" / f"{rec_id}.png", "L")
            else:
                save(mask, OUT / "masks" / f"{rec_id}.png", "L")
            records.append(CorpusRecord(
                id=rec_id, class_label=label,
                image_path=OUT / "images" / f"{rec_id}.png",
                mask_path=OUT / "masks" / f"{rec_id}.png",
            ))

    manifest = build_manifest(records)
    write_manifest(manifest, OUT / "manifest.jsonl")
    print(f"wrote {OUT / 'manifest.jsonl'} with {len(records)} records")

    report = validate_corpus(manifest, expectations={"total": 6, "dog": 3})
    print(f"\npassed: {report.passed}")
    print(f"per-class counts: {report.per_class_counts}")
    print(f"degenerate (skipped by synthesis): {report.degenerate_ids}")
    for rec_id, detail in report.errors:
        print(f"error: {rec_id}: {detail}")
    print(f"expected counts check: {report.expected_check}")


if __name__ == "__main__":
    main()
