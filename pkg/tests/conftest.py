"""Shared fixtures: synthetic corpora, donor images, and the reference
score table used by the scoring tests."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from scenebench.corpus import CorpusRecord, Manifest, build_manifest, write_manifest
from scenebench.results import ResultTable

# Reference accuracy-dispersion fixture: per-scenario squared deviations
# (fractions of 1), the variances they imply under the n-1 divisor, and the
# resulting scores.  Five widely used backbone names keep the fixture
# readable; the numbers are frozen test data.
SCENARIO_COLUMNS = [
    "Blur_background", "Blur_object", "Image_g", "Image_b",
    "Image_grey", "Image_r", "Random_background", "Segmented_image",
]

REFERENCE_TABLE = {
    "ResNet50": {
        "cross": [0.0018, 0.0050, 0.0117, 0.0068, 0.0010, 0.0038, 0.5304, 0.0712],
        "inner": [0.0010, 0.0000, 0.0011, 0.0017, 0.0020, 0.0000, 0.0696, 0.0030],
        "variance_cross": 0.0902, "variance_inner": 0.0112, "score": 0.8985,
    },
    "DenseNet121": {
        "cross": [0.0013, 0.0072, 0.0100, 0.0101, 0.0017, 0.0084, 0.5039, 0.0769],
        "inner": [0.0021, 0.0000, 0.0007, 0.0014, 0.0018, 0.0001, 0.0277, 0.0029],
        "variance_cross": 0.0885, "variance_inner": 0.0052, "score": 0.9062,
    },
    "VGG-16": {
        "cross": [0.0015, 0.0015, 0.0230, 0.0545, 0.0152, 0.0172, 0.4793, 0.1953],
        "inner": [0.0033, 0.0006, 0.0026, 0.0051, 0.0072, 0.0001, 0.0001, 0.0017],
        "variance_cross": 0.1125, "variance_inner": 0.0029, "score": 0.8845,
    },
    "ViT": {
        "cross": [0.0025, 0.0007, 0.0760, 0.0938, 0.0518, 0.0724, 0.5811, 0.1974],
        "inner": [0.0051, 0.0072, 0.0015, 0.0007, 0.0008, 0.0057, 0.1654, 0.0000],
        "variance_cross": 0.1536, "variance_inner": 0.0266, "score": 0.8196,
    },
    "Swin": {
        "cross": [0.0096, 0.0084, 0.0684, 0.0617, 0.0461, 0.0694, 0.5087, 0.2133],
        "inner": [0.0002, 0.5628, 0.0048, 0.0061, 0.0056, 0.0005, 0.3710, 0.6503],
        "variance_cross": 0.1408, "variance_inner": 0.2287, "score": 0.6305,
    },
}

EXPECTED_RANKING = ["DenseNet121", "ResNet50", "VGG-16", "ViT", "Swin"]

REFERENCE_MU = 0.95  # any value >= sqrt(max deviation) reproduces the deviations


def reference_result_tables() -> list[ResultTable]:
    """Accuracy tables whose (C - mu)^2 equal the reference deviations."""
    tables = []
    for model, data in REFERENCE_TABLE.items():
        cross = {s: REFERENCE_MU - d ** 0.5
                 for s, d in zip(SCENARIO_COLUMNS, data["cross"])}
        inner = {s: REFERENCE_MU - d ** 0.5
                 for s, d in zip(SCENARIO_COLUMNS, data["inner"])}
        tables.append(ResultTable(model, REFERENCE_MU, cross, inner))
    return tables


def write_reference_results_csv(path: Path) -> Path:
    lines = ["model,mu,scenario,cross,inner"]
    for model, data in REFERENCE_TABLE.items():
        for scenario, dc, di in zip(SCENARIO_COLUMNS, data["cross"], data["inner"]):
            lines.append(f"{model},{REFERENCE_MU!r},{scenario},"
                         f"{REFERENCE_MU - dc ** 0.5!r},{REFERENCE_MU - di ** 0.5!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def make_image(rng: np.random.Generator, size: tuple[int, int]) -> np.ndarray:
    h, w = size
    return rng.integers(0, 256, size=(h, w, 3), dtype=np.int64).astype(np.uint8)


def make_mask(size: tuple[int, int], box: tuple[int, int, int, int]) -> np.ndarray:
    h, w = size
    mask = np.zeros((h, w), dtype=np.uint8)
    y0, y1, x0, x1 = box
    mask[y0:y1, x0:x1] = 255
    return mask


def build_corpus(
    root: Path,
    classes: list[str],
    per_class: int,
    size: tuple[int, int] = (32, 32),
    seed: int = 0,
    degenerate_ids: tuple[str, ...] = (),
) -> tuple[Path, Manifest]:
    """Write a synthetic corpus (random images, rectangular foregrounds)
    and its manifest under ``root``; returns (manifest path, manifest)."""
    rng = np.random.default_rng(seed)
    h, w = size
    records = []
    for label in classes:
        for i in range(per_class):
            rec_id = f"{label}_{i:03d}"
            img_path = root / "images" / label / f"{rec_id}.png"
            mask_path = root / "masks" / label / f"{rec_id}.png"
            img_path.parent.mkdir(parents=True, exist_ok=True)
            mask_path.parent.mkdir(parents=True, exist_ok=True)
            Image.fromarray(make_image(rng, size)).save(img_path)
            if rec_id in degenerate_ids:
                mask = np.zeros((h, w), dtype=np.uint8)
            else:
                y0 = int(rng.integers(2, h // 2))
                x0 = int(rng.integers(2, w // 2))
                mask = make_mask(size, (y0, y0 + h // 3, x0, x0 + w // 3))
            Image.fromarray(mask, mode="L").save(mask_path)
            records.append(CorpusRecord(
                id=rec_id, class_label=label,
                image_path=img_path, mask_path=mask_path,
                split="train" if i % 2 == 0 else "test",
            ))
    manifest = build_manifest(records, classes)
    manifest_path = root / "manifest.jsonl"
    write_manifest(manifest, manifest_path)
    return manifest_path, manifest


def build_donors(root: Path, count: int = 3, size: tuple[int, int] = (40, 56),
                 seed: int = 99) -> list[Path]:
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        path = root / f"donor_{i}.png"
        Image.fromarray(make_image(rng, size)).save(path)
        paths.append(path)
    return sorted(paths)


@pytest.fixture
def small_corpus(tmp_path):
    """4 classes x 2 records on 32x32 images."""
    return build_corpus(tmp_path / "corpus", ["a", "b", "c", "d"], 2)


@pytest.fixture
def donor_dir(tmp_path):
    donors = build_donors(tmp_path / "donors")
    return donors[0].parent
