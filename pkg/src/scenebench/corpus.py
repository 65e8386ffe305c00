"""Corpus ingestion: the image+mask manifest and its validation.

A corpus is described by a line-oriented UTF-8 manifest.  The first
non-empty line is a JSON header carrying the format version and the class
set; every following line is one JSON record::

    {"version": "1", "class_set": ["dog", "fox"]}
    {"id": "dog_001", "class": "dog", "image": "img/dog_001.png",
     "mask": "mask/dog_001.png", "split": "train"}

Relative image/mask paths are resolved against the manifest's directory on
load and written back relative to the target directory when possible, so a
corpus can move as a unit.  Records are immutable after load and safe to
share across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from PIL import Image, UnidentifiedImageError

from ._kv import parse_kv_file

MANIFEST_VERSION = "1"
MASK_THRESHOLD = 128  # mask value >= 128 counts as foreground
SPLITS = ("train", "test")


class ManifestError(Exception):
    """Manifest file cannot be parsed or violates a structural invariant."""


class CorpusError(Exception):
    """A record's image or mask cannot be loaded as required."""


@dataclass(frozen=True)
class CorpusRecord:
    """One source image plus its foreground mask and class label."""

    id: str
    class_label: str
    image_path: Path
    mask_path: Path
    split: str = "train"
    meta: Mapping[str, object] = field(default_factory=dict)


@dataclass
class Manifest:
    records: list[CorpusRecord]
    class_set: list[str]
    version: str = MANIFEST_VERSION
    meta: dict[str, object] = field(default_factory=dict)

    def per_class_counts(self) -> dict[str, int]:
        counts = {label: 0 for label in self.class_set}
        for record in self.records:
            counts[record.class_label] = counts.get(record.class_label, 0) + 1
        return counts


@dataclass
class ValidationReport:
    total_records: int
    per_class_counts: dict[str, int]
    errors: list[tuple[str, str]]
    warnings: list[tuple[str, str]]
    degenerate_ids: list[str]
    expectation_failures: list[str]
    expected_check: bool | None  # None when no expectations were supplied

    @property
    def passed(self) -> bool:
        return not self.errors


def load_manifest(path: str | Path) -> Manifest:
    """Parse a manifest file; no image I/O happens here.

    Raises ManifestError with line context on parse failures, duplicate ids,
    or record classes missing from the header's class_set.
    """
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    base = path.parent
    header: dict | None = None
    records: list[CorpusRecord] = []
    seen: dict[str, int] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if header is None:
                if "version" not in obj or "class_set" not in obj:
                    raise ManifestError(
                        f"{path}:{lineno}: first line must be a header with "
                        "'version' and 'class_set'"
                    )
                header = obj
                continue
            records.append(_parse_record(obj, base, path, lineno, seen))
    if header is None:
        raise ManifestError(f"{path}: empty manifest (missing header line)")

    class_set = list(header["class_set"])
    for record in records:
        if record.class_label not in class_set:
            raise ManifestError(
                f"{path}: record {record.id!r} has class {record.class_label!r} "
                f"not listed in class_set"
            )
    meta = {k: v for k, v in header.items() if k not in ("version", "class_set")}
    return Manifest(records=records, class_set=class_set,
                    version=str(header["version"]), meta=meta)


def _parse_record(obj: dict, base: Path, path: Path, lineno: int,
                  seen: dict[str, int]) -> CorpusRecord:
    for key in ("id", "class", "image", "mask"):
        if key not in obj:
            raise ManifestError(f"{path}:{lineno}: record missing field {key!r}")
    rec_id = str(obj["id"])
    if rec_id in seen:
        raise ManifestError(
            f"{path}:{lineno}: duplicate id {rec_id!r} "
            f"(first seen on line {seen[rec_id]})"
        )
    seen[rec_id] = lineno
    split = str(obj.get("split", "train"))
    if split not in SPLITS:
        raise ManifestError(f"{path}:{lineno}: split must be one of {SPLITS}, "
                            f"got {split!r}")
    meta = {k: v for k, v in obj.items()
            if k not in ("id", "class", "image", "mask", "split")}

    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else (base / candidate).resolve()

    return CorpusRecord(
        id=rec_id,
        class_label=str(obj["class"]),
        image_path=resolve(str(obj["image"])),
        mask_path=resolve(str(obj["mask"])),
        split=split,
        meta=meta,
    )


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    """Write a manifest; load_manifest(write_manifest(m)) round-trips records."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    base = path.parent.resolve()

    def portable(p: Path) -> str:
        try:
            rel = p.resolve().relative_to(base)
            return rel.as_posix()
        except ValueError:
            return str(p)

    with path.open("w", encoding="utf-8") as fh:
        header: dict[str, object] = {
            "version": manifest.version,
            "class_set": list(manifest.class_set),
        }
        header.update(manifest.meta)
        fh.write(json.dumps(header, sort_keys=False) + "\n")
        for record in manifest.records:
            row: dict[str, object] = {
                "id": record.id,
                "class": record.class_label,
                "image": portable(record.image_path),
                "mask": portable(record.mask_path),
                "split": record.split,
            }
            row.update(record.meta)
            fh.write(json.dumps(row) + "\n")


def threshold_mask(gray: np.ndarray) -> np.ndarray:
    """Binarize an 8-bit mask plane: value >= 128 is foreground.

    Idempotent on already-binary masks ({0, 255} maps to the same states).
    """
    return np.asarray(gray) >= MASK_THRESHOLD


def load_pair(record: CorpusRecord) -> tuple[np.ndarray, np.ndarray]:
    """Decode (RGB uint8 image, boolean mask) for one record.

    Raises CorpusError on decode failure or image/mask dimension mismatch.
    """
    try:
        with Image.open(record.image_path) as im:
            img = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as exc:
        raise CorpusError(f"{record.id}: cannot decode image "
                          f"{record.image_path}: {exc}") from exc
    try:
        with Image.open(record.mask_path) as im:
            mask_gray = np.asarray(im.convert("L"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as exc:
        raise CorpusError(f"{record.id}: cannot decode mask "
                          f"{record.mask_path}: {exc}") from exc
    if mask_gray.shape != img.shape[:2]:
        raise CorpusError(
            f"{record.id}: mask dimensions {mask_gray.shape} != "
            f"image dimensions {img.shape[:2]}"
        )
    return img, threshold_mask(mask_gray)


def parse_expectations(path: str | Path) -> dict[str, int]:
    """Read an expected-count table: ``total = N`` and/or ``<class> = N`` lines."""
    raw = parse_kv_file(path)
    out: dict[str, int] = {}
    for key, value in raw.items():
        try:
            out[key] = int(value)
        except ValueError as exc:
            raise ValueError(f"expected integer count for {key!r}, got {value!r}") from exc
    return out


def validate_corpus(
    manifest: Manifest,
    expectations: Mapping[str, int] | None = None,
) -> ValidationReport:
    """Check every record's files, dimensions, and mask content.

    Per-record problems become error entries and validation continues.
    Empty-foreground masks are flagged degenerate, not treated as errors
    (synthesis skips them).  Non-binary mask planes produce warnings since
    thresholding resolves them deterministically.  When ``expectations`` is
    given, per-class and total counts are compared and mismatches recorded
    as expectation failures.

    Pure: the same manifest and expectations always yield the same report.
    """
    errors: list[tuple[str, str]] = []
    warnings: list[tuple[str, str]] = []
    degenerate: list[str] = []
    counts = {label: 0 for label in manifest.class_set}

    class_set = set(manifest.class_set)
    for record in manifest.records:
        counts[record.class_label] = counts.get(record.class_label, 0) + 1
        if record.class_label not in class_set:
            errors.append((record.id, f"class {record.class_label!r} not in "
                                      "the manifest class_set"))
            continue
        try:
            with Image.open(record.image_path) as im:
                img_size = im.size  # (W, H)
        except (OSError, UnidentifiedImageError) as exc:
            errors.append((record.id, f"unreadable image: {exc}"))
            continue
        try:
            with Image.open(record.mask_path) as im:
                mask_gray = np.asarray(im.convert("L"), dtype=np.uint8)
        except (OSError, UnidentifiedImageError) as exc:
            errors.append((record.id, f"unreadable mask: {exc}"))
            continue
        if (mask_gray.shape[1], mask_gray.shape[0]) != img_size:
            errors.append((
                record.id,
                f"mask dimensions {mask_gray.shape[::-1]} != image {img_size}",
            ))
            continue
        if not np.isin(mask_gray, (0, 255)).all():
            warnings.append((record.id, "mask is not strictly binary; "
                                        "threshold at 128 applies"))
        if not threshold_mask(mask_gray).any():
            degenerate.append(record.id)

    for label in manifest.class_set:
        if counts.get(label, 0) < 1:
            errors.append((f"<class:{label}>", "class has no records"))

    expectation_failures: list[str] = []
    expected_check: bool | None = None
    if expectations is not None:
        for key, expected in expectations.items():
            actual = len(manifest.records) if key == "total" else counts.get(key, 0)
            if actual != expected:
                expectation_failures.append(
                    f"{key}: expected {expected}, found {actual}"
                )
        expected_check = not expectation_failures

    return ValidationReport(
        total_records=len(manifest.records),
        per_class_counts=counts,
        errors=errors,
        warnings=warnings,
        degenerate_ids=degenerate,
        expectation_failures=expectation_failures,
        expected_check=expected_check,
    )


def build_manifest(records: Iterable[CorpusRecord],
                   class_set: Iterable[str] | None = None,
                   version: str = MANIFEST_VERSION,
                   meta: dict[str, object] | None = None) -> Manifest:
    """Assemble a Manifest, deriving class_set from the records if omitted."""
    records = list(records)
    if class_set is None:
        class_set = sorted({r.class_label for r in records})
    return Manifest(records=records, class_set=list(class_set),
                    version=version, meta=dict(meta or {}))
