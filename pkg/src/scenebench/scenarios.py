"""The thirteen scenario generators and the corpus synthesis driver.

Every generator is a deterministic function of (image, mask, params, seed):
no hidden state, and the region a scenario does not touch is bit-identical
to the source.  The driver fans records out to a worker pool, but per-image
seeds are derived by stable hashing of (master seed, record id, kind), so
output bytes do not depend on worker count or processing order.
"""

from __future__ import annotations

import enum
import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from PIL import Image

from . import imgops
from ._kv import parse_kv_file
from .corpus import CorpusRecord, Manifest, build_manifest, load_pair, write_manifest
from .genclient import (
    FidelityThresholds,
    GenerationClient,
    GenClientError,
    PromptTemplate,
    build_prompt,
    fidelity_filter,
)


class ScenarioKind(enum.Enum):
    """Stable identifiers; the string values name output directories."""

    BLUR_BACKGROUND = "blur_background"
    BLUR_FOREGROUND = "blur_foreground"
    COLOR_R = "color_r"
    COLOR_G = "color_g"
    COLOR_B = "color_b"
    COLOR_RAINBOW = "color_rainbow"
    COLOR_GRAYSCALE = "color_grayscale"
    BRIGHT_BACKGROUND = "bright_background"
    BRIGHT_FOREGROUND = "bright_foreground"
    SEGMENTED = "segmented"
    TRANSPARENT = "transparent"
    RANDOM_BACKGROUND = "random_background"
    AI_BACKGROUND = "ai_background"


OFFLINE_KINDS: tuple[ScenarioKind, ...] = tuple(
    k for k in ScenarioKind if k is not ScenarioKind.AI_BACKGROUND
)

# Scenarios that replace the background and leave the foreground bit-identical.
BACKGROUND_KINDS = frozenset({
    ScenarioKind.BLUR_BACKGROUND,
    ScenarioKind.COLOR_R,
    ScenarioKind.COLOR_G,
    ScenarioKind.COLOR_B,
    ScenarioKind.COLOR_RAINBOW,
    ScenarioKind.COLOR_GRAYSCALE,
    ScenarioKind.BRIGHT_BACKGROUND,
    ScenarioKind.SEGMENTED,
})


def parse_kinds(spec: str | Iterable[str | ScenarioKind]) -> list[ScenarioKind]:
    """Resolve a comma-separated string (or iterable) of kind names.

    The aliases ``all`` and ``offline`` expand to the full set and the
    twelve kinds that need no generation service.
    """
    if isinstance(spec, str):
        spec = [s for s in (part.strip() for part in spec.split(",")) if s]
    kinds: list[ScenarioKind] = []
    for item in spec:
        if isinstance(item, ScenarioKind):
            kinds.append(item)
        elif item == "all":
            kinds.extend(ScenarioKind)
        elif item == "offline":
            kinds.extend(OFFLINE_KINDS)
        else:
            try:
                kinds.append(ScenarioKind(item))
            except ValueError:
                valid = ", ".join(k.value for k in ScenarioKind)
                raise ValueError(f"unknown scenario kind {item!r}; "
                                 f"valid kinds: {valid}") from None
    # dedupe, preserving order
    seen: set[ScenarioKind] = set()
    return [k for k in kinds if not (k in seen or seen.add(k))]


@dataclass(frozen=True)
class ScenarioParams:
    """Knobs shared by the generators; defaults are deliberately destructive
    enough to be visible on thumbnail-sized inputs."""

    blur_sigma: float = 10.0
    gain: float = 1.5
    bias: float = 0.0
    usm_sigma: float = 2.0
    usm_amount: float = 0.5
    hue_mode: str = "gradient"   # "uniform" or "gradient"
    hue_offset: float = 0.0      # degrees, uniform mode
    hue_span: float = 360.0      # degrees across the width, gradient mode
    blend_weight: float = 1.0    # foreground weight in (0, 1]
    placement: str = "keep"      # "keep" or "random_shift"
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.blur_sigma < 0:
            raise ValueError("blur_sigma must be >= 0")
        if self.gain < 0:
            raise ValueError("gain must be >= 0")
        if not 0.0 < self.blend_weight <= 1.0:
            raise ValueError("blend_weight must be in (0, 1]")
        if self.hue_mode not in ("uniform", "gradient"):
            raise ValueError("hue_mode must be 'uniform' or 'gradient'")
        if self.placement not in ("keep", "random_shift"):
            raise ValueError("placement must be 'keep' or 'random_shift'")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "ScenarioParams":
        kwargs: dict[str, object] = {}
        fields = {f: t for f, t in cls.__annotations__.items()}
        for key, value in mapping.items():
            if key not in fields:
                raise ValueError(f"unknown scenario parameter {key!r}")
            if key in ("hue_mode", "placement"):
                kwargs[key] = value
            elif key == "master_seed":
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScenarioParams":
        return cls.from_mapping(parse_kv_file(path))

    def to_dict(self) -> dict[str, object]:
        return asdict(self)


@dataclass
class ScenarioOutput:
    image: np.ndarray            # RGB, or RGBA for the transparent kind
    mask: np.ndarray             # updated when the foreground moved
    kind: ScenarioKind
    provenance: dict[str, object] = field(default_factory=dict)


@dataclass(frozen=True)
class SkipEntry:
    record_id: str
    kind: str
    reason: str


def derive_seed(master_seed: int, record_id: str, kind: ScenarioKind | str) -> int:
    """Stable per-image seed; independent of processing order by construction."""
    kind_name = kind.value if isinstance(kind, ScenarioKind) else str(kind)
    payload = f"{master_seed}|{record_id}|{kind_name}".encode("utf-8")
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "big")


def _region_mask(mask: np.ndarray, region: str) -> np.ndarray:
    if region == "foreground":
        return mask
    if region == "background":
        return ~mask
    raise ValueError(f"region must be 'foreground' or 'background', got {region!r}")


def blur_region(img: np.ndarray, mask: np.ndarray, region: str,
                sigma: float) -> np.ndarray:
    """Gaussian-blur one region; the other region stays bit-identical."""
    blurred = imgops.gaussian_blur(img, sigma)
    return imgops.composite(blurred, _region_mask(mask, region), img)


def color_channel_background(img: np.ndarray, mask: np.ndarray,
                             channel: str) -> np.ndarray:
    """Keep one of R/G/B in the background, zero the other two."""
    idx = {"R": 0, "G": 1, "B": 2}.get(channel.upper())
    if idx is None:
        raise ValueError(f"channel must be R, G, or B, got {channel!r}")
    single = np.zeros_like(img)
    single[..., idx] = img[..., idx]
    return imgops.composite(img, mask, single)


def grayscale_background(img: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return imgops.composite(img, mask, imgops.to_grayscale(img))


def rainbow_background(img: np.ndarray, mask: np.ndarray,
                       params: ScenarioParams) -> np.ndarray:
    """Hue-shift the background: constant offset, or a left-to-right gradient
    sweeping ``hue_span`` degrees across the image width."""
    if params.hue_mode == "uniform":
        offsets: float | np.ndarray = params.hue_offset
    else:
        width = img.shape[1]
        offsets = (params.hue_span * np.arange(width) / width)[None, :]
    shifted = imgops.shift_hue(img, offsets)
    return imgops.composite(img, mask, shifted)


def brightness_region(img: np.ndarray, mask: np.ndarray, region: str,
                      gain: float, bias: float,
                      usm_sigma: float, usm_amount: float) -> np.ndarray:
    """Apply gain/bias then unsharp masking to one region."""
    adjusted = imgops.linear_blend(img, img, gain, 0.0, bias)
    if usm_amount > 0:
        adjusted = imgops.unsharp_mask(adjusted, usm_sigma, usm_amount)
    return imgops.composite(adjusted, _region_mask(mask, region), img)


def segment_foreground(img: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Background exactly (0, 0, 0); foreground bit-identical."""
    return imgops.composite(img, mask, np.zeros_like(img))


def make_transparent(img: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """RGBA output: background (0, 0, 0, 0), foreground (r, g, b, 255)."""
    h, w = img.shape[:2]
    rgba = np.zeros((h, w, 4), dtype=np.uint8)
    rgba[..., :3] = np.where(mask[..., None], img[..., :3], 0)
    rgba[..., 3] = np.where(mask, 255, 0).astype(np.uint8)
    return rgba


def cover_fit(donor: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Resize a donor to cover (height, width) without aspect distortion,
    then center-crop to exactly that size."""
    th, tw = size
    dh, dw = donor.shape[:2]
    if dh == 0 or dw == 0:
        raise ValueError("donor image is empty")
    scale = max(tw / dw, th / dh)
    nw = max(tw, round(dw * scale))
    nh = max(th, round(dh * scale))
    resized = np.asarray(
        Image.fromarray(donor).resize((nw, nh), Image.BILINEAR), dtype=np.uint8
    )
    top = (nh - th) // 2
    left = (nw - tw) // 2
    return resized[top:top + th, left:left + tw]


def _shift_bounds(mask: np.ndarray) -> tuple[int, int, int, int]:
    ys, xs = np.nonzero(mask)
    return ys.min(), ys.max(), xs.min(), xs.max()


def random_background(
    img: np.ndarray,
    mask: np.ndarray,
    donor: np.ndarray,
    params: ScenarioParams,
    rng: int | np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Replace the background with a donor image.

    The donor is cover-fitted to the source dimensions.  With
    ``placement='random_shift'`` the foreground bounding box is translated
    by a seed-derived offset that keeps it fully inside the frame (a
    foreground already spanning the frame falls back to staying put).
    Inside the (possibly moved) mask the output is
    ``blend_weight * fg + (1 - blend_weight) * donor``; outside it is the
    donor.  Returns the new image and the updated mask.
    """
    if not mask.any():
        raise ValueError("foreground is empty; record should have been "
                         "flagged degenerate")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    h, w = img.shape[:2]
    bg = cover_fit(donor, (h, w))

    if params.placement == "random_shift":
        y0, y1, x0, x1 = _shift_bounds(mask)
        dy = int(rng.integers(-y0, h - 1 - y1 + 1))
        dx = int(rng.integers(-x0, w - 1 - x1 + 1))
    else:
        dy = dx = 0

    if dy == 0 and dx == 0:
        new_mask = mask.copy()
        fg = img
    else:
        new_mask = np.zeros_like(mask)
        fg = np.zeros_like(img)
        y0, y1, x0, x1 = _shift_bounds(mask)
        new_mask[y0 + dy:y1 + 1 + dy, x0 + dx:x1 + 1 + dx] = \
            mask[y0:y1 + 1, x0:x1 + 1]
        fg[y0 + dy:y1 + 1 + dy, x0 + dx:x1 + 1 + dx] = \
            img[y0:y1 + 1, x0:x1 + 1]

    weight = params.blend_weight
    blended = imgops.linear_blend(fg, bg, weight, 1.0 - weight)
    out = imgops.composite(blended, new_mask, bg)
    return out, new_mask


def generate(
    kind: ScenarioKind,
    img: np.ndarray,
    mask: np.ndarray,
    params: ScenarioParams,
    seed: int = 0,
    donor: np.ndarray | None = None,
) -> ScenarioOutput:
    """Run one offline scenario on an image/mask pair.

    ``ai_background`` needs a generation client and is handled by
    ``synthesize_corpus``; requesting it here raises ValueError.
    """
    out_mask = mask
    if kind is ScenarioKind.BLUR_BACKGROUND:
        out = blur_region(img, mask, "background", params.blur_sigma)
    elif kind is ScenarioKind.BLUR_FOREGROUND:
        out = blur_region(img, mask, "foreground", params.blur_sigma)
    elif kind is ScenarioKind.COLOR_R:
        out = color_channel_background(img, mask, "R")
    elif kind is ScenarioKind.COLOR_G:
        out = color_channel_background(img, mask, "G")
    elif kind is ScenarioKind.COLOR_B:
        out = color_channel_background(img, mask, "B")
    elif kind is ScenarioKind.COLOR_RAINBOW:
        out = rainbow_background(img, mask, params)
    elif kind is ScenarioKind.COLOR_GRAYSCALE:
        out = grayscale_background(img, mask)
    elif kind is ScenarioKind.BRIGHT_BACKGROUND:
        out = brightness_region(img, mask, "background", params.gain, params.bias,
                                params.usm_sigma, params.usm_amount)
    elif kind is ScenarioKind.BRIGHT_FOREGROUND:
        out = brightness_region(img, mask, "foreground", params.gain, params.bias,
                                params.usm_sigma, params.usm_amount)
    elif kind is ScenarioKind.SEGMENTED:
        out = segment_foreground(img, mask)
    elif kind is ScenarioKind.TRANSPARENT:
        out = make_transparent(img, mask)
    elif kind is ScenarioKind.RANDOM_BACKGROUND:
        if donor is None:
            raise ValueError("random_background requires a donor image")
        out, out_mask = random_background(img, mask, donor, params, seed)
    else:
        raise ValueError(f"{kind.value} is not an offline scenario; "
                         "use synthesize_corpus with a generation client")
    return ScenarioOutput(image=out, mask=out_mask, kind=kind,
                          provenance={"seed": seed, "params": params.to_dict()})


def _save_png(array: np.ndarray, path: Path) -> None:
    Image.fromarray(array).save(path, format="PNG")


def _load_donor(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def synthesize_corpus(
    manifest: Manifest,
    kinds: Iterable[ScenarioKind | str],
    params: ScenarioParams,
    out_dir: str | Path,
    donor_pool: Sequence[str | Path] | None = None,
    gen_client: GenerationClient | None = None,
    prompt_registry: Mapping[str, PromptTemplate] | None = None,
    fidelity_thresholds: FidelityThresholds | None = None,
    workers: int = 1,
) -> Manifest:
    """Produce one output PNG per (record, kind) under
    ``out_dir/<kind>/<class>/<id>.png`` and write an output manifest.

    Per-record failures (unreadable files, degenerate masks, generation
    errors, fidelity rejections) are skipped and summarized under the
    output manifest's ``skips`` header field, mirroring post-hoc filtering
    rather than aborting the run.  Output bytes are independent of
    ``workers`` because every product's seed derives from
    (master_seed, record id, kind).
    """
    kinds = parse_kinds(kinds)
    out_dir = Path(out_dir)
    if ScenarioKind.RANDOM_BACKGROUND in kinds:
        if not donor_pool:
            raise ValueError("random_background requested but no donor pool given")
        donors = sorted(Path(p) for p in donor_pool)
    else:
        donors = []
    if ScenarioKind.AI_BACKGROUND in kinds and gen_client is None:
        raise ValueError("ai_background requested but no generation client "
                         "configured")

    class_set = list(manifest.class_set)
    for kind in kinds:
        for label in class_set:
            (out_dir / kind.value / label).mkdir(parents=True, exist_ok=True)

    def process(record: CorpusRecord) -> tuple[list[CorpusRecord], list[SkipEntry]]:
        outputs: list[CorpusRecord] = []
        skips: list[SkipEntry] = []
        try:
            img, mask = load_pair(record)
        except Exception as exc:  # unreadable record: skip every kind
            return [], [SkipEntry(record.id, k.value, str(exc)) for k in kinds]
        degenerate = not mask.any()
        for kind in kinds:
            seed = derive_seed(params.master_seed, record.id, kind)
            if degenerate:
                skips.append(SkipEntry(record.id, kind.value,
                                       "degenerate mask (no foreground)"))
                continue
            try:
                outputs.append(_produce(kind, record, img, mask, seed))
            except (GenClientError, ValueError, OSError) as exc:
                skips.append(SkipEntry(record.id, kind.value, str(exc)))
        return outputs, skips

    def _produce(kind: ScenarioKind, record: CorpusRecord, img: np.ndarray,
                 mask: np.ndarray, seed: int) -> CorpusRecord:
        image_path = out_dir / kind.value / record.class_label / f"{record.id}.png"
        mask_path = record.mask_path
        if kind is ScenarioKind.AI_BACKGROUND:
            transparent = make_transparent(img, mask)
            prompt = build_prompt(record.class_label, registry=prompt_registry)
            generated = gen_client.request_background(transparent, prompt, seed=seed)
            verdict = fidelity_filter(generated, img, mask, fidelity_thresholds)
            if not verdict.accept:
                raise GenClientError(
                    f"fidelity rejection: fg_mad={verdict.fg_mad:.3f} "
                    f"fg_area_ratio={verdict.fg_area_ratio:.4f}"
                )
            _save_png(generated, image_path)
        elif kind is ScenarioKind.RANDOM_BACKGROUND:
            rng = np.random.default_rng(seed)
            donor = _load_donor(donors[int(rng.integers(len(donors)))])
            out, new_mask = random_background(img, mask, donor, params, rng)
            _save_png(out, image_path)
            if not np.array_equal(new_mask, mask):
                mask_path = image_path.with_suffix(".mask.png")
                _save_png(np.where(new_mask, 255, 0).astype(np.uint8), mask_path)
        else:
            result = generate(kind, img, mask, params, seed)
            _save_png(result.image, image_path)
        return CorpusRecord(
            id=f"{record.id}__{kind.value}",
            class_label=record.class_label,
            image_path=image_path,
            mask_path=mask_path,
            split=record.split,
            meta={"source_id": record.id, "scenario": kind.value, "seed": seed},
        )

    all_outputs: list[CorpusRecord] = []
    all_skips: list[SkipEntry] = []
    if workers <= 1:
        results = [process(r) for r in manifest.records]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(process, manifest.records))
    for outputs, skips in results:
        all_outputs.extend(outputs)
        all_skips.extend(skips)

    all_outputs.sort(key=lambda r: (r.meta["source_id"], r.meta["scenario"]))
    all_skips.sort(key=lambda s: (s.record_id, s.kind))

    out_manifest = build_manifest(
        all_outputs,
        class_set=class_set,
        meta={
            "master_seed": params.master_seed,
            "params": params.to_dict(),
            "kinds": [k.value for k in kinds],
            "skips": [
                {"id": s.record_id, "kind": s.kind, "reason": s.reason}
                for s in all_skips
            ],
        },
    )
    write_manifest(out_manifest, out_dir / "manifest.jsonl")
    return out_manifest
