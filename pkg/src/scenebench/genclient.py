"""Client for an external background-generation service, plus the fidelity
filter that screens its outputs.

The wire contract is a minimal JSON-over-HTTP exchange so any diffusion
backend (or a test stub) can sit behind it::

    POST <endpoint>/generate
    {"prompt": str, "image": <base64 RGBA PNG>, "width": int, "height": int,
     "seed": int, "steps": int, "guidance": float, "model": str}

    200 -> {"image": <base64 RGB PNG>, "meta": {...}}

Authentication is a bearer token.  Endpoint and token come from config or
the GEN_ENDPOINT / GEN_API_KEY environment variables.  An offline mode
synthesizes a deterministic stand-in background locally so pipelines and
tests never need the network.
"""

from __future__ import annotations

import base64
import io
import os
import time
from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
import requests
from PIL import Image

from ._kv import coerce_bool, parse_kv_file

ENV_ENDPOINT = "GEN_ENDPOINT"
ENV_API_KEY = "GEN_API_KEY"


class GenClientError(Exception):
    """Base class for generation-service failures."""


class GenConfigError(GenClientError):
    """Client not configured (missing endpoint or credentials)."""


class AuthError(GenClientError):
    """Service rejected the credentials; never retried."""


class QuotaExceededError(GenClientError):
    """Service reported the request quota as exhausted."""


class MalformedResponseError(GenClientError):
    """Service answered 200 but the payload is not usable."""


class ServiceUnavailableError(GenClientError):
    """Transient failures persisted past the retry budget."""


class PromptError(GenClientError):
    """No usable prompt template for a class."""


@dataclass(frozen=True)
class PromptTemplate:
    """Text template for one class; ``{class_label}`` is substituted."""

    class_label: str
    template: str
    style_keywords: tuple[str, ...] = ()


DEFAULT_TEMPLATE = PromptTemplate(
    class_label="*",
    template=("Generate a realistic high-definition background and please "
              "do not change the foreground {class_label} object."),
    style_keywords=("National Geographic Magazine",),
)

# Class-keyed templates; anything missing falls back to DEFAULT_TEMPLATE.
DEFAULT_REGISTRY: dict[str, PromptTemplate] = {
    "airship": PromptTemplate(
        class_label="airship",
        template=("Generate a realistic blue sky, and clouds background and "
                  "please do not change the foreground airship object."),
    ),
}


def build_prompt(
    class_label: str,
    registry: Mapping[str, PromptTemplate] | None = None,
    template: PromptTemplate | None = None,
) -> str:
    """Render the prompt for a class.

    Lookup order: explicit ``template`` argument, then the registry entry
    for the class, then the default template with the class name
    substituted.  Style keywords, when present, are appended after the
    rendered text.
    """
    if template is None:
        lookup = DEFAULT_REGISTRY if registry is None else registry
        template = lookup.get(class_label, DEFAULT_TEMPLATE)
    if not template.template.strip():
        raise PromptError(f"empty prompt template for class {class_label!r}")
    rendered = template.template.format(class_label=class_label)
    if template.style_keywords:
        rendered = rendered + " " + ", ".join(template.style_keywords) + "."
    if not rendered.strip():
        raise PromptError(f"rendered prompt for {class_label!r} is empty")
    return rendered


@dataclass(frozen=True)
class GenConfig:
    """Connection and generation parameters.

    ``steps`` and ``guidance`` defaults are placeholders a backend may
    ignore, not tuned values.
    """

    endpoint: str = ""
    api_key: str = ""
    model: str = "default"
    steps: int = 30
    guidance: float = 7.5
    timeout: float = 60.0
    max_attempts: int = 4
    backoff_base: float = 0.5
    requests_per_minute: int = 60
    offline: bool = False

    @classmethod
    def from_env(cls, **overrides) -> "GenConfig":
        cfg = cls(
            endpoint=os.environ.get(ENV_ENDPOINT, ""),
            api_key=os.environ.get(ENV_API_KEY, ""),
        )
        return replace(cfg, **overrides) if overrides else cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "GenConfig":
        """Read a ``key = value`` config file; env vars fill endpoint/key
        when the file leaves them blank."""
        raw = parse_kv_file(path)
        kwargs: dict[str, object] = {}
        for key, value in raw.items():
            if key in ("endpoint", "api_key", "model"):
                kwargs[key] = value
            elif key in ("steps", "max_attempts", "requests_per_minute"):
                kwargs[key] = int(value)
            elif key in ("guidance", "timeout", "backoff_base"):
                kwargs[key] = float(value)
            elif key == "offline":
                kwargs[key] = coerce_bool(value)
            else:
                raise ValueError(f"unknown generation config key {key!r}")
        cfg = cls(**kwargs)
        if not cfg.endpoint:
            cfg = replace(cfg, endpoint=os.environ.get(ENV_ENDPOINT, ""))
        if not cfg.api_key:
            cfg = replace(cfg, api_key=os.environ.get(ENV_API_KEY, ""))
        return cfg


@dataclass(frozen=True)
class FidelityThresholds:
    """Acceptance gates for generated images.

    ``mad`` caps the mean absolute difference over foreground pixels
    (8-bit levels, default 8 of 255); ``area`` floors the foreground
    fraction of the frame.  Proxies for a by-hand screen, so both are
    configurable.
    """

    mad: float = 8.0
    area: float = 0.05


@dataclass(frozen=True)
class FidelityVerdict:
    accept: bool
    fg_mad: float
    fg_area_ratio: float


def fidelity_filter(
    generated: np.ndarray,
    source: np.ndarray,
    mask: np.ndarray,
    thresholds: FidelityThresholds | None = None,
) -> FidelityVerdict:
    """Score a generated image against the source foreground.

    fg_mad is symmetric in (generated, source).  An empty mask rejects
    with fg_area_ratio 0.
    """
    thresholds = thresholds or FidelityThresholds()
    if generated.shape[:2] != source.shape[:2]:
        raise ValueError(f"generated dimensions {generated.shape[:2]} != "
                         f"source {source.shape[:2]}")
    if mask.shape != source.shape[:2]:
        raise ValueError("mask dimensions do not match source")
    area_ratio = float(mask.sum()) / mask.size
    if area_ratio == 0.0:
        return FidelityVerdict(accept=False, fg_mad=0.0, fg_area_ratio=0.0)
    gen_fg = generated[..., :3][mask].astype(np.float64)
    src_fg = source[..., :3][mask].astype(np.float64)
    fg_mad = float(np.abs(gen_fg - src_fg).mean())
    accept = fg_mad <= thresholds.mad and area_ratio >= thresholds.area
    return FidelityVerdict(accept=accept, fg_mad=fg_mad, fg_area_ratio=area_ratio)


def _encode_png(array: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _decode_png(data: str) -> np.ndarray:
    try:
        raw = base64.b64decode(data, validate=True)
        with Image.open(io.BytesIO(raw)) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except Exception as exc:
        raise MalformedResponseError(f"response image is not decodable: {exc}") from exc


class GenerationClient:
    """Issues generation requests with retry, backoff, and rate limiting.

    Shareable across workers; retry state is per call.  ``clock`` and
    ``sleep`` are injectable so rate-limit behavior is testable against a
    virtual clock.
    """

    TRANSIENT_STATUSES = frozenset({500, 502, 503, 504})

    def __init__(
        self,
        config: GenConfig,
        session=None,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if not config.offline and not config.endpoint:
            raise GenConfigError(
                f"no endpoint configured (set {ENV_ENDPOINT} or use offline mode)"
            )
        self.config = config
        self._session = session
        self._clock = clock
        self._sleep = sleep
        self._issued: deque[float] = deque()
        self.last_attempt_count = 0

    @property
    def session(self):
        if self._session is None:
            self._session = requests.Session()
        return self._session

    def request_background(
        self,
        transparent_img: np.ndarray,
        prompt: str,
        seed: int | None = None,
    ) -> np.ndarray:
        """Generate a background for an RGBA foreground cut-out.

        Returns an RGB image at the source dimensions (the response is
        rescaled on receipt if the service altered them).
        """
        if transparent_img.ndim != 3 or transparent_img.shape[2] != 4:
            raise ValueError("transparent_img must be RGBA (H, W, 4)")
        height, width = transparent_img.shape[:2]
        if self.config.offline:
            self.last_attempt_count = 1
            return _offline_stub(transparent_img, seed or 0)

        body = {
            "prompt": prompt,
            "image": _encode_png(transparent_img),
            "width": width,
            "height": height,
            "seed": seed,
            "steps": self.config.steps,
            "guidance": self.config.guidance,
            "model": self.config.model,
        }
        payload = self._post_with_retry(body)
        generated = _decode_png(payload["image"])
        if generated.shape[:2] != (height, width):
            generated = np.asarray(
                Image.fromarray(generated).resize((width, height), Image.BILINEAR),
                dtype=np.uint8,
            )
        return generated

    def _post_with_retry(self, body: dict) -> dict:
        url = self.config.endpoint.rstrip("/") + "/generate"
        headers = {"Authorization": f"Bearer {self.config.api_key}"}
        last_error: Exception | None = None
        for attempt in range(1, self.config.max_attempts + 1):
            self.last_attempt_count = attempt
            self._respect_rate_limit()
            try:
                response = self.session.post(
                    url, json=body, headers=headers, timeout=self.config.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                self._backoff(attempt)
                continue
            status = response.status_code
            if status in (401, 403):
                raise AuthError(f"authentication failed (HTTP {status})")
            if status == 429:
                raise QuotaExceededError("request quota exceeded (HTTP 429)")
            if status in self.TRANSIENT_STATUSES:
                last_error = ServiceUnavailableError(f"HTTP {status}")
                self._backoff(attempt)
                continue
            if status != 200:
                raise GenClientError(f"unexpected HTTP status {status}")
            try:
                payload = response.json()
            except ValueError as exc:
                raise MalformedResponseError(f"response is not JSON: {exc}") from exc
            if not isinstance(payload, dict) or "image" not in payload:
                raise MalformedResponseError("response JSON lacks an 'image' field")
            return payload
        raise ServiceUnavailableError(
            f"giving up after {self.config.max_attempts} attempts: {last_error}"
        )

    def _backoff(self, attempt: int) -> None:
        if attempt < self.config.max_attempts:
            self._sleep(self.config.backoff_base * (2 ** (attempt - 1)))

    def _respect_rate_limit(self) -> None:
        """Keep issued requests within the per-minute cap over any 60 s window."""
        cap = self.config.requests_per_minute
        if cap <= 0:
            return
        now = self._clock()
        while self._issued and now - self._issued[0] >= 60.0:
            self._issued.popleft()
        if len(self._issued) >= cap:
            wait = 60.0 - (now - self._issued[0])
            if wait > 0:
                self._sleep(wait)
            now = self._clock()
            while self._issued and now - self._issued[0] >= 60.0:
                self._issued.popleft()
        self._issued.append(now)


def _offline_stub(transparent_img: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic local stand-in: a smooth two-color gradient background
    with the foreground composited back on top."""
    rng = np.random.default_rng(seed)
    h, w = transparent_img.shape[:2]
    top = rng.integers(0, 256, size=3).astype(np.float64)
    bottom = rng.integers(0, 256, size=3).astype(np.float64)
    t = np.linspace(0.0, 1.0, h)[:, None, None]
    background = np.clip(np.rint((1 - t) * top + t * bottom), 0, 255).astype(np.uint8)
    background = np.broadcast_to(background, (h, w, 3)).copy()
    fg_mask = transparent_img[..., 3] >= 128
    background[fg_mask] = transparent_img[..., :3][fg_mask]
    return background
