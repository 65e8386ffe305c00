"""Robustness scoring from accuracy dispersion across scenarios.

For a model with original-data accuracy ``mu`` and per-scenario accuracies
``C(i)`` (trained on originals) and ``C'(i)`` (trained per scenario):

    sigma2_cross = sum_i (C(i)  - mu)^2 / d
    sigma2_inner = sum_i (C'(i) - mu)^2 / d
    score        = 1 - (sigma2_cross + sigma2_inner)

Larger scores mean the model's accuracy moves less when the scene changes.

The divisor ``d`` is selectable: ``population`` uses n, ``sample`` uses
n - 1.  The reference score tables this tool is validated against are
consistent with the sample divisor, while the defining formula reads as a
population variance; both are exposed, and ``sample`` is the default
because it reproduces those reference numbers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .results import ResultTable

DIVISOR_SAMPLE = "sample"        # divides by n - 1
DIVISOR_POPULATION = "population"  # divides by n
DIVISOR_MODES = (DIVISOR_SAMPLE, DIVISOR_POPULATION)


@dataclass
class RobustnessReport:
    model_name: str
    sigma2_cross: float
    sigma2_inner: float
    score: float
    deviations_cross: dict[str, float]
    deviations_inner: dict[str, float]
    divisor_mode: str


def _deviations(values: dict[str, float], mu: float) -> dict[str, float]:
    return {scenario: (value - mu) ** 2 for scenario, value in values.items()}


def _variance(deviations: dict[str, float], mode: str, what: str) -> float:
    if mode not in DIVISOR_MODES:
        raise ValueError(f"divisor mode must be one of {DIVISOR_MODES}, got {mode!r}")
    n = len(deviations)
    if n == 0:
        raise ValueError(f"{what} data absent")
    if mode == DIVISOR_SAMPLE:
        if n < 2:
            raise ValueError(f"{what}: sample divisor needs >= 2 scenarios, got {n}")
        d = n - 1
    else:
        d = n
    return sum(deviations.values()) / d


def variance_cross(table: ResultTable, mode: str = DIVISOR_SAMPLE) -> float:
    """Dispersion of trained-on-original accuracies around mu."""
    return _variance(_deviations(table.cross, table.mu), mode, "cross")


def variance_inner(table: ResultTable, mode: str = DIVISOR_SAMPLE) -> float:
    """Dispersion of per-scenario-trained accuracies around mu."""
    return _variance(_deviations(table.inner, table.mu), mode, "inner")


def robustness_score(table: ResultTable, mode: str = DIVISOR_SAMPLE) -> RobustnessReport:
    """score = 1 - (sigma2_cross + sigma2_inner); larger is more robust."""
    dev_cross = _deviations(table.cross, table.mu)
    dev_inner = _deviations(table.inner, table.mu)
    s2_cross = _variance(dev_cross, mode, "cross")
    s2_inner = _variance(dev_inner, mode, "inner")
    return RobustnessReport(
        model_name=table.model_name,
        sigma2_cross=s2_cross,
        sigma2_inner=s2_inner,
        score=1.0 - (s2_cross + s2_inner),
        deviations_cross=dev_cross,
        deviations_inner=dev_inner,
        divisor_mode=mode,
    )


def rank_models(reports: list[RobustnessReport]) -> list[RobustnessReport]:
    """Descending by score; ties broken alphabetically by model name."""
    if not reports:
        raise ValueError("need at least one report to rank")
    return sorted(reports, key=lambda r: (-r.score, r.model_name))


def write_report_csv(reports: list[RobustnessReport], path: str | Path) -> None:
    """Emit one cross and one inner row per model: per-scenario squared
    deviations, the variance, and the score (score-table layout)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scenarios = sorted({s for r in reports for s in r.deviations_cross})
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "side", *scenarios, "variance", "score",
                         "divisor"])
        for report in reports:
            for side, devs, variance in (
                ("cross", report.deviations_cross, report.sigma2_cross),
                ("inner", report.deviations_inner, report.sigma2_inner),
            ):
                writer.writerow([
                    report.model_name,
                    side,
                    *[f"{devs[s]:.6f}" if s in devs else "" for s in scenarios],
                    f"{variance:.6f}",
                    f"{report.score:.6f}",
                    report.divisor_mode,
                ])
