"""Model-accuracy tables: per-model original accuracy plus per-scenario
cross/inner accuracies, and the flat records the regression consumes.

File formats (comma-delimited, UTF-8):

* results:    header ``model,mu,scenario,cross,inner``; one row per
  (model, scenario).  ``inner`` may be blank when only cross-scenario runs
  exist.  Accuracies are fractions in [0, 1]; a trailing ``%`` divides by
  100 on load.
* regression: header ``model,scenario,class,accuracy``.  Optional leading
  comment lines ``# levels <factor>: a,b,c`` declare the allowed level
  set for a factor; rows outside a declared set are errors.

On load, models and each model's scenarios are canonicalized to sorted
order, so shuffled rows produce equal tables and write/load round-trips.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

logger = logging.getLogger(__name__)

RESULTS_HEADER = ["model", "mu", "scenario", "cross", "inner"]
REGRESSION_HEADER = ["model", "scenario", "class", "accuracy"]


class ResultsError(Exception):
    """Results or regression file cannot be parsed as specified."""


@dataclass
class ResultTable:
    """One model's accuracy table.

    ``mu`` is the best-weight accuracy trained and tested on original
    images.  ``cross[s]`` is trained-on-original, tested-on-scenario-s;
    ``inner[s]`` is trained-and-tested-on-s (may be empty for
    cross-only studies).
    """

    model_name: str
    mu: float
    cross: dict[str, float]
    inner: dict[str, float]
    scenario_order: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.scenario_order:
            self.scenario_order = sorted(self.cross)
        if not self.scenario_order:
            raise ResultsError(f"{self.model_name}: needs at least one scenario")
        for name, value in [("mu", self.mu), *self.cross.items(),
                            *self.inner.items()]:
            if not 0.0 <= value <= 1.0:
                raise ResultsError(
                    f"{self.model_name}: accuracy {name}={value} outside [0, 1]"
                )
        extra = set(self.inner) - set(self.cross)
        if extra:
            raise ResultsError(
                f"{self.model_name}: inner scenarios {sorted(extra)} missing "
                "from cross"
            )

    @property
    def n(self) -> int:
        return len(self.scenario_order)


@dataclass(frozen=True)
class RegressionRecord:
    model_name: str
    scenario: str
    class_label: str
    accuracy: float

    def as_row(self) -> dict[str, object]:
        return {
            "model": self.model_name,
            "scenario": self.scenario,
            "class": self.class_label,
            "accuracy": self.accuracy,
        }


def parse_accuracy(text: str, context: str) -> float:
    """Parse a fraction or a percent-with-suffix into [0, 1]."""
    text = text.strip()
    try:
        if text.endswith("%"):
            value = float(text[:-1]) / 100.0
        else:
            value = float(text)
    except ValueError as exc:
        raise ResultsError(f"{context}: not a number: {text!r}") from exc
    if not 0.0 <= value <= 1.0:
        raise ResultsError(f"{context}: accuracy {value} outside [0, 1]")
    return value


def load_results(path: str | Path) -> list[ResultTable]:
    """Read per-model tables; order-insensitive to row shuffling."""
    path = Path(path)
    mus: dict[str, float] = {}
    cross: dict[str, dict[str, float]] = {}
    inner: dict[str, dict[str, float]] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != RESULTS_HEADER:
            raise ResultsError(
                f"{path}: expected header {','.join(RESULTS_HEADER)}, got {header}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(RESULTS_HEADER):
                raise ResultsError(f"{path}:{lineno}: expected "
                                   f"{len(RESULTS_HEADER)} fields, got {len(row)}")
            model, mu_text, scenario, cross_text, inner_text = \
                (cell.strip() for cell in row)
            context = f"{path}:{lineno}"
            if not mu_text:
                raise ResultsError(f"{context}: missing mu for model {model!r}")
            mu = parse_accuracy(mu_text, context)
            if model in mus and mus[model] != mu:
                raise ResultsError(
                    f"{context}: conflicting mu for {model!r}: "
                    f"{mus[model]} vs {mu}"
                )
            mus[model] = mu
            cross.setdefault(model, {})[scenario] = \
                parse_accuracy(cross_text, context)
            if inner_text:
                inner.setdefault(model, {})[scenario] = \
                    parse_accuracy(inner_text, context)
    tables = [
        ResultTable(
            model_name=model,
            mu=mus[model],
            cross=dict(sorted(cross[model].items())),
            inner=dict(sorted(inner.get(model, {}).items())),
        )
        for model in sorted(mus)
    ]
    if not tables:
        raise ResultsError(f"{path}: no result rows")
    return tables


def write_results(tables: list[ResultTable], path: str | Path) -> None:
    """Inverse of load_results: load(write(tables)) == tables."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULTS_HEADER)
        for table in sorted(tables, key=lambda t: t.model_name):
            for scenario in table.scenario_order:
                inner = table.inner.get(scenario)
                writer.writerow([
                    table.model_name,
                    repr(table.mu),
                    scenario,
                    repr(table.cross[scenario]),
                    "" if inner is None else repr(inner),
                ])


def load_regression_records(path: str | Path) -> list[RegressionRecord]:
    """Read flat (model, scenario, class, accuracy) records.

    Duplicate (model, scenario, class) cells are legal: the last row wins
    and a warning is logged, matching a spreadsheet-style merge.
    """
    path = Path(path)
    declared: dict[str, set[str]] = {}
    cells: dict[tuple[str, str, str], float] = {}
    order: list[tuple[str, str, str]] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        lines = fh.readlines()
    body_start = 0
    for raw in lines:
        stripped = raw.strip()
        if stripped.startswith("#"):
            body_start += 1
            _parse_level_comment(stripped, declared)
        else:
            break
    reader = csv.reader(lines[body_start:])
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != REGRESSION_HEADER:
        raise ResultsError(
            f"{path}: expected header {','.join(REGRESSION_HEADER)}, got {header}"
        )
    for offset, row in enumerate(reader, start=body_start + 2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(REGRESSION_HEADER):
            raise ResultsError(f"{path}:{offset}: expected 4 fields, got {len(row)}")
        model, scenario, class_label, acc_text = (cell.strip() for cell in row)
        context = f"{path}:{offset}"
        for factor, value in (("model", model), ("scenario", scenario),
                              ("class", class_label)):
            allowed = declared.get(factor)
            if allowed is not None and value not in allowed:
                raise ResultsError(
                    f"{context}: unknown {factor} level {value!r}; declared "
                    f"levels: {sorted(allowed)}"
                )
        key = (model, scenario, class_label)
        if key in cells:
            logger.warning("%s: duplicate cell %s; last value wins", context, key)
        else:
            order.append(key)
        cells[key] = parse_accuracy(acc_text, context)
    if not cells:
        raise ResultsError(f"{path}: no regression rows")
    return [
        RegressionRecord(model_name=m, scenario=s, class_label=c,
                         accuracy=cells[(m, s, c)])
        for m, s, c in order
    ]


def _parse_level_comment(line: str, declared: dict[str, set[str]]) -> None:
    # "# levels scenario: a, b, c"
    body = line.lstrip("#").strip()
    if not body.startswith("levels "):
        return
    rest = body[len("levels "):]
    if ":" not in rest:
        raise ResultsError(f"malformed level declaration: {line!r}")
    factor, values = rest.split(":", 1)
    declared[factor.strip()] = {
        v.strip() for v in values.split(",") if v.strip()
    }
