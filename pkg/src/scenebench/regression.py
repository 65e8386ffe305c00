"""Main-effects multiple linear regression with categorical predictors.

Each factor is dummy-coded: one indicator column per non-reference level,
with the reference level absorbed by the intercept.  Coefficients are
ordinary least squares estimates solved through a column-pivoted QR
decomposition (never the normal equations, which square the condition
number of these sparse 0/1 designs).  Standard errors, two-sided t-test
p-values, and 95% confidence intervals follow the classical linear-model
theory; p-values come from the Student-t tail expressed through the
regularized incomplete beta function.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import linalg as slinalg
from scipy import stats as sstats
from scipy.special import betainc, ndtri


class DesignError(Exception):
    """Records and design spec disagree (unknown level, bad factor)."""


class FitError(Exception):
    """The design matrix cannot support an OLS fit."""


class RankDeficiencyError(FitError):
    """Collinear columns; carries their labels."""

    def __init__(self, columns: list[str]):
        self.columns = columns
        super().__init__(f"design matrix is rank deficient; collinear "
                         f"columns: {', '.join(columns)}")


@dataclass(frozen=True)
class Factor:
    name: str
    levels: tuple[str, ...]
    reference: str

    def __post_init__(self) -> None:
        if not self.levels:
            raise DesignError(f"factor {self.name!r} has an empty level set")
        if self.reference not in self.levels:
            raise DesignError(
                f"factor {self.name!r}: reference {self.reference!r} not in "
                f"levels {list(self.levels)}"
            )


@dataclass(frozen=True)
class DesignSpec:
    factors: tuple[Factor, ...]
    response: str = "accuracy"

    @classmethod
    def from_records(
        cls,
        rows: Sequence[Mapping[str, object]],
        factor_names: Sequence[str],
        references: Sequence[str] | None = None,
        response: str = "accuracy",
    ) -> "DesignSpec":
        """Infer level sets from the data (sorted); references default to
        each factor's first sorted level."""
        factors = []
        for i, name in enumerate(factor_names):
            levels = tuple(sorted({str(row[name]) for row in rows}))
            ref = references[i] if references else levels[0]
            factors.append(Factor(name=name, levels=levels, reference=ref))
        return cls(factors=tuple(factors), response=response)


@dataclass
class DesignMatrix:
    """0/1 dummy matrix with an intercept column of ones.

    k = 1 + sum over factors of (levels - 1); labels are "factor[level]".
    """

    values: np.ndarray
    labels: list[str]

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]


def encode_design(
    rows: Sequence[Mapping[str, object]],
    spec: DesignSpec,
) -> tuple[DesignMatrix, np.ndarray]:
    """Dummy-code records into (DesignMatrix, response vector).

    Column order is deterministic: intercept first, then each factor's
    non-reference levels in the order declared by the spec.
    """
    labels = ["Intercept"]
    col_index: dict[tuple[str, str], int] = {}
    for factor in spec.factors:
        for level in factor.levels:
            if level == factor.reference:
                continue
            col_index[(factor.name, level)] = len(labels)
            labels.append(f"{factor.name}[{level}]")

    m, k = len(rows), len(labels)
    X = np.zeros((m, k), dtype=np.float64)
    X[:, 0] = 1.0
    y = np.empty(m, dtype=np.float64)
    for i, row in enumerate(rows):
        for factor in spec.factors:
            if factor.name not in row:
                raise DesignError(f"record {i}: missing factor {factor.name!r}")
            level = str(row[factor.name])
            if level not in factor.levels:
                raise DesignError(
                    f"record {i}: level {level!r} of factor {factor.name!r} "
                    "not declared in the design spec"
                )
            if level != factor.reference:
                X[i, col_index[(factor.name, level)]] = 1.0
        if spec.response not in row:
            raise DesignError(f"record {i}: missing response {spec.response!r}")
        y[i] = float(row[spec.response])  # type: ignore[arg-type]
    return DesignMatrix(values=X, labels=labels), y


SIGNIFICANCE_LEVELS = ("****", "***", "**", "*", "ns")


def significance_summary(p: float) -> str:
    """Star notation: **** p<0.0001, *** p<0.001, ** p<0.01, * p<0.05, ns."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if p < 0.0001:
        return "****"
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return "ns"


def p_value(t, df: int):
    """Two-sided Student-t tail probability.

    P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2) where I is the regularized
    incomplete beta function.  Accepts scalars or arrays.
    """
    if df < 1:
        raise ValueError(f"df must be >= 1, got {df}")
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        x = np.where(np.isinf(t), 0.0, df / (df + t * t))
    p = betainc(df / 2.0, 0.5, x)
    return float(p) if p.ndim == 0 else p


def inverse_normal_cdf(q):
    """Quantile function of the standard normal, exact to machine precision."""
    return ndtri(q)


@dataclass
class RegressionFit:
    labels: list[str]
    estimates: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    ci95_low: np.ndarray
    ci95_high: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    df: int
    rss: float
    sigma2: float
    r_squared: float
    significance: list[str] = field(default_factory=list)

    def coefficient(self, label: str) -> float:
        return float(self.estimates[self.labels.index(label)])


def fit_ols(design: DesignMatrix, y: np.ndarray) -> RegressionFit:
    """OLS through column-pivoted QR.

    Requires m > k and full column rank; rank is judged against
    ``m * eps * max column norm``, and a deficient design raises
    RankDeficiencyError naming the collinear columns.
    """
    X = design.values
    y = np.asarray(y, dtype=np.float64)
    m, k = X.shape
    if y.shape != (m,):
        raise FitError(f"response length {y.shape} does not match {m} rows")
    if m <= k:
        raise FitError(f"need more rows than columns: m={m}, k={k}")

    Q, R, piv = slinalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = m * np.finfo(np.float64).eps * np.linalg.norm(X, axis=0).max()
    rank = int((diag > tol).sum())
    if rank < k:
        collinear = [design.labels[j] for j in piv[rank:]]
        raise RankDeficiencyError(collinear)

    qty = Q.T @ y
    beta_pivoted = slinalg.solve_triangular(R, qty)
    beta = np.empty(k)
    beta[piv] = beta_pivoted

    fitted = X @ beta
    residuals = y - fitted
    rss = float(residuals @ residuals)
    df = m - k
    sigma2 = rss / df

    # (X^T X)^{-1} = P R^{-1} R^{-T} P^T
    r_inv = slinalg.solve_triangular(R, np.eye(k))
    xtx_inv_diag_pivoted = (r_inv * r_inv).sum(axis=1)
    xtx_inv_diag = np.empty(k)
    xtx_inv_diag[piv] = xtx_inv_diag_pivoted

    std_errors = np.sqrt(sigma2 * xtx_inv_diag)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = np.where(std_errors > 0, beta / std_errors,
                           np.where(beta == 0, 0.0, np.inf * np.sign(beta)))
    p_values = p_value(t_stats, df)
    t_crit = float(sstats.t.ppf(0.975, df))
    ci95_low = beta - t_crit * std_errors
    ci95_high = beta + t_crit * std_errors

    tss = float(((y - y.mean()) ** 2).sum())
    r_squared = 1.0 - rss / tss if tss > 0 else 1.0

    return RegressionFit(
        labels=list(design.labels),
        estimates=beta,
        std_errors=std_errors,
        t_stats=t_stats,
        p_values=np.atleast_1d(p_values),
        ci95_low=ci95_low,
        ci95_high=ci95_high,
        fitted=fitted,
        residuals=residuals,
        df=df,
        rss=rss,
        sigma2=sigma2,
        r_squared=r_squared,
        significance=[significance_summary(float(p))
                      for p in np.atleast_1d(p_values)],
    )


@dataclass
class Diagnostics:
    """Plot-ready data: residuals against fitted values, and a normal QQ
    pairing of theoretical quantiles with sorted standardized residuals."""

    fitted: np.ndarray
    residuals: np.ndarray
    qq_theoretical: np.ndarray
    qq_observed: np.ndarray


def diagnostics(fit: RegressionFit) -> Diagnostics:
    m = fit.residuals.size
    scale = np.sqrt(fit.sigma2)
    # a numerically perfect fit has no residual scale worth standardizing by
    tol = m * np.finfo(np.float64).eps * max(1.0, float(np.abs(fit.fitted).max()))
    standardized = fit.residuals / scale if scale > tol else np.zeros(m)
    order = np.argsort(standardized, kind="stable")
    probs = (np.arange(1, m + 1) - 0.5) / m
    return Diagnostics(
        fitted=fit.fitted.copy(),
        residuals=fit.residuals.copy(),
        qq_theoretical=inverse_normal_cdf(probs),
        qq_observed=standardized[order],
    )


def interpret_coefficient(label: str, estimate: float,
                          response: str = "the classification accuracy") -> str:
    """Plain-language reading of a dummy coefficient against its reference.

    interpret_coefficient("scenario[random_background]", -0.7078) ->
    "scenario[random_background] decreases the classification accuracy by
    70.78% when compared to the reference level."
    """
    direction = "decreases" if estimate < 0 else "increases"
    return (f"{label} {direction} {response} by {abs(estimate) * 100:.2f}% "
            "when compared to the reference level.")


def write_fit_csv(fit: RegressionFit, path: str | Path) -> None:
    """Summary table: Variable, Estimate, Std Error, t, P value, P value
    summary, CI bounds."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Variable", "Estimate", "Std Error", "t",
                         "P value", "P value summary", "CI95 low", "CI95 high"])
        for i, label in enumerate(fit.labels):
            writer.writerow([
                label,
                f"{fit.estimates[i]:.6g}",
                f"{fit.std_errors[i]:.6g}",
                f"{fit.t_stats[i]:.6g}",
                f"{fit.p_values[i]:.6g}",
                fit.significance[i],
                f"{fit.ci95_low[i]:.6g}",
                f"{fit.ci95_high[i]:.6g}",
            ])


def write_diagnostics(diag: Diagnostics, out_dir: str | Path) -> None:
    """Plain delimited plot-data files for external plotting tools."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "residuals.tsv").open("w", encoding="utf-8") as fh:
        fh.write("fitted\tresidual\n")
        for f, r in zip(diag.fitted, diag.residuals):
            fh.write(f"{f!r}\t{r!r}\n")
    with (out_dir / "qq.tsv").open("w", encoding="utf-8") as fh:
        fh.write("theoretical\tobserved\n")
        for t, o in zip(diag.qq_theoretical, diag.qq_observed):
            fh.write(f"{t!r}\t{o!r}\n")
