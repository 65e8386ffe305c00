"""OLS machinery tests.

Independent oracles, all built from stdlib math rather than the library
code paths under test: an adaptive Simpson integrator for the Student-t
density, bisection on the error-function integral for normal quantiles,
and a normal-equations solve for coefficient recovery.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from scenebench.regression import (
    DesignError,
    DesignMatrix,
    DesignSpec,
    Factor,
    FitError,
    RankDeficiencyError,
    diagnostics,
    encode_design,
    fit_ols,
    interpret_coefficient,
    inverse_normal_cdf,
    p_value,
    significance_summary,
    write_diagnostics,
    write_fit_csv,
)


# ---------------------------------------------------------------- oracles

def adaptive_simpson(f, a, b, tol=1e-12, depth=40):
    fa, fb, fm = f(a), f(b), f((a + b) / 2)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = (a + b) / 2
        lm, rm = (a + m) / 2, (m + b) / 2
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6 * (fa + 4 * flm + fm)
        right = (b - m) / 6 * (fm + 4 * frm + fb)
        if depth <= 0 or abs(left + right - whole) <= 15 * tol:
            return left + right + (left + right - whole) / 15
        return (rec(a, m, fa, flm, fm, left, tol / 2, depth - 1)
                + rec(m, b, fm, frm, fb, right, tol / 2, depth - 1))

    whole = (b - a) / 6 * (fa + 4 * fm + fb)
    return rec(a, b, fa, fm, fb, whole, tol, depth)


def t_density(df: int):
    log_norm = (math.lgamma((df + 1) / 2) - math.lgamma(df / 2)
                - 0.5 * math.log(df * math.pi))

    def f(x):
        return math.exp(log_norm - (df + 1) / 2 * math.log1p(x * x / df))

    return f


def p_value_oracle(t: float, df: int) -> float:
    """Two-sided tail by integrating the central density and complementing."""
    if t == 0:
        return 1.0
    central = adaptive_simpson(t_density(df), -abs(t), abs(t))
    return 1.0 - central


def normal_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def inverse_normal_oracle(q: float) -> float:
    lo, hi = -12.0, 12.0
    for _ in range(200):
        mid = (lo + hi) / 2
        if normal_cdf(mid) < q:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def crossed_rows(level_counts, response=None):
    """Full factorial of synthetic levels for the given factor sizes."""
    names = ["model", "scenario", "class"][: len(level_counts)]
    levels = [[f"{n}{i}" for i in range(c)]
              for n, c in zip(names, level_counts)]
    rows = []
    for combo in itertools.product(*levels):
        row = dict(zip(names, combo))
        row["accuracy"] = 0.0 if response is None else response
        rows.append(row)
    return names, rows


# ---------------------------------------------------------------- encoding

class TestEncodeDesign:
    def test_two_level_factor(self):
        spec = DesignSpec(factors=(Factor("f", ("A", "B"), "A"),),
                          response="accuracy")
        rows = [{"f": "A", "accuracy": 1.0}, {"f": "B", "accuracy": 2.0}]
        design, y = encode_design(rows, spec)
        assert design.labels == ["Intercept", "f[B]"]
        assert design.values.tolist() == [[1.0, 0.0], [1.0, 1.0]]
        assert y.tolist() == [1.0, 2.0]

    def test_all_reference_rows(self):
        spec = DesignSpec(factors=(Factor("f", ("A", "B"), "A"),))
        rows = [{"f": "A", "accuracy": 0.5}] * 3
        design, _ = encode_design(rows, spec)
        assert (design.values[:, 0] == 1.0).all()
        assert (design.values[:, 1:] == 0.0).all()

    def test_column_count_formula(self):
        names, rows = crossed_rows((7, 14, 12))
        spec = DesignSpec.from_records(rows, names)
        design, _ = encode_design(rows, spec)
        assert design.k == 1 + 6 + 13 + 11 == 31
        assert design.m == 7 * 14 * 12

    def test_column_labels_factor_bracket_level(self):
        names, rows = crossed_rows((2, 2))
        spec = DesignSpec.from_records(rows, names)
        design, _ = encode_design(rows, spec)
        assert design.labels == ["Intercept", "model[model1]",
                                 "scenario[scenario1]"]

    def test_unseen_level_rejected(self):
        spec = DesignSpec(factors=(Factor("f", ("A", "B"), "A"),))
        with pytest.raises(DesignError, match="record 1.*'C'"):
            encode_design([{"f": "A", "accuracy": 0}, {"f": "C", "accuracy": 0}],
                          spec)

    def test_reference_must_be_a_level(self):
        with pytest.raises(DesignError, match="reference"):
            Factor("f", ("A", "B"), "Z")


# ---------------------------------------------------------------- fitting

def planted_fit(level_counts=(4, 3, 5), seed=0, noise=0.0):
    names, rows = crossed_rows(level_counts)
    spec = DesignSpec.from_records(rows, names)
    design, _ = encode_design(rows, spec)
    rng = np.random.default_rng(seed)
    beta = rng.normal(0.0, 1.0, design.k)
    y = design.values @ beta
    if noise:
        y = y + rng.normal(0.0, noise, design.m)
    return design, y, beta, rows, names


class TestFitOls:
    def test_constant_response(self):
        names, rows = crossed_rows((3, 2), response=0.7)
        spec = DesignSpec.from_records(rows, names)
        design, y = encode_design(rows, spec)
        fit = fit_ols(design, y)
        assert fit.estimates[0] == pytest.approx(0.7, abs=1e-12)
        assert np.abs(fit.estimates[1:]).max() < 1e-12
        assert fit.rss == pytest.approx(0.0, abs=1e-20)

    def test_noiseless_planted_recovery(self):
        design, y, beta, _, _ = planted_fit()
        fit = fit_ols(design, y)
        assert np.abs(fit.estimates - beta).max() < 1e-8

    def test_agrees_with_normal_equations_oracle(self):
        design, y, _, _, _ = planted_fit(noise=0.05, seed=3)
        fit = fit_ols(design, y)
        X = design.values
        beta_ne = np.linalg.solve(X.T @ X, X.T @ y)
        assert np.abs(fit.estimates - beta_ne).max() < 1e-8

    def test_residual_orthogonality(self):
        design, y, _, _, _ = planted_fit(noise=0.1, seed=5)
        fit = fit_ols(design, y)
        scale = max(1.0, float(np.abs(y).max())) * design.m
        assert np.abs(design.values.T @ fit.residuals).max() < 1e-8 * scale

    def test_reference_change_leaves_fit_invariant(self):
        names, rows = crossed_rows((4, 3, 5))
        rng = np.random.default_rng(11)
        for row in rows:
            row["accuracy"] = float(rng.uniform(0.2, 0.95))
        spec_a = DesignSpec.from_records(rows, names)
        spec_b = DesignSpec.from_records(
            rows, names, references=["model2", "scenario0", "class3"])
        fit_a = fit_ols(*encode_design(rows, spec_a))
        fit_b = fit_ols(*encode_design(rows, spec_b))
        assert np.abs(fit_a.fitted - fit_b.fitted).max() < 1e-10
        assert abs(fit_a.rss - fit_b.rss) < 1e-10
        assert abs(fit_a.r_squared - fit_b.r_squared) < 1e-10
        # individual coefficients do move
        assert not np.allclose(fit_a.estimates, fit_b.estimates)

    def test_rank_deficiency_names_columns(self):
        X = np.ones((6, 3))
        X[:, 1] = [0, 1, 0, 1, 0, 1]
        X[:, 2] = X[:, 1]  # exact duplicate
        design = DesignMatrix(values=X, labels=["Intercept", "f[b]", "g[b]"])
        with pytest.raises(RankDeficiencyError) as err:
            fit_ols(design, np.arange(6.0))
        assert set(err.value.columns) & {"f[b]", "g[b]"}

    def test_more_columns_than_rows_rejected(self):
        design = DesignMatrix(values=np.ones((2, 3)), labels=["a", "b", "c"])
        with pytest.raises(FitError, match="more rows"):
            fit_ols(design, np.zeros(2))

    def test_inference_columns_populated(self):
        design, y, _, _, _ = planted_fit(noise=0.05, seed=7)
        fit = fit_ols(design, y)
        assert fit.df == design.m - design.k
        assert ((0 <= fit.p_values) & (fit.p_values <= 1)).all()
        assert (fit.ci95_low <= fit.estimates).all()
        assert (fit.estimates <= fit.ci95_high).all()
        assert len(fit.significance) == design.k
        assert 0.0 <= fit.r_squared <= 1.0

    def test_ci_uses_t_quantile(self):
        design, y, _, _, _ = planted_fit(noise=0.05, seed=9)
        fit = fit_ols(design, y)
        half_width = (fit.ci95_high - fit.ci95_low) / 2
        # two-sided p at the CI edge is 0.05 by construction
        edge_t = half_width / fit.std_errors
        assert p_value(float(edge_t[0]), fit.df) == pytest.approx(0.05, abs=1e-9)


# ---------------------------------------------------------------- p-values

class TestPValue:
    def test_t_zero_gives_one(self):
        assert p_value(0.0, 5) == 1.0

    def test_large_t_goes_to_zero(self):
        assert p_value(50.0, 30) < 1e-10
        assert p_value(np.inf, 3) == 0.0

    def test_known_value_df_1000(self):
        assert p_value(1.96, 1000) == pytest.approx(0.0503, abs=1e-4)

    @pytest.mark.parametrize("df", [1, 2, 5, 10, 30, 100, 1000])
    def test_matches_integration_oracle(self, df):
        for t in (0.0, 0.3, 1.0, 1.96, 2.5, 4.0, 8.0):
            assert p_value(t, df) == pytest.approx(p_value_oracle(t, df),
                                                   abs=1e-6)

    def test_symmetric_in_t(self):
        assert p_value(2.3, 7) == p_value(-2.3, 7)

    def test_monotone_decreasing_in_abs_t(self):
        grid = np.linspace(0.0, 12.0, 200)
        for df in (1, 4, 50):
            values = p_value(grid, df)
            assert (np.diff(values) <= 1e-15).all()

    def test_df_validated(self):
        with pytest.raises(ValueError):
            p_value(1.0, 0)


class TestSignificance:
    @pytest.mark.parametrize("p,expected", [
        (0.00005, "****"),
        (0.0001, "***"),   # boundary: strict inequality
        (0.0009, "***"),
        (0.001, "**"),
        (0.009, "**"),
        (0.01, "*"),
        (0.03, "*"),
        (0.05, "ns"),
        (0.2821, "ns"),
        (1.0, "ns"),
        (0.0, "****"),
    ])
    def test_brackets(self, p, expected):
        assert significance_summary(p) == expected

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            significance_summary(1.5)


# ------------------------------------------------------------- diagnostics

class TestDiagnostics:
    def test_zero_noise_fit(self):
        design, y, _, _, _ = planted_fit()
        diag = diagnostics(fit_ols(design, y))
        assert np.abs(diag.residuals).max() < 1e-10
        assert np.abs(diag.qq_observed).max() < 1e-6

    def test_inverse_normal_cdf_quantile(self):
        assert inverse_normal_cdf(0.975) == pytest.approx(1.959964, abs=1e-6)

    def test_inverse_normal_matches_bisection_oracle(self):
        for q in (0.01, 0.1, 0.25, 0.5, 0.8, 0.975, 0.999):
            assert inverse_normal_cdf(q) == pytest.approx(
                inverse_normal_oracle(q), abs=1e-9)

    def test_standard_normal_residuals_track_identity_line(self):
        m = 10_000
        rng = np.random.default_rng(42)
        y = rng.standard_normal(m)
        design = DesignMatrix(values=np.ones((m, 1)), labels=["Intercept"])
        diag = diagnostics(fit_ols(design, y))
        inner = slice(m // 20, m - m // 20)  # central 90% of quantiles
        gap = np.abs(diag.qq_observed[inner] - diag.qq_theoretical[inner])
        assert gap.max() < 0.1

    def test_residual_pairs_align_with_fit(self):
        design, y, _, _, _ = planted_fit(noise=0.2, seed=13)
        fit = fit_ols(design, y)
        diag = diagnostics(fit)
        assert np.array_equal(diag.fitted, fit.fitted)
        assert np.array_equal(diag.residuals, fit.residuals)
        assert diag.qq_theoretical.shape == diag.qq_observed.shape

    def test_write_outputs(self, tmp_path):
        design, y, _, _, _ = planted_fit(noise=0.1, seed=17)
        fit = fit_ols(design, y)
        write_fit_csv(fit, tmp_path / "fit.csv")
        write_diagnostics(diagnostics(fit), tmp_path / "diag")
        fit_lines = (tmp_path / "fit.csv").read_text().splitlines()
        assert fit_lines[0].startswith("Variable,Estimate")
        assert len(fit_lines) == 1 + design.k
        assert (tmp_path / "diag" / "residuals.tsv").exists()
        qq = (tmp_path / "diag" / "qq.tsv").read_text().splitlines()
        assert qq[0] == "theoretical\tobserved"
        assert len(qq) == 1 + design.m


class TestInterpretation:
    def test_negative_coefficient_decreases_accuracy(self):
        text = interpret_coefficient("scenario[random_background]", -0.7078)
        assert "decreases the classification accuracy by 70.78%" in text
        assert "reference level" in text

    def test_positive_coefficient_increases(self):
        text = interpret_coefficient("model[DenseNet121]", 0.05)
        assert "increases the classification accuracy by 5.00%" in text
