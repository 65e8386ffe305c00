"""Command-line entry point: validate, synthesize, score, regress, report.

Log output is line-oriented ``event=... key=value`` text on stderr with a
stable schema so CI jobs can scrape it.  Exit status is 0 only when the
subcommand produced no error entries.  All randomness flows from --seed;
when omitted, a fresh seed is drawn, logged, and used, so any run can be
replayed.
"""

from __future__ import annotations

import argparse
import io
import secrets
import sys
from dataclasses import replace
from pathlib import Path

from ._kv import parse_kv_file
from .corpus import (
    ManifestError,
    load_manifest,
    parse_expectations,
    validate_corpus,
)
from .genclient import GenClientError, GenConfig, GenerationClient
from .regression import (
    DesignError,
    DesignSpec,
    FitError,
    diagnostics,
    encode_design,
    fit_ols,
    interpret_coefficient,
    write_diagnostics,
    write_fit_csv,
)
from .results import ResultsError, load_regression_records, load_results
from .robustness import (
    DIVISOR_MODES,
    DIVISOR_SAMPLE,
    rank_models,
    robustness_score,
    write_report_csv,
)
from .scenarios import ScenarioKind, ScenarioParams, parse_kinds, synthesize_corpus

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def log_event(event: str, **fields) -> None:
    parts = [f"event={event}"]
    parts.extend(f"{key}={value}" for key, value in fields.items())
    print(" ".join(parts), file=sys.stderr)


def _fail(message: str, code: int = 1) -> int:
    log_event("error", detail=repr(message))
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenebench",
        description="Synthesize robustness scenarios from an image+mask "
                    "corpus, score model robustness, and run categorical "
                    "OLS analysis.",
    )
    parser.add_argument("--config", metavar="FILE",
                        help="key = value file whose entries override flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a corpus manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--expect", metavar="FILE",
                   help="expected-count table (total = N, <class> = N)")

    p = sub.add_parser("synthesize", help="generate scenario variants")
    p.add_argument("--manifest", required=True)
    p.add_argument("--kinds", required=True,
                   help="comma-separated kinds, or 'offline' / 'all'")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--donors", metavar="DIR",
                   help="directory of donor images for random_background")
    p.add_argument("--params", metavar="FILE",
                   help="scenario parameter file (key = value)")
    p.add_argument("--gen-config", metavar="FILE",
                   help="generation service config for ai_background")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("score", help="compute robustness scores")
    p.add_argument("--results", required=True)
    p.add_argument("--divisor", choices=DIVISOR_MODES, default=DIVISOR_SAMPLE)
    p.add_argument("--out", metavar="FILE", help="write the score table CSV here")

    p = sub.add_parser("regress", help="fit categorical OLS")
    p.add_argument("--data", required=True)
    p.add_argument("--factors", default="model,scenario,class")
    p.add_argument("--refs", help="comma-separated reference levels, one per factor")
    p.add_argument("--response", default="accuracy")
    p.add_argument("--out", metavar="FILE", help="write the fit summary CSV here")
    p.add_argument("--diagnostics", metavar="DIR",
                   help="write residual/QQ plot data files here")

    p = sub.add_parser("report", help="merged robustness + regression document")
    p.add_argument("--results", required=True)
    p.add_argument("--data", help="regression records; section omitted if absent")
    p.add_argument("--divisor", choices=DIVISOR_MODES, default=DIVISOR_SAMPLE)
    p.add_argument("--refs", help="comma-separated reference levels")
    p.add_argument("--factors", default="model,scenario,class")
    p.add_argument("--response", default="accuracy")
    p.add_argument("--out", metavar="FILE", help="write the document here")
    return parser


def _apply_config(args: argparse.Namespace) -> None:
    if not args.config:
        return
    for key, value in parse_kv_file(args.config).items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise ValueError(f"config key {key!r} does not match any flag")
        current = getattr(args, dest)
        if dest == "seed" or (isinstance(current, int)
                              and not isinstance(current, bool)):
            setattr(args, dest, int(value))
        else:
            setattr(args, dest, value)


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _apply_config(args)
    except (OSError, ValueError) as exc:
        return _fail(str(exc), code=2)

    handler = {
        "validate": _cmd_validate,
        "synthesize": _cmd_synthesize,
        "score": _cmd_score,
        "regress": _cmd_regress,
        "report": _cmd_report,
    }[args.command]
    try:
        return handler(args)
    except (ManifestError, ResultsError, DesignError, FitError,
            GenClientError, OSError, ValueError) as exc:
        return _fail(str(exc))


def _cmd_validate(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    expectations = parse_expectations(args.expect) if args.expect else None
    report = validate_corpus(manifest, expectations)
    log_event("validate", manifest=args.manifest, total=report.total_records,
              classes=len(report.per_class_counts))
    for label in sorted(report.per_class_counts):
        log_event("class_count", label=label,
                  count=report.per_class_counts[label])
    for record_id, detail in report.errors:
        log_event("validation_error", id=record_id, detail=repr(detail))
    for record_id, detail in report.warnings:
        log_event("validation_warning", id=record_id, detail=repr(detail))
    for record_id in report.degenerate_ids:
        log_event("degenerate", id=record_id)
    for detail in report.expectation_failures:
        log_event("expectation_failure", detail=repr(detail))
    ok = report.passed and report.expected_check is not False
    log_event("validate_result", passed=str(report.passed).lower(),
              expected_check=report.expected_check)
    return 0 if ok else 1


def _cmd_synthesize(args: argparse.Namespace) -> int:
    if args.workers < 1:
        return _fail(f"--workers must be >= 1, got {args.workers}")
    manifest = load_manifest(args.manifest)
    params = (ScenarioParams.from_file(args.params) if args.params
              else ScenarioParams())
    seed = args.seed
    if seed is None:
        seed = secrets.randbelow(2 ** 31)
        log_event("seed_selected", seed=seed)
    params = replace(params, master_seed=int(seed))
    kinds = parse_kinds(args.kinds)

    donor_pool = None
    if args.donors:
        donor_dir = Path(args.donors)
        donor_pool = sorted(
            p for p in donor_dir.iterdir()
            if p.suffix.lower() in IMAGE_SUFFIXES
        )
        if not donor_pool:
            return _fail(f"no donor images found under {donor_dir}")

    gen_client = None
    if ScenarioKind.AI_BACKGROUND in kinds:
        config = (GenConfig.from_file(args.gen_config) if args.gen_config
                  else GenConfig.from_env())
        gen_client = GenerationClient(config)  # raises GenConfigError if unset

    log_event("synthesize_start", manifest=args.manifest,
              kinds=",".join(k.value for k in kinds), seed=seed,
              workers=args.workers, out=args.out)
    out_manifest = synthesize_corpus(
        manifest, kinds, params, args.out,
        donor_pool=donor_pool, gen_client=gen_client, workers=args.workers,
    )
    skips = out_manifest.meta.get("skips", [])
    for skip in skips:
        log_event("skip", id=skip["id"], kind=skip["kind"],
                  reason=repr(skip["reason"]))
    log_event("synthesize_done", outputs=len(out_manifest.records),
              skips=len(skips), manifest=str(Path(args.out) / "manifest.jsonl"))
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    tables = load_results(args.results)
    reports = rank_models([robustness_score(t, args.divisor) for t in tables])
    for report in reports:
        log_event("score", model=report.model_name,
                  sigma2_cross=f"{report.sigma2_cross:.6f}",
                  sigma2_inner=f"{report.sigma2_inner:.6f}",
                  score=f"{report.score:.6f}", divisor=report.divisor_mode)
    ranking = " > ".join(r.model_name for r in reports)
    log_event("ranking", order=repr(ranking))
    if args.out:
        write_report_csv(reports, args.out)
        log_event("report_written", path=args.out)
    return 0


def _parse_factors(args: argparse.Namespace, rows) -> DesignSpec:
    factor_names = [f.strip() for f in args.factors.split(",") if f.strip()]
    references = None
    if args.refs:
        references = [r.strip() for r in args.refs.split(",")]
        if len(references) != len(factor_names):
            raise DesignError(
                f"{len(references)} references given for "
                f"{len(factor_names)} factors"
            )
    return DesignSpec.from_records(rows, factor_names, references,
                                   response=args.response)


def _cmd_regress(args: argparse.Namespace) -> int:
    records = load_regression_records(args.data)
    rows = [r.as_row() for r in records]
    spec = _parse_factors(args, rows)
    design, y = encode_design(rows, spec)
    fit = fit_ols(design, y)
    log_event("fit", rows=design.m, columns=design.k, df=fit.df,
              r_squared=f"{fit.r_squared:.6f}")
    for i, label in enumerate(fit.labels):
        log_event("coefficient", variable=repr(label),
                  estimate=f"{fit.estimates[i]:.6g}",
                  p=f"{fit.p_values[i]:.4g}", summary=fit.significance[i])
    if args.out:
        write_fit_csv(fit, args.out)
        log_event("fit_written", path=args.out)
    if args.diagnostics:
        write_diagnostics(diagnostics(fit), args.diagnostics)
        log_event("diagnostics_written", path=args.diagnostics)
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    tables = load_results(args.results)
    reports = rank_models([robustness_score(t, args.divisor) for t in tables])

    doc = io.StringIO()
    doc.write("# Robustness scores\n\n")
    scenarios = sorted({s for r in reports for s in r.deviations_cross})
    doc.write("model,side," + ",".join(scenarios) + ",variance,score\n")
    for report in reports:
        for side, devs, var in (("cross", report.deviations_cross,
                                 report.sigma2_cross),
                                ("inner", report.deviations_inner,
                                 report.sigma2_inner)):
            cells = [f"{devs[s]:.6f}" if s in devs else "" for s in scenarios]
            doc.write(f"{report.model_name},{side}," + ",".join(cells)
                      + f",{var:.6f},{report.score:.6f}\n")
    doc.write("\nranking: " + " > ".join(r.model_name for r in reports) + "\n")

    if args.data:
        records = load_regression_records(args.data)
        rows = [r.as_row() for r in records]
        spec = _parse_factors(args, rows)
        design, y = encode_design(rows, spec)
        fit = fit_ols(design, y)
        doc.write("\n# Regression\n\n")
        doc.write("Variable,Estimate,P value,P value summary\n")
        for i, label in enumerate(fit.labels):
            doc.write(f"{label},{fit.estimates[i]:.6g},"
                      f"{fit.p_values[i]:.4g},{fit.significance[i]}\n")
        doc.write("\n# Interpretations\n\n")
        for i, label in enumerate(fit.labels):
            if label == "Intercept":
                continue
            doc.write(interpret_coefficient(label, float(fit.estimates[i]))
                      + "\n")

    text = doc.getvalue()
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
        log_event("report_written", path=args.out)
    else:
        sys.stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
