"""scenebench: mask-aware scenario synthesis for image corpora, model
robustness scoring, and categorical OLS analysis."""

from .corpus import (
    CorpusRecord,
    Manifest,
    ValidationReport,
    build_manifest,
    load_manifest,
    load_pair,
    threshold_mask,
    validate_corpus,
    write_manifest,
)
from .genclient import (
    FidelityThresholds,
    FidelityVerdict,
    GenConfig,
    GenerationClient,
    PromptTemplate,
    build_prompt,
    fidelity_filter,
)
from .regression import (
    DesignMatrix,
    DesignSpec,
    Factor,
    RegressionFit,
    diagnostics,
    encode_design,
    fit_ols,
    interpret_coefficient,
    inverse_normal_cdf,
    p_value,
    significance_summary,
)
from .results import (
    RegressionRecord,
    ResultTable,
    load_regression_records,
    load_results,
    write_results,
)
from .robustness import (
    RobustnessReport,
    rank_models,
    robustness_score,
    variance_cross,
    variance_inner,
)
from .scenarios import (
    OFFLINE_KINDS,
    ScenarioKind,
    ScenarioOutput,
    ScenarioParams,
    derive_seed,
    generate,
    make_transparent,
    parse_kinds,
    random_background,
    synthesize_corpus,
)

__version__ = "0.1.0"

__all__ = [
    "CorpusRecord", "Manifest", "ValidationReport", "build_manifest",
    "load_manifest", "load_pair", "threshold_mask", "validate_corpus",
    "write_manifest",
    "FidelityThresholds", "FidelityVerdict", "GenConfig", "GenerationClient",
    "PromptTemplate", "build_prompt", "fidelity_filter",
    "DesignMatrix", "DesignSpec", "Factor", "RegressionFit", "diagnostics",
    "encode_design", "fit_ols", "interpret_coefficient", "inverse_normal_cdf",
    "p_value", "significance_summary",
    "RegressionRecord", "ResultTable", "load_regression_records",
    "load_results", "write_results",
    "RobustnessReport", "rank_models", "robustness_score", "variance_cross",
    "variance_inner",
    "OFFLINE_KINDS", "ScenarioKind", "ScenarioOutput", "ScenarioParams",
    "derive_seed", "generate", "make_transparent", "parse_kinds",
    "random_background", "synthesize_corpus",
    "__version__",
]
