"""Crosslingual factual-recall consistency and entity-alignment probes."""

from ._xprobe import (
    DatasetError,
    GatewayError,
    MetricsError,
    PromptError,
    RunError,
    TraceError,
    XprobeError,
    apply_subinj,
    apply_subsub,
    build_prompts,
    compare_variants,
    contains_answer,
    curves,
    emit_prompts,
    enumerate_pairs,
    fact_seed,
    format_improvement,
    load_trace,
    normalize,
    pearson,
    plan_run,
    relative_improvement,
    render_base,
    report,
    run_mock,
    score,
    validate_dataset,
)

__version__ = "0.1.0"
