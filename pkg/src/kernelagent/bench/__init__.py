"""Benchmark harness: suite loading, case execution, validation, reporting."""

from .harness import (
    Assertion,
    AssertionOutcome,
    BenchCase,
    BenchReport,
    BenchTurn,
    CaseResult,
    Validator,
    ValidatorResult,
    bundled_suite_path,
    load_suite,
    missing_requirements,
    render_table,
    report,
    resolve_path,
    run_case,
    validate,
)
from .oracle import oracle_factory, oracle_script, scripted_factory

__all__ = [
    "Assertion",
    "AssertionOutcome",
    "BenchCase",
    "BenchReport",
    "BenchTurn",
    "CaseResult",
    "Validator",
    "ValidatorResult",
    "bundled_suite_path",
    "load_suite",
    "missing_requirements",
    "oracle_factory",
    "oracle_script",
    "render_table",
    "report",
    "resolve_path",
    "run_case",
    "scripted_factory",
    "validate",
]
