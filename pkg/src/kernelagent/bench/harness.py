"""State-management benchmark harness.

Cases seed an initial variable state, drive an agent with natural-language
queries, and validate by inspecting the runtime directly: assertions resolve
live values through attribute/element paths instead of parsing model text.
Queries within a case are linearly dependent, so an early failure cascades
into later validators on its own.
"""

from __future__ import annotations

import copy
import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

from ..errors import KernelAgentError, NotFoundError, SuiteSchemaError
from ..gateway import UsageCounter
from ..orchestrator import Agent, SessionEnd, step
from ..runtime import RuntimeConfig, RuntimeHandle, create_runtime
from ..security import SecurityPolicy, check

CATEGORIES = ("simple", "object", "scientific", "multi_variable", "multi_turn")

DEFAULT_INT_TOLERANCE = 0.0
DEFAULT_REAL_TOLERANCE = 1e-9

_COMPARATORS = ("==", "!=", "<", "<=", ">", ">=", "contains")


@dataclass
class Assertion:
    path: str
    op: str
    expected: Any
    tolerance: float | None = None


@dataclass
class Validator:
    assertions: list[Assertion] | None = None
    validator_source: str | None = None
    uses: list[str] = field(default_factory=list)


@dataclass
class BenchTurn:
    query: str
    validator: Validator
    oracle_source: str | None = None
    conversation: int = 1


@dataclass
class BenchCase:
    id: str
    category: str
    setup_source: str
    turns: list[BenchTurn]
    metadata: dict = field(default_factory=dict)


@dataclass
class AssertionOutcome:
    path: str
    op: str
    expected: Any
    actual: str
    passed: bool
    reason: str = ""


@dataclass
class ValidatorResult:
    passed: bool
    details: list[AssertionOutcome]
    turn_index: int


@dataclass
class CaseResult:
    case_id: str
    category: str
    turn_results: list[ValidatorResult]
    usage: UsageCounter
    error: str | None = None

    @property
    def queries_total(self) -> int:
        return len(self.turn_results)

    @property
    def queries_passed(self) -> int:
        return sum(1 for r in self.turn_results if r.passed)


@dataclass
class BenchReport:
    per_category: dict[str, float]
    per_case: dict[str, dict]
    total_steps: int
    prompt_tokens: int
    completion_tokens: int
    total_tokens: int
    success_rate: float

    def to_dict(self) -> dict:
        return {
            "per_category": self.per_category,
            "per_case": self.per_case,
            "totals": {
                "total_steps": self.total_steps,
                "prompt_tokens": self.prompt_tokens,
                "completion_tokens": self.completion_tokens,
                "total_tokens": self.total_tokens,
                "success_rate": self.success_rate,
            },
        }


# ---------------------------------------------------------------------------
# Suite loading
# ---------------------------------------------------------------------------


def bundled_suite_path() -> Path:
    """Directory holding the case files shipped with the package."""
    return Path(resources.files("kernelagent.bench") / "suite")


def missing_requirements(case: BenchCase) -> list[str]:
    """Modules named in the case's ``metadata.requires`` that are not importable.

    Scientific cases declare their stack here so the core harness can skip
    them instead of failing when pandas or numpy is absent.
    """
    import importlib.util

    return [
        module
        for module in case.metadata.get("requires", [])
        if importlib.util.find_spec(module) is None
    ]


def load_suite(path) -> list[BenchCase]:
    """Load cases from a directory of case files or a single JSON document."""
    path = Path(path)
    if not path.exists():
        raise SuiteSchemaError(f"suite path {path} does not exist")
    if path.is_dir():
        files = sorted(path.glob("*.json"))
        if not files:
            raise SuiteSchemaError(f"suite directory {path} holds no case files")
        return [_parse_case(_read_json(f), source=f.name) for f in files]

    data = _read_json(path)
    if isinstance(data, dict) and "cases" in data:
        data = data["cases"]
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list) or not data:
        raise SuiteSchemaError(f"suite file {path} holds no cases")
    return [_parse_case(c, source=path.name) for c in data]


def _read_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise SuiteSchemaError(f"{path.name}: not valid JSON: {exc}") from exc


def _parse_case(data: Any, source: str) -> BenchCase:
    if not isinstance(data, dict):
        raise SuiteSchemaError(f"{source}: case must be an object")
    case_id = data.get("id")
    if not case_id or not isinstance(case_id, str):
        raise SuiteSchemaError(f"{source}: case is missing a string 'id'")

    def fail(detail: str):
        raise SuiteSchemaError(f"case {case_id!r}: {detail}")

    category = data.get("category")
    if category not in CATEGORIES:
        fail(f"unknown category {category!r} (expected one of {CATEGORIES})")
    setup = data.get("setup_source", "")
    if not isinstance(setup, str):
        fail("'setup_source' must be a string")
    raw_turns = data.get("turns")
    if not isinstance(raw_turns, list) or not raw_turns:
        fail("'turns' must be a non-empty list")

    turns = []
    for i, raw in enumerate(raw_turns, 1):
        if not isinstance(raw, dict):
            fail(f"turn {i} must be an object")
        query = raw.get("query")
        if not query or not isinstance(query, str):
            fail(f"turn {i} is missing a 'query'")
        if "validator" not in raw:
            fail(f"turn {i} is missing a 'validator'")
        turns.append(
            BenchTurn(
                query=query,
                validator=_parse_validator(raw["validator"], case_id, i),
                oracle_source=raw.get("oracle_source"),
                conversation=int(raw.get("conversation", 1)),
            )
        )
    return BenchCase(
        id=case_id,
        category=category,
        setup_source=setup,
        turns=turns,
        metadata=data.get("metadata", {}),
    )


def _parse_validator(data: Any, case_id: str, turn: int) -> Validator:
    def fail(detail: str):
        raise SuiteSchemaError(f"case {case_id!r}: turn {turn}: {detail}")

    if not isinstance(data, dict):
        fail("validator must be an object")
    assertions = data.get("assertions")
    source = data.get("validator_source")
    if assertions is None and source is None:
        fail("validator needs 'assertions' or 'validator_source'")
    parsed = None
    if assertions is not None:
        if not isinstance(assertions, list) or not assertions:
            fail("'assertions' must be a non-empty list")
        parsed = []
        for j, a in enumerate(assertions, 1):
            if not isinstance(a, dict) or "path" not in a or "expected" not in a:
                fail(f"assertion {j} needs 'path' and 'expected'")
            op = a.get("op", "==")
            if op not in _COMPARATORS:
                fail(f"assertion {j}: unknown comparator {op!r}")
            tolerance = a.get("tolerance")
            if tolerance is not None and tolerance < 0:
                fail(f"assertion {j}: tolerance must be >= 0")
            parsed.append(
                Assertion(path=a["path"], op=op, expected=a["expected"], tolerance=tolerance)
            )
    return Validator(
        assertions=parsed, validator_source=source, uses=list(data.get("uses", []))
    )


# ---------------------------------------------------------------------------
# Path resolution over live runtime values
# ---------------------------------------------------------------------------

_PATH_TOKEN = re.compile(
    r"""
    \.(?P<attr>[A-Za-z_]\w*)
  | \[(?P<index>-?\d+)\]
  | \[\'(?P<key1>[^']*)\'\]
  | \[\"(?P<key2>[^"]*)\"\]
  | (?P<call>\(\))
    """,
    re.VERBOSE,
)


def resolve_path(runtime: RuntimeHandle, path: str) -> Any:
    """Resolve ``name.attr[0]['key']`` style paths against the namespace.

    A trailing ``()`` segment performs a zero-argument call, and the whole
    path may be wrapped in ``len(...)``.
    """
    expr = path.strip()
    want_len = False
    if expr.startswith("len(") and expr.endswith(")"):
        want_len = True
        expr = expr[4:-1].strip()

    match = re.match(r"[A-Za-z_]\w*", expr)
    if not match:
        raise ValueError(f"invalid path {path!r}")
    value = runtime.get_variable(match.group(0))

    pos = match.end()
    while pos < len(expr):
        token = _PATH_TOKEN.match(expr, pos)
        if not token:
            raise ValueError(f"invalid path segment at {expr[pos:]!r} in {path!r}")
        if token.group("attr"):
            value = getattr(value, token.group("attr"))
        elif token.group("index") is not None:
            value = value[int(token.group("index"))]
        elif token.group("key1") is not None:
            value = value[token.group("key1")]
        elif token.group("key2") is not None:
            value = value[token.group("key2")]
        elif token.group("call"):
            value = value()
        pos = token.end()
    return len(value) if want_len else value


def _normalize(value: Any) -> Any:
    """Bring array-likes and tuples into plain list/scalar form for comparison."""
    if isinstance(value, tuple):
        return [_normalize(v) for v in value]
    if hasattr(value, "tolist"):
        return _normalize(value.tolist())
    if hasattr(value, "item") and not isinstance(value, (str, bytes, dict)):
        try:
            return value.item()
        except (TypeError, ValueError):
            pass
    if isinstance(value, list):
        return [_normalize(v) for v in value]
    return value


def _numbers_equal(actual, expected, tolerance: float | None) -> bool:
    if tolerance is None:
        tolerance = (
            DEFAULT_INT_TOLERANCE
            if isinstance(expected, int)
            else DEFAULT_REAL_TOLERANCE
        )
    if tolerance == 0:
        return actual == expected
    return math.isclose(actual, expected, rel_tol=tolerance, abs_tol=tolerance)


def _values_match(actual, expected, tolerance: float | None) -> bool:
    if isinstance(expected, bool) or isinstance(actual, bool):
        return actual is expected if isinstance(expected, bool) else actual == expected
    if isinstance(expected, (int, float)) and isinstance(actual, (int, float)):
        return _numbers_equal(actual, expected, tolerance)
    if isinstance(expected, list) and isinstance(actual, list):
        return len(actual) == len(expected) and all(
            _values_match(a, e, tolerance) for a, e in zip(actual, expected)
        )
    return actual == expected


def _evaluate(assertion: Assertion, actual: Any) -> tuple[bool, str]:
    normalized = _normalize(actual)
    expected = _normalize(assertion.expected)
    op = assertion.op
    if op == "==":
        ok = _values_match(normalized, expected, assertion.tolerance)
    elif op == "!=":
        ok = not _values_match(normalized, expected, assertion.tolerance)
    elif op == "contains":
        try:
            ok = any(_values_match(item, expected, assertion.tolerance) for item in normalized)
        except TypeError:
            return False, f"value of {assertion.path!r} is not iterable"
    else:
        try:
            ok = {
                "<": normalized < expected,
                "<=": normalized <= expected,
                ">": normalized > expected,
                ">=": normalized >= expected,
            }[op]
        except TypeError as exc:
            return False, f"cannot order-compare: {exc}"
    return ok, "" if ok else f"expected {op} {expected!r}, got {normalized!r}"


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate(runtime: RuntimeHandle, validator: Validator, turn_index: int = 0) -> ValidatorResult:
    """Evaluate a validator against live runtime state without mutating it.

    Retrieval failures count as assertion failures, never harness errors.
    ``validator_source`` runs in an isolated runtime seeded with copies of
    the names it declares in ``uses``.
    """
    if validator.assertions is not None:
        details = []
        for assertion in validator.assertions:
            try:
                actual = resolve_path(runtime, assertion.path)
            except (NotFoundError, ValueError, LookupError, AttributeError, TypeError) as exc:
                details.append(
                    AssertionOutcome(
                        path=assertion.path,
                        op=assertion.op,
                        expected=assertion.expected,
                        actual="<unresolved>",
                        passed=False,
                        reason=f"{type(exc).__name__}: {exc}",
                    )
                )
                continue
            ok, reason = _evaluate(assertion, actual)
            details.append(
                AssertionOutcome(
                    path=assertion.path,
                    op=assertion.op,
                    expected=assertion.expected,
                    actual=repr(_normalize(actual)),
                    passed=ok,
                    reason=reason,
                )
            )
        return ValidatorResult(
            passed=all(d.passed for d in details), details=details, turn_index=turn_index
        )

    return _run_validator_source(runtime, validator, turn_index)


def _run_validator_source(runtime: RuntimeHandle, validator: Validator, turn_index: int) -> ValidatorResult:
    clone = create_runtime(RuntimeConfig(timeout=runtime.config.timeout))
    for name in validator.uses:
        try:
            value = runtime.get_variable(name)
        except NotFoundError:
            return ValidatorResult(
                passed=False,
                details=[
                    AssertionOutcome(
                        path=name,
                        op="uses",
                        expected="<bound>",
                        actual="<missing>",
                        passed=False,
                        reason=f"name {name!r} is not bound",
                    )
                ],
                turn_index=turn_index,
            )
        try:
            value = copy.deepcopy(value)
        except Exception:
            pass  # share the reference; the validator must not mutate it
        clone.namespace[name] = value

    outcome = clone.execute_cell(validator.validator_source)
    if outcome.error is not None:
        return ValidatorResult(
            passed=False,
            details=[
                AssertionOutcome(
                    path="<validator_source>",
                    op="exec",
                    expected="pass",
                    actual="error",
                    passed=False,
                    reason=outcome.error.traceback_summary,
                )
            ],
            turn_index=turn_index,
        )
    try:
        passed = bool(clone.get_variable("passed"))
    except NotFoundError:
        passed = False
    message = clone.namespace.get("message", "" if passed else "validator did not set 'passed'")
    return ValidatorResult(
        passed=passed,
        details=[
            AssertionOutcome(
                path="<validator_source>",
                op="exec",
                expected="pass",
                actual="pass" if passed else "fail",
                passed=passed,
                reason=str(message),
            )
        ],
        turn_index=turn_index,
    )


# ---------------------------------------------------------------------------
# Case execution and reporting
# ---------------------------------------------------------------------------


def run_case(case: BenchCase, agent_factory: Callable[[BenchCase], Agent]) -> CaseResult:
    """Seed the case state, drive every query through the agent, validate each.

    Later turns run regardless of earlier failures; the queries are linearly
    dependent, so a genuine state error cascades by itself.
    """
    usage = UsageCounter()
    try:
        agent = agent_factory(case)
    except KernelAgentError as exc:
        return CaseResult(case.id, case.category, [], usage, error=f"agent factory: {exc}")

    if case.setup_source:
        syntax_violations = check(case.setup_source, SecurityPolicy())
        if syntax_violations:
            return CaseResult(
                case.id,
                case.category,
                [],
                usage,
                error=f"setup rejected: {syntax_violations[0].message}",
            )
        outcome = agent.runtime.execute_cell(case.setup_source)
        if outcome.error is not None:
            return CaseResult(
                case.id,
                case.category,
                [],
                usage,
                error=f"setup failed: {outcome.error.kind}: {outcome.error.message}",
            )

    results: list[ValidatorResult] = []
    aborted: str | None = None
    conversation = case.turns[0].conversation if case.turns else 1
    for index, turn in enumerate(case.turns, 1):
        if aborted is not None:
            results.append(
                ValidatorResult(
                    passed=False,
                    details=[
                        AssertionOutcome(
                            path="<session>",
                            op="run",
                            expected="answer",
                            actual="aborted",
                            passed=False,
                            reason=aborted,
                        )
                    ],
                    turn_index=index,
                )
            )
            continue
        if turn.conversation != conversation:
            conversation = turn.conversation
            agent.reset_history()
        try:
            session = step(agent, turn.query)
        except KernelAgentError as exc:
            aborted = f"agent aborted: {exc}"
            results.append(
                ValidatorResult(
                    passed=False,
                    details=[
                        AssertionOutcome(
                            path="<session>",
                            op="run",
                            expected="answer",
                            actual="error",
                            passed=False,
                            reason=str(exc),
                        )
                    ],
                    turn_index=index,
                )
            )
            continue
        usage.prompt_tokens += session.usage.prompt_tokens
        usage.completion_tokens += session.usage.completion_tokens
        usage.steps += session.usage.steps
        if session.final is SessionEnd.ABORTED:
            aborted = session.final_text
        elif session.final is SessionEnd.MAX_STEPS:
            # the conversation is wedged mid-turn; start a fresh one over the
            # same runtime so later queries still get a fair shot
            agent.reset_history()
        results.append(validate(agent.runtime, turn.validator, index))
    return CaseResult(case.id, case.category, results, usage)


def report(results: list[CaseResult]) -> BenchReport:
    """Aggregate success rates per category plus session-usage totals."""
    if not results:
        raise ValueError("report requires at least one case result")
    per_category: dict[str, list[int]] = {}
    per_case: dict[str, dict] = {}
    steps = prompt = completion = 0
    passed_total = queries_total = 0

    for result in results:
        bucket = per_category.setdefault(result.category, [0, 0])
        bucket[0] += result.queries_passed
        bucket[1] += result.queries_total
        per_case[result.case_id] = {
            "category": result.category,
            "passed": result.queries_passed,
            "total": result.queries_total,
            "rate": (
                result.queries_passed / result.queries_total
                if result.queries_total
                else 0.0
            ),
            "error": result.error,
        }
        steps += result.usage.steps
        prompt += result.usage.prompt_tokens
        completion += result.usage.completion_tokens
        passed_total += result.queries_passed
        queries_total += result.queries_total

    return BenchReport(
        per_category={
            cat: (p / t if t else 0.0) for cat, (p, t) in sorted(per_category.items())
        },
        per_case=per_case,
        total_steps=steps,
        prompt_tokens=prompt,
        completion_tokens=completion,
        total_tokens=prompt + completion,
        success_rate=(passed_total / queries_total if queries_total else 0.0),
    )


def render_table(rep: BenchReport) -> str:
    """Human-readable summary: category rates plus the usage-totals row."""
    lines = ["Category          Queries   Success Rate"]
    per_cat_counts: dict[str, tuple[int, int]] = {}
    for case in rep.per_case.values():
        p, t = per_cat_counts.get(case["category"], (0, 0))
        per_cat_counts[case["category"]] = (p + case["passed"], t + case["total"])
    for cat in sorted(rep.per_category):
        passed, total = per_cat_counts[cat]
        lines.append(
            f"{cat:<18}{passed:>3}/{total:<6}{rep.per_category[cat] * 100:>10.1f}%"
        )
    lines.append("")
    lines.append(
        "Total Steps | Prompt Tokens | Completion Tokens | Total Tokens | Success Rate"
    )
    lines.append(
        f"{rep.total_steps:>11} | {rep.prompt_tokens:>13} | {rep.completion_tokens:>17} "
        f"| {rep.total_tokens:>12} | {rep.success_rate * 100:>11.1f}%"
    )
    return "\n".join(lines)
