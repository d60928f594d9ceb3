"""AST-based static policy gate applied to every cell before execution.

Detection is name-based over syntax tree nodes: imports, call targets, and
attribute accesses are matched against the policy's ban lists. There is no
data-flow analysis, so an alias such as ``__import__('os')`` is caught only
because ``__import__`` itself is on the default call ban list.
"""

from __future__ import annotations

import ast
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from . import templates


class RuleKind(str, Enum):
    IMPORT = "ImportRule"
    CALL = "FunctionRule"
    ATTRIBUTE = "AttributeRule"
    SYNTAX = "SyntaxRule"


@dataclass(frozen=True)
class Rule:
    kind: RuleKind
    targets: tuple[str, ...]


@dataclass
class Violation:
    rule_kind: RuleKind
    offending_name: str
    location: tuple[int, int]  # (line, column)
    message: str


@dataclass
class SyntaxReport:
    """Outcome of parsing a cell: exactly one of tree / syntax_error is set."""

    ok: bool
    tree: ast.AST | None = None
    syntax_error: tuple[int, str] | None = None


def _dedupe(names) -> list[str]:
    seen: list[str] = []
    for name in names:
        if isinstance(name, str) and name and name not in seen:
            seen.append(name)
    return seen


@dataclass
class SecurityPolicy:
    banned_imports: list[str] = field(default_factory=list)
    banned_calls: list[str] = field(default_factory=list)
    banned_attributes: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.banned_imports = _dedupe(self.banned_imports)
        self.banned_calls = _dedupe(self.banned_calls)
        self.banned_attributes = _dedupe(self.banned_attributes)

    @property
    def rule_set(self) -> list[Rule]:
        rules = []
        if self.banned_imports:
            rules.append(Rule(RuleKind.IMPORT, tuple(self.banned_imports)))
        if self.banned_calls:
            rules.append(Rule(RuleKind.CALL, tuple(self.banned_calls)))
        if self.banned_attributes:
            rules.append(Rule(RuleKind.ATTRIBUTE, tuple(self.banned_attributes)))
        return rules

    @classmethod
    def from_file(cls, path) -> "SecurityPolicy":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {"banned_imports", "banned_calls", "banned_attributes"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown policy fields: {sorted(unknown)}")
        return cls(**data)


def default_policy() -> SecurityPolicy:
    """The stock policy: shell/process modules, dynamic-eval calls, internals.

    ``__import__`` extends the call list to close the most obvious alias for
    a banned import.
    """
    return SecurityPolicy(
        banned_imports=["os", "subprocess"],
        banned_calls=["eval", "exec", "__import__"],
        banned_attributes=["__builtins__"],
    )


def parse_source(source: str) -> SyntaxReport:
    """Parse a cell; a syntax failure is a value, not an exception."""
    try:
        tree = ast.parse(source)
    except SyntaxError as exc:
        return SyntaxReport(ok=False, syntax_error=(exc.lineno or 1, str(exc.msg)))
    return SyntaxReport(ok=True, tree=tree)


def check(source: str, policy: SecurityPolicy) -> list[Violation]:
    """Return every policy violation in ``source``, sorted by location.

    An empty list means the cell is valid under the policy. Unparseable
    source yields a single syntactic violation so callers have one gate.
    """
    report = parse_source(source)
    if not report.ok:
        line, message = report.syntax_error
        return [
            Violation(
                rule_kind=RuleKind.SYNTAX,
                offending_name="",
                location=(line, 0),
                message=f"syntax error: {message}",
            )
        ]

    imports = set(policy.banned_imports)
    calls = set(policy.banned_calls)
    attributes = set(policy.banned_attributes)
    violations: list[Violation] = []

    def flag(kind: RuleKind, name: str, node: ast.AST, message: str) -> None:
        violations.append(
            Violation(
                rule_kind=kind,
                offending_name=name,
                location=(getattr(node, "lineno", 1), getattr(node, "col_offset", 0)),
                message=message,
            )
        )

    for node in ast.walk(report.tree):
        if isinstance(node, ast.Import):
            for alias in node.names:
                if _module_banned(alias.name, imports):
                    flag(
                        RuleKind.IMPORT,
                        alias.name,
                        node,
                        f"import of banned module '{alias.name}'",
                    )
        elif isinstance(node, ast.ImportFrom):
            module = node.module or ""
            if _module_banned(module, imports):
                flag(
                    RuleKind.IMPORT,
                    module,
                    node,
                    f"import from banned module '{module}'",
                )
        elif isinstance(node, ast.Call):
            name = _call_name(node)
            if name in calls:
                flag(
                    RuleKind.CALL,
                    name,
                    node,
                    f"call to banned function '{name}'",
                )
        elif isinstance(node, ast.Attribute):
            if node.attr in attributes:
                flag(
                    RuleKind.ATTRIBUTE,
                    node.attr,
                    node,
                    f"access to banned attribute '{node.attr}'",
                )
        elif isinstance(node, ast.Name):
            if node.id in attributes:
                flag(
                    RuleKind.ATTRIBUTE,
                    node.id,
                    node,
                    f"reference to banned internal name '{node.id}'",
                )

    violations.sort(key=lambda v: v.location)
    return violations


def _module_banned(module: str, banned: set[str]) -> bool:
    return module in banned or module.split(".")[0] in banned


def _call_name(node: ast.Call) -> str | None:
    if isinstance(node.func, ast.Name):
        return node.func.id
    if isinstance(node.func, ast.Attribute):
        return node.func.attr
    return None


def format_security_feedback(violations: list[Violation]) -> str:
    """Wrap violation messages in the fixed security feedback template."""
    if not violations:
        raise ValueError("format_security_feedback requires at least one violation")
    lines = [
        f"line {v.location[0]}, col {v.location[1]}: {v.message}" for v in violations
    ]
    return templates.SECURITY_FEEDBACK.replace("{error}", "\n".join(lines))
