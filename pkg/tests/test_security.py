"""Policy gate behavior: rule matching, defaults, feedback text."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernelagent import (
    SecurityPolicy,
    check,
    default_policy,
    format_security_feedback,
    parse_source,
)
from kernelagent.security import RuleKind

CLEAN_CORPUS = [
    "a = 1 + 2",
    "items = [i * i for i in range(10)]",
    "def f(x):\n    return x + 1",
    "class Point:\n    def __init__(self, x):\n        self.x = x",
    "import math\nprint(math.sqrt(2))",
    "text = 'os subprocess eval'  # banned names inside a string literal",
    "result = {'eval': 1}['eval']",
    "balance = 500\nbalance += int(balance * 0.08)",
    "for row in rows:\n    if row['volume'] > 1_000_000:\n        count += 1",
    "with open_resource() as handle:\n    handle.process()",
]


def test_parse_source_ok():
    report = parse_source("a = 1 + 2")
    assert report.ok and report.tree is not None and report.syntax_error is None


def test_parse_source_failure_is_a_value():
    report = parse_source("def f(:")
    assert not report.ok
    assert report.tree is None
    assert report.syntax_error[0] == 1


def test_parse_interest_cell():
    assert parse_source("loan_balance += int(loan_balance * interest_rate)").ok


@pytest.mark.parametrize(
    "source, kind, name",
    [
        ("import os", RuleKind.IMPORT, "os"),
        ("import os.path", RuleKind.IMPORT, "os.path"),
        ("from subprocess import run", RuleKind.IMPORT, "subprocess"),
        ("eval('1+1')", RuleKind.CALL, "eval"),
        ("exec('x = 1')", RuleKind.CALL, "exec"),
        ("__import__('os')", RuleKind.CALL, "__import__"),
        ("x.__builtins__", RuleKind.ATTRIBUTE, "__builtins__"),
        ("__builtins__['eval']", RuleKind.ATTRIBUTE, "__builtins__"),
    ],
)
def test_default_policy_detections(source, kind, name):
    violations = check(source, default_policy())
    assert len(violations) == 1
    assert violations[0].rule_kind is kind
    assert violations[0].offending_name == name


def test_all_matches_reported_in_location_order():
    source = "import os\nx = eval('1')\nimport subprocess\ny = a.__builtins__"
    violations = check(source, default_policy())
    assert [v.rule_kind for v in violations] == [
        RuleKind.IMPORT,
        RuleKind.CALL,
        RuleKind.IMPORT,
        RuleKind.ATTRIBUTE,
    ]
    assert [v.location[0] for v in violations] == [1, 2, 3, 4]
    for v in violations:
        assert 1 <= v.location[0] <= 4


def test_syntax_error_yields_single_syntactic_violation():
    violations = check("def f(:", default_policy())
    assert len(violations) == 1
    assert violations[0].rule_kind is RuleKind.SYNTAX


def test_clean_corpus_yields_zero_violations():
    policy = default_policy()
    for snippet in CLEAN_CORPUS:
        assert check(snippet, policy) == [], snippet


def test_default_policy_contents():
    policy = default_policy()
    assert {"os", "subprocess"} <= set(policy.banned_imports)
    assert {"eval", "exec"} <= set(policy.banned_calls)
    assert "__builtins__" in policy.banned_attributes
    assert len(policy.rule_set) == 3


def test_empty_policy_accepts_everything_parseable():
    policy = SecurityPolicy()
    assert check("import os\neval('1')", policy) == []
    assert policy.rule_set == []


def test_policy_deduplicates_and_drops_empties():
    policy = SecurityPolicy(banned_imports=["os", "os", "", "sys"])
    assert policy.banned_imports == ["os", "sys"]


def test_policy_from_file(tmp_path):
    path = tmp_path / "policy.json"
    path.write_text(
        '{"banned_imports": ["socket"], "banned_calls": [], "banned_attributes": []}'
    )
    policy = SecurityPolicy.from_file(path)
    assert check("import socket", policy)[0].offending_name == "socket"
    assert check("import os", policy) == []

    bad = tmp_path / "bad.json"
    bad.write_text('{"allow": ["x"]}')
    with pytest.raises(ValueError):
        SecurityPolicy.from_file(bad)


def test_name_based_matching_limit_is_real():
    # detection is name-based over AST nodes: reaching eval through getattr
    # with a string constant is not caught
    assert check("getattr(x, '__builtins' + '__')", default_policy()) == []
    # but the aliased-import front door stays closed
    assert check("import os as sneaky", default_policy())[0].offending_name == "os"


def test_feedback_text_contract():
    violations = check("import os", default_policy())
    text = format_security_feedback(violations)
    assert text.startswith("<security_error>\n")
    assert "</security_error>" in text
    assert text.endswith(
        "Code blocked for security reasons. Please modify your code to avoid this violation."
    )


def test_feedback_lists_every_violation():
    violations = check("import os\nimport subprocess\neval('1')", default_policy())
    assert len(violations) == 3
    text = format_security_feedback(violations)
    body = text.split("<security_error>\n")[1].split("\n</security_error>")[0]
    assert len(body.splitlines()) == 3


def test_feedback_requires_violations():
    with pytest.raises(ValueError):
        format_security_feedback([])


# ---------------------------------------------------------------------------
# Soundness property: code around each banned name is always flagged
# ---------------------------------------------------------------------------

_CONTEXT = st.sampled_from(["plain", "in_function", "in_loop", "after_code"])


def _embed(statement: str, context: str) -> str:
    if context == "in_function":
        return f"def wrapper():\n    {statement}\n"
    if context == "in_loop":
        return f"for _ in range(3):\n    {statement}\n"
    if context == "after_code":
        return f"x = 41\nx += 1\n{statement}\n"
    return statement


@settings(max_examples=60, deadline=None)
@given(name=st.sampled_from(["os", "subprocess"]), context=_CONTEXT)
def test_soundness_imports(name, context):
    violations = check(_embed(f"import {name}", context), default_policy())
    assert any(
        v.rule_kind is RuleKind.IMPORT and v.offending_name == name for v in violations
    )


@settings(max_examples=60, deadline=None)
@given(name=st.sampled_from(["eval", "exec", "__import__"]), context=_CONTEXT)
def test_soundness_calls(name, context):
    violations = check(_embed(f"y = {name}('1')", context), default_policy())
    assert any(
        v.rule_kind is RuleKind.CALL and v.offending_name == name for v in violations
    )


@settings(max_examples=30, deadline=None)
@given(context=_CONTEXT)
def test_soundness_attributes(context):
    violations = check(_embed("y = target.__builtins__", context), default_policy())
    assert any(v.rule_kind is RuleKind.ATTRIBUTE for v in violations)
