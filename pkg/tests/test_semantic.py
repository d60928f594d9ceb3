"""Prompt assembly, action parsing, observation shaping, history ordering."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernelagent import (
    ActionKind,
    ChatMessage,
    ConversationHistory,
    ObservationKind,
    PromptTemplateSet,
    append,
    build_system_prompt,
    estimate_tokens,
    extract_action,
    make_feedback,
    render_context,
    shape_observation,
)
from kernelagent import templates as tpl
from kernelagent.errors import OrderingError, TemplateError
from kernelagent.runtime import ExecutionError, ExecutionOutcome

EMPTY_BUNDLE = render_context([], [], [])


def outcome(stdout="", stderr="", error=None, source="pass"):
    return ExecutionOutcome(
        source=source,
        stdout=stdout,
        stderr=stderr,
        error=error,
        last_value_repr=None,
        duration=0.0,
        cell_index=1,
    )


# ---------------------------------------------------------------------------
# System prompt
# ---------------------------------------------------------------------------

SYSTEM_PROMPT_GOLDEN = (
    tpl.AGENT_IDENTITY
    + "\n\nCurrent time: 2026-01-05 00:00:00\n\nYou have access to:\n\n"
    + "<functions>\n</functions>\n\n<variables>\n</variables>\n\n<types>\n</types>\n\n"
    + "Instructions:\n"
    + tpl.CORE_INSTRUCTIONS.replace("{python_block_identifier}", "python")
)


def test_system_prompt_golden():
    message = build_system_prompt(
        PromptTemplateSet.defaults(), EMPTY_BUNDLE, current_time="2026-01-05 00:00:00"
    )
    assert message.role == "system"
    assert message.content == SYSTEM_PROMPT_GOLDEN


def test_system_prompt_contents():
    message = build_system_prompt(
        PromptTemplateSet.defaults(),
        EMPTY_BUNDLE,
        current_time="2026-01-05 00:00:00",
        additional_context="Extra deployment notes.",
    )
    text = message.content
    assert text.startswith("You are a tool-augmented agent")
    assert "Current time: 2026-01-05 00:00:00" in text
    assert "write all your code in only one block" in text
    assert "in a python code block" in text
    assert text.endswith("Extra deployment notes.")
    # assembly order: identity, time, functions, variables, types, instructions
    positions = [
        text.index("Current time:"),
        text.index("<functions>"),
        text.index("<variables>"),
        text.index("<types>"),
        text.index("Instructions:"),
    ]
    assert positions == sorted(positions)


def test_templates_validate_placeholders():
    with pytest.raises(TemplateError):
        PromptTemplateSet(execution_feedback="no placeholder here")
    with pytest.raises(TemplateError):
        PromptTemplateSet(truncation_feedback="only {output_length}")
    with pytest.raises(TemplateError):
        PromptTemplateSet(security_feedback="nothing")


def test_template_overrides_from_file(tmp_path):
    path = tmp_path / "templates.json"
    path.write_text('{"agent_identity": "You are a house librarian."}')
    tset = PromptTemplateSet.from_file(path)
    assert tset.agent_identity == "You are a house librarian."
    assert tset.instructions == tpl.CORE_INSTRUCTIONS

    bad = tmp_path / "bad.json"
    bad.write_text('{"unknown_key": "x"}')
    with pytest.raises(TemplateError):
        PromptTemplateSet.from_file(bad)


# ---------------------------------------------------------------------------
# Action extraction
# ---------------------------------------------------------------------------


def test_single_block_is_code():
    action = extract_action("Thought first.\n```python\nx = 1\n```\nDone.")
    assert action.kind is ActionKind.CODE
    assert action.code == "x = 1"
    assert not action.multi_block


def test_plain_text_is_final_answer():
    action = extract_action("The total is 40.0")
    assert action.kind is ActionKind.FINAL_ANSWER
    assert action.answer == "The total is 40.0"


def test_two_blocks_take_first_with_diagnostic():
    response = "```python\nfirst = 1\n```\nmid\n```python\nsecond = 2\n```"
    action = extract_action(response)
    assert action.kind is ActionKind.CODE
    assert action.code == "first = 1"
    assert action.multi_block


def test_untagged_fence_is_not_code():
    action = extract_action("```\nx = 1\n```")
    assert action.kind is ActionKind.FINAL_ANSWER


def test_custom_block_identifier():
    action = extract_action("```py\nx = 1\n```", block_identifier="py")
    assert action.kind is ActionKind.CODE and action.code == "x = 1"


def test_unterminated_fence_takes_rest():
    action = extract_action("```python\nx = 1\nprint(x)")
    assert action.kind is ActionKind.CODE
    assert action.code == "x = 1\nprint(x)"


def test_code_preserved_verbatim():
    body = "def f():\n    return '```not a fence'\n\n\nf()"
    action = extract_action(f"```python\n{body}\n```")
    assert action.code == body


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=400))
def test_extraction_is_total(response):
    if not response:
        return
    action = extract_action(response)
    assert action.kind in (ActionKind.CODE, ActionKind.FINAL_ANSWER)
    assert (action.kind is ActionKind.CODE) == (action.code is not None)
    assert action.raw_response == response


# ---------------------------------------------------------------------------
# Observation shaping
# ---------------------------------------------------------------------------


def test_short_output_passes_verbatim():
    shaped = shape_observation(outcome(stdout="5\n"), l_max=4000)
    assert shaped.kind is ObservationKind.OUTPUT
    assert shaped.text == "5"
    assert shaped.raw_length == 2


def test_oversized_output_is_withheld():
    shaped = shape_observation(outcome(stdout="x" * 12000), l_max=4000)
    assert shaped.kind is ObservationKind.SIZE_ERROR
    assert "12000" in shaped.text
    assert "exceeds the maximum limit of 4000" in shaped.text
    assert "x" * 100 not in shaped.text  # withheld, not truncated


def test_exact_limit_still_passes():
    shaped = shape_observation(outcome(stdout="x" * 4000), l_max=4000)
    assert shaped.kind is ObservationKind.OUTPUT


def test_empty_output_passes():
    shaped = shape_observation(outcome(stdout=""), l_max=4000)
    assert shaped.kind is ObservationKind.OUTPUT
    assert shaped.text == ""


def test_error_text_counts_toward_budget():
    error = ExecutionError(
        kind="ValueError", message="m" * 50, traceback_summary="E" * 3000
    )
    shaped = shape_observation(outcome(stdout="y" * 2000, error=error), l_max=4000)
    assert shaped.kind is ObservationKind.SIZE_ERROR

    small = shape_observation(
        outcome(stdout="out\n", error=ExecutionError("E", "m", "E: m")), l_max=4000
    )
    assert small.kind is ObservationKind.OUTPUT
    assert small.text == "out\nE: m"


def test_stderr_counts_toward_budget():
    shaped = shape_observation(
        outcome(stdout="a" * 2500, stderr="b" * 2500), l_max=4000
    )
    assert shaped.kind is ObservationKind.SIZE_ERROR
    assert shaped.raw_length >= 5000


def test_l_max_must_be_positive():
    with pytest.raises(ValueError):
        shape_observation(outcome(stdout="x"), l_max=0)


# ---------------------------------------------------------------------------
# Feedback messages
# ---------------------------------------------------------------------------


def test_output_feedback_golden():
    tset = PromptTemplateSet.defaults()
    shaped = shape_observation(outcome(stdout="5\n"), l_max=4000)
    message = make_feedback(shaped, tset)
    assert message.role == "user"
    assert "<execution_output>\n5\n</execution_output>" in message.content
    assert "You are in the SAME Jupyter-like session" in message.content
    assert message.content == tpl.EXECUTION_FEEDBACK.replace("{execution_output}", "5")


def test_size_error_feedback_instructs_summaries():
    tset = PromptTemplateSet.defaults()
    shaped = shape_observation(outcome(stdout="x" * 9000), l_max=4000)
    message = make_feedback(shaped, tset)
    assert "Use summary statistics instead of full data" in message.content
    assert message.content == tpl.TRUNCATION_FEEDBACK.replace(
        "{output_length}", "9000"
    ).replace("{max_length}", "4000")


def test_security_feedback_passthrough():
    from kernelagent import check, default_policy, format_security_feedback
    from kernelagent.semantic import ShapedObservation

    text = format_security_feedback(check("import os", default_policy()))
    shaped = ShapedObservation(
        kind=ObservationKind.SECURITY_ERROR, text=text, raw_length=len(text)
    )
    message = make_feedback(shaped, PromptTemplateSet.defaults())
    assert message.content.endswith("avoid this violation.")


def test_braces_in_output_survive_templating():
    shaped = shape_observation(outcome(stdout="{'a': 1}\n"), l_max=4000)
    message = make_feedback(shaped, PromptTemplateSet.defaults())
    assert "{'a': 1}" in message.content


def test_feedback_length_bounded_by_l_max_plus_overhead():
    tset = PromptTemplateSet.defaults()
    overhead = len(tpl.EXECUTION_FEEDBACK) - len("{execution_output}")
    for size in (0, 10, 3999, 4000, 4001, 50000):
        shaped = shape_observation(outcome(stdout="x" * size), l_max=4000)
        message = make_feedback(shaped, tset)
        assert len(message.content) <= 4000 + max(
            overhead, len(tpl.TRUNCATION_FEEDBACK)
        )


# ---------------------------------------------------------------------------
# History
# ---------------------------------------------------------------------------


def test_append_alternation():
    history = ConversationHistory()
    append(history, ChatMessage("system", "sys"))
    append(history, ChatMessage("user", "q"))
    append(history, ChatMessage("assistant", "r"))
    append(history, ChatMessage("user", "o"))
    assert [m.role for m in history.messages] == ["system", "user", "assistant", "user"]


def test_append_rejects_ordering_breaches():
    history = ConversationHistory()
    with pytest.raises(OrderingError):
        append(history, ChatMessage("user", "q"))
    append(history, ChatMessage("system", "sys"))
    with pytest.raises(OrderingError):
        append(history, ChatMessage("assistant", "r"))
    append(history, ChatMessage("user", "q"))
    with pytest.raises(OrderingError):
        append(history, ChatMessage("user", "again"))
    with pytest.raises(OrderingError):
        append(history, ChatMessage("system", "another"))


def test_token_estimate_tracks_counting_function():
    history = ConversationHistory()
    append(history, ChatMessage("system", "abcd"))
    append(history, ChatMessage("user", "efghi"))
    assert history.token_estimate == estimate_tokens("abcd") + estimate_tokens("efghi")
