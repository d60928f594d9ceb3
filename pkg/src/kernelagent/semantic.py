"""The semantic stream: system prompt, conversation history, and observations.

The stream is blind to the runtime by default: values reach the prompt only
when a cell prints them, and an observation-shaping gate replaces oversized
output with a size-error instruction instead of truncating it silently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any

from . import templates
from .descriptors import ContextBundle
from .errors import OrderingError, TemplateError
from .gateway import estimate_tokens
from .runtime import ExecutionOutcome

DEFAULT_L_MAX = 4000

_REQUIRED_PLACEHOLDERS = {
    "execution_feedback": ["{execution_output}"],
    "truncation_feedback": ["{output_length}", "{max_length}"],
    "security_feedback": ["{error}"],
}


@dataclass
class ChatMessage:
    role: str  # "system" | "user" | "assistant"
    content: str


@dataclass
class ConversationHistory:
    """Append-only message list; the first message must be the system prompt."""

    messages: list[ChatMessage] = field(default_factory=list)
    token_estimate: int = 0


@dataclass
class PromptTemplateSet:
    agent_identity: str = templates.AGENT_IDENTITY
    instructions: str = templates.CORE_INSTRUCTIONS
    block_identifier: str = templates.BLOCK_IDENTIFIER
    execution_feedback: str = templates.EXECUTION_FEEDBACK
    truncation_feedback: str = templates.TRUNCATION_FEEDBACK
    security_feedback: str = templates.SECURITY_FEEDBACK

    def __post_init__(self):
        for field_name, placeholders in _REQUIRED_PLACEHOLDERS.items():
            text = getattr(self, field_name)
            for placeholder in placeholders:
                if placeholder not in text:
                    raise TemplateError(
                        f"template {field_name!r} is missing placeholder {placeholder}"
                    )

    @classmethod
    def defaults(cls) -> "PromptTemplateSet":
        return cls()

    @classmethod
    def from_file(cls, path) -> "PromptTemplateSet":
        """Load overrides from a JSON document keyed by template name."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        base = cls()
        known = set(base.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise TemplateError(f"unknown template keys: {sorted(unknown)}")
        for key, value in data.items():
            setattr(base, key, value)
        base.__post_init__()
        return base


class ActionKind(str, Enum):
    CODE = "code"
    FINAL_ANSWER = "final_answer"


@dataclass
class Action:
    kind: ActionKind
    raw_response: str
    code: str | None = None
    answer: str | None = None
    multi_block: bool = False


class ObservationKind(str, Enum):
    OUTPUT = "output"
    SIZE_ERROR = "size_error"
    SECURITY_ERROR = "security_error"


@dataclass
class ShapedObservation:
    kind: ObservationKind
    text: str
    raw_length: int


# ---------------------------------------------------------------------------
# System prompt
# ---------------------------------------------------------------------------


def build_system_prompt(
    tset: PromptTemplateSet,
    bundle: ContextBundle,
    current_time: Any = None,
    additional_context: str = "",
) -> ChatMessage:
    """Assemble the system message: identity, time, context blocks, instructions."""
    if current_time is None:
        current_time = datetime.now()
    if isinstance(current_time, datetime):
        current_time = current_time.strftime("%Y-%m-%d %H:%M:%S")

    instructions = tset.instructions.replace(
        "{python_block_identifier}", tset.block_identifier
    )
    parts = [
        tset.agent_identity,
        "",
        f"Current time: {current_time}",
        "",
        "You have access to:",
        "",
        bundle.functions_block,
        "",
        bundle.variables_block,
        "",
        bundle.types_block,
        "",
        "Instructions:",
        instructions,
    ]
    if additional_context:
        parts += ["", additional_context]
    return ChatMessage(role="system", content="\n".join(parts))


# ---------------------------------------------------------------------------
# Response parsing
# ---------------------------------------------------------------------------


def extract_action(response: str, block_identifier: str = templates.BLOCK_IDENTIFIER) -> Action:
    """Map a model response to exactly one action; this parse never fails.

    A response with at least one fenced block tagged with ``block_identifier``
    is a code action (first block wins; extra blocks set the ``multi_block``
    diagnostic). Anything else is a final answer.
    """
    blocks = _fenced_blocks(response, block_identifier)
    if not blocks:
        return Action(
            kind=ActionKind.FINAL_ANSWER, raw_response=response, answer=response.strip()
        )
    return Action(
        kind=ActionKind.CODE,
        raw_response=response,
        code=blocks[0],
        multi_block=len(blocks) > 1,
    )


def _fenced_blocks(text: str, identifier: str) -> list[str]:
    blocks = []
    cursor = 0
    opener = f"```{identifier}"
    while True:
        start = text.find(opener, cursor)
        if start == -1:
            break
        body_start = start + len(opener)
        # the tag must be followed by a newline (possibly after spaces)
        newline = text.find("\n", body_start)
        if newline == -1:
            break
        if text[body_start:newline].strip():
            cursor = body_start
            continue
        end = _closing_fence(text, newline + 1)
        if end == -1:
            # unterminated fence: take the rest of the response
            blocks.append(text[newline + 1 :].rstrip("\n"))
            break
        blocks.append(text[newline + 1 : end])
        cursor = end + 4
    return blocks


def _closing_fence(text: str, start: int) -> int:
    """Index of the newline before the next line holding only ``` (or -1)."""
    if text.startswith("```", start) and text[start:].split("\n", 1)[0].strip() == "```":
        return start - 1 if start else 0
    pos = start
    while True:
        idx = text.find("\n```", pos)
        if idx == -1:
            return -1
        line_end = text.find("\n", idx + 1)
        line = text[idx + 1 : line_end if line_end != -1 else len(text)]
        if line.strip() == "```":
            return idx
        pos = idx + 1


# ---------------------------------------------------------------------------
# Observation shaping (the length-constraint gate)
# ---------------------------------------------------------------------------


def observation_text(outcome: ExecutionOutcome) -> str:
    """Raw observable text of an outcome: stdout, stderr, then error summary."""
    parts = [outcome.stdout]
    if outcome.stderr:
        if parts[0] and not parts[0].endswith("\n"):
            parts.append("\n")
        parts.append(outcome.stderr)
    if outcome.error is not None:
        joined = "".join(parts)
        if joined and not joined.endswith("\n"):
            parts.append("\n")
        parts.append(outcome.error.traceback_summary)
    return "".join(parts)


def shape_observation(outcome: ExecutionOutcome, l_max: int = DEFAULT_L_MAX) -> ShapedObservation:
    """Pass short output through verbatim; withhold oversized output entirely.

    When the combined stdout/stderr/error text exceeds ``l_max``, the raw
    output is replaced (not truncated) by the size-error message carrying
    both lengths. For readability a single trailing newline is stripped from
    passed-through output; the length test runs on the raw text.
    """
    if l_max <= 0:
        raise ValueError("l_max must be positive")
    raw = observation_text(outcome)
    raw_length = len(raw)
    if raw_length > l_max:
        text = templates.TRUNCATION_FEEDBACK.replace(
            "{output_length}", str(raw_length)
        ).replace("{max_length}", str(l_max))
        return ShapedObservation(
            kind=ObservationKind.SIZE_ERROR, text=text, raw_length=raw_length
        )
    text = raw[:-1] if raw.endswith("\n") else raw
    return ShapedObservation(
        kind=ObservationKind.OUTPUT, text=text, raw_length=raw_length
    )


def make_feedback(shaped: ShapedObservation, tset: PromptTemplateSet) -> ChatMessage:
    """Turn a shaped observation into the user message fed back to the model."""
    if shaped.kind is ObservationKind.OUTPUT:
        content = tset.execution_feedback.replace("{execution_output}", shaped.text)
    else:
        # size/security texts were already instantiated from their templates
        content = shaped.text
    return ChatMessage(role="user", content=content)


# ---------------------------------------------------------------------------
# History
# ---------------------------------------------------------------------------


def append(history: ConversationHistory, message: ChatMessage) -> ConversationHistory:
    """Append a message, enforcing system-first and user/assistant alternation."""
    if not history.messages:
        if message.role != "system":
            raise OrderingError("the first message must have role 'system'")
    else:
        previous = history.messages[-1].role
        if message.role == "system":
            raise OrderingError("only the first message may have role 'system'")
        if previous == "system" and message.role != "user":
            raise OrderingError("the system message must be followed by a user message")
        if previous == message.role:
            raise OrderingError(f"two consecutive {message.role!r} messages")
    history.messages.append(message)
    history.token_estimate += estimate_tokens(message.content)
    return history
