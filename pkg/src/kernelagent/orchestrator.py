"""The agent turn loop: sample, gate, execute, shape, sync.

Each turn samples a response from the backend; a code action is statically
checked before execution, blocked cells feed a security error back without
touching the runtime, and successful executions are shaped into observations.
A response without a code block ends the session as the final answer; hitting
the turn cap yields the literal result "Max steps reached".
"""

from __future__ import annotations

import functools
import itertools
import json
import threading
from contextlib import nullcontext
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable

from . import gateway, security, semantic
from .descriptors import (
    FunctionDescriptor,
    TypeSchema,
    VariableDescriptor,
    render_context,
)
from .errors import (
    DuplicateDescriptorError,
    KernelAgentError,
    OrderingError,
    RequestFailedError,
    ScriptExhaustedError,
)
from .gateway import ModelBackend, ModelRequest, Usage, UsageCounter, accumulate
from .runtime import ExecutionOutcome, RuntimeHandle
from .security import SecurityPolicy, Violation
from .semantic import (
    Action,
    ActionKind,
    ChatMessage,
    ConversationHistory,
    ObservationKind,
    PromptTemplateSet,
    ShapedObservation,
)

MAX_STEPS_MESSAGE = "Max steps reached"

_agent_ids = itertools.count(1)


@dataclass
class AgentConfig:
    t_max: int = 10
    l_max: int = semantic.DEFAULT_L_MAX
    policy: SecurityPolicy = field(default_factory=security.default_policy)
    templates: PromptTemplateSet = field(default_factory=PromptTemplateSet.defaults)
    model_id: str = "scripted"
    temperature: float = gateway.DEFAULT_TEMPERATURE
    max_output_tokens: int = 4096
    current_time: str | None = None  # fixed clock, for deterministic sessions
    additional_context: str = ""
    fresh_history_per_conversation: bool = False

    def __post_init__(self):
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.l_max < 1:
            raise ValueError("l_max must be >= 1")


@dataclass
class TurnRecord:
    index: int
    response: str
    action: Action
    violations: list[Violation] = field(default_factory=list)
    outcome: ExecutionOutcome | None = None
    observation: ShapedObservation | None = None
    usage: Usage = field(default_factory=lambda: Usage(0, 0))


class SessionEnd(str, Enum):
    ANSWER = "answer"
    MAX_STEPS = "max_steps"
    ABORTED = "aborted"


@dataclass
class SessionResult:
    final: SessionEnd
    final_text: str
    turns: list[TurnRecord]
    usage: UsageCounter
    runtime: RuntimeHandle


@dataclass
class InvocationRecord:
    function_name: str
    arguments: str
    cell_index: int


class InvocationLog:
    """Ordered record of instrumented calls, in call order across cells."""

    def __init__(self, cell_index_provider: Callable[[], int] | None = None):
        self.records: list[InvocationRecord] = []
        self._provider = cell_index_provider
        self._lock = threading.Lock()

    def record(self, name: str, arguments: str) -> None:
        index = self._provider() if self._provider else 0
        with self._lock:
            self.records.append(InvocationRecord(name, arguments, index))

    def as_pairs(self) -> list[tuple[str, str]]:
        return [(r.function_name, r.arguments) for r in self.records]


def instrument(callable_entity: Callable, log: InvocationLog, name: str) -> Callable:
    """Wrap a callable so each invocation is logged before delegation.

    Return values and exceptions pass through unchanged; a raising call is
    still logged.
    """

    @functools.wraps(callable_entity)
    def wrapper(*args, **kwargs):
        log.record(name, _render_args(args, kwargs))
        return callable_entity(*args, **kwargs)

    return wrapper


def _render_args(args: tuple, kwargs: dict) -> str:
    if not kwargs:
        return repr(tuple(args))
    parts = [repr(a) for a in args]
    parts += [f"{k}={v!r}" for k, v in kwargs.items()]
    return f"({', '.join(parts)})"


class Agent:
    """One session: a backend, a runtime, and a conversation history."""

    def __init__(
        self,
        config: AgentConfig,
        runtime: RuntimeHandle,
        backend: ModelBackend,
        tools: list[tuple[FunctionDescriptor, Callable]],
        variables: list[tuple[VariableDescriptor, Any]],
        types: list[TypeSchema] | None = None,
    ):
        names = [d.name for d, _ in tools] + [d.name for d, _ in variables]
        if len(names) != len(set(names)):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise DuplicateDescriptorError(f"duplicate injection names: {dupes}")

        self.name = f"agent-{next(_agent_ids)}"
        self.config = config
        self.runtime = runtime
        self.backend = backend
        self.total_usage = UsageCounter()
        self._cell_guard = None  # set by coordination.bind_shared
        self._binding = None
        self._sessions_completed = 0

        for descriptor, fn in tools:
            runtime.inject_function(descriptor, fn)
        for descriptor, value in variables:
            runtime.inject_variable(descriptor, value)

        bundle = render_context(
            [d for d, _ in tools], [d for d, _ in variables], list(types or [])
        )
        self._system_message = semantic.build_system_prompt(
            config.templates,
            bundle,
            current_time=config.current_time,
            additional_context=config.additional_context,
        )
        self.history = ConversationHistory()
        semantic.append(self.history, self._system_message)

    def reset_history(self) -> None:
        """Start a fresh conversation over the same runtime state."""
        self.history = ConversationHistory()
        semantic.append(self.history, self._system_message)

    def _guard(self):
        return self._cell_guard if self._cell_guard is not None else nullcontext()


def new_agent(
    config: AgentConfig,
    runtime: RuntimeHandle,
    backend: ModelBackend,
    tools: list[tuple[FunctionDescriptor, Callable]] | None = None,
    variables: list[tuple[VariableDescriptor, Any]] | None = None,
    types: list[TypeSchema] | None = None,
) -> Agent:
    return Agent(config, runtime, backend, tools or [], variables or [], types)


def run(agent: Agent, query: str) -> SessionResult:
    """Run one full session for ``query`` (identical to ``step`` on a fresh agent)."""
    if not query:
        raise ValueError("query must be non-empty")
    return step(agent, query)


def step(agent: Agent, user_message: str) -> SessionResult:
    """Drive the inner loop for one user message until an answer or the cap.

    Runtime state carries over from any prior steps on this agent; history
    does too unless ``fresh_history_per_conversation`` is set.
    """
    config = agent.config
    if config.fresh_history_per_conversation and agent._sessions_completed:
        agent.reset_history()
    if agent.history.messages and agent.history.messages[-1].role == "user":
        raise OrderingError(
            "history is awaiting a model response (the previous session did not "
            "end in an answer); call reset_history() before the next step"
        )
    semantic.append(agent.history, ChatMessage(role="user", content=user_message))

    counter = UsageCounter()
    turns: list[TurnRecord] = []

    def finish(end: SessionEnd, text: str) -> SessionResult:
        agent._sessions_completed += 1
        return SessionResult(
            final=end, final_text=text, turns=turns, usage=counter, runtime=agent.runtime
        )

    for t in range(1, config.t_max + 1):
        request = ModelRequest(
            messages=list(agent.history.messages),
            temperature=config.temperature,
            max_output_tokens=config.max_output_tokens,
            model_id=config.model_id,
        )
        try:
            response = gateway.complete(agent.backend, request)
        except (RequestFailedError, ScriptExhaustedError) as exc:
            if not turns:
                raise
            return finish(SessionEnd.ABORTED, f"backend failure: {exc}")

        accumulate(counter, response.usage)
        accumulate(agent.total_usage, response.usage)
        action = semantic.extract_action(
            response.text, config.templates.block_identifier
        )

        if action.kind is ActionKind.FINAL_ANSWER:
            semantic.append(
                agent.history, ChatMessage(role="assistant", content=response.text)
            )
            turns.append(
                TurnRecord(
                    index=t, response=response.text, action=action, usage=response.usage
                )
            )
            return finish(SessionEnd.ANSWER, action.answer)

        violations = security.check(action.code, config.policy)
        outcome: ExecutionOutcome | None = None
        if violations:
            text = security.format_security_feedback(violations)
            shaped = ShapedObservation(
                kind=ObservationKind.SECURITY_ERROR, text=text, raw_length=len(text)
            )
        else:
            # models occasionally emit an empty block; run a no-op so the
            # turn still produces execution feedback
            cell_source = action.code if action.code.strip() else "pass"
            with agent._guard():
                outcome = agent.runtime.execute_cell(cell_source)
            shaped = semantic.shape_observation(outcome, config.l_max)

        feedback = semantic.make_feedback(shaped, config.templates)
        semantic.append(
            agent.history, ChatMessage(role="assistant", content=response.text)
        )
        semantic.append(agent.history, feedback)
        turns.append(
            TurnRecord(
                index=t,
                response=response.text,
                action=action,
                violations=violations,
                outcome=outcome,
                observation=shaped,
                usage=response.usage,
            )
        )

    return finish(SessionEnd.MAX_STEPS, MAX_STEPS_MESSAGE)


# ---------------------------------------------------------------------------
# Transcript export
# ---------------------------------------------------------------------------


def transcript_dict(result: SessionResult) -> dict:
    """Structured, loadable form of a session (no volatile fields)."""
    return {
        "final": result.final.value,
        "final_text": result.final_text,
        "turns": [
            {
                "index": turn.index,
                "response": turn.response,
                "code": turn.action.code,
                "multi_block": turn.action.multi_block,
                "violations": [
                    {
                        "rule_kind": v.rule_kind.value,
                        "offending_name": v.offending_name,
                        "line": v.location[0],
                        "col": v.location[1],
                        "message": v.message,
                    }
                    for v in turn.violations
                ],
                "observation": (
                    None
                    if turn.observation is None
                    else {
                        "kind": turn.observation.kind.value,
                        "text": turn.observation.text,
                        "raw_length": turn.observation.raw_length,
                    }
                ),
                "usage": {
                    "prompt_tokens": turn.usage.prompt_tokens,
                    "completion_tokens": turn.usage.completion_tokens,
                },
            }
            for turn in result.turns
        ],
        "usage": {
            "prompt_tokens": result.usage.prompt_tokens,
            "completion_tokens": result.usage.completion_tokens,
            "total_tokens": result.usage.total_tokens,
            "steps": result.usage.steps,
        },
    }


def export_transcript(result: SessionResult, path) -> None:
    """Write the session transcript as JSON; loadable back losslessly."""
    Path(path).write_text(
        json.dumps(transcript_dict(result), indent=2), encoding="utf-8"
    )


def load_transcript(path) -> dict:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if "turns" not in data or "usage" not in data:
        raise KernelAgentError(f"{path} is not a session transcript")
    return data
