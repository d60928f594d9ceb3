"""Deterministic benchmark agents built from per-turn oracle code.

The oracle backend replays each turn's hand-written code as a fenced block
followed by a plain-text answer, so a whole case runs offline and lands on
exactly the expected state. A sabotage mapping can swap out individual turn
programs to study failure cascades.
"""

from __future__ import annotations

from typing import Callable, Mapping

from ..errors import KernelAgentError
from ..gateway import scripted_model
from ..orchestrator import Agent, AgentConfig, new_agent
from ..runtime import RuntimeConfig, create_runtime
from .harness import BenchCase

ORACLE_CLOCK = "2026-01-05 00:00:00"


def oracle_script(case: BenchCase, sabotage: Mapping[tuple[str, int], str] | None = None) -> list[str]:
    """Scripted responses for a case: one code block plus one answer per turn."""
    sabotage = sabotage or {}
    script: list[str] = []
    for index, turn in enumerate(case.turns, 1):
        code = sabotage.get((case.id, index), turn.oracle_source)
        if not code:
            raise KernelAgentError(
                f"case {case.id!r}: turn {index} has no oracle_source"
            )
        script.append(f"```python\n{code}\n```")
        script.append("Done.")
    return script


def oracle_factory(
    config: AgentConfig | None = None,
    sabotage: Mapping[tuple[str, int], str] | None = None,
) -> Callable[[BenchCase], Agent]:
    """Factory yielding a fresh oracle-driven agent per case."""

    def make(case: BenchCase) -> Agent:
        cfg = config or AgentConfig(current_time=ORACLE_CLOCK)
        backend = scripted_model(oracle_script(case, sabotage))
        runtime = create_runtime(RuntimeConfig())
        return new_agent(cfg, runtime, backend)

    return make


def scripted_factory(
    responses: list[str], config: AgentConfig | None = None
) -> Callable[[BenchCase], Agent]:
    """Factory replaying one fixed response list afresh for every case."""

    def make(case: BenchCase) -> Agent:
        cfg = config or AgentConfig(current_time=ORACLE_CLOCK)
        backend = scripted_model(list(responses))
        runtime = create_runtime(RuntimeConfig())
        return new_agent(cfg, runtime, backend)

    return make
