"""Runtime-mediated multi-agent primitives.

Sub-agents become live objects inside a controlling agent's runtime; values
move between runtimes as native objects rather than serialized text; and
several agents can share one runtime, where the access guard serializes cell
execution so a write by one member is immediately visible to all.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any

from .descriptors import VariableDescriptor
from .errors import CoordinationError, InjectionError, NotFoundError
from .orchestrator import Agent, SessionResult, run as run_agent, step as step_agent
from .runtime import NamespaceEntry, RuntimeHandle, values_equal


@dataclass
class AgentRegistry:
    """Named references to the sub-agents registered on a controlling agent."""

    entries: dict[str, Agent] = field(default_factory=dict)

    def register(self, name: str, agent: Agent) -> None:
        if name in self.entries:
            raise CoordinationError(f"agent name {name!r} is already registered")
        self.entries[name] = agent

    def get(self, name: str) -> Agent:
        if name not in self.entries:
            raise NotFoundError(name)
        return self.entries[name]


class SubagentHandle:
    """Live proxy injected into a controlling runtime.

    Cells in the controlling agent drive the sub-agent through this object:
    triggering turns, reading results, and setting variables in the
    sub-agent's runtime.
    """

    def __init__(self, name: str, agent: Agent):
        self._name = name
        self._agent = agent

    def run(self, query: str) -> str:
        return run_agent(self._agent, query).final_text

    def step(self, query: str) -> str:
        return step_agent(self._agent, query).final_text

    def run_session(self, query: str) -> SessionResult:
        return step_agent(self._agent, query)

    def get_variable(self, name: str) -> Any:
        return self._agent.runtime.get_variable(name)

    def set_variable(self, name: str, value: Any, description: str = "") -> None:
        descriptor = VariableDescriptor(
            name=name, type_label=type(value).__name__, description=description
        )
        self._agent.runtime.inject_variable(descriptor, value, overwrite=True)

    def __repr__(self):
        return f"<SubagentHandle {self._name!r}>"


def register_subagent(meta: Agent, name: str, sub: Agent) -> None:
    """Inject ``sub`` into ``meta``'s runtime as a first-class object."""
    if not name.isidentifier():
        raise CoordinationError(f"{name!r} is not a valid identifier")
    if name in meta.runtime.namespace:
        raise CoordinationError(f"name {name!r} is already bound in the meta runtime")
    if not hasattr(meta, "subagents"):
        meta.subagents = AgentRegistry()
    meta.subagents.register(name, sub)
    handle = SubagentHandle(name, sub)
    descriptor = VariableDescriptor(
        name=name,
        type_label="SubagentHandle",
        description=f"Handle driving the {name!r} sub-agent (run/step/get_variable/set_variable).",
    )
    meta.runtime.inject_variable(descriptor, handle)


def transfer(
    src: RuntimeHandle,
    name: str,
    dst: RuntimeHandle,
    new_name: str | None = None,
    overwrite: bool = False,
) -> NamespaceEntry:
    """Move a live value between runtimes without textual serialization.

    In-process the very same object is bound in the destination, so identity
    (and therefore type fidelity) is preserved for mutable values.
    """
    value = src.get_variable(name)  # NotFoundError propagates
    target = new_name or name
    descriptor = VariableDescriptor(
        name=target,
        type_label=type(value).__name__,
        description=f"Transferred from runtime {src.session_id}.",
    )
    try:
        return dst.inject_variable(descriptor, value, overwrite=overwrite)
    except InjectionError as exc:
        raise CoordinationError(str(exc)) from exc


def export_entry(src: RuntimeHandle, name: str) -> tuple[str, str, str]:
    """Cross-process fallback: one snapshot-format entry for ``name``.

    Unlike :func:`transfer` this path serializes and is therefore
    lossy-capable; it raises :class:`CoordinationError` when the value
    cannot be serialized at all.
    """
    src.get_variable(name)
    snap = src.snapshot()
    for entry in snap.entries:
        if entry[0] == name:
            return entry
    reasons = dict(snap.skipped)
    raise CoordinationError(f"{name!r} is not serializable: {reasons.get(name, '?')}")


def import_entry(dst: RuntimeHandle, entry: tuple[str, str, str], overwrite: bool = False) -> NamespaceEntry:
    """Inject a snapshot-format entry produced by :func:`export_entry`."""
    from .runtime import Snapshot, restore

    name = entry[0]
    scratch = restore(Snapshot(version="1", entries=[entry], skipped=[], cell_counter=0))
    return transfer(scratch, name, dst, overwrite=overwrite)


@dataclass
class SharedRuntimeBinding:
    """Several agents bound to one runtime behind a mutual-exclusion guard."""

    runtime: RuntimeHandle
    members: list[str]
    access_guard: threading.Lock = field(default_factory=threading.Lock)


def bind_shared(agents: list[Agent], runtime: RuntimeHandle) -> SharedRuntimeBinding:
    """Point every agent's cell execution at one shared runtime.

    Cells from all members run strictly one at a time under the binding's
    access guard, so a successful write by one member is readable by every
    member's next cell. Each agent's previously injected entries are carried
    over; on a name clash the first binder wins.
    """
    for agent in agents:
        if agent._binding is not None:
            raise CoordinationError(f"{agent.name} is already bound to a shared runtime")

    binding = SharedRuntimeBinding(runtime=runtime, members=[a.name for a in agents])
    for agent in agents:
        if agent.runtime is not runtime:
            for descriptor in agent.runtime.injected_manifest:
                if descriptor.name in runtime.namespace:
                    continue
                runtime.inject_variable(
                    descriptor, agent.runtime.get_variable(descriptor.name)
                )
        agent.runtime = runtime
        agent._cell_guard = binding.access_guard
        agent._binding = binding
    return binding


def equal_at_transfer(a: Any, b: Any) -> bool:
    """Transfer-fidelity comparison, re-exported for callers of ``transfer``."""
    return values_equal(a, b)
