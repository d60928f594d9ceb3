"""Persistent in-process Python kernel: cells executed over a durable namespace.

A :class:`RuntimeHandle` owns a global namespace that survives across cell
executions. Values and callables can be injected into it before or during a
session, read back as live objects, and carried across process boundaries via
versioned snapshots. Exceptions raised by cells are captured into the
execution outcome and never take the kernel down.
"""

from __future__ import annotations

import ast
import base64
import builtins
import importlib
import io
import keyword
import pickle
import sys
import threading
import time
import traceback
import types
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .errors import (
    InjectionError,
    KernelStartupError,
    NotFoundError,
    RuntimeBusyError,
    SnapshotError,
)

SNAPSHOT_VERSION = "1"

# Names the kernel plants in the namespace for its own use; these are hidden
# from list_entries and never snapshotted.
_HOST_NAMES = {"__builtins__", "__name__", "__doc__", "__loader__", "__spec__"}

_REPR_LIMIT = 1000
_SUMMARY_LIMIT = 60


def _is_host_name(name: str) -> bool:
    return name in _HOST_NAMES


def _short_repr(value: Any, limit: int) -> str:
    try:
        text = repr(value)
    except Exception as exc:  # repr of arbitrary objects may itself fail
        text = f"<unreprable {type(value).__name__}: {exc}>"
    if len(text) > limit:
        text = text[: limit - 3] + "..."
    return text


# ---------------------------------------------------------------------------
# Thread-routed stdout/stderr capture
# ---------------------------------------------------------------------------


class _StreamRouter(io.TextIOBase):
    """Routes writes to a per-thread buffer; unregistered threads fall through.

    Cells may run on worker threads (for timeouts) while other runtimes execute
    in parallel, so a plain global redirect would cross-capture output.
    """

    def __init__(self, fallback):
        self._fallback = fallback
        self._routes: dict[int, io.StringIO] = {}
        self._lock = threading.Lock()

    def register(self, thread_id: int, buffer: io.StringIO) -> None:
        with self._lock:
            self._routes[thread_id] = buffer

    def unregister(self, thread_id: int) -> None:
        with self._lock:
            self._routes.pop(thread_id, None)

    def _target(self):
        with self._lock:
            return self._routes.get(threading.get_ident(), self._fallback)

    def write(self, text):  # noqa: A003 - io interface
        return self._target().write(text)

    def flush(self):
        target = self._target()
        if hasattr(target, "flush"):
            target.flush()

    @property
    def routes(self) -> int:
        with self._lock:
            return len(self._routes)


class _CaptureManager:
    """Installs stream routers into sys.stdout/stderr while any cell runs."""

    def __init__(self):
        self._lock = threading.Lock()
        self._depth = 0
        self._out_router: _StreamRouter | None = None
        self._err_router: _StreamRouter | None = None
        self._saved: tuple[Any, Any] | None = None

    def attach(self, thread_id: int, out: io.StringIO, err: io.StringIO) -> None:
        with self._lock:
            if self._depth == 0:
                self._saved = (sys.stdout, sys.stderr)
                self._out_router = _StreamRouter(sys.stdout)
                self._err_router = _StreamRouter(sys.stderr)
                sys.stdout = self._out_router
                sys.stderr = self._err_router
            self._depth += 1
            self._out_router.register(thread_id, out)
            self._err_router.register(thread_id, err)

    def detach(self, thread_id: int) -> None:
        with self._lock:
            self._out_router.unregister(thread_id)
            self._err_router.unregister(thread_id)
            self._depth -= 1
            if self._depth == 0:
                sys.stdout, sys.stderr = self._saved
                self._out_router = None
                self._err_router = None
                self._saved = None


_captures = _CaptureManager()


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass
class RuntimeConfig:
    """Kernel configuration.

    preload_modules: module names imported into the namespace at startup.
    timeout: wall-clock seconds allowed per cell; None disables the limit.
    stdout_cap: hard cap on captured output per stream, applied before any
        downstream shaping so a runaway print cannot exhaust memory.
    """

    preload_modules: list[str] = field(default_factory=list)
    timeout: float | None = 30.0
    stdout_cap: int = 1_000_000

    @classmethod
    def from_dict(cls, data: dict) -> "RuntimeConfig":
        known = {"preload_modules", "timeout", "stdout_cap"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown runtime config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "RuntimeConfig":
        import json

        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class NamespaceEntry:
    """One user-visible namespace binding."""

    name: str
    type_name: str
    origin: str  # "injected" | "cell-created"
    summary: str


@dataclass
class ExecutionError:
    """Structured error captured from a failed cell."""

    kind: str
    message: str
    traceback_summary: str


@dataclass
class ExecutionOutcome:
    """Result of one cell execution; source is stored byte-identical."""

    source: str
    stdout: str
    stderr: str
    error: ExecutionError | None
    last_value_repr: str | None
    duration: float
    cell_index: int

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class Snapshot:
    """Versioned archive of a namespace.

    Entries are serialized independently so one unserializable value cannot
    poison the rest; such names are listed in ``skipped`` with a reason.
    """

    version: str
    entries: list[tuple[str, str, str]]  # (name, type_tag, payload)
    skipped: list[tuple[str, str]]  # (name, reason)
    cell_counter: int
    injected: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "entries": [list(e) for e in self.entries],
            "skipped": [list(s) for s in self.skipped],
            "cell_counter": self.cell_counter,
            "injected": self.injected,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Snapshot":
        try:
            return cls(
                version=data["version"],
                entries=[tuple(e) for e in data["entries"]],
                skipped=[tuple(s) for s in data["skipped"]],
                cell_counter=data["cell_counter"],
                injected=data.get("injected", {}),
            )
        except (KeyError, TypeError) as exc:
            raise SnapshotError(f"malformed snapshot document: {exc}") from exc

    def save(self, path) -> None:
        import json

        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Snapshot":
        import json

        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except ValueError as exc:
            raise SnapshotError(f"snapshot file is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


# ---------------------------------------------------------------------------
# Runtime handle
# ---------------------------------------------------------------------------


class RuntimeHandle:
    """A live kernel session: durable namespace plus a cell counter.

    At most one cell may execute at a time per handle; a second concurrent
    call raises :class:`RuntimeBusyError`. Distinct handles are independent
    and may run in parallel.
    """

    def __init__(self, config: RuntimeConfig | None = None):
        self.config = config or RuntimeConfig()
        self.session_id = uuid.uuid4().hex[:12]
        self.created_at = time.time()
        self.namespace: dict[str, Any] = {}
        self.cell_counter = 0
        self._manifest: dict[str, Any] = {}  # injected name -> descriptor
        self._exec_lock = threading.Lock()
        self._zombie: threading.Thread | None = None
        self._init_namespace()

    # -- lifecycle ---------------------------------------------------------

    def _init_namespace(self) -> None:
        self.namespace = {"__builtins__": builtins, "__name__": "__kernel__"}
        for mod_name in self.config.preload_modules:
            try:
                module = importlib.import_module(mod_name)
            except Exception as exc:
                raise KernelStartupError(
                    f"failed to preload module {mod_name!r}: {exc}"
                ) from exc
            self.namespace[mod_name.split(".")[0]] = module

    def reset(self) -> None:
        """Clear the namespace back to its initial state. Idempotent."""
        self._manifest.clear()
        self.cell_counter = 0
        self._init_namespace()

    @property
    def injected_manifest(self) -> list[Any]:
        """Descriptors of injected entries still present in the namespace."""
        self._prune_manifest()
        return list(self._manifest.values())

    def _prune_manifest(self) -> None:
        for name in [n for n in self._manifest if n not in self.namespace]:
            del self._manifest[name]

    # -- injection and retrieval -------------------------------------------

    def inject_variable(self, descriptor, value, *, overwrite: bool = False) -> NamespaceEntry:
        """Bind ``value`` under ``descriptor.name`` as a live global symbol."""
        name = getattr(descriptor, "name", None)
        self._check_injectable_name(name)
        if name in self._manifest and not overwrite:
            raise InjectionError(
                f"name {name!r} is already injected; pass overwrite=True to replace it"
            )
        self.namespace[name] = value
        self._manifest[name] = descriptor
        return self._entry_for(name, value)

    def inject_function(self, descriptor, callable_entity, *, overwrite: bool = False) -> NamespaceEntry:
        """Bind a callable under ``descriptor.name``; invocable from any later cell."""
        if not callable(callable_entity):
            raise InjectionError(
                f"entity for {getattr(descriptor, 'name', '?')!r} is not callable"
            )
        return self.inject_variable(descriptor, callable_entity, overwrite=overwrite)

    def _check_injectable_name(self, name) -> None:
        if not isinstance(name, str) or not name.isidentifier() or keyword.iskeyword(name):
            raise InjectionError(f"{name!r} is not a valid identifier")
        if hasattr(builtins, name):
            raise InjectionError(f"{name!r} collides with a host builtin")

    def get_variable(self, name: str) -> Any:
        """Return the live value bound to ``name`` (no textual rendering)."""
        if _is_host_name(name) or name not in self.namespace:
            raise NotFoundError(name)
        return self.namespace[name]

    def delete_variable(self, name: str) -> None:
        if _is_host_name(name) or name not in self.namespace:
            raise NotFoundError(name)
        del self.namespace[name]
        self._manifest.pop(name, None)

    def list_entries(self) -> list[NamespaceEntry]:
        """One entry per user-visible name; kernel-internal names are hidden."""
        self._prune_manifest()
        return [
            self._entry_for(name, value)
            for name, value in self.namespace.items()
            if not _is_host_name(name)
        ]

    def _entry_for(self, name: str, value: Any) -> NamespaceEntry:
        origin = "injected" if name in self._manifest else "cell-created"
        return NamespaceEntry(
            name=name,
            type_name=type(value).__name__,
            origin=origin,
            summary=_short_repr(value, _SUMMARY_LIMIT),
        )

    # -- cell execution ------------------------------------------------------

    def execute_cell(self, source: str) -> ExecutionOutcome:
        """Run ``source`` as one cell. Namespace mutations persist.

        Runtime exceptions are captured into ``outcome.error`` and never crash
        the kernel. Raises :class:`RuntimeBusyError` if another cell is
        in flight on this handle.
        """
        if not isinstance(source, str) or not source:
            raise ValueError("cell source must be non-empty text")
        if not self._exec_lock.acquire(blocking=False):
            raise RuntimeBusyError("another cell is executing on this runtime")
        try:
            if self._zombie is not None:
                if self._zombie.is_alive():
                    raise RuntimeBusyError(
                        "a previously timed-out cell is still running"
                    )
                self._zombie = None
            self.cell_counter += 1
            return self._run_cell(source, self.cell_counter)
        finally:
            self._exec_lock.release()

    def _run_cell(self, source: str, index: int) -> ExecutionOutcome:
        out_buf, err_buf = io.StringIO(), io.StringIO()
        result: dict[str, Any] = {"error": None, "last_value_repr": None}
        filename = f"<cell {index}>"

        def worker():
            _captures.attach(threading.get_ident(), out_buf, err_buf)
            try:
                self._exec_source(source, filename, result)
            finally:
                _captures.detach(threading.get_ident())

        start = time.monotonic()
        thread = threading.Thread(target=worker, daemon=True, name=f"cell-{self.session_id}-{index}")
        thread.start()
        thread.join(self.config.timeout)
        timed_out = thread.is_alive()
        duration = time.monotonic() - start

        if timed_out:
            # The worker cannot be killed; remember it and refuse new cells
            # until it finishes. Output captured so far is preserved.
            self._zombie = thread
            result["error"] = ExecutionError(
                kind="timeout",
                message=f"cell execution exceeded {self.config.timeout} seconds",
                traceback_summary=(
                    f"TimeoutError: cell execution exceeded "
                    f"{self.config.timeout} seconds"
                ),
            )
            result["last_value_repr"] = None

        cap = self.config.stdout_cap
        return ExecutionOutcome(
            source=source,
            stdout=out_buf.getvalue()[:cap],
            stderr=err_buf.getvalue()[:cap],
            error=result["error"],
            last_value_repr=result["last_value_repr"],
            duration=duration,
            cell_index=index,
        )

    def _exec_source(self, source: str, filename: str, result: dict) -> None:
        try:
            tree = ast.parse(source, filename=filename)
        except SyntaxError as exc:
            result["error"] = ExecutionError(
                kind="syntax",
                message=str(exc.msg),
                traceback_summary=f"SyntaxError: {exc.msg} (line {exc.lineno})",
            )
            return

        # Mirror notebook semantics: if the cell ends with a bare expression,
        # evaluate it separately so its value can be reported.
        last_expr = None
        if tree.body and isinstance(tree.body[-1], ast.Expr):
            last_expr = ast.Expression(tree.body[-1].value)
            ast.copy_location(last_expr, tree.body[-1])
            tree.body = tree.body[:-1]

        try:
            if tree.body:
                exec(compile(tree, filename, "exec"), self.namespace)  # noqa: S102
            if last_expr is not None:
                value = eval(compile(last_expr, filename, "eval"), self.namespace)  # noqa: S307
                if value is not None:
                    result["last_value_repr"] = _short_repr(value, _REPR_LIMIT)
        except BaseException as exc:  # cells must never take the kernel down
            result["error"] = ExecutionError(
                kind=type(exc).__name__,
                message=str(exc),
                traceback_summary=_summarize_traceback(exc, filename),
            )

    # -- snapshot / restore --------------------------------------------------

    def snapshot(self) -> Snapshot:
        """Serialize every user-visible entry independently.

        Modules are recorded by import name; everything else is pickled.
        Unserializable values are enumerated in ``skipped`` with a reason.
        """
        self._prune_manifest()
        entries: list[tuple[str, str, str]] = []
        skipped: list[tuple[str, str]] = []
        for name, value in self.namespace.items():
            if _is_host_name(name):
                continue
            if isinstance(value, types.ModuleType):
                entries.append((name, "module", value.__name__))
                continue
            try:
                payload = base64.b64encode(
                    pickle.dumps(value, protocol=pickle.HIGHEST_PROTOCOL)
                ).decode("ascii")
                entries.append((name, "pickle", payload))
            except Exception as exc:
                skipped.append((name, f"{type(exc).__name__}: {exc}"))
        return Snapshot(
            version=SNAPSHOT_VERSION,
            entries=entries,
            skipped=skipped,
            cell_counter=self.cell_counter,
            injected={name: _descriptor_to_doc(d) for name, d in self._manifest.items()},
        )


def _summarize_traceback(exc: BaseException, filename: str) -> str:
    frames = traceback.extract_tb(exc.__traceback__)
    cell_frames = [f for f in frames if f.filename == filename]
    lines = [f"  line {f.lineno}, in {f.name}" for f in cell_frames[-3:]]
    tail = "".join(traceback.format_exception_only(type(exc), exc)).rstrip("\n")
    if lines:
        return "\n".join(["Traceback (cell):", *lines, tail])
    return tail


def _descriptor_to_doc(descriptor) -> dict:
    """Best-effort JSON form of a descriptor for snapshot round-trips."""
    kind = type(descriptor).__name__
    try:
        data = asdict(descriptor)
    except TypeError:
        data = {"name": getattr(descriptor, "name", "?")}
    return {"kind": kind, "data": data}


def _descriptor_from_doc(doc: dict):
    from . import descriptors as _d

    kind, data = doc.get("kind"), dict(doc.get("data", {}))
    if kind == "VariableDescriptor":
        return _d.VariableDescriptor(**data)
    if kind == "FunctionDescriptor":
        params = [_d.Parameter(**p) for p in data.pop("parameters", [])]
        return _d.FunctionDescriptor(parameters=params, **data)
    return _d.VariableDescriptor(
        name=data.get("name", "?"), type_label="Any", description=""
    )


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------


def create_runtime(config: RuntimeConfig | None = None) -> RuntimeHandle:
    """Start a fresh kernel with an empty namespace (besides host builtins)."""
    return RuntimeHandle(config)


def restore(snap: Snapshot, config: RuntimeConfig | None = None) -> RuntimeHandle:
    """Rebuild a runtime from a snapshot.

    The restored namespace contains exactly the snapshot's entries; values
    compare equal under :func:`values_equal`. Raises :class:`SnapshotError`
    on an unsupported version or a corrupt payload.
    """
    if snap.version != SNAPSHOT_VERSION:
        raise SnapshotError(
            f"unsupported snapshot version {snap.version!r} "
            f"(supported: {SNAPSHOT_VERSION!r})"
        )
    rt = create_runtime(config)
    for name, tag, payload in snap.entries:
        if tag == "module":
            try:
                rt.namespace[name] = importlib.import_module(payload)
            except Exception as exc:
                raise SnapshotError(
                    f"entry {name!r}: module {payload!r} is not importable"
                ) from exc
        elif tag == "pickle":
            try:
                rt.namespace[name] = pickle.loads(base64.b64decode(payload))
            except Exception as exc:
                raise SnapshotError(f"entry {name!r}: corrupt payload: {exc}") from exc
        else:
            raise SnapshotError(f"entry {name!r}: unknown type tag {tag!r}")
    for name, doc in snap.injected.items():
        if name in rt.namespace:
            rt._manifest[name] = _descriptor_from_doc(doc)
    rt.cell_counter = snap.cell_counter
    return rt


def values_equal(a: Any, b: Any) -> bool:
    """Value-equality contract used by snapshot/restore and transfers.

    Structural equality where the host defines it (``==``), with containers
    of array-likes reduced via ``.all()``; falls back to ``repr`` equality
    for objects whose comparison is undefined or ambiguous.
    """
    if a is b:
        return True
    try:
        result = a == b
        for _ in range(3):  # DataFrame -> Series -> scalar style reductions
            if isinstance(result, bool):
                return result
            all_method = getattr(result, "all", None)
            if all_method is None:
                return bool(result)
            result = all_method()
        return bool(result)
    except Exception:
        return repr(a) == repr(b)
