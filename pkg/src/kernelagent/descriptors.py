"""Metadata abstraction for injected entities.

Functions are described as (name, signature, doc) and variables as
(name, type label, description); type schemas list public methods and fields.
Rendered context blocks expose only this metadata, never raw values, keeping
the prompt lightweight while the live objects stay in the runtime.
"""

from __future__ import annotations

import dataclasses
import inspect
from dataclasses import dataclass, field
from typing import Any

from .errors import DuplicateDescriptorError, MetadataMissingError

DOC_CHAR_LIMIT = 600

_SECTION_ALIASES = {
    "args": "Args",
    "arguments": "Args",
    "parameters": "Args",
    "returns": "Returns",
    "return": "Returns",
}


@dataclass
class Parameter:
    name: str
    label: str
    default: str | None = None

    def render(self) -> str:
        text = f"{self.name}: {self.label}"
        if self.default is not None:
            text += f" = {self.default}"
        return text


@dataclass
class FunctionDescriptor:
    """Descriptor tuple for an invocable entity."""

    name: str
    parameters: list[Parameter]
    return_label: str
    description: str
    doc: str = ""

    def __post_init__(self):
        names = [p.name for p in self.parameters]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate parameter names in {self.name!r}")

    def signature_str(self) -> str:
        params = ", ".join(p.render() for p in self.parameters)
        return f"{self.name}({params}) -> {self.return_label}"


@dataclass
class VariableDescriptor:
    """Descriptor tuple for an injected value."""

    name: str
    type_label: str
    description: str = ""


@dataclass
class TypeSchema:
    """Public surface of a type: docstring summary, methods, fields."""

    type_name: str
    doc: str = ""
    methods: list[str] = field(default_factory=list)
    fields: list[str] = field(default_factory=list)


@dataclass
class ContextBundle:
    """The three tag-enclosed context blocks injected into the system prompt."""

    functions_block: str
    variables_block: str
    types_block: str


# ---------------------------------------------------------------------------
# Introspection
# ---------------------------------------------------------------------------


def _annotation_label(annotation: Any) -> str:
    if annotation is inspect.Signature.empty:
        return "Any"
    if isinstance(annotation, str):
        return annotation
    if annotation is None or annotation is type(None):
        return "None"
    if isinstance(annotation, type):
        return annotation.__name__
    return inspect.formatannotation(annotation)


def _split_docstring(raw: str) -> tuple[str, str]:
    """Split a docstring into (summary line, normalized Args/Returns text)."""
    lines = inspect.cleandoc(raw).splitlines()

    summary_parts: list[str] = []
    i = 0
    while i < len(lines) and lines[i].strip():
        if lines[i].strip().rstrip(":").lower() in _SECTION_ALIASES:
            break
        summary_parts.append(lines[i].strip())
        i += 1
    description = " ".join(summary_parts)

    sections: list[str] = []
    current: str | None = None
    for line in lines[i:]:
        stripped = line.strip()
        if not stripped:
            continue
        header = _SECTION_ALIASES.get(stripped.rstrip(":").lower())
        if header and stripped.endswith(":"):
            current = header
            sections.append(f"{header}:")
        elif current is not None:
            sections.append(f"  {stripped}")
        # prose between the summary and the first section is dropped
    doc = "\n".join(sections)

    if len(description) + len(doc) > DOC_CHAR_LIMIT:
        doc = doc[: max(0, DOC_CHAR_LIMIT - len(description))].rstrip()
    return description, doc


def describe_function(callable_entity: Any, overrides: dict | None = None) -> FunctionDescriptor:
    """Build a descriptor from introspection; overrides win on conflict.

    Raises :class:`MetadataMissingError` when the entity cannot be inspected
    (or has no documentation) and the overrides do not fill the gap.
    """
    overrides = dict(overrides or {})

    name = overrides.get("name") or getattr(callable_entity, "__name__", None)
    if not name:
        raise MetadataMissingError("entity has no name and none was supplied")

    if "parameters" in overrides:
        parameters = [_as_parameter(p) for p in overrides["parameters"]]
        return_label = overrides.get("return_label", "Any")
    else:
        try:
            sig = inspect.signature(callable_entity)
        except (TypeError, ValueError) as exc:
            raise MetadataMissingError(
                f"cannot inspect signature of {name!r} and no override was supplied"
            ) from exc
        parameters = [
            Parameter(
                name=p.name,
                label=_annotation_label(p.annotation),
                default=None if p.default is inspect.Signature.empty else repr(p.default),
            )
            for p in sig.parameters.values()
        ]
        return_label = overrides.get(
            "return_label", _annotation_label(sig.return_annotation)
        )

    raw_doc = inspect.getdoc(callable_entity)
    if raw_doc:
        description, doc = _split_docstring(raw_doc)
    else:
        description, doc = "", ""
    description = overrides.get("description", description)
    doc = overrides.get("doc", doc)
    if not description and not doc:
        raise MetadataMissingError(
            f"{name!r} has no documentation and no override was supplied"
        )
    return FunctionDescriptor(
        name=name,
        parameters=parameters,
        return_label=return_label,
        description=description,
        doc=doc,
    )


def _as_parameter(spec) -> Parameter:
    if isinstance(spec, Parameter):
        return spec
    if isinstance(spec, (tuple, list)):
        return Parameter(*spec)
    return Parameter(name=str(spec), label="Any")


def describe_variable(name: str, value: Any, description: str = "") -> VariableDescriptor:
    """Describe a value by name, live type name, and optional description."""
    if not name.isidentifier():
        raise ValueError(f"{name!r} is not a valid identifier")
    return VariableDescriptor(
        name=name, type_label=type(value).__name__, description=description
    )


def derive_type_schema(value_or_type: Any) -> TypeSchema:
    """List the public methods and fields of a type (or a value's type).

    Leading-underscore names are excluded; an empty schema is valid.
    """
    cls = value_or_type if isinstance(value_or_type, type) else type(value_or_type)

    doc = ""
    raw = inspect.getdoc(cls)
    if raw and raw != object.__doc__:
        doc = _split_docstring(raw)[0]

    methods: list[str] = []
    for attr_name, member in inspect.getmembers(cls, callable):
        if attr_name.startswith("_"):
            continue
        try:
            sig = inspect.signature(member)
        except (TypeError, ValueError):
            continue
        params = [
            Parameter(
                name=p.name,
                label=_annotation_label(p.annotation),
                default=None if p.default is inspect.Signature.empty else repr(p.default),
            )
            for p in sig.parameters.values()
            if p.name not in ("self", "cls")
        ]
        rendered = ", ".join(p.render() for p in params)
        methods.append(
            f"{attr_name}({rendered}) -> {_annotation_label(sig.return_annotation)}"
        )

    fields_out: list[str] = []
    if dataclasses.is_dataclass(cls):
        fields_out = [
            f"{f.name}: {_annotation_label(f.type)}" for f in dataclasses.fields(cls)
        ]
    elif getattr(cls, "__annotations__", None):
        fields_out = [
            f"{n}: {_annotation_label(a)}"
            for n, a in cls.__annotations__.items()
            if not n.startswith("_")
        ]
    elif not isinstance(value_or_type, type) and hasattr(value_or_type, "__dict__"):
        fields_out = [
            f"{n}: {type(v).__name__}"
            for n, v in vars(value_or_type).items()
            if not n.startswith("_")
        ]
    return TypeSchema(type_name=cls.__name__, doc=doc, methods=methods, fields=fields_out)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _check_unique(names: list[str], block: str) -> None:
    seen = set()
    for name in names:
        if name in seen:
            raise DuplicateDescriptorError(
                f"duplicate descriptor {name!r} in {block} block"
            )
        seen.add(name)


def _render_function(fd: FunctionDescriptor) -> str:
    lines = [f"- function: {fd.signature_str()}"]
    if fd.description:
        lines.append(f"  description: {fd.description}")
    if fd.doc:
        lines.append("  doc:")
        lines.extend(f"  {line}" for line in fd.doc.splitlines())
    return "\n".join(lines)


def _render_variable(vd: VariableDescriptor) -> str:
    lines = [f"- name: {vd.name}", f"  type: {vd.type_label}"]
    if vd.description:
        lines.append(f"  description: {vd.description}")
    return "\n".join(lines)


def _render_type(ts: TypeSchema) -> str:
    lines = [f"{ts.type_name}:"]
    if ts.doc:
        lines.append(f"  doc: {ts.doc}")
    if ts.methods:
        lines.append("  methods:")
        lines.extend(f"    - {m}" for m in ts.methods)
    if ts.fields:
        lines.append("  fields:")
        lines.extend(f"    - {f}" for f in ts.fields)
    return "\n".join(lines)


def _wrap(tag: str, body: str) -> str:
    if body:
        return f"<{tag}>\n{body}\n</{tag}>"
    return f"<{tag}>\n</{tag}>"


def render_context(
    functions: list[FunctionDescriptor],
    variables: list[VariableDescriptor],
    types: list[TypeSchema],
) -> ContextBundle:
    """Render descriptor lists into their tagged blocks, in insertion order.

    Rendering is deterministic: identical descriptor lists produce
    byte-identical bundles. Raises :class:`DuplicateDescriptorError` on a
    name clash within a block.
    """
    _check_unique([f.name for f in functions], "functions")
    _check_unique([v.name for v in variables], "variables")
    _check_unique([t.type_name for t in types], "types")
    return ContextBundle(
        functions_block=_wrap(
            "functions", "\n\n".join(_render_function(f) for f in functions)
        ),
        variables_block=_wrap(
            "variables", "\n\n".join(_render_variable(v) for v in variables)
        ),
        types_block=_wrap("types", "\n\n".join(_render_type(t) for t in types)),
    )
