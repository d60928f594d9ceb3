"""Code-acting agent SDK over a persistent in-process Python kernel.

The conversation with the model stays lightweight (descriptions in, code and
shaped observations out) while live objects persist in a durable namespace
that cells mutate across turns. Injected values travel in and out of the
runtime as native objects, every candidate cell passes an AST policy gate
first, and runtime state can be validated programmatically or snapshotted
for a later session.
"""

from .coordination import (
    AgentRegistry,
    SharedRuntimeBinding,
    bind_shared,
    register_subagent,
    transfer,
)
from .descriptors import (
    ContextBundle,
    FunctionDescriptor,
    TypeSchema,
    VariableDescriptor,
    derive_type_schema,
    describe_function,
    describe_variable,
    render_context,
)
from .errors import KernelAgentError
from .gateway import (
    HttpChatBackend,
    ModelRequest,
    ModelResponse,
    Usage,
    UsageCounter,
    accumulate,
    complete,
    estimate_tokens,
    scripted_model,
)
from .orchestrator import (
    Agent,
    AgentConfig,
    InvocationLog,
    SessionEnd,
    SessionResult,
    TurnRecord,
    export_transcript,
    instrument,
    load_transcript,
    new_agent,
    run,
    step,
)
from .runtime import (
    ExecutionOutcome,
    NamespaceEntry,
    RuntimeConfig,
    RuntimeHandle,
    Snapshot,
    create_runtime,
    restore,
    values_equal,
)
from .security import (
    SecurityPolicy,
    Violation,
    check,
    default_policy,
    format_security_feedback,
    parse_source,
)
from .semantic import (
    Action,
    ActionKind,
    ChatMessage,
    ConversationHistory,
    ObservationKind,
    PromptTemplateSet,
    ShapedObservation,
    append,
    build_system_prompt,
    extract_action,
    make_feedback,
    shape_observation,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ActionKind",
    "Agent",
    "AgentConfig",
    "AgentRegistry",
    "ChatMessage",
    "ContextBundle",
    "ConversationHistory",
    "ExecutionOutcome",
    "FunctionDescriptor",
    "HttpChatBackend",
    "InvocationLog",
    "KernelAgentError",
    "ModelRequest",
    "ModelResponse",
    "NamespaceEntry",
    "ObservationKind",
    "PromptTemplateSet",
    "RuntimeConfig",
    "RuntimeHandle",
    "SecurityPolicy",
    "SessionEnd",
    "SessionResult",
    "ShapedObservation",
    "SharedRuntimeBinding",
    "Snapshot",
    "TurnRecord",
    "TypeSchema",
    "Usage",
    "UsageCounter",
    "VariableDescriptor",
    "Violation",
    "accumulate",
    "append",
    "bind_shared",
    "build_system_prompt",
    "check",
    "complete",
    "create_runtime",
    "default_policy",
    "derive_type_schema",
    "describe_function",
    "describe_variable",
    "estimate_tokens",
    "export_transcript",
    "extract_action",
    "format_security_feedback",
    "instrument",
    "load_transcript",
    "make_feedback",
    "new_agent",
    "parse_source",
    "register_subagent",
    "render_context",
    "restore",
    "run",
    "scripted_model",
    "shape_observation",
    "step",
    "transfer",
    "values_equal",
]
