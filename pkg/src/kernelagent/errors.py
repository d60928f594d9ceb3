"""Exception types shared across the package."""


class KernelAgentError(Exception):
    """Base class for every error raised by this package."""


class KernelStartupError(KernelAgentError):
    """The kernel could not be initialized (e.g. a preload module is missing)."""


class NotFoundError(KernelAgentError):
    """A namespace name was requested but is not bound."""

    def __init__(self, name: str):
        super().__init__(f"name {name!r} is not bound in this runtime")
        self.name = name


class InjectionError(KernelAgentError):
    """A value or callable could not be injected under the requested name."""


class RuntimeBusyError(KernelAgentError):
    """A cell is already executing on this runtime handle."""


class SnapshotError(KernelAgentError):
    """A snapshot could not be produced, read, or restored."""


class MetadataMissingError(KernelAgentError):
    """An entity could not be described and no overrides were supplied."""


class DuplicateDescriptorError(KernelAgentError):
    """Two descriptors in one context bundle share a name."""


class TemplateError(KernelAgentError):
    """A prompt template is missing a required placeholder."""


class OrderingError(KernelAgentError):
    """A message append would break the conversation role ordering."""


class ScriptExhaustedError(KernelAgentError):
    """A scripted model backend ran out of scripted responses."""


class RequestFailedError(KernelAgentError):
    """A model request failed after all retry attempts."""


class SuiteSchemaError(KernelAgentError):
    """A benchmark suite file does not match the expected schema."""


class CoordinationError(KernelAgentError):
    """A multi-agent coordination operation was rejected."""
