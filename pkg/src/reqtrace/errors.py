"""Exception hierarchy shared across the package."""


class ReqtraceError(Exception):
    """Base class for all domain errors raised by this package."""


class SnapshotParseError(ReqtraceError):
    """Snapshot file is malformed; message names the offending field."""


class SnapshotValidationError(ReqtraceError):
    """One or more snapshot invariants are violated."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("snapshot validation failed:\n" + "\n".join(f"- {v}" for v in self.violations))


class PreconditionError(ReqtraceError):
    """A documented operation precondition was not met by the caller."""


class GatewayError(ReqtraceError):
    """Base for completion-backend failures."""


class TransportError(GatewayError):
    """Network failure that persisted through all retries."""


class ProtocolError(GatewayError):
    """Backend replied, but the reply could not be interpreted."""


class AgentOutputError(ReqtraceError):
    """Agent response did not conform to the expected structured format."""


class PipelineFailure(ReqtraceError):
    """Unrecoverable pipeline failure; carries the partial result if any."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class TraceIntegrityError(ReqtraceError):
    """Trace records reference artifacts missing from the snapshot."""


class DatasetError(ReqtraceError):
    """Ground-truth dataset files are missing or inconsistent."""


class ConvergenceError(ReqtraceError):
    """Iterative numerical routine failed to reach tolerance."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class ConfigError(ReqtraceError):
    """Run configuration contains unknown keys or invalid values."""
