"""reqtrace: user-level requirements and live trace links from repositories."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    Component,
    ImplementationRequirement,
    RepositorySnapshot,
    SourceFile,
    UserRequirement,
    content_hash,
    read_snapshot,
    write_snapshot,
)
