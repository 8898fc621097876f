from __future__ import annotations

from typing import Any, Dict, Optional


class LawsonToolkitError(Exception):
    """Base class for every error raised by the toolkit."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.message = message
        self.diagnostics: Dict[str, Any] = dict(diagnostics or {})

    def to_issue(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "message": self.message,
            "diagnostics": self.diagnostics,
        }


class PreconditionError(LawsonToolkitError, ValueError):
    pass


class GroupClosureError(LawsonToolkitError):
    pass


class WeldError(LawsonToolkitError):
    pass


class OrientationError(LawsonToolkitError):
    pass


class TopologyError(LawsonToolkitError):
    pass


class MissingOrbitMapError(LawsonToolkitError):
    pass


class InconsistentPatternError(LawsonToolkitError):
    pass


class StagnationError(LawsonToolkitError):
    """Line search failed too many consecutive times."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None, trace: Any = None) -> None:
        super().__init__(message, diagnostics)
        self.trace = trace


class MeshQualityError(LawsonToolkitError):
    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None, trace: Any = None) -> None:
        super().__init__(message, diagnostics)
        self.trace = trace
