"""Exception types shared across the package."""

from __future__ import annotations


class ScratchPlotError(Exception):
    """Base class for all package-specific errors."""


class TransportError(ScratchPlotError):
    """The model server could not be reached or kept failing.

    Carries retry metadata so callers can decide whether another attempt
    makes sense.
    """

    def __init__(self, message: str, *, attempts: int = 1, retryable: bool = True):
        super().__init__(message)
        self.attempts = attempts
        self.retryable = retryable


class ConfigurationError(ScratchPlotError):
    """Bad or missing configuration (unknown model id, malformed file, ...)."""


class CapabilityError(ScratchPlotError):
    """The backend does not support the requested capability (e.g. NSP)."""


class WindowExceededError(ScratchPlotError):
    """The request does not fit into the backend's context window."""

    def __init__(self, window: int, message: str | None = None):
        super().__init__(message or f"context window of {window} tokens exceeded")
        self.window = window


class RenderError(ScratchPlotError):
    """A template placeholder had no binding."""

    def __init__(self, placeholder: str, template_id: str | None = None):
        where = f" in template {template_id!r}" if template_id else ""
        super().__init__(f"missing binding for placeholder <{placeholder}>{where}")
        self.placeholder = placeholder


class PlanValidationError(ScratchPlotError):
    """A content plan is incomplete or inconsistent."""

    def __init__(self, missing: list[str]):
        super().__init__(f"content plan is missing: {', '.join(missing)}")
        self.missing = missing


class DependencyError(ScratchPlotError):
    """Parent elements required for generation are absent from the pool."""


class SamplingError(ScratchPlotError):
    """Plan sampling failed for one element kind."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


class GenerationAborted(ScratchPlotError):
    """A single candidate's generation ran out of valid tokens.

    Callers sampling many candidates drop the candidate and continue.
    """


class GenerationExhaustedError(ScratchPlotError):
    """No candidate survived generation and filtering."""

    def __init__(self, message: str, diagnostics: dict[str, int]):
        super().__init__(f"{message} (diagnostics: {diagnostics})")
        self.diagnostics = diagnostics
