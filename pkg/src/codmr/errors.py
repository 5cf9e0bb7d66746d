"""Exception types shared across the package."""


class CodmrError(Exception):
    """Base class for all package errors."""

    code = "error"


class ValidationError(CodmrError, ValueError):
    """An input violates a documented precondition or invariant."""

    code = "validation"


class FrameError(CodmrError, ValueError):
    """A magnetic-field vector carries the wrong reference-frame tag."""

    code = "frame"


class DegenerateModelError(CodmrError, ValueError):
    """The rate model has no unique stationary distribution."""

    code = "degenerate_model"


class StiffnessError(CodmrError, RuntimeError):
    """The transient integrator could not make progress."""

    code = "stiffness"
