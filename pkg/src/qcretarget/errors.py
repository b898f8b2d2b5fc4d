"""Error types shared across the retargeting engine.

Every failure carries a machine-parsable ``code`` plus keyword context so the
CLI and HTTP layers can map errors to exit statuses / status codes without
string matching.
"""

from __future__ import annotations


class RetargetError(Exception):
    """Base class for all engine errors."""

    code = "E_RETARGET"
    exit_status = 1

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = dict(context)

    def __str__(self) -> str:
        if not self.context:
            return f"[{self.code}] {self.message}"
        ctx = ", ".join(f"{k}={v!r}" for k, v in sorted(self.context.items()))
        return f"[{self.code}] {self.message} ({ctx})"


class InputError(RetargetError):
    """Bad user input: files, labels, dimensions, configuration."""

    code = "E_INPUT"
    exit_status = 2


class LabelError(InputError):
    """Malformed or out-of-range label document."""

    code = "E_LABEL"


class ExtremalRequiredError(InputError):
    """Target too narrow for the labeled objects; extremal mode needed."""

    code = "E_EXTREMAL_REQUIRED"


class DegenerateFaceError(InputError):
    """A source face has (near) zero area; the mesh is broken."""

    code = "E_DEGENERATE_FACE"


class SolverError(RetargetError):
    """Linear system assembly or solve failed."""

    code = "E_SOLVER"
    exit_status = 3


class FoldoverError(SolverError):
    """The solved warp flips at least one face orientation."""

    code = "E_FOLDOVER"
    exit_status = 4

    def __init__(self, message: str, faces=None, warp=None, **context):
        super().__init__(message, **context)
        self.faces = list(faces) if faces is not None else []
        self.warp = warp


class CoverageError(FoldoverError):
    """Target pixels fall outside every warped face; geometry bug."""

    code = "E_COVERAGE"


class ConstraintRankWarning(UserWarning):
    """A constraint group is too small/collinear to pin its parameters."""
