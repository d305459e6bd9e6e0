"""Exception hierarchy shared by every geoscore subpackage.

Most classes also derive from ValueError so callers that only guard against
bad input keep working.
"""

from __future__ import annotations


class GeoscoreError(Exception):
    """Base class for all geoscore failures."""


class ConfigError(GeoscoreError, ValueError):
    """Invalid experiment configuration."""


class StampFormatError(GeoscoreError, ValueError):
    """A binary artifact file (STMP, GSCM, GSDS) could not be decoded."""


class BadMagicError(StampFormatError):
    pass


class VersionMismatchError(StampFormatError):
    pass


class TruncatedPayloadError(StampFormatError):
    pass


class DimensionOverflowError(StampFormatError):
    pass


class TrailingBytesError(StampFormatError):
    pass


class CatalogError(GeoscoreError, ValueError):
    """Unknown catalog name or malformed catalog file."""


class TransformError(GeoscoreError, ValueError):
    """A transformation cannot be applied to the given stamp."""


class TrainingDivergedError(GeoscoreError):
    def __init__(self, epoch: int, loss: float) -> None:
        super().__init__(f'Training diverged at epoch {epoch} (loss={loss})')
        self.epoch = epoch
        self.loss = loss


class DirichletFitError(GeoscoreError, ValueError):
    """Dirichlet fitting received unusable samples."""


class DirichletConvergenceError(DirichletFitError):
    def __init__(self, iterations: int, residual: float) -> None:
        super().__init__(
            f'Dirichlet fit did not converge after {iterations} iterations '
            f'(last relative change {residual:.3e})'
        )
        self.iterations = iterations
        self.residual = residual


class StageError(GeoscoreError):
    def __init__(self, stage: str, cause: BaseException) -> None:
        super().__init__(f'stage "{stage}" failed: {cause}')
        self.stage = stage
        self.cause = cause
