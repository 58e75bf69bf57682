"""Exception hierarchy shared by every artik subsystem."""


class ArtikError(Exception):
    """Base class for all library errors."""


class InvalidInputError(ArtikError, ValueError):
    pass


class InvalidConfigError(ArtikError, ValueError):
    pass


class RangeError(ArtikError, ValueError):
    """An articulation value fell outside its joint limits."""


class DegenerateGeometryError(ArtikError, ValueError):
    pass


class SignUndefinedError(ArtikError):
    """Signed distance requested on a mesh that is not watertight."""


class ShapeError(ArtikError, ValueError):
    pass


class ContractError(ArtikError, RuntimeError):
    pass


class NumericError(ArtikError, FloatingPointError):
    pass


class TrainingDivergedError(ArtikError, RuntimeError):
    def __init__(self, message, last_checkpoint=None):
        super().__init__(message)
        self.last_checkpoint = last_checkpoint


class UndefinedMetricError(ArtikError, ValueError):
    pass


class AnomalyRejectedError(ArtikError):
    """Retryable: the injected deformation failed validation."""


class CheckpointMismatchError(ArtikError, ValueError):
    pass
