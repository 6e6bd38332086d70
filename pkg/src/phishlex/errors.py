"""Exception hierarchy shared by every module."""


class PhishlexError(Exception):
    """Base class for all package errors."""


# url_model
class HostError(PhishlexError, ValueError):
    pass


class EmptyHost(HostError):
    pass


class MalformedHost(HostError):
    pass


# dataset
class DatasetError(PhishlexError):
    pass


class FormatError(DatasetError, ValueError):
    pass


class EmptyDataset(DatasetError):
    pass


class TooFewExamples(DatasetError):
    pass


# tree / svm
class EmptyNode(PhishlexError, ValueError):
    pass


class DimensionMismatch(PhishlexError, ValueError):
    pass


class NonConvergence(PhishlexError, RuntimeWarning):
    """Raised as a warning when SMO runs out of sweeps; the model is still usable."""


# eval
class LengthMismatch(PhishlexError, ValueError):
    pass


class EmptyInput(PhishlexError, ValueError):
    pass


class ExperimentError(PhishlexError):
    def __init__(self, grid_point, cause):
        super().__init__(f"grid point {grid_point}: {cause}")
        self.grid_point = grid_point
        self.cause = cause


# model_store
class StoreError(PhishlexError):
    pass


class SchemaError(StoreError):
    pass


class CorruptPayload(StoreError):
    pass


# pdns
class PdnsError(PhishlexError, ValueError):
    pass


class FieldCountError(PdnsError):
    pass


class NumericFieldError(PdnsError):
    pass


class ClockSkew(PdnsError):
    pass
