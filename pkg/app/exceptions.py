"""Exception hierarchy shared by every HCMEN module."""


class HCMENError(Exception):
    """Base class for all errors raised by the package."""


class DimensionError(HCMENError, ValueError):
    """Tensor shapes do not agree with what an operation needs."""


class ConfigurationError(HCMENError, ValueError):
    """A layer or model was configured with incompatible settings."""


class ContractError(HCMENError, ValueError):
    """A precondition of an operation was violated by the caller."""


class NumericError(HCMENError, ArithmeticError):
    """A computation produced NaN or Inf."""


class EmptyInputError(HCMENError, ValueError):
    """An operation received an empty sequence."""


class DatasetError(HCMENError, OSError):
    """The on-disk dataset is missing, malformed or could not be written."""


class CheckpointError(HCMENError, OSError):
    """A checkpoint file could not be written or loaded."""


class UsageError(HCMENError):
    """Command-line usage error (exit code 1)."""
