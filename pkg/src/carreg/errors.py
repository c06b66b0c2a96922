"""Closed error taxonomy.

Every failure raised by the package is a :class:`CarError` subclass with a
stable string ``code`` and the CLI exit code it maps to.
"""
from __future__ import annotations

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class CarError(Exception):
    code = "car_error"
    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.details = details

    def to_dict(self) -> dict:
        out = {"error": self.code, "message": self.message}
        out.update({k: v for k, v in self.details.items() if v is not None})
        return out


# configuration
class ConfigError(CarError):
    code = "config_error"
    exit_code = EXIT_CONFIG


class InvalidLevel(ConfigError):
    code = "invalid_level"


class IndexOutOfRange(ConfigError):
    code = "index_out_of_range"


class TooManyBins(ConfigError):
    code = "too_many_bins"


class CannotSatisfy(ConfigError):
    code = "cannot_satisfy"


# data
class DataError(CarError):
    code = "data_error"
    exit_code = EXIT_DATA


class InvalidInput(DataError):
    code = "invalid_input"


class InsufficientData(DataError):
    code = "insufficient_data"


class DegenerateRange(DataError):
    code = "degenerate_range"


class SchemaError(DataError):
    code = "schema_error"


class ParseError(DataError):
    code = "parse_error"

    def __init__(self, message: str = "", row: int | None = None, col: str | None = None):
        super().__init__(message, row=row, col=col)
        self.row = row
        self.col = col


class InvalidDistortion(DataError):
    code = "invalid_distortion"


# numerical
class NumericalError(CarError):
    code = "numerical_error"
    exit_code = EXIT_NUMERICAL


class SingularBin(NumericalError):
    code = "singular_bin"

    def __init__(self, message: str = "", determinant: float | None = None):
        super().__init__(message, determinant=determinant)
        self.determinant = determinant


class NoUsableBins(NumericalError):
    code = "no_usable_bins"


class MeanNearZero(NumericalError):
    code = "mean_near_zero"


class SingularDesignLimit(NumericalError):
    code = "singular_design_limit"
