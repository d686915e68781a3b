"""Exception hierarchy for the cmmv package.

Everything raised deliberately by the package derives from CmmvError so callers
(service layer, CLI) can map failures onto transport-level codes in one place.
Data-quality problems and calibration failures are kept on separate branches
because they carry different exit codes at the CLI boundary.
"""

from __future__ import annotations

from typing import Any


class CmmvError(Exception):
    """Base class. Optional diagnostics dict travels with the message."""

    def __init__(self, message: str, **diagnostics: Any):
        super().__init__(message)
        self.diagnostics = diagnostics


# --- model / numerics ------------------------------------------------------


class InvalidParameterizationError(CmmvError):
    """Sum-of-squares parameterization violated (empty P, deg Q >= deg P, ...)."""


class OutOfHorizonError(CmmvError):
    """Evaluation time beyond the model horizon."""


class FlatRegionError(CmmvError):
    """Inversion target cannot be bracketed (map numerically flat)."""


class NoImpliedVolError(CmmvError):
    """Option price outside the static no-arbitrage band, no implied vol exists."""


# --- data ------------------------------------------------------------------


class DataError(CmmvError):
    """Branch for input-data problems (CLI exit code 2)."""


class SchemaMismatchError(DataError):
    """Persisted artifact has a missing/unknown schema tag or malformed payload."""


class InsufficientDataError(DataError):
    """Not enough usable rows/points for the requested operation."""


class ParityRegressionError(DataError):
    """Put-call parity regression failed sanity checks (R^2, discount bounds)."""


# --- calibration / optimization -------------------------------------------


class CalibrationError(CmmvError):
    """Branch for fit failures (CLI exit code 3)."""


class FitFailedError(CalibrationError):
    """Optimizer stalled or ended above the acceptable residual threshold."""


class ProtocolMisuseError(CmmvError):
    """ask/tell called out of order or with inconsistent shapes."""


class CovarianceDegenerateError(CalibrationError):
    """Search covariance lost positive definiteness beyond repair."""
