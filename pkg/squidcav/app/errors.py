"""
Exception hierarchy for squidcav.

Three families map onto CLI exit codes: configuration problems (2), failed protocol
verification (3) and numerical failures (4).
"""

from typing import Any, Dict, List, Optional


class SquidcavError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


# ==================== CONFIGURATION ====================

class ConfigError(SquidcavError, ValueError):
    """Invalid configuration document; `pointer` is a JSON pointer to the bad field."""

    exit_code = 2

    def __init__(self, message: str, pointer: str = ""):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")


class UnknownExperimentError(ConfigError):
    pass


class SweepPathError(ConfigError):
    pass


class MissingInputError(SquidcavError, ValueError):
    exit_code = 2


class UnknownGateError(SquidcavError, ValueError):
    exit_code = 2


class VariantMismatchError(SquidcavError, ValueError):
    exit_code = 2


class DimensionMismatchError(SquidcavError, ValueError):
    exit_code = 2


class DegenerateDetuningError(SquidcavError, ValueError):
    """delta = Delta_c - Delta_uw vanishes, so gamma = g_eff^2/delta is undefined."""

    exit_code = 2


class NormalizationError(SquidcavError, ValueError):
    exit_code = 2


# ==================== VERIFICATION ====================

class VerificationError(SquidcavError):
    exit_code = 3


class CnotVerificationError(VerificationError):
    """No reading of the CNOT sequence reproduced CNOT; carries the achieved matrix and column overlaps."""

    def __init__(self, message: str, achieved: Any = None,
                 column_overlaps: Optional[List[float]] = None):
        self.achieved = achieved
        self.column_overlaps = column_overlaps or []
        super().__init__(message)


class SwapVerificationError(VerificationError):
    def __init__(self, message: str, fidelities: Optional[Dict[str, float]] = None):
        self.fidelities = fidelities or {}
        super().__init__(message)


# ==================== NUMERICS ====================

class NumericError(SquidcavError):
    exit_code = 4

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class BoundaryLeakError(NumericError):
    pass


class ConvergenceError(NumericError):
    pass


class StiffnessError(NumericError):
    pass


class PositivityError(NumericError):
    pass


class LevelAssignmentError(NumericError):
    pass
