"""Exception types shared by every module.

Each error carries a stable ``code`` string so callers (and the CLI) can map
failures to exit statuses without parsing messages.
"""

from __future__ import annotations


class FreedomError(Exception):
    """Base class. ``code`` is a stable machine-readable tag."""

    code = "ERROR"

    def __init__(self, message: str = "", **context):
        self.context = context
        super().__init__(message or self.code)


class InputError(FreedomError):
    """Malformed or inconsistent input data."""

    code = "INPUT"


class MalformedLine(InputError):
    code = "MALFORMED_LINE"

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}", line_no=line_no)


class ScoreOutOfRange(InputError):
    code = "SCORE_OUT_OF_RANGE"

    def __init__(self, line_no: int, score: float):
        self.line_no = line_no
        super().__init__(f"line {line_no}: score {score!r} not in [0, 1]", line_no=line_no)


class DuplicateKey(InputError):
    code = "DUPLICATE_KEY"


class DimensionMismatch(InputError):
    code = "DIM_MISMATCH"


class ZeroVector(InputError):
    code = "ZERO_VECTOR"


class KeyMismatch(InputError):
    code = "KEY_MISMATCH"


class MissingTrace(InputError):
    code = "MISSING_TRACE"


class WeightSum(InputError):
    code = "WEIGHT_SUM"


class EmptyRunSet(InputError):
    code = "EMPTY_RUNSET"


class NTooSmall(FreedomError):
    code = "N_TOO_SMALL"


class DegenerateError(FreedomError):
    """A statistic is undefined on the given data (full ties, constant series)."""

    code = "DEGENERATE"


class DegenerateScores(DegenerateError):
    code = "DEGENERATE_SCORES"


class DegenerateBehavior(DegenerateError):
    code = "DEGENERATE_BEHAVIOR"


class ConstantSeries(DegenerateError):
    code = "CONSTANT_SERIES"


class BootstrapCollapse(DegenerateError):
    code = "BOOTSTRAP_COLLAPSE"


class CeilingBaseline(DegenerateError):
    code = "CEILING_BASELINE"


class NoMixedQuestions(FreedomError):
    code = "NO_MIXED_QUESTIONS"


class GridUnderfull(FreedomError):
    code = "GRID_UNDERFULL"


class AntiConcordant(FreedomError):
    code = "ANTI_CONCORDANT"


class CalibrationFailed(FreedomError):
    code = "CALIBRATION_FAILED"


class ConfigError(FreedomError):
    code = "CONFIG"
