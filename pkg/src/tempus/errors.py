"""Exception hierarchy.

Numerical failures (regressivity, validity windows, domain escapes, ...) derive
from :class:`NumericalError`; the CLI maps them to exit code 2.
"""

from __future__ import annotations


__all__ = [
    "TempusError",
    "NumericalError",
    "ScaleError",
    "InvalidScale",
    "NotInScale",
    "HorizonExceeded",
    "EmptyRange",
    "DimensionMismatch",
    "NotRegressive",
    "DomainEscape",
    "ScheduleTooShort",
    "PrerequisiteNotConvergent",
    "NoValidityWindow",
    "AlphaDegenerate",
    "ConfigInvalid",
]


class TempusError(Exception):
    """Base class for every error raised by the package."""


class NumericalError(TempusError):
    pass


class ScaleError(NumericalError):
    pass


class InvalidScale(ScaleError):
    """Segments overlap, are unordered, or accumulate at a finite time."""


class NotInScale(ScaleError):
    def __init__(self, t: float, msg: str | None = None):
        self.t = t
        super().__init__(msg or f"t={t!r} is not a point of the time scale")


class HorizonExceeded(ScaleError):
    pass


class EmptyRange(ScaleError):
    pass


class DimensionMismatch(NumericalError):
    pass


class NotRegressive(NumericalError):
    def __init__(self, t: float, det: float):
        self.t = t
        self.det = det
        super().__init__(f"I + mu(t)A(t) is singular at t={t!r} (|det|={det:.3e})")


class DomainEscape(NumericalError):
    def __init__(self, t: float, norm: float, delta: float):
        self.t = t
        self.norm = norm
        self.delta = delta
        super().__init__(f"|x(t)|={norm:.6g} >= delta={delta:.6g} at t={t!r}")


class ScheduleTooShort(NumericalError):
    pass


class PrerequisiteNotConvergent(NumericalError):
    pass


class NoValidityWindow(NumericalError):
    pass


class AlphaDegenerate(NumericalError):
    pass


class ConfigInvalid(TempusError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
