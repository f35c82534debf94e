"""Exception types raised across the package."""


class EpiExactError(Exception):
    """Base class for all package errors."""


class SingularDenominator(EpiExactError):
    """The f-denominator x1+x2+x3+beta*x4 vanished (relative to its terms)."""

    def __init__(self, message="f denominator is singular", t=None):
        if t is not None:
            message = f"{message} at t={t!r}"
        super().__init__(message)
        self.t = t


class GuardViolation(EpiExactError):
    """One of the inequality side-conditions of the explicit formulas failed."""

    def __init__(self, name, detail=""):
        super().__init__(f"guard {name} violated" + (f": {detail}" if detail else ""))
        self.name = name


class DuplicateMu(EpiExactError):
    pass


class NotARoot(EpiExactError):
    def __init__(self, index, residual):
        super().__init__(f"mu[{index}] is not a quartic root (normalized residual {residual:.3e})")
        self.index = index
        self.residual = residual


class ZeroPolynomial(EpiExactError):
    pass


class NotEquilibriumParameterization(EpiExactError):
    def __init__(self, residual):
        super().__init__(f"kD is not a root of the quartic (normalized residual {residual:.3e})")
        self.residual = residual


class StepUnderflow(EpiExactError):
    def __init__(self, t, h):
        super().__init__(f"step size {h!r} underflowed at t={t!r}")
        self.t = t
        self.h = h


class HorizonOverflow(EpiExactError):
    pass


class TrackingBreak(EpiExactError):
    def __init__(self, index):
        super().__init__(f"root tracking broke at grid index {index}")
        self.index = index


class NoConvergence(EpiExactError):
    def __init__(self, seed, reason):
        super().__init__(f"no convergence from seed {seed!r}: {reason}")
        self.seed = seed
        self.reason = reason
