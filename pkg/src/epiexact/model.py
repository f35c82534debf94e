"""The four-compartment epidemic system in its original and kD-reduced frames.

State coordinates are (x1, x2, x3, x4) = (immune, susceptible, asymptomatic,
symptomatic).  The reduced frame is obtained from the original one through
``x~_n(t) = x_n(t) exp(-kD t)``, which removes kD from every equation.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, fields, replace
from typing import Callable, Iterable

from .errors import SingularDenominator

#: relative threshold on |x1+x2+x3+beta*x4| against the sum of its term moduli
EPS_DEN = 1e-12

ORIGINAL = "original"
REDUCED = "reduced"

PARAM_KEYS = ("kD", "kR", "kB", "kP", "kDV", "kI", "alpha", "beta")
RATE_KEYS = ("kD", "kR", "kB", "kP", "kDV", "kI")


def _as_complex(value) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError(f"complex value must be [re, im], got {value!r}")
        return complex(float(value[0]), float(value[1]))
    return complex(value)


@dataclass(frozen=True)
class ModelParameters:
    """The eight constants of the model, stored as complex scalars."""

    kD: complex = 0j
    kR: complex = 0j
    kB: complex = 0j
    kP: complex = 0j
    kDV: complex = 0j
    kI: complex = 0j
    alpha: complex = 0j
    beta: complex = 0j

    def __post_init__(self):
        for f in fields(self):
            v = _as_complex(getattr(self, f.name))
            if not cmath.isfinite(v):
                raise ValueError(f"parameter {f.name} is not finite: {v!r}")
            object.__setattr__(self, f.name, v)

    def strictly_epidemic(self) -> bool:
        """True iff every parameter is real and non-negative."""
        return all(v.imag == 0 and v.real >= 0 for v in self.values())

    def is_real(self) -> bool:
        return all(v.imag == 0 for v in self.values())

    def values(self) -> tuple:
        return tuple(getattr(self, k) for k in PARAM_KEYS)

    def with_(self, **changes) -> "ModelParameters":
        return replace(self, **changes)

    def rate_scale(self) -> float:
        """Largest modulus among the reduced-system rates (kD excluded)."""
        return max(abs(getattr(self, k)) for k in RATE_KEYS[1:])

    def to_json(self) -> dict:
        return {k: [getattr(self, k).real, getattr(self, k).imag] for k in PARAM_KEYS}

    @classmethod
    def from_json(cls, obj: dict) -> "ModelParameters":
        unknown = set(obj) - set(PARAM_KEYS)
        if unknown:
            raise ValueError(f"unknown parameter keys: {sorted(unknown)}")
        return cls(**{k: _as_complex(v) for k, v in obj.items()})


@dataclass(frozen=True)
class State:
    """Four complex coordinates plus the frame they live in."""

    x: tuple
    frame: str = REDUCED

    def __post_init__(self):
        x = tuple(complex(v) for v in self.x)
        if len(x) != 4:
            raise ValueError("a state has exactly 4 components")
        if not all(cmath.isfinite(v) for v in x):
            raise ValueError(f"non-finite state component in {x!r}")
        if self.frame not in (ORIGINAL, REDUCED):
            raise ValueError(f"unknown frame {self.frame!r}")
        object.__setattr__(self, "x", x)

    def __iter__(self):
        return iter(self.x)

    def __getitem__(self, i):
        return self.x[i]

    def scaled(self, lam: complex) -> "State":
        return State(tuple(lam * v for v in self.x), self.frame)

    def norm(self) -> float:
        return math.sqrt(sum(abs(v) ** 2 for v in self.x))


def f_denominator(p: ModelParameters, x) -> complex:
    x1, x2, x3, x4 = x
    den = x1 + x2 + x3 + p.beta * x4
    scale = abs(x1) + abs(x2) + abs(x3) + abs(p.beta * x4)
    if not abs(den) > EPS_DEN * scale:
        raise SingularDenominator()
    return den


def _f(p: ModelParameters, x) -> complex:
    return p.kI * (x[2] + p.beta * x[3]) / f_denominator(p, x)


def f_of_state(p: ModelParameters, s: State) -> complex:
    """The nonlinearity kI (x3 + beta x4) / (x1 + x2 + x3 + beta x4)."""
    return _f(p, s.x)


def _rhs_reduced(p: ModelParameters, x) -> tuple:
    x1, x2, x3, x4 = x
    f = _f(p, x)
    s34 = x3 + x4
    return (
        p.alpha * p.kR * s34,
        p.kB * x1 + (p.kB - f) * x2 + (p.kB + (1 - p.alpha) * p.kR) * s34,
        f * x2 - (p.kR + p.kP) * x3,
        p.kP * x3 - (p.kR + p.kDV) * x4,
    )


def _rhs_original(p: ModelParameters, x) -> tuple:
    d = _rhs_reduced(p, x)
    return tuple(dn - p.kD * xn for dn, xn in zip(d, x))


def _check_frame(s: State, frame: str):
    if s.frame != frame:
        raise ValueError(f"expected a state in the {frame} frame, got {s.frame}")


def rhs_reduced(p: ModelParameters, s: State) -> State:
    _check_frame(s, REDUCED)
    return State(_rhs_reduced(p, s.x), REDUCED)


def rhs_original(p: ModelParameters, s: State) -> State:
    _check_frame(s, ORIGINAL)
    return State(_rhs_original(p, s.x), ORIGINAL)


def rhs_for_frame(frame: str) -> Callable:
    """Tuple-level right-hand side for ``frame`` (used by the integrator)."""
    return _rhs_reduced if frame == REDUCED else _rhs_original


def to_original(p: ModelParameters, x_reduced, t: float) -> State:
    """Map a reduced-frame state at time ``t`` to the original frame.

    ``x_reduced`` is either a :class:`State` or a callable ``t -> State``.
    """
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    s = x_reduced(t) if callable(x_reduced) else x_reduced
    _check_frame(s, REDUCED)
    w = cmath.exp(-p.kD * t)
    return State(tuple(w * v for v in s.x), ORIGINAL)


def to_reduced(p: ModelParameters, x_original: State, t: float) -> State:
    _check_frame(x_original, ORIGINAL)
    w = cmath.exp(p.kD * t)
    return State(tuple(w * v for v in x_original.x), REDUCED)


def total_rate(p: ModelParameters, x: Iterable) -> complex:
    """Hand-summed d/dt (x1+x2+x3+x4) of the reduced system: kB*sum(x) - kDV*x4."""
    x1, x2, x3, x4 = x
    return p.kB * (x1 + x2 + x3 + x4) - p.kDV * x4
