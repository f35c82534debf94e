"""Superpositions of 1 to 4 exponential modes and the constraints they require.

Each mode ``a_l exp(mu_l t)`` solves the linear system obtained by freezing the
nonlinearity at ``f0``.  The superposition solves the nonlinear system only when
every mode carries the same frozen value, i.e. when the per-mode values of F
coincide; for two modes this is a single polynomial condition on the rates
and on (mu_1, mu_2).
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

from .errors import DuplicateMu, GuardViolation, NotARoot, NotEquilibriumParameterization
from .model import ORIGINAL, REDUCED, ModelParameters, State, _rhs_original, f_denominator
from .spectrum import (
    GUARD_NAMES,
    distinct_threshold,
    guard_outcomes,
    quartic_residual,
    ratios_for_mu,
    ratios_unchecked,
)

TAU_C = 1e-9
ROOT_TOL = 1e-9
F0_TOL = 1e-9
DEFAULT_WEIGHTS = (1.0, 0.5, 0.25, 0.125)


@dataclass(frozen=True)
class Mode:
    mu: complex
    a: tuple


@dataclass(frozen=True)
class ModeSet:
    params: ModelParameters
    modes: tuple
    f0: complex
    f0_spread: float
    valid: bool
    frame: str = REDUCED

    @property
    def K(self) -> int:
        return len(self.modes)

    @property
    def mus(self) -> tuple:
        return tuple(m.mu for m in self.modes)

    def amplitude(self, n: int, l: int) -> complex:
        return self.modes[l].a[n]

    def scaled(self, lam: complex) -> "ModeSet":
        modes = tuple(Mode(m.mu, tuple(lam * v for v in m.a)) for m in self.modes)
        return ModeSet(self.params, modes, self.f0, self.f0_spread, self.valid)

    def with_amplitudes(self, amps) -> "ModeSet":
        """Replace the 4-vectors of amplitudes (one per mode) verbatim."""
        modes = tuple(Mode(m.mu, tuple(complex(v) for v in a)) for m, a in zip(self.modes, amps))
        return ModeSet(self.params, modes, self.f0, self.f0_spread, self.valid)

    def to_json(self) -> dict:
        return {
            "K": self.K,
            "frame": self.frame,
            "f0": [self.f0.real, self.f0.imag],
            "f0_spread": self.f0_spread,
            "valid": self.valid,
            "modes": [
                {"mu": [m.mu.real, m.mu.imag], "a": [[v.real, v.imag] for v in m.a]}
                for m in self.modes
            ],
            "parameters": self.params.to_json(),
        }


def _check_distinct(mus):
    thr = distinct_threshold(mus)
    for i in range(len(mus)):
        for j in range(i + 1, len(mus)):
            if abs(mus[i] - mus[j]) <= thr:
                raise DuplicateMu(f"mu[{i}] and mu[{j}] coincide ({mus[i]!r})")


def _f_value(p: ModelParameters, r) -> complex:
    return p.kI * (r.r3 + p.beta) / (r.r1 + r.r2 + r.r3 + p.beta)


def f_spread(p: ModelParameters, mus) -> float:
    """Largest relative disagreement between the per-mode values of F and mode 1's."""
    fvals = [_f_value(p, ratios_for_mu(p, mu)) for mu in mus]
    spread = 0.0
    for fv in fvals[1:]:
        den = max(abs(fvals[0]), abs(fv))
        if den > 0:
            spread = max(spread, abs(fv - fvals[0]) / den)
    return spread


def build_modes(p: ModelParameters, mus, a4, root_tol: float = ROOT_TOL) -> ModeSet:
    """Assemble x_n(t) = sum_l a_nl exp(mu_l t) with a_ml = b_ml a_4l.

    Every ``mu`` must be a root of the quartic for ``p``.  The set is marked
    invalid (not rejected) when the modes disagree on the frozen value f0.
    """
    mus = [complex(m) for m in mus]
    a4 = [complex(v) for v in a4]
    K = len(mus)
    if not 1 <= K <= 4:
        raise ValueError(f"mode count must be 1..4, got {K}")
    if len(a4) != K:
        raise ValueError("one free amplitude per mode is required")
    if not all(cmath.isfinite(v) for v in a4):
        raise ValueError("amplitudes must be finite")
    for i, mu in enumerate(mus):
        res = quartic_residual(p, mu)
        if not res <= root_tol:
            raise NotARoot(i, res)
    _check_distinct(mus)
    ratios = [ratios_for_mu(p, mu) for mu in mus]
    f0 = _f_value(p, ratios[0])
    spread = f_spread(p, mus)
    modes = tuple(
        Mode(mu, (r.r1 * w, r.r2 * w, r.r3 * w, w)) for mu, r, w in zip(mus, ratios, a4)
    )
    return ModeSet(p, modes, f0, spread, spread <= F0_TOL)


def weighted_amplitudes(p: ModelParameters, mus, weights=None) -> list:
    """Free amplitudes a_4l such that mode l contributes ``weights[l]`` to
    x1+x2+x3+beta*x4 at t=0.

    Geometrically decreasing weights keep the f-denominator away from zero
    along real-pair and conjugate-pair superpositions.
    """
    weights = DEFAULT_WEIGHTS if weights is None else weights
    out = []
    for mu, w in zip(mus, weights):
        r = ratios_for_mu(p, mu)
        out.append(w / (r.r1 + r.r2 + r.r3 + p.beta))
    return out


def evaluate(ms: ModeSet, t: float) -> State:
    e = [cmath.exp(m.mu * t) for m in ms.modes]
    x = tuple(sum(m.a[n] * en for m, en in zip(ms.modes, e)) for n in range(4))
    return State(x, REDUCED)


def derivative(ms: ModeSet, t: float) -> State:
    """Analytic time derivative sum_l mu_l a_l exp(mu_l t)."""
    e = [m.mu * cmath.exp(m.mu * t) for m in ms.modes]
    x = tuple(sum(m.a[n] * en for m, en in zip(ms.modes, e)) for n in range(4))
    return State(x, REDUCED)


def h_of_t(ms: ModeSet, t: float) -> complex:
    """(x3 + beta x4) / (x1 + x2 + x3 + beta x4) along the superposition."""
    x = evaluate(ms, t).x
    return (x[2] + ms.params.beta * x[3]) / f_denominator(ms.params, x)


def mode_relation_residuals(ms: ModeSet) -> list:
    """Per mode, the normalized residuals of the four linear relations at f0."""
    p, f0 = ms.params, ms.f0
    out = []
    for m in ms.modes:
        a1, a2, a3, a4 = m.a
        mu = m.mu
        eqs = (
            [mu * a1, -p.alpha * p.kR * (a3 + a4)],
            [mu * a2, -p.kB * a1, -(p.kB - f0) * a2, -(p.kB + (1 - p.alpha) * p.kR) * (a3 + a4)],
            [mu * a3, -f0 * a2, (p.kR + p.kP) * a3],
            [mu * a4, -p.kP * a3, (p.kR + p.kDV) * a4],
        )
        out.append(tuple(_nres(e) for e in eqs))
    return out


def _nres(terms) -> float:
    scale = sum(abs(t) for t in terms)
    return abs(sum(terms)) / scale if scale > 0 else 0.0


@dataclass(frozen=True)
class ConstraintReport:
    K: int
    residuals: tuple
    raw: tuple
    guards: tuple
    satisfied: bool
    tol: float = TAU_C

    def to_json(self) -> dict:
        return {
            "K": self.K,
            "residuals": list(self.residuals),
            "raw": [[v.real, v.imag] for v in self.raw],
            "guards": [{"name": n, "passed": ok} for n, ok in self.guards],
            "satisfied": self.satisfied,
            "tolerance": self.tol,
        }


def pair_constraint_terms(p: ModelParameters, mu1: complex, mu2: complex) -> list:
    """Monomials of the two-mode constraint polynomial (sum vanishes when satisfied).

    The three-mode constraints are this polynomial for the pairs (1,2) and (1,3).
    """
    s = 1 - p.beta
    kB, kDV = p.kB, p.kDV
    return [
        s * kB * kB, -kB * kDV, kDV * kDV, kDV * p.beta * p.kP, kDV * p.kR,
        kDV * mu1, kDV * mu2, s * mu1 * mu2, -s * kB * mu1, -s * kB * mu2,
    ]


def ratio_form_terms(p: ModelParameters, mus) -> list:
    """Cross-multiplied (b3q+beta)(b11+b21+b31+beta) - (b31+beta)(b1q+b2q+b3q+beta), q>=2."""
    rs = [ratios_unchecked(p, mu) for mu in mus]
    b = p.beta
    n1 = rs[0].r3 + b
    d1 = rs[0].r1 + rs[0].r2 + rs[0].r3 + b
    out = []
    for r in rs[1:]:
        out.append([(r.r3 + b) * d1, -n1 * (r.r1 + r.r2 + r.r3 + b)])
    return out


def _guard_list(p: ModelParameters, mus) -> list:
    guards = []
    for l, mu in enumerate(mus):
        for name, ok in guard_outcomes(p, mu):
            if name == "kP!=0" and l > 0:
                continue
            guards.append((name if name == "kP!=0" else f"{name}[{l}]", ok))
    thr = distinct_threshold(mus)
    for i in range(len(mus)):
        for j in range(i + 1, len(mus)):
            guards.append((f"mu[{i}]!=mu[{j}]", abs(mus[i] - mus[j]) > thr))
    return guards


def constraint_residuals(p: ModelParameters, mus, strict: bool = True,
                         tol: float = TAU_C) -> ConstraintReport:
    """Residuals of the K-mode constraints for the selected roots.

    K=2 and K=3 use the polynomial forms; K=4 uses the cross-multiplied ratio
    equalities.  With ``strict`` a failed guard raises instead of being
    reported.
    """
    mus = [complex(m) for m in mus]
    K = len(mus)
    if not 1 <= K <= 4:
        raise ValueError(f"mode count must be 1..4, got {K}")
    guards = _guard_list(p, mus) if K > 1 else []
    if strict:
        _check_distinct(mus)
        for name, ok in guards:
            if not ok:
                raise GuardViolation(name)
    if K == 1:
        term_sets = []
    elif K in (2, 3):
        term_sets = [pair_constraint_terms(p, mus[0], mus[q]) for q in range(1, K)]
    else:
        if all(ok for _, ok in guards):
            term_sets = ratio_form_terms(p, mus)
        else:
            term_sets = [[complex("nan")] for _ in range(3)]
    raw = tuple(sum(ts) for ts in term_sets)
    residuals = tuple(_nres(ts) for ts in term_sets)
    satisfied = all(r <= tol for r in residuals) and all(ok for _, ok in guards)
    return ConstraintReport(K, residuals, raw, tuple(guards), satisfied, tol)


@dataclass(frozen=True)
class RatioCheck:
    a_form: tuple
    b_form: tuple
    max_disagreement: float
    agree: bool = field(default=True)


def consistency_check_K4(ms: ModeSet, tol: float = 1e-10) -> RatioCheck:
    """Ratio equalities of mode q against mode 1, from the amplitudes directly,
    cross-checked against the b-coefficient form.

    Modes with zero amplitude contribute an a-form residual of 0 and are left
    out of the comparison.
    """
    p, b = ms.params, ms.params.beta
    m1 = ms.modes[0].a
    n1 = m1[2] + b * m1[3]
    d1 = m1[0] + m1[1] + m1[2] + b * m1[3]
    a_form = []
    for m in ms.modes[1:]:
        a = m.a
        terms = [(a[2] + b * a[3]) * d1, -n1 * (a[0] + a[1] + a[2] + b * a[3])]
        a_form.append(_nres(terms))
    b_form = tuple(_nres(ts) for ts in ratio_form_terms(ms.params, ms.mus))
    worst = 0.0
    for q, (ra, rb) in enumerate(zip(a_form, b_form), start=1):
        if ms.modes[q].a[3] != 0 and m1[3] != 0:
            worst = max(worst, abs(ra - rb))
    return RatioCheck(tuple(a_form), b_form, worst, worst <= tol)


def equilibrium(p: ModelParameters, x4bar: complex = 1.0, root_tol: float = ROOT_TOL) -> State:
    """Fixed point of the original system, available when kD is a quartic root."""
    res = quartic_residual(p, p.kD)
    if not res <= root_tol:
        raise NotEquilibriumParameterization(res)
    r = ratios_for_mu(p, p.kD)
    xbar = State(r.as_state_tuple(complex(x4bar)), ORIGINAL)
    _rhs_original(p, xbar.x)  # raises SingularDenominator at the origin
    return xbar


def equilibrium_residual(p: ModelParameters, xbar: State) -> float:
    """||rhs_original(xbar)|| / (||xbar|| * max rate)."""
    d = _rhs_original(p, xbar.x)
    num = sum(abs(v) ** 2 for v in d) ** 0.5
    scale = max(p.rate_scale(), abs(p.kD))
    return num / (xbar.norm() * scale)


__all__ = [
    "GUARD_NAMES", "Mode", "ModeSet", "ConstraintReport", "RatioCheck", "build_modes",
    "weighted_amplitudes", "f_spread", "evaluate", "derivative", "h_of_t", "mode_relation_residuals",
    "pair_constraint_terms", "ratio_form_terms", "constraint_residuals",
    "consistency_check_K4", "equilibrium", "equilibrium_residual",
]
