"""Characteristic quartic of single-exponential solutions and per-root ratios.

A solution ``x_n(t) = x_n(0) exp(mu t)`` of the reduced system exists exactly
when ``mu`` is a root of ``sum_k c_k mu**k`` and the initial data have the
ratios ``x_m(0)/x4(0) = r_m(mu)`` returned by :func:`ratios_for_mu`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from types import SimpleNamespace

import mpmath
import numpy as np

from .errors import GuardViolation, ZeroPolynomial
from .model import PARAM_KEYS, ModelParameters

TRIM_REL = 1e-13
DISTINCT_REL = 1e-8
GUARD_REL = 1e-12
POLISH_TOL = 1e-10
POLISH_MAXITER = 50
EXTENDED_DPS = 40


def quartic_coefficients(p: ModelParameters) -> tuple:
    """Return (c0, c1, c2, c3, c4); kD does not enter."""
    kR, kB, kP, kDV, kI, a, b = p.kR, p.kB, p.kP, p.kDV, p.kI, p.alpha, p.beta
    c4 = kI - kP + b * kP
    c3 = (2 * kDV * kI - 2 * kDV * kP + kI * kP - kP**2 + 2 * kI * kR - 2 * kP * kR
          + a * kI * kR - kB * (kI - (1 - b) * kP) + b * kP * (kDV + kI + kP + 2 * kR))
    c2 = ((kI - kP) * (kDV**2 + kR * (kP + kR)) + a * kI * kR * (kP + 2 * kR)
          + b * kP * ((kI + kR) * (kP + kR) + a * kI * kR)
          + kDV * ((2 + b) * kI * kP + 2 * kI * (kR + a * kR) - kP * ((2 - b) * kP + (3 - b) * kR))
          + kB * ((1 - b) * kP * (kP + 2 * kR) + kDV * (-2 * kI + kP - b * kP)
                  - kI * (kP + 2 * kR + a * kR + b * kP)))
    c1 = ((kDV + kR) * (kDV * kP * (kI - kP - kR) + a * kI * kR * (kDV + kP + kR))
          + b * kI * kP * (kDV * kP + a * kR * (kDV + kP + kR))
          + kB * (-(kDV + kR) * (kDV * kI + (kI - kP) * (kP + kR))
                  - a * kI * kR * (2 * kDV + kP + 2 * kR)
                  - b * kP * ((kI + kR) * (kP + kR) + kDV * (kI + kP + kR) + a * kI * kR)))
    c0 = -a * kB * kI * kR * (kDV + kP + kR) * (kDV + kR + b * kP)
    return (c0, c1, c2, c3, c4)


def horner(c, z):
    """Value and derivative of sum_k c[k] z**k (ascending coefficients)."""
    val = 0j
    der = 0j
    for ck in reversed(c):
        der = der * z + val
        val = val * z + ck
    return val, der


def normalized_residual(c, z) -> float:
    """|sum c_k z^k| / sum |c_k z^k| (0 when both vanish)."""
    val, _ = horner(c, z)
    az = abs(z)
    scale = sum(abs(ck) * az**k for k, ck in enumerate(c))
    if scale == 0:
        return 0.0 if val == 0 else math.inf
    return abs(val) / scale


def _polish(c, z0):
    z = complex(z0)
    best, best_res = z, normalized_residual(c, z)
    for _ in range(POLISH_MAXITER):
        val, der = horner(c, z)
        if val == 0 or der == 0:
            break
        step = val / der
        z = z - step
        res = normalized_residual(c, z)
        if res < best_res:
            best, best_res = z, res
        if abs(step) <= 4 * np.finfo(float).eps * max(abs(z), 1e-300):
            break
    return best, best_res


def _sort_key(z):
    return (-z.real, -z.imag)


@dataclass(frozen=True)
class QuarticSpectrum:
    c: tuple
    roots: tuple
    residuals: tuple
    degree: int
    degenerate_flag: bool
    warnings: tuple = field(default=())

    def to_json(self) -> dict:
        return {
            "coefficients": [[ck.real, ck.imag] for ck in self.c],
            "degree": self.degree,
            "roots": [[z.real, z.imag] for z in self.roots],
            "residuals": list(self.residuals),
            "degenerate": self.degenerate_flag,
            "warnings": list(self.warnings),
        }

    def max_rate(self) -> float:
        return max((abs(z) for z in self.roots), default=0.0)


def distinct_threshold(roots) -> float:
    return DISTINCT_REL * max(1.0, max((abs(z) for z in roots), default=0.0))


def _symmetrize_conjugates(roots, tol):
    """For real coefficients, make conjugate pairs exact and near-real roots real."""
    roots = list(roots)
    out = []
    used = [False] * len(roots)
    for i, z in enumerate(roots):
        if used[i]:
            continue
        used[i] = True
        if abs(z.imag) <= tol:
            out.append(complex(z.real, 0.0))
            continue
        j_best, d_best = None, math.inf
        for j in range(i + 1, len(roots)):
            if not used[j]:
                d = abs(roots[j] - z.conjugate())
                if d < d_best:
                    j_best, d_best = j, d
        if j_best is not None and d_best <= max(tol, 1e-6 * abs(z)):
            used[j_best] = True
            w = 0.5 * (z + roots[j_best].conjugate())
            out.extend([w, w.conjugate()])
        else:
            out.append(z)
    return out


def solve_quartic(c) -> QuarticSpectrum:
    """All roots of sum_k c[k] mu**k, polished by Newton on Horner evaluation."""
    c = tuple(complex(ck) for ck in c)
    cmax = max(abs(ck) for ck in c)
    if cmax == 0:
        raise ZeroPolynomial("all coefficients vanish")
    d = len(c) - 1
    warnings = []
    while d > 0 and abs(c[d]) <= TRIM_REL * cmax:
        d -= 1
    if d < len(c) - 1:
        warnings.append(f"DegreeDropped({d})")
    ct = c[: d + 1]
    if d == 0:
        raw = []
    else:
        # numpy.roots wants descending order
        raw = list(np.roots(np.array(ct[::-1], dtype=complex)).astype(complex))
    roots = []
    for z in raw:
        zp, _ = _polish(ct, z)
        roots.append(zp)
    real_coeffs = all(ck.imag == 0 for ck in ct)
    if real_coeffs and roots:
        scale = max(1.0, max(abs(z) for z in roots))
        roots = _symmetrize_conjugates(roots, 1e-12 * scale)
        # a real root that was nudged off the axis by the eigen-solver
        roots = [complex(_polish(ct, complex(z.real, 0.0))[0].real, 0.0)
                 if z.imag == 0 else z for z in roots]
    roots.sort(key=_sort_key)
    residuals = tuple(normalized_residual(ct, z) for z in roots)
    thr = distinct_threshold(roots)
    degenerate = d < len(c) - 1
    for i in range(len(roots)):
        for j in range(i + 1, len(roots)):
            if abs(roots[i] - roots[j]) <= thr:
                degenerate = True
    return QuarticSpectrum(c=c, roots=tuple(roots), residuals=residuals, degree=d,
                           degenerate_flag=degenerate, warnings=tuple(warnings))


def _refine_extended(p: ModelParameters, roots, degree):
    """Newton steps on the quartic evaluated at 40 digits.

    Near-coincident roots are ill-conditioned with respect to the rounding of
    the double-precision coefficients; the extended evaluation recovers the
    correctly rounded root.  Falls back to the input when a step would move
    a root far or merge it with another.
    """
    with mpmath.workdps(EXTENDED_DPS):
        q = SimpleNamespace(**{k: mpmath.mpc(v.real, v.imag)
                               for k, v in zip(PARAM_KEYS, p.values())})
        cm = quartic_coefficients(q)[: degree + 1]
        out = []
        for z0 in roots:
            z = mpmath.mpc(z0.real, z0.imag)
            for _ in range(10):
                val, der = horner(cm, z)
                if der == 0:
                    break
                step = val / der
                z -= step
                if abs(step) <= mpmath.mpf(10) ** (-30) * max(abs(z), 1):
                    break
            zd = complex(z)
            ok = cmath_isfinite(zd) and abs(zd - z0) <= 1e-6 * max(1.0, abs(z0))
            out.append(zd if ok else z0)
    thr = distinct_threshold(out)
    for i in range(len(out)):
        for j in range(i + 1, len(out)):
            if abs(out[i] - out[j]) <= thr and abs(roots[i] - roots[j]) > thr:
                return list(roots)
    return out


def cmath_isfinite(z: complex) -> bool:
    return math.isfinite(z.real) and math.isfinite(z.imag)


def spectrum_for(p: ModelParameters, extended: bool = True) -> QuarticSpectrum:
    """Roots of the characteristic quartic of ``p``.

    With ``extended`` (the default) each root gets a final Newton polish at
    40 digits; scans that only need root positions to ~1e-12 can skip it.
    """
    c = quartic_coefficients(p)
    spec = solve_quartic(c)
    if not spec.roots or not extended:
        return spec
    roots = _refine_extended(p, list(spec.roots), spec.degree)
    ct = spec.c[: spec.degree + 1]
    roots.sort(key=_sort_key)
    return replace(spec, roots=tuple(roots),
                   residuals=tuple(normalized_residual(ct, z) for z in roots))


def quartic_residual(p: ModelParameters, mu: complex) -> float:
    return normalized_residual(quartic_coefficients(p), mu)


@dataclass(frozen=True)
class RatioVector:
    r1: complex
    r2: complex
    r3: complex
    F: complex

    def F_definition(self, p: ModelParameters) -> complex:
        """F recomputed as kI (r3 + beta) / (r1 + r2 + r3 + beta)."""
        return p.kI * (self.r3 + p.beta) / (self.r1 + self.r2 + self.r3 + p.beta)

    def as_state_tuple(self, x4: complex = 1.0) -> tuple:
        return (self.r1 * x4, self.r2 * x4, self.r3 * x4, complex(x4))


GUARD_NAMES = ("mu!=0", "kP!=0", "mu!=kB", "(1-beta)(kB-mu)-kDV!=0")


def _single_guard(p: ModelParameters, mu: complex, name: str) -> bool:
    s = p.rate_scale()
    if name == "mu!=0":
        return abs(mu) > GUARD_REL * s
    if name == "kP!=0":
        return abs(p.kP) > GUARD_REL * s
    if name == "mu!=kB":
        return abs(mu - p.kB) > GUARD_REL * max(abs(mu), abs(p.kB))
    g1 = (1 - p.beta) * (p.kB - mu)
    return abs(g1 - p.kDV) > GUARD_REL * (abs(g1) + abs(p.kDV))


def guard_outcomes(p: ModelParameters, mu: complex) -> list:
    """[(name, passed)] for each side-condition at ``mu``."""
    return [(name, _single_guard(p, mu, name)) for name in GUARD_NAMES]


def check_guards(p: ModelParameters, mu: complex):
    """Raise GuardViolation for the first failed side-condition at ``mu``."""
    for name in GUARD_NAMES:
        if not _single_guard(p, mu, name):
            raise GuardViolation(name, f"mu={mu!r}")


def ratios_unchecked(p: ModelParameters, mu: complex) -> RatioVector:
    kR, kB, kP, kDV, kI, a, b = p.kR, p.kB, p.kP, p.kDV, p.kI, p.alpha, p.beta
    r3 = (mu + kDV + kR) / kP
    r1 = a * kR * (mu + kDV + kP + kR) / (mu * kP)
    r2 = (-(mu + kDV) / kP - (mu - kB + kDV) / (mu - kB)
          - (((1 + a) * mu + a * (kDV + kP)) * kR + a * kR**2) / (mu * kP))
    F = -kI * (mu - kB) * (mu + kDV + b * kP + kR) / (kP * ((1 - b) * (mu - kB) + kDV))
    return RatioVector(r1, r2, r3, F)


def ratios_for_mu(p: ModelParameters, mu: complex) -> RatioVector:
    """Initial-data ratios x_m(0)/x4(0) and the closed-form value of F at ``mu``."""
    mu = complex(mu)
    check_guards(p, mu)
    return ratios_unchecked(p, mu)


def sign_pattern(p: ModelParameters, mu: complex):
    """Signs of (r1, r2, r3, 1) as a string such as "+-++", or None.

    Only defined for a real root of a real parameter set with every guard
    passing; a "+" pattern throughout means the single-mode state can be
    taken component-wise positive.  Admissibility is left to the caller.
    """
    mu = complex(mu)
    if not p.is_real() or mu.imag != 0:
        return None
    if not all(ok for _, ok in guard_outcomes(p, mu)):
        return None
    r = ratios_unchecked(p, mu)
    out = ""
    for v in (r.r1.real, r.r2.real, r.r3.real, 1.0):
        out += "+" if v > 0 else "-" if v < 0 else "0"
    return out


def _nres(terms) -> float:
    total = sum(terms)
    scale = sum(abs(t) for t in terms)
    if scale == 0:
        return 0.0
    return abs(total) / scale


def algebraic_residuals(p: ModelParameters, mu: complex, r: RatioVector) -> tuple:
    """Normalized residuals of the four ratio equations, F taken from its definition."""
    kR, kB, kP, kDV, a = p.kR, p.kB, p.kP, p.kDV, p.alpha
    F = r.F_definition(p)
    e1 = [mu * r.r1, -a * kR * r.r3, -a * kR]
    e2 = [mu * r.r2, -kB * r.r1, -kB * r.r2, F * r.r2,
          -(kB + (1 - a) * kR) * r.r3, -(kB + (1 - a) * kR)]
    e3 = [mu * r.r3, -F * r.r2, (kR + kP) * r.r3]
    e4 = [mu, -kP * r.r3, kR + kDV]
    return tuple(_nres(e) for e in (e1, e2, e3, e4))
