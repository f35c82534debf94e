"""Solve the multi-mode constraints for free model parameters.

With all but one rate fixed numerically, the two-mode constraint becomes a
scalar equation in the remaining parameter: :func:`sweep_constraint` scans a
range, follows the quartic roots by continuity, brackets sign changes and
refines them.  :func:`solve_multi` handles the square systems (one free
parameter per constraint) by damped Newton iteration.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DuplicateMu, NoConvergence, TrackingBreak
from .model import ModelParameters
from .solutions import (
    F0_TOL,
    TAU_C,
    constraint_residuals,
    f_spread,
    pair_constraint_terms,
    ratio_form_terms,
)
from .spectrum import spectrum_for

FREE_NAMES = ("kR", "kB", "kP", "kDV", "kI", "alpha", "beta")
BISECT_REL = 1e-12
SECANT_ITERS = 8
REAL_TOL_REL = 1e-10
REAL_TOL_ABS = 1e-14


def _match(prev, cur):
    """Permutation of ``cur`` closest to ``prev`` (minimal worst displacement)."""
    best, best_cost = None, math.inf
    for perm in itertools.permutations(range(len(cur))):
        cost = max(abs(cur[j] - prev[i]) for i, j in enumerate(perm))
        if cost < best_cost:
            best, best_cost = perm, cost
    return [cur[j] for j in best], best_cost


def _min_gap(roots) -> float:
    gaps = [abs(a - b) for a, b in itertools.combinations(roots, 2)]
    return min(gaps) if gaps else math.inf


def _raw_terms(p, mus):
    K = len(mus)
    if K in (2, 3):
        return [pair_constraint_terms(p, mus[0], mus[q]) for q in range(1, K)]
    return ratio_form_terms(p, mus)


def _signed(p, mus) -> complex:
    """First constraint value divided by the sum of its term moduli."""
    ts = _raw_terms(p, mus)[0]
    scale = sum(abs(t) for t in ts)
    return sum(ts) / scale if scale > 0 else 0j


@dataclass
class GridPoint:
    index: int
    value: float
    roots: tuple
    residuals: tuple
    signed: complex
    guards_ok: bool
    real_ok: bool
    tracking_break: bool


@dataclass
class SweepSolution:
    value: float
    params: ModelParameters
    mus: tuple
    residual: float
    guards_ok: bool
    bracket: tuple
    widths: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "residual": self.residual,
            "guards_ok": self.guards_ok,
            "mus": [[m.real, m.imag] for m in self.mus],
            "bracket": list(self.bracket),
            "parameters": self.params.to_json(),
        }


@dataclass
class WholeRange:
    """Marker: every grid value satisfies the (empty) constraint set."""

    lo: float
    hi: float

    def to_json(self) -> dict:
        return {"whole_range": [self.lo, self.hi]}


@dataclass
class SweepResult:
    free: str
    K: int
    pair: tuple
    points: list
    brackets: list
    solutions: list
    breaks: list

    def to_json(self) -> dict:
        return {
            "free": self.free,
            "K": self.K,
            "pair": list(self.pair),
            "brackets": [list(b) for b in self.brackets],
            "tracking_breaks": [b.index for b in self.breaks],
            "solutions": [s.to_json() for s in self.solutions],
        }

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        nres = max((len(pt.residuals) for pt in self.points), default=0)
        header = ["index", "value", "signed_re", "signed_im"]
        header += [f"residual_{i + 1}" for i in range(nres)]
        header += ["guards_ok", "real_ok", "tracking_break"]
        for i in range(4):
            header += [f"mu{i + 1}_re", f"mu{i + 1}_im"]
        w.writerow(header)
        for pt in self.points:
            row = [pt.index, _g(pt.value), _g(pt.signed.real), _g(pt.signed.imag)]
            row += [_g(r) for r in pt.residuals] + [""] * (nres - len(pt.residuals))
            row += [int(pt.guards_ok), int(pt.real_ok), int(pt.tracking_break)]
            for i in range(4):
                if i < len(pt.roots):
                    row += [_g(pt.roots[i].real), _g(pt.roots[i].imag)]
                else:
                    row += ["", ""]
            w.writerow(row)


def _g(v) -> str:
    return format(float(v), ".17g")


def _evaluate_point(p, tracked, pair, K):
    mus = [tracked[i] for i in pair]
    try:
        rep = constraint_residuals(p, mus, strict=False)
    except DuplicateMu:
        return (), 0j, False, False
    guards_ok = all(ok for _, ok in rep.guards)
    if K == 1:
        return (), 0j, True, True
    signed = _signed(p, mus) if guards_ok or K < 4 else complex("nan")
    real_ok = (math.isfinite(signed.real)
               and abs(signed.imag) <= REAL_TOL_REL * abs(signed.real) + REAL_TOL_ABS)
    return rep.residuals, signed, guards_ok, real_ok


def sweep_constraint(p_base: ModelParameters, free: str, lo: float, hi: float,
                     grid_n: int = 64, K: int = 2, pair=(0, 1),
                     tol: float = TAU_C) -> SweepResult:
    """Scan ``free`` over [lo, hi] and solve the K-mode constraint for it.

    Roots are followed between grid points by the closest permutation; a
    displacement beyond half the smallest root gap is a tracking break, after
    which tracking restarts from the sorted order and the straddling interval
    is not bracketed.  Only K=2 has a scalar residual to bracket; for K>2 the
    scan is reported without refinement.
    """
    if free not in FREE_NAMES:
        raise ValueError(f"free parameter must be one of {FREE_NAMES}")
    if grid_n < 8:
        raise ValueError("grid_n must be at least 8")
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
        raise ValueError("range must be finite with lo < hi")
    pair = tuple(pair)
    if len(pair) != K or len(set(pair)) != K or not all(0 <= i < 4 for i in pair):
        raise ValueError(f"pair must hold {K} distinct root indices in 0..3")
    values = np.linspace(lo, hi, grid_n)
    points, breaks = [], []
    tracked = None
    for i, v in enumerate(values):
        p = p_base.with_(**{free: float(v)})
        roots = list(spectrum_for(p, extended=False).roots)
        brk = False
        if len(roots) != 4:
            brk = True
            tracked = None
        elif tracked is None:
            tracked = roots
            brk = i > 0
        else:
            matched, cost = _match(tracked, roots)
            if cost > 0.5 * _min_gap(tracked):
                brk = True
                tracked = roots
            else:
                tracked = matched
        if brk and i > 0:
            breaks.append(TrackingBreak(i))
        if tracked is None:
            points.append(GridPoint(i, float(v), tuple(roots), (), complex("nan"),
                                    False, False, True))
            continue
        res, signed, gok, rok = _evaluate_point(p, tracked, pair, K)
        points.append(GridPoint(i, float(v), tuple(tracked), res, signed, gok, rok, brk))

    if K == 1:
        return SweepResult(free, K, pair, points, [], [WholeRange(lo, hi)], breaks)
    brackets, solutions = [], []
    if K == 2:
        for a, b in zip(points, points[1:]):
            if b.tracking_break or not (a.guards_ok and b.guards_ok and a.real_ok and b.real_ok):
                continue
            if a.signed.real == 0 or a.signed.real * b.signed.real < 0:
                brackets.append((a.value, b.value))
                sol = _refine(p_base, free, a, b, pair, lo, hi, tol)
                if sol is not None:
                    solutions.append(sol)
    return SweepResult(free, K, pair, points, brackets, solutions, breaks)


def _roots_near(p, guess, extended=True):
    roots = list(spectrum_for(p, extended=extended).roots)
    if len(roots) != 4:
        return None
    matched, cost = _match(guess, roots)
    if cost > 0.5 * _min_gap(matched):
        return None
    return matched


def _refine(p_base, free, a: GridPoint, b: GridPoint, pair, lo, hi, tol):
    """Bisection to width 1e-12*scale, then secant polish inside the bracket."""
    scale = max(abs(lo), abs(hi))

    def at(v):
        w = (v - a.value) / (b.value - a.value)
        guess = [ra + w * (rb - ra) for ra, rb in zip(a.roots, b.roots)]
        p = p_base.with_(**{free: float(v)})
        roots = _roots_near(p, guess)
        if roots is None:
            return None, None, None
        mus = [roots[i] for i in pair]
        return _signed(p, mus).real, p, mus

    xa, xb = a.value, b.value
    fa, fb = a.signed.real, b.signed.real
    widths = [xb - xa]
    if fa == 0:
        xb, fb = xa, fa
    while xb - xa > BISECT_REL * scale:
        xm = 0.5 * (xa + xb)
        if not xa < xm < xb:
            break
        fm, _, _ = at(xm)
        if fm is None:
            return None
        if fm == 0:
            xa = xb = xm
            fa = fb = 0.0
            widths.append(0.0)
            break
        if (fm < 0) == (fa < 0):
            xa, fa = xm, fm
        else:
            xb, fb = xm, fm
        widths.append(xb - xa)
    # secant from the bracket ends, kept inside the bracket
    x0, x1, f0, f1 = xa, xb, fa, fb
    best_x, best_f = (xa, fa) if abs(fa) <= abs(fb) else (xb, fb)
    for _ in range(SECANT_ITERS):
        if f1 == f0 or best_f == 0:
            break
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if not xa <= x2 <= xb:
            break
        f2, _, _ = at(x2)
        if f2 is None:
            break
        x0, f0, x1, f1 = x1, f1, x2, f2
        if abs(f2) < abs(best_f):
            best_x, best_f = x2, f2
    _, p, mus = at(best_x)
    if p is None:
        return None
    rep = constraint_residuals(p, mus, strict=False)
    guards_ok = all(ok for _, ok in rep.guards)
    residual = max(rep.residuals)
    if not (guards_ok and residual <= tol) or f_spread(p, mus) > F0_TOL:
        return None
    return SweepSolution(float(best_x), p, tuple(mus), residual, guards_ok,
                         (a.value, b.value), widths)


@dataclass
class MultiSolution:
    values: tuple
    params: ModelParameters
    mus: tuple
    residuals: tuple
    iterations: int

    def to_json(self) -> dict:
        return {
            "values": [[v.real, v.imag] for v in self.values],
            "mus": [[m.real, m.imag] for m in self.mus],
            "residuals": list(self.residuals),
            "iterations": self.iterations,
            "parameters": self.params.to_json(),
        }


@dataclass
class MultiResult:
    solutions: list
    failures: list


def _with_values(p_base, names, x):
    return p_base.with_(**{n: complex(v) for n, v in zip(names, x)})


def solve_multi(p_base: ModelParameters, free, K: int, seeds, roots=None,
                max_iter: int = 40, tol: float = TAU_C, fd_rel: float = 1e-7) -> MultiResult:
    """Damped Newton on the K-mode constraint vector in the ``free`` parameters.

    ``len(free)`` must equal the number of constraints, K - 1.  ``roots`` picks
    the quartic roots (indices into the sorted spectrum at each seed); they are
    followed by continuity during the iteration.  Complex parameter values are
    allowed.  A seed whose iteration does not end at residual <= ``tol`` with
    every guard passing, and with all modes agreeing on F, lands in
    ``failures`` as :class:`NoConvergence`.
    """
    free = tuple(free)
    if not 2 <= K <= 4:
        raise ValueError("K must be 2, 3 or 4")
    if len(free) != K - 1:
        raise ValueError(f"K={K} needs {K - 1} free parameters, got {len(free)}")
    if any(n not in FREE_NAMES for n in free):
        raise ValueError(f"free parameters must be among {FREE_NAMES}")
    roots = tuple(range(K)) if roots is None else tuple(roots)
    if len(roots) != K:
        raise ValueError("one root index per mode")
    solutions, failures = [], []
    for seed in seeds:
        try:
            sol = _newton(p_base, free, K, roots, seed, max_iter, tol, fd_rel)
        except NoConvergence as exc:
            failures.append(exc)
            continue
        scale = max(1.0, max(abs(v) for v in sol.values))
        if all(max(abs(u - v) for u, v in zip(s.values, sol.values)) > 1e-8 * scale
               for s in solutions):
            solutions.append(sol)
    return MultiResult(solutions, failures)


def _guard_margins(p, mus) -> str:
    g = [abs((1 - p.beta) * (p.kB - mu) - p.kDV) for mu in mus]
    d = [abs(mu - p.kB) for mu in mus]
    return f"min |(1-beta)(kB-mu)-kDV| = {min(g):.1e}, min |mu-kB| = {min(d):.1e}"


def _newton(p_base, free, K, roots, seed, max_iter, tol, fd_rel):
    x = np.array([complex(v) for v in seed], dtype=complex)
    if not np.all(np.isfinite(x)):
        raise NoConvergence(seed, "non-finite seed")
    p = _with_values(p_base, free, x)
    spec = spectrum_for(p)
    if len(spec.roots) != 4 or spec.degenerate_flag:
        raise NoConvergence(seed, "degenerate spectrum at seed")
    mus = [spec.roots[i] for i in roots]
    scales = [sum(abs(t) for t in ts) or 1.0 for ts in _raw_terms(p, mus)]

    def resid(xv, guess, extended=False):
        pv = _with_values(p_base, free, xv)
        all_roots = _roots_near(pv, guess, extended)
        if all_roots is None:
            return None, None, None
        m = [all_roots[i] for i in roots]
        r = np.array([sum(ts) / s for ts, s in zip(_raw_terms(pv, m), scales)])
        return r, all_roots, pv

    tracked = list(spec.roots)
    r, tracked, p = resid(x, tracked)
    if r is None or not np.all(np.isfinite(r)):
        raise NoConvergence(seed, "residual undefined at seed")
    for it in range(max_iter + 1):
        mus = [tracked[i] for i in roots]
        rep = constraint_residuals(p, mus, strict=False)
        if all(v <= tol for v in rep.residuals):
            # confirm with extended-precision roots before accepting
            _, ext, _ = resid(x, tracked, extended=True)
            if ext is not None:
                mus = [ext[i] for i in roots]
                rep = constraint_residuals(p, mus, strict=False)
        if all(v <= tol for v in rep.residuals):
            bad = [n for n, ok in rep.guards if not ok]
            if bad:
                raise NoConvergence(seed, f"constraints vanish only where guard fails: {bad}")
            # the polynomial forms also vanish on guard boundaries, where the
            # modes no longer share one value of F; reject those limits
            spread = f_spread(p, mus)
            if spread > F0_TOL:
                raise NoConvergence(seed, "converged onto a guard boundary "
                                    f"(per-mode F spread {spread:.1e}); guard margins: "
                                    + _guard_margins(p, mus))
            return MultiSolution(tuple(complex(v) for v in x), p, tuple(mus),
                                 rep.residuals, it)
        if it == max_iter:
            break
        J = np.empty((len(r), len(x)), dtype=complex)
        for j in range(len(x)):
            hj = fd_rel * max(abs(x[j]), 1.0)
            xp = x.copy()
            xp[j] += hj
            rp, _, _ = resid(xp, tracked)
            if rp is None:
                raise NoConvergence(seed, "root tracking lost while differencing")
            J[:, j] = (rp - r) / hj
        dx = np.linalg.lstsq(J, -r, rcond=None)[0]
        lam = 1.0
        norm0 = np.linalg.norm(r)
        for _ in range(12):
            xn = x + lam * dx
            rn, tn, pn = resid(xn, tracked)
            if rn is not None and np.all(np.isfinite(rn)) and np.linalg.norm(rn) < norm0:
                x, r, tracked, p = xn, rn, tn, pn
                break
            lam *= 0.5
        else:
            bad = [n for n, ok in rep.guards if not ok]
            raise NoConvergence(seed, "line search failed" + (f"; guards failing: {bad}" if bad else ""))
    rep = constraint_residuals(p, [tracked[i] for i in roots], strict=False)
    bad = [n for n, ok in rep.guards if not ok]
    raise NoConvergence(seed, f"max iterations, residuals {rep.residuals}"
                        + (f"; guards failing: {bad}" if bad else ""))


__all__ = [
    "FREE_NAMES", "GridPoint", "SweepSolution", "WholeRange", "SweepResult",
    "sweep_constraint", "MultiSolution", "MultiResult", "solve_multi",
]
