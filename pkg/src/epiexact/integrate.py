"""Independent numerical oracle: classical RK4 with step-doubling error control."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HorizonOverflow, SingularDenominator, StepUnderflow
from .model import ModelParameters, State, _f, rhs_for_frame
from .solutions import ModeSet, evaluate
from .spectrum import spectrum_for

RTOL = 1e-10
BASE_STEP_RATE = 0.05
DEFAULT_DIVISIONS = 2000
UNDERFLOW_REL = 1e-14
DEVIATION_TOL = 1e-6
DRIFT_TOL = 1e-7
DEVIATION_FLOOR = 1e-30
MAX_HORIZON = 10.0
EXP_LIMIT = 700.0

CSV_HEADER = ("t", "x1_re", "x1_im", "x2_re", "x2_im", "x3_re", "x3_im",
              "x4_re", "x4_im", "err_est")


def _fmt(v: float) -> str:
    return format(v, ".17g")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # shape (n, 4), complex
    frame: str
    step_error_estimate: np.ndarray  # relative, one per sample (0 at t=0)

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> State:
        return State(tuple(self.states[i]), self.frame)

    def global_error_bound(self) -> float:
        """Sum of the per-step relative error estimates."""
        return float(np.sum(self.step_error_estimate))

    def write_csv(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for t, x, e in zip(self.times, self.states, self.step_error_estimate):
            row = [_fmt(float(t))]
            for v in x:
                row += [_fmt(v.real), _fmt(v.imag)]
            row.append(_fmt(float(e)))
            w.writerow(row)


def _norm(y) -> float:
    return math.sqrt(sum(v.real * v.real + v.imag * v.imag for v in y))


def _rk4(rhs, p, y, h, k1):
    k2 = rhs(p, tuple(a + 0.5 * h * b for a, b in zip(y, k1)))
    k3 = rhs(p, tuple(a + 0.5 * h * b for a, b in zip(y, k2)))
    k4 = rhs(p, tuple(a + h * b for a, b in zip(y, k3)))
    return tuple(a + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
                 for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))


def _doubling_step(rhs, p, y, h):
    """One RK4 step of size h and two of size h/2; returns (y_half, rel_err)."""
    k1 = rhs(p, y)
    full = _rk4(rhs, p, y, h, k1)
    mid = _rk4(rhs, p, y, 0.5 * h, k1)
    half = _rk4(rhs, p, mid, 0.5 * h, rhs(p, mid))
    diff = _norm(tuple(a - b for a, b in zip(half, full))) / 15.0
    scale = _norm(half)
    rel = diff / scale if scale > 0 else (0.0 if diff == 0 else math.inf)
    return half, rel


def base_step(t_end: float, max_rate: float | None = None) -> float:
    if max_rate is not None and max_rate > 0:
        h = BASE_STEP_RATE / max_rate
    else:
        h = t_end / DEFAULT_DIVISIONS
    return min(h, t_end) if t_end > 0 else h


def integrate(p: ModelParameters, x0: State, t_end: float, h: float | None = None,
              max_rate: float | None = None, rtol: float = RTOL,
              adaptive: bool = True) -> Trajectory:
    """Integrate the system matching ``x0.frame`` from t=0 to ``t_end``.

    Every step is taken twice (one full, two halves); the half-step result is
    kept and |half - full|/15 is the local error estimate.  With ``adaptive``
    the step shrinks until that estimate is below ``rtol`` relative to the
    state and never grows beyond the base step; without it the base step is
    used throughout (for convergence-order studies).
    """
    if not t_end >= 0:
        raise ValueError("t_end must be non-negative")
    y = tuple(x0.x)
    try:
        _f(p, y)
    except SingularDenominator:
        raise SingularDenominator(t=0.0) from None
    times, states, errs = [0.0], [y], [0.0]
    if t_end == 0:
        return _pack(times, states, errs, x0.frame)
    rhs = rhs_for_frame(x0.frame)
    hb = base_step(t_end, max_rate) if h is None else min(h, t_end)
    h_min = UNDERFLOW_REL * t_end
    hc = hb
    t = 0.0
    while t < t_end:
        step = min(hc, t_end - t)
        last = step == t_end - t
        try:
            y_new, rel = _doubling_step(rhs, p, y, step)
        except SingularDenominator:
            raise SingularDenominator(t=t) from None
        if adaptive and not rel <= rtol:
            fac = 0.9 * (rtol / rel) ** 0.2 if math.isfinite(rel) and rel > 0 else 0.1
            hc = step * max(0.1, min(0.9, fac))
            if hc < h_min:
                raise StepUnderflow(t, hc)
            continue
        t = t_end if last else t + step
        y = y_new
        times.append(t)
        states.append(y)
        errs.append(rel)
        if adaptive:
            fac = 2.0 if rel == 0 else min(2.0, 0.9 * (rtol / rel) ** 0.2)
            hc = min(hb, step * max(fac, 0.2)) if not last else hc
    return _pack(times, states, errs, x0.frame)


def _pack(times, states, errs, frame) -> Trajectory:
    return Trajectory(np.array(times, dtype=float), np.array(states, dtype=complex),
                      frame, np.array(errs, dtype=float))


def jacobian_reduced(p: ModelParameters, x) -> np.ndarray:
    """Analytic Jacobian of the reduced right-hand side at ``x``."""
    x1, x2, x3, x4 = (complex(v) for v in x)
    den = x1 + x2 + x3 + p.beta * x4
    f = _f(p, (x1, x2, x3, x4))
    df = np.array([-f, -f, p.kI - f, p.beta * (p.kI - f)], dtype=complex) / den
    c = p.kB + (1 - p.alpha) * p.kR
    J = np.zeros((4, 4), dtype=complex)
    J[0, 2] = J[0, 3] = p.alpha * p.kR
    J[1] = [p.kB, p.kB - f, c, c]
    J[1] -= x2 * df
    J[2] = [0, f, -(p.kR + p.kP), 0]
    J[2] += x2 * df
    J[3] = [0, 0, p.kP, -(p.kR + p.kDV)]
    return J


def transverse_growth(p: ModelParameters, mu: complex, t_end: float) -> float:
    """Log-amplification of perturbations relative to the mode exp(mu t).

    The Jacobian is constant along a single-mode solution, so a perturbation
    grows like exp(max Re eig(J) t) while the solution grows like
    exp(Re mu t).  Values well above zero mean no finite-precision
    integration can stay on the exact solution for the whole horizon.
    """
    from .spectrum import ratios_for_mu

    r = ratios_for_mu(p, mu)
    lam = np.linalg.eigvals(jacobian_reduced(p, r.as_state_tuple()))
    return float((np.max(lam.real) - complex(mu).real) * t_end)


def default_horizon(rates) -> float:
    """min(3 / max|Re mu|, 10) over the given growth rates."""
    m = max((abs(complex(z).real) for z in rates), default=0.0)
    if m == 0:
        return MAX_HORIZON
    return min(3.0 / m, MAX_HORIZON)


@dataclass(frozen=True)
class VerificationReport:
    max_rel_deviation: float
    f_drift: float
    passed: bool
    t_end: float
    n_steps: int
    deviation_tol: float = DEVIATION_TOL
    drift_tol: float = DRIFT_TOL
    trajectory: Trajectory | None = field(default=None, compare=False, repr=False)

    def to_json(self) -> dict:
        return {
            "max_rel_deviation": self.max_rel_deviation,
            "f_drift": self.f_drift,
            "passed": self.passed,
            "t_end": self.t_end,
            "n_steps": self.n_steps,
            "deviation_tol": self.deviation_tol,
            "drift_tol": self.drift_tol,
        }


def verify_modeset(ms: ModeSet, t_end: float | None = None,
                   deviation_tol: float = DEVIATION_TOL, drift_tol: float = DRIFT_TOL,
                   rtol: float = RTOL, h: float | None = None,
                   adaptive: bool = True) -> VerificationReport:
    """Integrate from the superposition's initial state and compare pointwise."""
    p = ms.params
    spec = spectrum_for(p)
    rates = list(spec.roots) + list(ms.mus)
    if t_end is None:
        t_end = default_horizon(rates)
    worst = max(abs(mu.real) for mu in ms.mus) * t_end
    if worst > EXP_LIMIT:
        raise HorizonOverflow(f"|Re mu| * t_end = {worst:.1f} exceeds {EXP_LIMIT}")
    max_rate = max(abs(z) for z in rates) if rates else None
    x0 = evaluate(ms, 0.0)
    traj = integrate(p, x0, t_end, h=h, max_rate=max_rate, rtol=rtol, adaptive=adaptive)
    dev = 0.0
    for t, y in zip(traj.times, traj.states):
        xa = evaluate(ms, float(t)).x
        diff = _norm(tuple(a - b for a, b in zip(y, xa)))
        dev = max(dev, diff / max(_norm(xa), DEVIATION_FLOOR))
    f0 = _f(p, tuple(traj.states[0]))
    drift = 0.0
    for y in traj.states:
        fy = _f(p, tuple(y))
        d = abs(fy - f0)
        drift = max(drift, d / abs(f0) if f0 != 0 else d)
    passed = dev <= deviation_tol and drift <= drift_tol
    return VerificationReport(dev, drift, passed, float(t_end), len(traj) - 1,
                              deviation_tol, drift_tol, traj)
