import numpy as np
import pytest

from epiexact.model import ModelParameters

RATE_NAMES = ("kD", "kR", "kB", "kP", "kDV", "kI")


def random_params(rng, complex_=False):
    """Rates log-uniform on [0.01, 10], alpha and beta uniform on [0.05, 0.95]."""
    rates = 10 ** rng.uniform(-2, 1, 6)
    a, b = rng.uniform(0.05, 0.95, 2)
    vals = dict(zip(RATE_NAMES, rates), alpha=a, beta=b)
    if complex_:
        vals = {k: v * np.exp(1j * rng.uniform(-0.3, 0.3)) for k, v in vals.items()}
    return ModelParameters(**vals)


def random_state(rng):
    return tuple(complex(*rng.normal(size=2)) for _ in range(4))


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


@pytest.fixture
def simple_params():
    return ModelParameters(kD=0.1, kR=1.0, kB=0.5, kP=0.5, kDV=1.0, kI=0.8, alpha=0.6, beta=0.2)


@pytest.fixture(scope="session")
def k2_solution():
    """A parameter set where the two-mode constraint holds for roots 1 and 3."""
    from epiexact.search import sweep_constraint

    base = ModelParameters(kD=0.1, kR=1.0, kB=0.5, kP=0.5, kDV=1.0, kI=0.8, alpha=0.6, beta=0.2)
    res = sweep_constraint(base, "kDV", 0.01, 10.0, 64, 2, (1, 3))
    assert len(res.solutions) == 1
    return res.solutions[0]


def perturbed_pair(sol, free, target=1e-2):
    """Move a parameter away from a two-mode solution until the constraint
    residual reaches ``target``; returns (params, mus) with mus the followed roots.

    ``free`` is tried first, then the remaining rates, growing the relative
    shift gradually so the roots can be followed by proximity.
    """
    from epiexact.solutions import constraint_residuals
    from epiexact.spectrum import guard_outcomes, spectrum_for

    names = [free] + [n for n in ("kDV", "kB", "kI", "kR", "kP") if n != free]
    for name in names:
        v0 = getattr(sol.params, name).real
        mus = list(sol.mus)
        for rel in np.geomspace(1e-3, 4.0, 120):
            p = sol.params.with_(**{name: v0 * (1 + rel)})
            roots = spectrum_for(p).roots
            mus = [min(roots, key=lambda z, m=m: abs(z - m)) for m in mus]
            if len(set(mus)) < len(mus):
                break
            if not all(ok for mu in mus for _, ok in guard_outcomes(p, mu)):
                continue
            rep = constraint_residuals(p, mus, strict=False)
            if rep.residuals[0] >= target:
                return p, mus
    raise AssertionError("could not push the residual to the target")
