import io
import json

import numpy as np
import pytest

from conftest import random_params
from epiexact.errors import NoConvergence
from epiexact.integrate import verify_modeset
from epiexact.model import ModelParameters
from epiexact.search import WholeRange, solve_multi, sweep_constraint
from epiexact.solutions import build_modes, constraint_residuals, h_of_t, weighted_amplitudes


def test_k1_whole_range(simple_params):
    res = sweep_constraint(simple_params, "kB", 0.1, 2.0, 16, K=1, pair=(0,))
    assert res.brackets == []
    assert len(res.solutions) == 1 and isinstance(res.solutions[0], WholeRange)
    assert res.solutions[0].to_json() == {"whole_range": [0.1, 2.0]}


def test_argument_validation(simple_params):
    with pytest.raises(ValueError):
        sweep_constraint(simple_params, "kD", 0.1, 1.0)
    with pytest.raises(ValueError):
        sweep_constraint(simple_params, "kB", 1.0, 0.1)
    with pytest.raises(ValueError):
        sweep_constraint(simple_params, "kB", 0.1, 1.0, pair=(0, 0))


def test_refined_solution(k2_solution):
    sol = k2_solution
    assert abs(sol.value - 2.1919300981) < 1e-9
    assert sol.residual <= 1e-9 and sol.guards_ok
    ms = build_modes(sol.params, sol.mus, weighted_amplitudes(sol.params, sol.mus))
    h0 = h_of_t(ms, 0.0)
    assert max(abs(h_of_t(ms, t) - h0) for t in np.linspace(0, 1, 100)) <= 1e-8 * abs(h0)


def test_bisection_is_monotone(k2_solution):
    w = k2_solution.widths
    assert len(w) > 10
    assert all(b < a for a, b in zip(w, w[1:]))
    assert w[-1] <= 1e-12 * 10.0 or w[-1] == 0


def test_guard_failures_excluded_from_brackets():
    # beta = 1 and kDV = 0 make one side-condition fail for every root
    p = ModelParameters(kD=0.1, kR=1.0, kB=0.5, kP=0.5, kDV=0.0, kI=0.8, alpha=0.6, beta=1.0)
    res = sweep_constraint(p, "kI", 0.1, 5.0, 16, 2, (0, 1))
    assert all(not pt.guards_ok for pt in res.points)
    assert res.brackets == [] and res.solutions == []


def test_tracking_consistent_under_refinement(simple_params):
    coarse = sweep_constraint(simple_params, "kB", 0.2, 1.0, 17, 2, (0, 1))
    fine = sweep_constraint(simple_params, "kB", 0.2, 1.0, 33, 2, (0, 1))
    assert not coarse.breaks and not fine.breaks
    for pt in coarse.points:
        other = fine.points[2 * pt.index]
        assert other.value == pytest.approx(pt.value, abs=1e-15)
        assert max(abs(a - b) for a, b in zip(pt.roots, other.roots)) <= 1e-6


def test_sweep_solutions_verify(rng):
    found = 0
    for _ in range(8):
        p = random_params(rng)
        for pair in ((0, 1), (0, 2), (1, 3)):
            for sol in sweep_constraint(p, "kDV", 0.01, 10.0, 48, 2, pair).solutions:
                assert constraint_residuals(sol.params, sol.mus).satisfied
                ms = build_modes(sol.params, sol.mus, weighted_amplitudes(sol.params, sol.mus))
                assert verify_modeset(ms).passed
                found += 1
    assert found >= 1


def test_sweep_outputs(k2_solution, simple_params):
    res = sweep_constraint(simple_params, "kDV", 0.01, 10.0, 64, 2, (1, 3))
    buf = io.StringIO()
    res.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == 65
    assert lines[0].startswith("index,value,signed_re,signed_im,residual_1,guards_ok")
    js = res.to_json()
    assert json.loads(json.dumps(js))["solutions"][0]["value"] == k2_solution.value


def test_newton_converges_from_exact_seed(k2_solution):
    p = k2_solution.params
    res = solve_multi(p, ("kDV",), 2, [(k2_solution.value,), (k2_solution.value * 1.001,)],
                      roots=(1, 3))
    assert len(res.solutions) == 1 and not res.failures
    sol = res.solutions[0]
    assert abs(sol.values[0] - k2_solution.value) <= 1e-9 * k2_solution.value
    assert sol.iterations <= 3
    ms = build_modes(sol.params, sol.mus, weighted_amplitudes(sol.params, sol.mus))
    assert verify_modeset(ms).passed


def test_guard_region_reports_diagnostic(simple_params):
    p = simple_params.with_(beta=1.0)
    res = solve_multi(p, ("kDV", "kB"), 3, [(0.0, 0.5)])
    assert not res.solutions
    assert "guard" in str(res.failures[0])
    assert isinstance(res.failures[0], NoConvergence)


def test_three_and_four_mode_search_finds_nothing(simple_params):
    seeds = [(a, b) for a in (0.3, 1.0, 3.0) for b in (0.3, 1.0, 3.0)]
    res = solve_multi(simple_params, ("kDV", "kB"), 3, seeds, roots=(1, 2, 3))
    assert not res.solutions and len(res.failures) == len(seeds)
    res = solve_multi(simple_params, ("kDV", "kB", "kI"), 4, [(1.0, 1.0, 1.0), (2.0, 0.5, 0.3)])
    assert not res.solutions


def test_solve_multi_validation(simple_params):
    with pytest.raises(ValueError):
        solve_multi(simple_params, ("kDV",), 3, [(1.0,)])
    with pytest.raises(ValueError):
        solve_multi(simple_params, ("kDV", "kD"), 3, [(1.0, 1.0)])
