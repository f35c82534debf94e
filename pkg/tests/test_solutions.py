import cmath

import numpy as np
import pytest

from conftest import perturbed_pair, random_params
from oracles import mpc
from epiexact.errors import (
    DuplicateMu,
    GuardViolation,
    NotARoot,
    NotEquilibriumParameterization,
    SingularDenominator,
)
from epiexact.model import ModelParameters, State, rhs_reduced
from epiexact.solutions import (
    build_modes,
    consistency_check_K4,
    constraint_residuals,
    derivative,
    equilibrium,
    equilibrium_residual,
    evaluate,
    h_of_t,
    mode_relation_residuals,
    pair_constraint_terms,
    weighted_amplitudes,
)
from epiexact.spectrum import guard_outcomes, ratios_for_mu, spectrum_for


def _admissible_roots(p):
    return [mu for mu in spectrum_for(p).roots if all(ok for _, ok in guard_outcomes(p, mu))]


def _k2_modes(sol, a4=None):
    a4 = weighted_amplitudes(sol.params, sol.mus) if a4 is None else a4
    return build_modes(sol.params, sol.mus, a4)


def test_single_mode_is_explicit_solution(rng):
    p = random_params(rng)
    mu = _admissible_roots(p)[0]
    ms = build_modes(p, [mu], [1.0])
    r = ratios_for_mu(p, mu)
    x0 = r.as_state_tuple()
    assert ms.valid and ms.K == 1
    for t in (0.0, 0.3, 1.7):
        assert np.allclose(evaluate(ms, t).x, [v * cmath.exp(mu * t) for v in x0], rtol=1e-15)


def test_zero_amplitude_drops_mode(k2_solution):
    sol = k2_solution
    two = build_modes(sol.params, sol.mus, [1.0, 0.0])
    one = build_modes(sol.params, sol.mus[:1], [1.0])
    for t in np.linspace(0, 2, 7):
        assert evaluate(two, t).x == evaluate(one, t).x


def test_not_a_root_rejected(simple_params):
    with pytest.raises(NotARoot):
        build_modes(simple_params, [0.123], [1.0])


def test_duplicate_roots_rejected(simple_params):
    mu = spectrum_for(simple_params).roots[0]
    with pytest.raises(DuplicateMu):
        build_modes(simple_params, [mu, mu], [1.0, 1.0])
    with pytest.raises(DuplicateMu):
        constraint_residuals(simple_params, [mu, mu])


def test_mode_relation_closure(rng, k2_solution):
    n = 0
    while n < 100:
        p = random_params(rng)
        for mu in _admissible_roots(p):
            ms = build_modes(p, [mu], [complex(*rng.normal(size=2))])
            assert max(mode_relation_residuals(ms)[0]) <= 1e-9
            n += 1
    ms = _k2_modes(k2_solution, [1.0, 1.0])
    res = mode_relation_residuals(ms)
    assert len(res) == 2 and max(max(r) for r in res) <= 1e-9


def test_k2_direct_substitution(k2_solution):
    # substitute the amplitudes into the eight linear relations by hand
    ms = _k2_modes(k2_solution, [1.0, 1.0])
    p, f0 = ms.params, ms.f0
    for m in ms.modes:
        a1, a2, a3, a4 = m.a
        mu = m.mu
        lhs = [mu * a1, mu * a2, mu * a3, mu * a4]
        rhs = [p.alpha * p.kR * (a3 + a4),
               p.kB * a1 + (p.kB - f0) * a2 + (p.kB + (1 - p.alpha) * p.kR) * (a3 + a4),
               f0 * a2 - (p.kR + p.kP) * a3,
               p.kP * a3 - (p.kR + p.kDV) * a4]
        scale = max(abs(v) for v in lhs + rhs)
        for u, v in zip(lhs, rhs):
            assert abs(u - v) <= 1e-9 * scale


def test_evaluate_at_zero_and_extended_precision(rng):
    import mpmath as mp

    p = random_params(rng)
    mus = _admissible_roots(p)[:2]
    a4 = [complex(*rng.normal(size=2)) for _ in mus]
    ms = build_modes(p, mus, a4)
    x0 = evaluate(ms, 0.0).x
    assert x0 == tuple(sum(m.a[n] for m in ms.modes) for n in range(4))
    t = 0.37
    ref = [sum(mpc(m.a[n]) * mp.exp(mpc(m.mu) * t) for m in ms.modes) for n in range(4)]
    got = evaluate(ms, t).x
    for g, r in zip(got, ref):
        assert abs(g - complex(r)) <= 1e-14 * max(1.0, abs(complex(r)))


def test_h_constant_for_single_mode(rng):
    p = random_params(rng)
    ms = build_modes(p, _admissible_roots(p)[:1], [1.0])
    h0 = h_of_t(ms, 0.0)
    for t in np.linspace(0, 3, 20):
        assert abs(h_of_t(ms, t) - h0) <= 1e-14 * abs(h0)


def test_h_constant_when_constraint_holds(k2_solution):
    ms = _k2_modes(k2_solution)
    h0 = h_of_t(ms, 0.0)
    drift = max(abs(h_of_t(ms, t) - h0) for t in np.linspace(0, 1, 100))
    assert drift <= 1e-8 * abs(h0)


def test_h_drifts_when_constraint_violated(k2_solution):
    p, mus = perturbed_pair(k2_solution, "kDV")
    ms = build_modes(p, mus, weighted_amplitudes(p, mus))
    assert not ms.valid
    h0 = h_of_t(ms, 0.0)
    drift = max(abs(h_of_t(ms, t) - h0) for t in np.linspace(0, 1, 100))
    assert drift > 1e-4 * abs(h0)


def test_h_scale_invariance(k2_solution):
    ms = _k2_modes(k2_solution)
    big = ms.scaled(3.0 - 2.0j)
    for t in (0.0, 0.4, 1.1):
        assert abs(h_of_t(big, t) - h_of_t(ms, t)) <= 1e-12 * abs(h_of_t(ms, t))


def test_superposition_solves_reduced_system(k2_solution, rng):
    ms = _k2_modes(k2_solution)
    assert constraint_residuals(ms.params, ms.mus).satisfied
    for t in rng.uniform(0, 2, 100):
        x = evaluate(ms, t)
        rhs = rhs_reduced(ms.params, x).x
        d = derivative(ms, t).x
        assert np.linalg.norm(np.subtract(d, rhs)) <= 1e-7 * np.linalg.norm(rhs)


def test_k1_report_empty_and_satisfied(simple_params):
    rep = constraint_residuals(simple_params, spectrum_for(simple_params).roots[:1])
    assert rep.residuals == () and rep.satisfied


def test_k2_constraint_found_by_sweep(k2_solution):
    rep = constraint_residuals(k2_solution.params, k2_solution.mus)
    assert rep.satisfied and rep.residuals[0] <= 1e-9


def test_guard_beats_vanishing_constraint():
    p = ModelParameters(kD=0.1, kR=1.0, kB=0.5, kP=0.7, kDV=0.0, kI=0.8, alpha=0.6, beta=1.0)
    assert sum(pair_constraint_terms(p, 0.3, -1.2)) == 0
    with pytest.raises(GuardViolation):
        constraint_residuals(p, [0.3, -1.2])
    assert not constraint_residuals(p, [0.3, -1.2], strict=False).satisfied


def test_pair_constraint_matches_equal_F(rng):
    # the two-mode polynomial vanishes exactly where F(mu1) = F(mu2)
    for _ in range(50):
        p = random_params(rng)
        mu1, mu2 = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
        F1, F2 = ratios_for_mu(p, mu1).F, ratios_for_mu(p, mu2).F
        g1 = (1 - p.beta) * (mu1 - p.kB) + p.kDV
        g2 = (1 - p.beta) * (mu2 - p.kB) + p.kDV
        lhs = (F1 - F2) * p.kP * g1 * g2 / p.kI
        rhs = -(mu1 - mu2) * sum(pair_constraint_terms(p, mu1, mu2))
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs), 1)


def test_three_mode_constraints_are_incompatible(rng):
    # P(mu1, mu2) - P(mu1, mu3) = (mu2 - mu3) * ((1-beta)(mu1-kB) + kDV)
    for _ in range(50):
        p = random_params(rng, complex_=True)
        m1, m2, m3 = (complex(*rng.normal(size=2)) for _ in range(3))
        lhs = sum(pair_constraint_terms(p, m1, m2)) - sum(pair_constraint_terms(p, m1, m3))
        rhs = (m2 - m3) * ((1 - p.beta) * (m1 - p.kB) + p.kDV)
        assert abs(lhs - rhs) <= 1e-12 * max(1, abs(rhs))


def test_reduction_zeroing_a_mode(k2_solution):
    ms = _k2_modes(k2_solution)
    assert constraint_residuals(ms.params, ms.mus).satisfied
    reduced = ms.with_amplitudes([ms.modes[0].a, (0, 0, 0, 0)])
    for t in np.linspace(0, 1, 10):
        assert np.allclose(evaluate(reduced, t).x, evaluate(build_modes(
            ms.params, ms.mus[:1], [ms.modes[0].a[3]]), t).x, rtol=1e-15)
    assert constraint_residuals(ms.params, ms.mus[:1]).satisfied


def _k4_modeset(rng):
    while True:
        p = random_params(rng)
        roots = _admissible_roots(p)
        if len(roots) == 4:
            a4 = [complex(*rng.normal(size=2)) for _ in roots]
            return build_modes(p, roots, a4)


def test_k4_a_form_matches_b_form(rng):
    for _ in range(30):
        chk = consistency_check_K4(_k4_modeset(rng))
        assert chk.agree and chk.max_disagreement <= 1e-10


def test_k4_residuals_invariant_under_scaling(rng):
    ms = _k4_modeset(rng)
    base = consistency_check_K4(ms).a_form
    scaled = consistency_check_K4(ms.scaled(-2.5 + 0.5j)).a_form
    assert np.allclose(base, scaled, rtol=1e-12, atol=0)


def test_k4_zeroed_mode_reduces_to_k3(rng):
    ms = _k4_modeset(rng)
    zeroed = ms.with_amplitudes([m.a for m in ms.modes[:3]] + [(0, 0, 0, 0)])
    k3 = build_modes(ms.params, ms.mus[:3], [m.a[3] for m in ms.modes[:3]])
    full = consistency_check_K4(zeroed)
    assert full.a_form[2] == 0
    for u, v in zip(full.a_form[:2], consistency_check_K4(k3).a_form):
        assert abs(u - v) <= 1e-10


def test_k4_constraints_unsatisfied_generically(rng):
    ms = _k4_modeset(rng)
    assert not constraint_residuals(ms.params, ms.mus).satisfied


def _pinned(p, index=0):
    return p.with_(kD=spectrum_for(p).roots[index])


def test_equilibrium_residual(rng):
    for _ in range(20):
        p = random_params(rng)
        for i, mu in enumerate(spectrum_for(p).roots):
            if all(ok for _, ok in guard_outcomes(p, mu)):
                q = _pinned(p, i)
                xbar = equilibrium(q, 1.0)
                assert equilibrium_residual(q, xbar) <= 1e-9
                break


def test_equilibrium_homogeneous_in_x4bar(rng):
    q = _pinned(random_params(rng))
    x1, x2 = equilibrium(q, 1.0), equilibrium(q, 2.0)
    assert all(abs(b - 2 * a) <= 1e-12 * abs(2 * a) for a, b in zip(x1.x, x2.x))


def test_equilibrium_at_origin_is_singular(rng):
    with pytest.raises(SingularDenominator):
        equilibrium(_pinned(random_params(rng)), 0.0)


def test_equilibrium_needs_kD_root(simple_params):
    with pytest.raises(NotEquilibriumParameterization) as e:
        equilibrium(simple_params)
    assert e.value.residual > 1e-9
