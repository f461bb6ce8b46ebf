import numpy as np
import pytest

from slowfast.classifier import classify
from slowfast.exceptions import ConstructionError
from slowfast.fast import (FastParams, apply_F, choose_params, compute_r1, make_grid, solve_fixed_point,
                           validate_solution)
from slowfast.integrator import IntegratorConfig, integrate
from slowfast.models import OrderBounds, ProblemDefinition, make_linear, make_neumann_interval, make_ode2_fast
from slowfast.spectral import SpectrumSpec, basis_vector, norm_DA_alpha


@pytest.fixture(scope="module")
def neumann():
    return make_neumann_interval(16)


@pytest.fixture(scope="module")
def constructed(neumann):
    spec = neumann.spectrum
    params = choose_params(neumann, 1.0, 0.04)
    eps = params.r0 / (np.sqrt(2) + np.sqrt(5))
    v0, w0 = basis_vector(spec, 1, eps), basis_vector(spec, 2, eps)
    return params, v0, w0, solve_fixed_point(neumann, 1.0, v0, w0, params)


def test_choose_params_examples(neumann):
    params = choose_params(neumann, 1.0, 0.01)
    assert params.beta == 4.0 and params.delta == 2.0
    assert np.exp(-(params.delta - params.lam) * params.T) < 1e-10
    top = make_linear(SpectrumSpec((0.0, 1.0, 4.0)))
    top = ProblemDefinition(top.spectrum, top.f, OrderBounds(0.0, 2.0, 2.0, 0.0, True, 1e6), "lin")
    p = choose_params(top, 4.0, 0.1)
    assert np.isinf(p.beta) and p.delta == pytest.approx(4 + 0.5 * 2 * 4)
    assert compute_r1(0.1, 2.0) == pytest.approx(0.24495, abs=1e-5)


def test_r0_halving_and_unattainable(neumann):
    p = choose_params(neumann, 1.0, 1.0)
    assert p.r0 < 1.0 and p.r0_requested == 1.0 and p.slack["contraction"] >= 0 and p.slack["ball"] > 0
    assert choose_params(neumann, 1.0, p.r0).r0 == p.r0
    huge = ProblemDefinition(neumann.spectrum, neumann.f,
                             OrderBounds(1.0, 2.0, 2.0, 1e30, True, 1.0), "huge-L")
    with pytest.raises(ConstructionError, match="smallness unattainable with sampled L"):
        choose_params(huge, 1.0, 0.1)


def test_grid_shape():
    g = make_grid(20.0)
    assert g[0] == 0 and g[-1] == 20.0 and np.all(np.diff(g) > 0)
    assert np.max(np.diff(g)) <= 0.02 + 1e-12
    # 64 points per decade while steps are below the cap
    early = g[(g >= 1e-3) & (g <= 1e-2)]
    assert 62 <= len(early) <= 66


def _linear_params(spec, lam, r0=1.0):
    prob = make_linear(spec)
    return prob, choose_params(prob, lam, r0)


def test_apply_F_linear_cases():
    spec = SpectrumSpec((0.0, 1.0, 4.0, 9.0))
    prob, params = _linear_params(spec, 1.0)
    g0 = np.zeros((len(params.grid), 4))
    v0 = np.array([0.0, 0.3, 0.0, 0.0])
    assert np.all(apply_F(g0, params, prob, v0, np.zeros(4)) == 0)
    w0 = np.array([0.0, 0.0, 0.2, 0.1])
    gbar = apply_F(g0, params, prob, v0, w0)
    t = params.grid[:, None]
    exact = np.exp(-(np.array(spec.eigenvalues) - params.delta) * t) * w0
    assert np.allclose(gbar, exact, rtol=1e-12, atol=1e-300)
    sup = np.max(norm_DA_alpha(spec, gbar))
    assert sup == pytest.approx(norm_DA_alpha(spec, w0), rel=1e-12)


def test_apply_F_closed_form_fixed_point():
    # x = v e^{-t}, y' + 10 y = 2 v^2 e^{-2t}  =>  y = v^2/4 e^{-2t} + C e^{-10t}
    prob = make_ode2_fast(1.0, 10.0, 1.0, 1.0)
    params = choose_params(prob, 1.0, 1e-3)
    v, C = 1e-3 / 4, 2e-5
    t = params.grid
    y = v ** 2 / 4 * np.exp(-2 * t) + C * np.exp(-10 * t)
    g = np.stack([np.zeros_like(t), y * np.exp(params.delta * t)], axis=1)
    v0, w0 = np.array([v, 0.0]), np.array([0.0, v ** 2 / 4 + C])
    gbar = apply_F(g, params, prob, v0, w0)
    assert np.max(np.abs(gbar - g)) < 1e-6 * np.max(np.abs(g))


def test_solve_trivial_cases():
    spec = SpectrumSpec((0.0, 1.0, 4.0))
    prob, params = _linear_params(spec, 1.0)
    zero = solve_fixed_point(prob, 1.0, np.zeros(3), np.zeros(3), params)
    assert np.all(zero.u0 == 0) and np.all(zero.w1 == 0) and np.all(zero.g_star == 0)
    v0, w0 = np.array([0.0, 0.3, 0.0]), np.array([0.0, 0.0, 0.2])
    sol = solve_fixed_point(prob, 1.0, v0, w0, params)
    assert sol.iterations <= 2
    assert np.allclose(sol.w1, v0, atol=1e-15) and np.allclose(sol.u0, v0 + w0, atol=1e-12)


def test_solve_rejects_bad_data(neumann):
    params = choose_params(neumann, 1.0, 0.04)
    spec = neumann.spectrum
    with pytest.raises(ValueError):
        solve_fixed_point(neumann, 1.0, basis_vector(spec, 2, 1e-3), np.zeros(16), params)
    with pytest.raises(ValueError):
        solve_fixed_point(neumann, 1.0, basis_vector(spec, 1, 1.0), np.zeros(16), params)
    with pytest.raises(ValueError):
        solve_fixed_point(neumann, 1.0, basis_vector(spec, 1, 1e-3), basis_vector(spec, 0, 1e-3), params)


def test_left_ball(neumann):
    p = choose_params(neumann, 1.0, 0.04)
    spec = neumann.spectrum
    bad = FastParams(p.lam, p.beta, p.delta, 10.0, compute_r1(10.0, p.beta), p.T, p.grid)
    with pytest.raises(ConstructionError, match="left validity ball"):
        solve_fixed_point(neumann, 1.0, basis_vector(spec, 1, 0.8), np.zeros(16), bad)


def test_stall_detection(neumann):
    params = choose_params(neumann, 1.0, 0.04)
    v0 = basis_vector(neumann.spectrum, 1, 0.01)
    with pytest.raises(ConstructionError, match="no contraction; check smallness slack"):
        solve_fixed_point(neumann, 1.0, v0, np.zeros(16), params, tol=0.0, stall_ratio=-1.0, stall_count=3)


def test_contraction_properties(constructed):
    params, v0, w0, sol = constructed
    assert sol.residual < 1e-10
    assert all(s <= params.r1 for s in sol.sup_norms)
    assert all(r <= 0.55 for r in sol.contraction_ratios)
    d = np.array(sol.distances)
    to_star = np.array([d[k:].sum() for k in range(len(d))])
    assert np.all(to_star <= 2 * d[0] * 2.0 ** -np.arange(len(d)))
    assert np.array_equal(sol.u0[2:], w0[2:])


def test_validate_and_pinning(neumann, constructed):
    params, v0, w0, sol = constructed
    cfg = IntegratorConfig(dt=1e-3, t_end=8.0)
    ok = validate_solution(sol, neumann, params, cfg)
    assert ok.passed and ok.window_error < 1e-4 and ok.match_error < 1e-6
    bad = validate_solution(sol, neumann, params, cfg, u0=w0 + 1.1 * sol.w1)
    assert not bad.passed and bad.window_error > 1e-4


def test_round_trip_profile(neumann, constructed):
    params, v0, w0, sol = constructed
    traj = integrate(neumann, sol.u0, IntegratorConfig(dt=1e-3, t_end=10.0, diag_stride=10))
    rep = classify(traj, neumann)
    assert rep.verdict == "fast" and rep.lambda_snapped == 1.0
    assert norm_DA_alpha(neumann.spectrum, rep.v0_hat - v0) < 1e-4


def test_linear_validation_exact():
    # wide gap so the w0 tail is negligible over the window
    spec = SpectrumSpec((0.0, 1.0, 16.0))
    prob, params = _linear_params(spec, 1.0)
    sol = solve_fixed_point(prob, 1.0, np.array([0.0, 0.3, 0.0]), np.array([0.0, 0.0, 0.1]), params)
    rep = validate_solution(sol, prob, params, IntegratorConfig(dt=1e-3, t_end=8.0))
    assert rep.passed and rep.window_error < 1e-10 and rep.match_error < 1e-10


def test_window_truncated_for_high_lambda(neumann):
    spec = neumann.spectrum
    lam = spec.eigenvalues[3]
    params = choose_params(neumann, lam, 0.04)
    block = int(np.flatnonzero(spec.mode_block == 3)[0])
    v0 = basis_vector(spec, block, 0.04 / float(norm_DA_alpha(spec, basis_vector(spec, block))))
    sol = solve_fixed_point(neumann, lam, v0, np.zeros(16), params)
    rep = validate_solution(sol, neumann, params, IntegratorConfig(dt=1e-3, t_end=8.0))
    assert rep.passed and rep.match_error < 1e-9
    lo, hi = rep.window_effective
    assert lo == 2.0 and hi < 8.0
    assert np.finfo(float).eps * 0.04 * np.exp(lam * hi) == pytest.approx(1e-4, rel=1e-9)
