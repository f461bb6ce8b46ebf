import numpy as np
import pytest

from slowfast.exceptions import OutsideBallError
from slowfast.models import (TransformPair, _random_states, eval_nonlinearity, make_custom,
                             make_dirichlet_interval, make_linear, make_neumann_interval, make_ode2_fast,
                             make_ode2_slow, ode2_fast_eta, ode2_slow_x)
from slowfast.spectral import SpectrumSpec, basis_vector, norm_A_alpha, norm_DA_alpha, norm_H

PDE = [make_neumann_interval(16), make_dirichlet_interval(16, critical=True),
       make_dirichlet_interval(16, critical=False)]
BUILTIN = [make_ode2_slow(), make_ode2_fast(1, 10, 1, 1), make_ode2_fast(1, 1.5, 1, 1)] + PDE


def test_ode2_slow_examples():
    prob = make_ode2_slow()
    assert eval_nonlinearity(prob, [1.0, 0.0]).tolist() == [-1.0, 1.0]
    assert eval_nonlinearity(prob, [0.0, 0.0]).tolist() == [0.0, 0.0]
    assert np.isclose(ode2_slow_x(4.0), 1 / 3)


def test_ode2_fast_examples():
    assert ode2_fast_eta(1, 10, 1, 1) == 2
    assert ode2_fast_eta(1, 1.5, 1, 1) == 1.5
    with pytest.raises(ValueError, match="requires spectral gap above lambda"):
        make_ode2_fast(1, 1, 1, 1)
    prob = make_ode2_fast(1, 10, 1, 1)
    assert np.allclose(prob.f(np.array([0.0, 0.7])), 0)


def test_spectra():
    assert make_neumann_interval(4).spectrum.eigenvalues == (0.0, 1.0, 4.0, 9.0)
    crit = make_dirichlet_interval(3, critical=True)
    assert crit.spectrum.eigenvalues == (0.0, 3.0, 8.0) and crit.spectrum.nu == 3.0
    sub = make_dirichlet_interval(2, critical=False, shift=0.5)
    assert sub.spectrum.eigenvalues == (0.5, 3.5) and sub.spectrum.kernel_dim == 0


def test_outside_ball():
    prob = make_neumann_interval(8)
    with pytest.raises(OutsideBallError, match="outside validity ball"):
        eval_nonlinearity(prob, basis_vector(prob.spectrum, 0, 2.0))


@pytest.mark.parametrize("kind", ["cosine", "sine"])
def test_transform_round_trip(kind):
    tp = TransformPair(16, kind)
    rng = np.random.default_rng(0)
    c = rng.standard_normal((5, 16))
    assert np.allclose(tp.analysis(tp.synthesis(c)), c, atol=1e-10)
    # basis functions are orthonormal in L2(0, pi)
    x = (np.arange(tp.grid_size) + 0.5) * np.pi / tp.grid_size
    assert np.allclose(tp.synthesis(np.eye(16)[3]), tp.basis_values(3), atol=1e-12)
    assert np.isclose(np.sum(tp.basis_values(3) ** 2) * np.pi / tp.grid_size, 1.0)
    assert x.shape == (tp.grid_size,)
    with pytest.raises(ValueError):
        TransformPair(16, kind, grid_size=20)


def test_neumann_constant_state_maps_to_kernel():
    prob = make_neumann_interval(8, p=2.0, c=1.0)
    c = 0.3
    fu = eval_nonlinearity(prob, basis_vector(prob.spectrum, 0, c))
    # grid value c/sqrt(pi) is cubed, so the kernel coefficient is -c^3/pi
    assert np.isclose(fu[0], -c ** 3 / np.pi, rtol=1e-12)
    assert np.allclose(fu[1:], 0, atol=1e-15)


@pytest.mark.parametrize("prob", BUILTIN, ids=lambda p: f"{p.name}-{p.spectrum.eigenvalues[0]}")
def test_order_bound(prob):
    rng = np.random.default_rng(11)
    u = _random_states(prob.spectrum, rng, 1000, prob.bounds.R / 2)
    b = prob.bounds
    lhs = norm_H(prob.f(u))
    rhs = b.K0 * (norm_H(u) ** (1 + b.p) + norm_A_alpha(prob.spectrum, u, 0.5) ** (1 + b.q))
    assert np.all(lhs <= rhs * (1 + 1e-12))


@pytest.mark.parametrize("prob", BUILTIN, ids=lambda p: f"{p.name}-{p.spectrum.eigenvalues[0]}")
def test_lipschitz_bound(prob):
    rng = np.random.default_rng(12)
    spec, b = prob.spectrum, prob.bounds
    u = _random_states(spec, rng, 1000, b.R / 2)
    v = _random_states(spec, rng, 1000, b.R / 2)
    lhs = norm_H(prob.f(u) - prob.f(v))
    s = b.lip_exponent
    rhs = b.L * (norm_DA_alpha(spec, u) ** s + norm_DA_alpha(spec, v) ** s) * norm_DA_alpha(spec, u - v)
    assert np.all(lhs <= rhs * (1 + 1e-12))


@pytest.mark.parametrize("prob", PDE, ids=lambda p: f"{p.name}-{p.spectrum.eigenvalues[0]}")
def test_sign_condition(prob):
    assert prob.bounds.sign_condition
    rng = np.random.default_rng(13)
    u = _random_states(prob.spectrum, rng, 1000, prob.bounds.R / 2)
    assert np.all(np.sum(u * prob.f(u), axis=-1) <= 1e-10)


def test_sampled_constants_reproducible():
    a, b = make_neumann_interval(8, seed=3), make_neumann_interval(8, seed=3)
    assert a.bounds.K0 == b.bounds.K0 and a.bounds.L == b.bounds.L
    assert a.bounds.provenance["K0"] == "sampled"


def test_linear_and_custom():
    lin = make_linear(SpectrumSpec((0.0, 2.0)))
    assert np.all(lin.f(np.ones(2)) == 0) and lin.linear
    # custom version of ode2_slow: f0 = -x^3, f1 = x^3
    cu = make_custom([0.0, 1.0], [{"component": 0, "coeff": -1.0, "powers": [3, 0]},
                                  {"component": 1, "coeff": 1.0, "powers": [3, 0]}], R=10.0)
    assert cu.bounds.p == 2.0
    assert np.allclose(cu.f(np.array([0.5, 0.2])), make_ode2_slow().f(np.array([0.5, 0.2])))
    with pytest.raises(ValueError):
        make_custom([0.0, 1.0], [{"component": 0, "coeff": 1.0, "powers": [1, 0]}])
    assert make_custom([0.0, 1.0], []).linear
