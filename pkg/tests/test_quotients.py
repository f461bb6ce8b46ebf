import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from slowfast.exceptions import QuotientUndefined
from slowfast.integrator import IntegratorConfig, Trajectory, integrate
from slowfast.models import make_linear, make_neumann_interval, make_ode2_fast, make_ode2_slow
from slowfast.quotients import check_quotient_inequalities, quotient
from slowfast.slow import compute_constants, monitor_certified_run, sample_certified
from slowfast.spectral import SpectrumSpec

S01 = SpectrumSpec((0.0, 1.0))


def test_quotient_examples():
    nu = 2.5
    assert quotient(SpectrumSpec((0.0, nu)), [0.0, 1.0]) == pytest.approx(nu)
    assert quotient(S01, [1.0, 0.0], 3.0) == 0.0
    assert quotient(S01, [1.0, 1.0], 2.0) == pytest.approx(0.25)
    with pytest.raises(QuotientUndefined, match="quotient undefined at zero"):
        quotient(S01, [0.0, 0.0])


SPEC = SpectrumSpec((0.0, 1.0, 4.0, 9.0))
nonzero = arrays(np.float64, 4, elements=st.floats(-5, 5, allow_nan=False)).filter(
    lambda u: np.linalg.norm(u) > 1e-6)


@settings(max_examples=80, deadline=None)
@given(nonzero, st.floats(0.01, 100), st.floats(0, 6))
def test_rayleigh_bound_and_scaling(u, alpha, d):
    q = quotient(SPEC, u)
    support = np.asarray(SPEC.eigenvalues)[np.abs(u) > 0]
    assert support.min() * (1 - 1e-12) <= q <= support.max() * (1 + 1e-12)
    assert quotient(SPEC, alpha * u, d) == pytest.approx(alpha ** -d * quotient(SPEC, u, d), rel=1e-12)


def test_ode2_slow_inequalities():
    prob = make_ode2_slow()
    traj = integrate(prob, [1.0, 0.1], IntegratorConfig(dt=1e-3, t_end=50.0))
    for d in (0.0, 4.0):
        rep = check_quotient_inequalities(traj, prob, d)
        assert rep.passed, rep.to_dict()
        assert set(rep.to_dict()) >= {"max_margin", "argmax_t", "tolerance", "pass"}


def test_linear_quotient_monotone_and_single_mode_constant():
    prob = make_linear(SpectrumSpec((0.0, 1.0, 3.0)))
    traj = integrate(prob, [0.0, 1.0, 1.0], IntegratorConfig(dt=1e-2, t_end=5.0))
    assert np.all(np.diff(traj.Q) <= 1e-15)
    assert check_quotient_inequalities(traj, prob, 0.0).passed
    single = integrate(prob, [0.0, 0.0, 2.0], IntegratorConfig(dt=1e-2, t_end=5.0))
    assert np.allclose(single.Q, 3.0, rtol=1e-14)
    rep = check_quotient_inequalities(single, prob, 0.0)
    assert rep.passed and abs(rep.max_margin) < 1e-9


def test_fast_quotient_converges_to_eigenvalue():
    prob = make_ode2_fast(1, 10, 1, 1)
    traj = integrate(prob, [1.0, 0.5], IntegratorConfig(dt=1e-3, t_end=20.0))
    assert np.all(np.isfinite(traj.Q)) and np.max(traj.Q) < 10
    assert abs(traj.Q[-1] - 1.0) < 1e-6


def test_certified_slow_Q2p_below_K1():
    prob = make_neumann_interval(16)
    cert = compute_constants(prob.bounds, prob.spectrum.nu, prob.spectrum.kernel_dim)
    u0 = sample_certified(prob.spectrum, cert, np.random.default_rng(1), 1)[0]
    rep = monitor_certified_run(prob, u0, cert, IntegratorConfig(dt=1e-3, t_end=1e3, dt_ratio=0.01))
    assert np.nanmax(rep.trajectory.Q_2p) < cert.K1


def test_check_errors():
    prob = make_ode2_slow()
    zero = Trajectory.from_states(prob.spectrum, [0, 1, 2], np.zeros((3, 2)), 2.0)
    with pytest.raises(ValueError, match="fewer than 3"):
        check_quotient_inequalities(zero, prob, 0.0)
    nogap = make_linear(SpectrumSpec((0.0,)))
    traj = integrate(nogap, [1.0], IntegratorConfig(dt=0.1, t_end=1.0))
    with pytest.raises(ValueError):
        check_quotient_inequalities(traj, nogap, 2.0)
    short = integrate(prob, [1.0, 0.0], IntegratorConfig(dt=0.1, t_end=1.0, store_states=False))
    with pytest.raises(ValueError):
        check_quotient_inequalities(short, prob, 0.0)
