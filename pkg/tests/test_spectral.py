import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from slowfast.exceptions import SemigroupOverflow
from slowfast.spectral import (SpectralSplit, SpectrumSpec, kernel_projection, norm_A_alpha,
                               norm_DA_alpha, norm_H, project, semigroup_apply)

S01 = SpectrumSpec((0.0, 1.0))
S014 = SpectrumSpec((0.0, 1.0, 4.0))


def test_norm_H_examples():
    assert norm_H(np.array([3.0, 4.0])) == 5.0
    assert norm_H(np.zeros(2)) == 0.0
    assert np.isclose(norm_H(np.ones(3)), np.sqrt(3))


def test_norm_A_alpha_examples():
    assert np.isclose(norm_A_alpha(S01, [1.0, 1.0], 0.5), 1.0)
    assert np.isclose(norm_A_alpha(SpectrumSpec((4.0,)), [2.0], 0.5), 4.0)
    assert np.isclose(norm_DA_alpha(S01, [1.0, 1.0], 0.5), np.sqrt(3))
    # 0^0 = 1 makes A^0 the identity
    assert np.isclose(norm_A_alpha(S014, [1.0, 2.0, 3.0], 0.0), norm_H(np.array([1.0, 2.0, 3.0])))


def test_project_examples():
    split = SpectralSplit.at(S014, 1.0)
    u = np.array([1.0, 2.0, 3.0])
    assert project(u, split, "plus").tolist() == [0, 0, 3]
    assert project(u, split, "minus").tolist() == [1, 2, 0]
    assert project(u, split, "lambda").tolist() == [0, 2, 0]
    parts = project(u, split, "below") + project(u, split, "lambda") + project(u, split, "plus")
    assert parts.tolist() == u.tolist()


def test_kernel_projection_trivial_kernel_is_zero():
    spec = SpectrumSpec((0.5, 3.5))
    assert np.all(kernel_projection(spec, np.array([1.0, 2.0])) == 0)
    split = SpectralSplit.at(spec, 0.5)
    assert np.all(project(np.array([1.0, 2.0]), split, "kernel") == 0)


def test_semigroup_examples():
    spec = SpectrumSpec((0.0, 2.0))
    assert np.allclose(semigroup_apply(spec, [1.0, 1.0], np.log(2)), [1.0, 0.25])
    u = np.array([0.3, -0.2])
    assert np.array_equal(semigroup_apply(spec, u, 0.0), u)
    assert np.isclose(semigroup_apply(SpectrumSpec((1.0,)), [1.0], -1.0)[0], np.e)


def test_semigroup_overflow():
    with pytest.raises(SemigroupOverflow, match="semigroup overflow"):
        semigroup_apply(SpectrumSpec((1000.0,)), [1.0], -10.0)


def test_spectrum_validation_and_multiplicity():
    with pytest.raises(ValueError):
        SpectrumSpec((1.0, 0.5))
    with pytest.raises(ValueError):
        SpectrumSpec((-1.0, 1.0))
    spec = SpectrumSpec((0.0, 1.0, 4.0), (2, 1, 3))
    assert spec.total_dim == 6 and spec.kernel_dim == 2 and spec.nu == 1.0
    assert spec.next_above(2) == np.inf
    assert SpectrumSpec.from_dict(spec.to_dict()) == spec
    assert SpectrumSpec((0.5, 1.0)).kernel_dim == 0


states = arrays(np.float64, 5, elements=st.floats(-10, 10, allow_nan=False))
SPEC5 = SpectrumSpec((0.0, 1.0, 4.0, 9.0), (2, 1, 1, 1))


@settings(max_examples=60, deadline=None)
@given(states, st.sampled_from([1.0, 4.0, 9.0, 0.0]))
def test_parseval_and_idempotence(u, lam):
    split = SpectralSplit.at(SPEC5, lam)
    parts = [project(u, split, k) for k in ("below", "lambda", "plus")]
    total = sum(norm_H(p) ** 2 for p in parts)
    assert np.isclose(total, norm_H(u) ** 2, rtol=1e-12, atol=1e-300)
    for k in ("minus", "lambda", "plus", "kernel"):
        once = project(u, split, k)
        assert np.array_equal(project(once, split, k), once)


@settings(max_examples=60, deadline=None)
@given(states, st.floats(0, 5), st.floats(0, 5))
def test_semigroup_group_law_and_smoothing(u, s, t):
    a = semigroup_apply(SPEC5, semigroup_apply(SPEC5, u, s), t)
    b = semigroup_apply(SPEC5, u, s + t)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-300)
    assert norm_H(semigroup_apply(SPEC5, u, t)) <= norm_H(u) * (1 + 1e-15)


@settings(max_examples=60, deadline=None)
@given(states)
def test_gap_inequality(u):
    nu = SPEC5.nu
    range_part = u - kernel_projection(SPEC5, u)
    assert norm_A_alpha(SPEC5, u, 0.5) ** 2 >= nu * norm_H(range_part) ** 2 * (1 - 1e-12)
