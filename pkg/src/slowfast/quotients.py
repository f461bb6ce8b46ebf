"""Dirichlet quotients and the differential inequalities they satisfy.

    Q(u)   = |A^(1/2) u|^2 / |u|^2
    Q_d(u) = |A^(1/2) u|^2 / |u|^(2+d)

Along u' + Au = g, with g = f(u):

    Q'   <= -|Au - Qu|^2 / |u|^2 + |g|^2 / |u|^2
    Q_d' <= -nu Q_d + 2(2+d)|u|^d Q_d^2 + (3+d)|g|^2 / |u|^(2+d)    (d > 0)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import QuotientUndefined
from .integrator import QUOTIENT_FLOOR, Trajectory
from .models import ProblemDefinition
from .spectral import SpectrumSpec, norm_A_alpha, norm_H

DEFAULT_ATOL = 1e-6
DEFAULT_C = 2.0


def quotient(spec: SpectrumSpec, u, d: float = 0.0) -> float:
    u = np.asarray(u, dtype=float)
    n = norm_H(u)
    if n == 0:
        raise QuotientUndefined("quotient undefined at zero")
    return float(norm_A_alpha(spec, u, 0.5) ** 2 / n ** (2 + d))


@dataclass
class QuotientCheck:
    d: float
    max_margin: float
    argmax_t: float
    tolerance: float
    passed: bool
    n_checked: int
    n_violations: int

    def to_dict(self) -> dict:
        return {"d": self.d, "max_margin": self.max_margin, "argmax_t": self.argmax_t,
                "tolerance": self.tolerance, "pass": self.passed,
                "n_checked": self.n_checked, "n_violations": self.n_violations}


def _quotient_series(spec, states, d):
    nh = norm_H(states)
    na2 = norm_A_alpha(spec, states, 0.5) ** 2
    return na2 / nh ** (2 + d), nh


def quotient_rhs(prob: ProblemDefinition, states, d: float) -> np.ndarray:
    """Right-hand side of the quotient inequality at each state, with ``g = f(u)``."""
    spec = prob.spectrum
    lam = spec.mode_eigenvalues
    g = prob.f(states)
    g2 = norm_H(g) ** 2
    qd, nh = _quotient_series(spec, states, d)
    if d == 0:
        resid = states * lam - qd[:, None] * states
        return -norm_H(resid) ** 2 / nh ** 2 + g2 / nh ** 2
    nu = spec.nu
    return -nu * qd + 2 * (2 + d) * nh ** d * qd ** 2 + (3 + d) * g2 / nh ** (2 + d)


def check_quotient_inequalities(traj: Trajectory, prob: ProblemDefinition, d: float,
                                atol: float = DEFAULT_ATOL, c_tol: float = DEFAULT_C) -> QuotientCheck:
    """Compare centred finite differences of ``Q_d`` with the inequality's right side.

    At sample ``i`` the allowed excess is ``max(atol, c_tol * h_i^2 * |Q_d''|_loc)``
    plus a relative floor of ``1e-9 * (|Q_d'| + |rhs|)``: the inequality holds
    exactly in continuous time, so only discretisation may exceed it.
    """
    if traj.states is None:
        raise ValueError("quotient check needs stored states")
    if d < 0:
        raise ValueError("d must be nonnegative")
    if d > 0 and not prob.spectrum.nu:
        raise ValueError("Q_d inequality needs a positive spectral gap")
    keep = traj.norm_H >= QUOTIENT_FLOOR
    if keep.sum() < 3:
        raise ValueError("fewer than 3 samples with nonzero state")
    t = traj.times[keep]
    states = traj.states[keep]
    qd, _ = _quotient_series(prob.spectrum, states, d)
    dq = np.gradient(qd, t)
    d2q = np.gradient(dq, t)
    rhs = quotient_rhs(prob, states, d)

    interior = slice(1, -1)
    h = np.maximum(t[2:] - t[1:-1], t[1:-1] - t[:-2])
    curv = np.maximum.reduce([np.abs(d2q[:-2]), np.abs(d2q[1:-1]), np.abs(d2q[2:])])
    tol = np.maximum(atol, c_tol * h ** 2 * curv) + 1e-9 * (np.abs(dq[interior]) + np.abs(rhs[interior]))
    margin = dq[interior] - rhs[interior]
    excess = margin - tol
    k = int(np.argmax(excess))
    return QuotientCheck(d=float(d), max_margin=float(margin[k]), argmax_t=float(t[1:-1][k]),
                         tolerance=float(tol[k]), passed=bool(np.all(excess <= 0)),
                         n_checked=int(margin.size), n_violations=int(np.sum(excess > 0)))
