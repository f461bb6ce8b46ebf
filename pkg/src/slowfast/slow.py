"""Explicit open set of slow solutions: constants, membership and monitoring.

    K1 = 4 K0^2 (3 + 2p) / nu

sigma0 must satisfy

    sigma0^2 + K1 sigma0^(2+2p) < R^2
    4(1+p) sigma0^(2p) K1^2 + 2 K0^2 (3+2p) K1^(1+q) sigma0^((2+2p)q) <= 2 K0^2 (3+2p)

and u0 is certified when u0 != 0, |u0| < sigma0 and |A^1/2 u0|^2 < K1 |u0|^(2+2p).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateConstants
from .integrator import IntegratorConfig, Trajectory, integrate
from .models import OrderBounds, ProblemDefinition
from .spectral import SpectrumSpec, norm_A_alpha, norm_DA_alpha, norm_H

SLACK = 0.9
SIGMA_FLOOR = 1e-12
MONITOR_CFG = IntegratorConfig(dt=1e-3, t_end=1e4, dt_ratio=0.01)
ENERGY_TOL = 1e-9


@dataclass(frozen=True)
class SlowCertificate:
    K1: float
    sigma0: float
    R: float
    nu: float
    K0: float
    p: float
    q: float
    witness: dict = field(default_factory=dict, compare=False)
    provenance: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {"K1": self.K1, "sigma0": self.sigma0, "R": self.R, "nu": self.nu,
                "K0": self.K0, "p": self.p, "q": self.q, "witness": self.witness,
                "provenance": self.provenance}


def _conditions(sigma, K0, K1, p, q, R):
    """Slack of the two smallness conditions, as fractions of their right sides."""
    c1 = (sigma ** 2 + K1 * sigma ** (2 + 2 * p)) / R ** 2
    rhs = 2 * K0 ** 2 * (3 + 2 * p)
    lhs = 4 * (1 + p) * sigma ** (2 * p) * K1 ** 2 + rhs * K1 ** (1 + q) * sigma ** ((2 + 2 * p) * q)
    c2 = lhs / rhs if rhs > 0 else 0.0
    return 1 - c1, 1 - c2


def compute_constants(bounds: OrderBounds, nu: float, kernel_dim: int | None = None,
                      strict: bool = True) -> SlowCertificate:
    """K1 by formula and sigma0 = R 2^-k for the smallest k giving 10% slack in both conditions.

    ``strict`` enforces the sign hypothesis; ode2_slow satisfies it only on
    the slow set itself, so callers may relax it knowingly.
    """
    if strict and not bounds.sign_condition:
        raise DegenerateConstants("sign condition <u, f(u)> <= 0 not asserted for these bounds")
    if kernel_dim is not None and kernel_dim == 0:
        raise DegenerateConstants("ker(A) is trivial: no slow solutions exist")
    if not nu or nu <= 0:
        raise DegenerateConstants("spectral gap nu must be positive")
    K0, p, q, R = bounds.K0, bounds.p, bounds.q, bounds.R
    K1 = 4 * K0 ** 2 * (3 + 2 * p) / nu
    sigma = float(R)
    while sigma > SIGMA_FLOOR:
        s1, s2 = _conditions(sigma, K0, K1, p, q, R)
        if s1 >= 1 - SLACK and s2 >= 1 - SLACK:
            return SlowCertificate(K1, sigma, R, nu, K0, p, q,
                                   witness={"ball_slack": s1, "smallness_slack": s2},
                                   provenance=dict(bounds.provenance))
        sigma /= 2
    raise DegenerateConstants("constants degenerate for these bounds")


@dataclass
class Membership:
    member: bool
    slacks: dict

    def to_dict(self) -> dict:
        return {"member": self.member, "slacks": self.slacks}


def certify(spec: SpectrumSpec, u0, cert: SlowCertificate) -> Membership:
    u0 = np.asarray(u0, dtype=float)
    n = float(norm_H(u0))
    a2 = float(norm_A_alpha(spec, u0, 0.5)) ** 2
    slacks = {"nonzero": n, "sigma": cert.sigma0 - n,
              "range": cert.K1 * n ** (2 + 2 * cert.p) - a2}
    return Membership(bool(n > 0 and slacks["sigma"] > 0 and slacks["range"] > 0), slacks)


@dataclass
class MonitorReport:
    passed: bool
    M1_hat: float
    first_violation: dict | None
    max_Q2p: float
    checks: dict
    trajectory: Trajectory | None = None

    def to_dict(self) -> dict:
        return {"pass": self.passed, "M1_hat": self.M1_hat, "first_violation": self.first_violation,
                "max_Q2p": self.max_Q2p, "checks": self.checks}


def monitor_certified_run(prob: ProblemDefinition, u0, cert: SlowCertificate,
                          cfg: IntegratorConfig = MONITOR_CFG, stability: float = 0.05) -> MonitorReport:
    """Integrate from a certified datum and check the running slow-set estimates sample-wise."""
    spec = prob.spectrum
    if not certify(spec, u0, cert).member:
        raise ValueError("initial datum is not certified")
    traj = integrate(prob, u0, cfg)
    t, n = traj.times, traj.norm_H
    y = n ** 2
    mono = np.flatnonzero(y[1:] > y[:-1] + ENERGY_TOL * max(y[0], 1e-300) + 1e-300) + 1
    q2p = np.nan_to_num(traj.Q_2p, nan=0.0)
    over = np.flatnonzero(q2p >= cert.K1)
    m1 = n * (1 + t) ** (1 / cert.p)
    late = t >= t[-1] / 10
    M1 = float(np.min(m1))
    M1_early = float(np.min(m1[~late])) if np.any(~late) else M1
    drift = abs(M1 - M1_early) / M1 if M1 > 0 else np.inf
    checks = {"monotone": mono.size == 0, "Q2p_below_K1": over.size == 0,
              "M1_stable": bool(M1 > 0 and drift <= stability),
              "terminated": traj.terminated, "M1_drift_last_decade": drift}
    first = None
    candidates = [(t[mono[0]], "monotone")] if mono.size else []
    candidates += [(t[over[0]], "Q2p_below_K1")] if over.size else []
    if candidates:
        tv, which = min(candidates)
        first = {"t": float(tv), "check": which}
    passed = bool(checks["monotone"] and checks["Q2p_below_K1"] and checks["M1_stable"]
                  and traj.terminated == "completed")
    return MonitorReport(passed, M1, first, float(np.max(q2p)), checks, traj)


def sample_certified(spec: SpectrumSpec, cert: SlowCertificate, rng, n: int,
                     range_fraction: float = 0.5, max_tries: int = 100):
    """Random members of the slow set: kernel part plus a range perturbation.

    The kernel amplitude is drawn in (0.1, 0.9) sigma0 and the range part is
    scaled so ``|A^1/2 u|^2`` uses at most ``range_fraction`` of the K1 budget.
    """
    kern = spec.mode_eigenvalues == 0
    if not kern.any():
        raise DegenerateConstants("ker(A) is trivial: no slow solutions exist")
    out = []
    for _ in range(n * max_tries):
        u = np.zeros(spec.total_dim)
        k = rng.standard_normal(kern.sum())
        u[kern] = k / np.linalg.norm(k) * rng.uniform(0.1, 0.9) * cert.sigma0
        w = rng.standard_normal(spec.total_dim) * (1 + spec.mode_eigenvalues) ** -1.0
        w[kern] = 0
        budget = rng.uniform(0, range_fraction) * cert.K1 * norm_H(u) ** (2 + 2 * cert.p)
        w *= np.sqrt(budget) / max(norm_A_alpha(spec, w, 0.5), 1e-300)
        u = u + w
        if certify(spec, u, cert).member:
            out.append(u)
            if len(out) == n:
                return np.array(out)
    raise RuntimeError("could not sample enough certified data")


def openness_probe(spec: SpectrumSpec, u0, cert: SlowCertificate, rng, n: int = 100,
                   rel: float = 1e-3, floor: float = 1e-12) -> dict:
    """Find a D(A^1/2) radius around a certified ``u0`` where all random perturbations stay certified.

    Starts from ``rel * |u0|_D`` and halves until ``n`` random perturbations
    of that size are all members; the set is open, so a positive radius exists.
    """
    if not certify(spec, u0, cert).member:
        raise ValueError("probe centre is not certified")
    u0 = np.asarray(u0, dtype=float)
    radius = rel * float(norm_DA_alpha(spec, u0))
    dirs = rng.standard_normal((n, spec.total_dim))
    dirs /= norm_DA_alpha(spec, dirs)[:, None]
    halvings = 0
    while radius > floor * max(float(norm_DA_alpha(spec, u0)), 1.0):
        ok = [certify(spec, u0 + radius * d, cert).member for d in dirs]
        if all(ok):
            return {"pass": True, "radius": radius, "relative_radius": radius / float(norm_DA_alpha(spec, u0)),
                    "halvings": halvings, "n": n}
        radius /= 2
        halvings += 1
    return {"pass": False, "radius": 0.0, "halvings": halvings, "n": n}
