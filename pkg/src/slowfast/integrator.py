"""Exponential integrators for u' + Au = f(u) in eigen-coordinates.

The linear part is propagated exactly mode by mode, so large eigenvalues
never limit the step.  Step sizes are either fixed or geometric
(``h = clip(dt_ratio * t, dt, dt_max)``), the latter giving log-spaced
samples over many decades at a cost that grows only with log(t_end).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expint import linear_weights, phi1, phi2
from .exceptions import OutsideBallError
from .models import ProblemDefinition
from .spectral import SpectrumSpec, norm_A_alpha, norm_DA_alpha, norm_H

SCHEMES = ("etd1", "etd2rk")
QUOTIENT_FLOOR = 1e-150


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    t_end: float = 10.0
    scheme: str = "etd2rk"
    diag_stride: int = 1
    blowup_norm: float = 1e6
    dt_ratio: float = 0.0
    dt_max: float = float("inf")
    store_states: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end > 0:
            raise ValueError("zero-length time span")
        if not self.dt < self.t_end:
            raise ValueError("dt must be smaller than t_end")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.diag_stride < 1:
            raise ValueError("diag_stride must be a positive integer")
        if not self.blowup_norm > 0:
            raise ValueError("blowup_norm must be positive")
        if self.dt_ratio < 0 or not self.dt_max >= self.dt:
            raise ValueError("need dt_ratio >= 0 and dt_max >= dt")

    def replace(self, **changes) -> "IntegratorConfig":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return IntegratorConfig(**fields)


@dataclass
class Trajectory:
    """Time samples of a solution with norm and quotient diagnostics.

    ``Q`` and ``Q_2p`` are NaN where ``|u| < 1e-150``.
    """

    spectrum: SpectrumSpec
    times: np.ndarray
    norm_H: np.ndarray
    norm_Ahalf: np.ndarray
    Q: np.ndarray
    Q_2p: np.ndarray
    p: float
    terminated: str = "completed"
    states: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_states(cls, spectrum, times, states, p, terminated="completed", keep_states=True, meta=None):
        times = np.asarray(times, dtype=float)
        states = np.asarray(states, dtype=float)
        nh = norm_H(states)
        na = norm_A_alpha(spectrum, states, 0.5)
        ok = nh >= QUOTIENT_FLOOR
        safe = np.where(ok, nh, 1.0)
        with np.errstate(over="ignore", divide="ignore"):
            Q = np.where(ok, na ** 2 / safe ** 2, np.nan)
            Q2p = np.where(ok, na ** 2 / safe ** (2 + 2 * p), np.nan)
        return cls(spectrum, times, nh, na, Q, Q2p, p, terminated,
                   states if keep_states else None, dict(meta or {}))

    def __len__(self):
        return len(self.times)

    @property
    def norm_D(self) -> np.ndarray:
        return np.sqrt(self.norm_H ** 2 + self.norm_Ahalf ** 2)

    def subsample(self, stride: int) -> "Trajectory":
        """Every ``stride``-th sample, always keeping the last one."""
        idx = np.arange(0, len(self), stride)
        if idx[-1] != len(self) - 1:
            idx = np.append(idx, len(self) - 1)
        return Trajectory(self.spectrum, self.times[idx], self.norm_H[idx], self.norm_Ahalf[idx],
                          self.Q[idx], self.Q_2p[idx], self.p, self.terminated,
                          None if self.states is None else self.states[idx], dict(self.meta))

    def window(self, t_min: float, t_max: float = np.inf) -> np.ndarray:
        return (self.times >= t_min) & (self.times <= t_max)

    def state_at(self, t: float) -> np.ndarray:
        """Linear interpolation of the stored states at time ``t``."""
        if self.states is None:
            raise ValueError("trajectory does not store states")
        return np.array([np.interp(t, self.times, col) for col in self.states.T])


def _coefficients(lam, h, scheme):
    z = -h * lam
    e = np.exp(z)
    if scheme == "etd1":
        return e, h * phi1(z), None
    return e, h * phi1(z), h * phi2(z)


def integrate(prob: ProblemDefinition, u0, cfg: IntegratorConfig) -> Trajectory:
    """Advance ``u' + Au = f(u)`` from ``u0`` to ``cfg.t_end``.

    Stops early with ``terminated='left_ball'`` when ``|u|_D(A^1/2) >= R`` and
    with ``'blowup'`` when ``|u|`` exceeds ``blowup_norm`` or turns non-finite.
    """
    spec = prob.spectrum
    lam = spec.mode_eigenvalues
    R = prob.bounds.R
    u = np.array(u0, dtype=float)
    if u.shape != (spec.total_dim,):
        raise ValueError("initial state does not match the spectrum")
    if norm_DA_alpha(spec, u) >= R:
        raise OutsideBallError("outside validity ball")
    f = prob.f

    times, states = [0.0], [u.copy()]
    t, step, status = 0.0, 0, "completed"
    cached_h, coeffs = None, None
    while t < cfg.t_end:
        h = cfg.dt if cfg.dt_ratio == 0 else min(max(cfg.dt_ratio * t, cfg.dt), cfg.dt_max)
        if t + h >= cfg.t_end * (1 - 1e-14):
            h = cfg.t_end - t
        if h != cached_h:
            coeffs, cached_h = _coefficients(lam, h, cfg.scheme), h
        e, w1, w2 = coeffs
        fu = f(u)
        a = e * u + w1 * fu
        if cfg.scheme == "etd1":
            u = a
        else:
            u = a + w2 * (f(a) - fu)
        step += 1
        t = cfg.t_end if h == cfg.t_end - t else t + h

        nh = norm_H(u)
        if not np.isfinite(nh) or nh > cfg.blowup_norm:
            status = "blowup"
        elif norm_DA_alpha(spec, u) >= R:
            status = "left_ball"
        if status != "completed" or step % cfg.diag_stride == 0 or t >= cfg.t_end:
            if status != "blowup" or np.all(np.isfinite(u)):
                times.append(t)
                states.append(u.copy())
        if status != "completed":
            break
    return Trajectory.from_states(spec, times, states, prob.bounds.p, status, cfg.store_states,
                                  meta={"scheme": cfg.scheme, "dt": cfg.dt, "dt_ratio": cfg.dt_ratio,
                                        "steps": step})


def integrate_linear_forced(spectrum: SpectrumSpec, u0, g, cfg: IntegratorConfig, p: float = 1.0) -> Trajectory:
    """Mild solution of ``w' + Aw = g(t)``, exact for piecewise-linear forcing.

    ``g`` is either a callable ``t -> array`` sampled every ``cfg.dt``, or a
    pair ``(times, values)`` with ``values`` of shape ``(len(times), dim)``.
    Samples are returned at the forcing grid points (thinned by ``diag_stride``).
    """
    lam = spectrum.mode_eigenvalues
    if callable(g):
        n = int(np.ceil(cfg.t_end / cfg.dt - 1e-9))
        grid = np.linspace(0.0, cfg.t_end, n + 1)
        values = np.array([np.broadcast_to(g(s), lam.shape) for s in grid], dtype=float)
    else:
        grid, values = (np.asarray(a, dtype=float) for a in g)
        if grid[0] > 0 or grid[-1] < cfg.t_end * (1 - 1e-12):
            raise ValueError("forcing grid shorter than t_end")
        values = np.broadcast_to(values.reshape(len(grid), -1), (len(grid), lam.size))
        keep = grid <= cfg.t_end * (1 + 1e-12)
        grid, values = grid[keep], values[keep]
    w = np.array(u0, dtype=float)
    times, states = [grid[0]], [w.copy()]
    for i in range(len(grid) - 1):
        h = grid[i + 1] - grid[i]
        # int_0^h e^{-lam(h-s)} g(t_i + s) ds with g linear on the step
        w_new, w_old = linear_weights(lam, h)
        w = np.exp(-h * lam) * w + w_new * values[i + 1] + w_old * values[i]
        if (i + 1) % cfg.diag_stride == 0 or i + 1 == len(grid) - 1:
            times.append(grid[i + 1])
            states.append(w.copy())
    return Trajectory.from_states(spectrum, times, states, p, keep_states=True,
                                  meta={"scheme": "exponential-quadrature"})
