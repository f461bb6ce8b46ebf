"""Problem library: operators ``A`` with nonlinearities ``f`` and their bounds.

Built-in instances:

* ``ode2_slow``   x' = -x^3,  y' + y = x^3                 (spectrum {0, 1})
* ``ode2_fast``   x' + lam x = 0,  y' + beta y = |x|^(1+p) + |x|^(1+q)
* ``neumann_interval``    u_t - u_xx + c|u|^p u = 0 on (0, pi), Neumann BC
* ``dirichlet_interval``  u_t - u_xx - shift*u + c|u|^p u = 0, Dirichlet BC
* ``linear``      f = 0 on an arbitrary spectrum
* ``custom``      polynomial nonlinearity in the eigen-coefficients

Nonlinearities are stored batched: ``prob.f(U)`` maps an array of shape
``(..., dim)`` to the same shape without any ball check; ``eval_nonlinearity``
is the checked single-state entry point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft

from .exceptions import OutsideBallError
from .spectral import SpectrumSpec, norm_A_alpha, norm_DA_alpha, norm_H

SAFETY = 1.5
N_SAMPLES = 10_000


@dataclass(frozen=True)
class OrderBounds:
    """Constants of the order, Lipschitz and sign hypotheses on ``B_R``.

    ``L`` is the constant of ``|f(u)-f(v)| <= L(|u|^s + |v|^s)|u-v|`` (graph
    norms of ``D(A^1/2)``) with ``s = min(p, q)``.
    """

    K0: float
    p: float
    q: float
    L: float
    sign_condition: bool
    R: float
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0 and self.R > 0):
            raise ValueError("OrderBounds requires p > 0, q > 0, R > 0")
        if self.K0 < 0 or self.L < 0:
            raise ValueError("K0 and L must be nonnegative")

    @property
    def lip_exponent(self) -> float:
        return min(self.p, self.q)

    def to_dict(self) -> dict:
        return {"K0": self.K0, "p": self.p, "q": self.q, "L": self.L,
                "sign_condition": self.sign_condition, "R": self.R,
                "provenance": dict(self.provenance)}


class TransformPair:
    """Pseudospectral transforms between eigen-coefficients and grid values on (0, pi).

    ``cosine``: Neumann basis 1/sqrt(pi), sqrt(2/pi) cos(kx), k = 0..N-1.
    ``sine``:   Dirichlet basis sqrt(2/pi) sin(kx), k = 1..N.
    Grid: the M midpoints (j + 1/2) pi / M.  Analysis is the midpoint rule,
    exact for trigonometric products of total degree < 2M, so with M >= 2N
    cubic nonlinearities are projected without aliasing.
    """

    def __init__(self, modes: int, basis_kind: str, grid_size: int | None = None):
        if basis_kind not in ("cosine", "sine"):
            raise ValueError("basis_kind must be 'cosine' or 'sine'")
        grid_size = 2 * modes if grid_size is None else grid_size
        if grid_size < 2 * modes:
            raise ValueError("grid_size must be at least twice the number of modes")
        self.modes = modes
        self.grid_size = grid_size
        self.basis_kind = basis_kind
        self._scale = math.sqrt(math.pi / grid_size)
        self.grid = (np.arange(grid_size) + 0.5) * math.pi / grid_size

    def synthesis(self, coeffs):
        c = np.asarray(coeffs, dtype=float)
        padded = np.zeros(c.shape[:-1] + (self.grid_size,))
        padded[..., : self.modes] = c / self._scale
        if self.basis_kind == "cosine":
            return scipy.fft.idct(padded, type=2, norm="ortho", axis=-1)
        return scipy.fft.idst(padded, type=2, norm="ortho", axis=-1)

    def analysis(self, values):
        v = np.asarray(values, dtype=float)
        if self.basis_kind == "cosine":
            full = scipy.fft.dct(v, type=2, norm="ortho", axis=-1)
        else:
            full = scipy.fft.dst(v, type=2, norm="ortho", axis=-1)
        return self._scale * full[..., : self.modes]

    def basis_values(self, k: int):
        """Exact basis function ``k`` (0-based coefficient index) on the grid."""
        x = self.grid
        if self.basis_kind == "cosine":
            return np.full_like(x, 1 / math.sqrt(math.pi)) if k == 0 else math.sqrt(2 / math.pi) * np.cos(k * x)
        return math.sqrt(2 / math.pi) * np.sin((k + 1) * x)


@dataclass(frozen=True)
class ProblemDefinition:
    spectrum: SpectrumSpec
    f: Callable
    bounds: OrderBounds
    name: str
    transform: TransformPair | None = None
    params: dict = field(default_factory=dict)
    linear: bool = False

    @property
    def dim(self) -> int:
        return self.spectrum.total_dim

    def describe(self) -> dict:
        return {"name": self.name, "params": dict(self.params),
                "spectrum": self.spectrum.to_dict(), "bounds": self.bounds.to_dict()}


def eval_nonlinearity(prob: ProblemDefinition, u) -> np.ndarray:
    """``f(u)`` in eigen-coordinates; ``u`` must lie in the open ball ``B_R``."""
    u = np.asarray(u, dtype=float)
    if np.any(norm_DA_alpha(prob.spectrum, u) >= prob.bounds.R):
        raise OutsideBallError("outside validity ball")
    return prob.f(u)


# -- sampled constants -------------------------------------------------------

def _random_states(spec: SpectrumSpec, rng, n: int, R: float):
    """Random states in ``B_R`` with varied spectral decay, normalised in D(A^1/2)."""
    lam = spec.mode_eigenvalues
    slope = rng.uniform(0.0, 2.0, size=(n, 1))
    u = rng.standard_normal((n, spec.total_dim)) * (1.0 + lam) ** (-slope / 2)
    # a quarter of the samples concentrate on one or two modes
    k = n // 4
    if k:
        picks = rng.integers(0, spec.total_dim, size=(k, 2))
        sparse = np.zeros((k, spec.total_dim))
        rows = np.arange(k)
        sparse[rows, picks[:, 0]] = rng.standard_normal(k)
        sparse[rows, picks[:, 1]] += rng.uniform(0, 1, k) * rng.standard_normal(k)
        u[:k] = sparse
    u /= norm_DA_alpha(spec, u)[:, None]
    radius = R * rng.uniform(0.02, 0.98, size=(n, 1))
    return u * radius


def estimate_bounds(spec, f, p, q, R, rng, n=N_SAMPLES, safety=SAFETY):
    """Sampled ``(K0, L, sign_ok)`` on ``B_R``: maxima of the defining ratios times ``safety``."""
    u = _random_states(spec, rng, n, R)
    fu = f(u)
    denom = norm_H(u) ** (1 + p) + norm_A_alpha(spec, u, 0.5) ** (1 + q)
    k0 = float(np.max(norm_H(fu) / denom))

    s = min(p, q)
    v = _random_states(spec, rng, n, R)
    half = n // 2
    # near-diagonal pairs probe the local Lipschitz constant
    eps = 10.0 ** rng.uniform(-4, -0.5, size=(half, 1))
    v[:half] = u[:half] + eps * (v[:half] - u[:half])
    fv = f(v)
    du = norm_DA_alpha(spec, u - v)
    keep = du > 0
    lip = norm_H(fu - fv)[keep] / (
        (norm_DA_alpha(spec, u) ** s + norm_DA_alpha(spec, v) ** s)[keep] * du[keep])
    L = float(np.max(lip)) if lip.size else 0.0

    inner = np.sum(u * fu, axis=-1)
    sign_ok = bool(np.all(inner <= 1e-12 * norm_H(u) * norm_H(fu) + 1e-300))
    return safety * k0, safety * L, sign_ok


# -- ODE instances -------------------------------------------------------------

def make_ode2_slow(R: float = 10.0) -> ProblemDefinition:
    """x' = -x^3, y' + y = x^3 on H = R^2 with spectrum {0, 1} and p = q = 2.

    From x(0) = 1 the first component is x(t) = (1 + 2t)^(-1/2).
    """
    spec = SpectrumSpec((0.0, 1.0))

    def f(u):
        x3 = u[..., 0] ** 3
        return np.stack([-x3, x3], axis=-1)

    # |f| = sqrt(2)|x|^3 <= sqrt(2)|u|^3;  |x^3 - x'^3| <= 1.5(x^2 + x'^2)|x - x'|
    bounds = OrderBounds(K0=math.sqrt(2), p=2.0, q=2.0, L=3 / math.sqrt(2),
                         sign_condition=False, R=R,
                         provenance={"K0": "formula", "L": "formula", "sign": "formula"})
    return ProblemDefinition(spec, f, bounds, "ode2_slow", params={"R": R})


def ode2_slow_x(t, x0: float = 1.0):
    """Closed-form first component of ode2_slow."""
    return np.sign(x0) * (x0 ** -2 + 2 * np.asarray(t, dtype=float)) ** -0.5


def make_ode2_fast(lam: float, beta: float, p: float, q: float, R: float = 10.0) -> ProblemDefinition:
    """x' + lam x = 0, y' + beta y = |x|^(1+p) + |x|^(1+q) with spectrum {lam, beta}."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if not beta > lam:
        raise ValueError("requires spectral gap above lambda")
    spec = SpectrumSpec((float(lam), float(beta)))

    def f(u):
        ax = np.abs(u[..., 0])
        return np.stack([np.zeros_like(ax), ax ** (1 + p) + ax ** (1 + q)], axis=-1)

    s = min(p, q)
    # |x|^(1+q) <= |u|^(1+q) <= lam^(-(1+q)/2) |A^(1/2) u|^(1+q)
    K0 = max(1.0, lam ** (-(1 + q) / 2))
    L = (1 + p) * R ** (p - s) + (1 + q) * R ** (q - s)
    bounds = OrderBounds(K0=K0, p=float(p), q=float(q), L=L, sign_condition=False, R=R,
                         provenance={"K0": "formula", "L": "formula", "sign": "formula"})
    return ProblemDefinition(spec, f, bounds, "ode2_fast",
                             params={"lambda": lam, "beta": beta, "p": p, "q": q, "R": R})


def ode2_fast_eta(lam, beta, p, q) -> float:
    """Remainder rate min{beta, (1+p) lam, (1+q) lam}."""
    return min(beta, (1 + p) * lam, (1 + q) * lam)


# -- interval PDE instances --------------------------------------------------

def _psi_problem(spec, transform, c, p, R, name, params, seed, n_samples):
    def f(u):
        v = transform.synthesis(u)
        return transform.analysis(-c * np.abs(v) ** p * v)

    rng = np.random.default_rng(seed)
    K0, L, sign_ok = estimate_bounds(spec, f, p, p, R, rng, n=n_samples)
    # psi(s) s = c|s|^(2+p) >= 0 and the discrete inner product is a positive
    # quadrature of u * psi(u), so the sign condition holds exactly
    bounds = OrderBounds(K0=K0, p=float(p), q=float(p), L=L, sign_condition=True, R=R,
                         provenance={"K0": "sampled", "L": "sampled", "sign": "formula",
                                     "seed": seed, "samples": n_samples, "safety": SAFETY,
                                     "sampled_sign_ok": sign_ok})
    params = dict(params, seed=seed)
    return ProblemDefinition(spec, f, bounds, name, transform, params)


def make_neumann_interval(N: int, p: float = 2.0, c: float = 1.0, R: float = 1.0,
                          seed: int = 0, n_samples: int = N_SAMPLES) -> ProblemDefinition:
    """Neumann Laplacian on (0, pi) with psi(s) = c|s|^p s; eigenvalues k^2, k = 0..N-1."""
    if N < 2:
        raise ValueError("need at least 2 modes")
    spec = SpectrumSpec(tuple(float(k * k) for k in range(N)))
    return _psi_problem(spec, TransformPair(N, "cosine"), c, p, R, "neumann_interval",
                        {"modes": N, "p": p, "c": c, "R": R}, seed, n_samples)


def make_dirichlet_interval(N: int, p: float = 2.0, c: float = 1.0, critical: bool = True,
                            shift: float = 0.5, R: float = 1.0, seed: int = 0,
                            n_samples: int = N_SAMPLES) -> ProblemDefinition:
    """Dirichlet Laplacian on (0, pi) minus ``shift``; eigenvalues k^2 - shift, k = 1..N.

    ``critical`` forces shift = 1 = lambda_1, so the kernel is span{sin x}.
    """
    if N < 2:
        raise ValueError("need at least 2 modes")
    if critical:
        shift = 1.0
    elif not 0 <= shift < 1:
        raise ValueError("subcritical shift must lie in [0, 1)")
    spec = SpectrumSpec(tuple(float(k * k - shift) for k in range(1, N + 1)))
    return _psi_problem(spec, TransformPair(N, "sine"), c, p, R, "dirichlet_interval",
                        {"modes": N, "p": p, "c": c, "critical": critical,
                         "shift": shift, "R": R}, seed, n_samples)


def neumann_constant_norm(t, a: float, p: float = 2.0, c: float = 1.0):
    """``|u(t)|`` for Neumann data ``a*e0`` (e0 = 1/sqrt(pi)).

    The grid value v = a/sqrt(pi) solves v' = -c v^(p+1), and |u| = sqrt(pi) v.
    """
    v0 = abs(a) / math.sqrt(math.pi)
    v = (v0 ** -p + c * p * np.asarray(t, dtype=float)) ** (-1 / p)
    return math.sqrt(math.pi) * v


# -- linear and custom instances ---------------------------------------------

def make_linear(spectrum: SpectrumSpec, R: float = 1e6, name: str = "linear") -> ProblemDefinition:
    """``f = 0``: every hypothesis holds with K0 = L = 0."""
    bounds = OrderBounds(K0=0.0, p=1.0, q=1.0, L=0.0, sign_condition=True, R=R,
                         provenance={"K0": "formula", "L": "formula", "sign": "formula"})
    return ProblemDefinition(spectrum, lambda u: np.zeros_like(np.asarray(u, dtype=float)),
                             bounds, name, params={"R": R}, linear=True)


def make_custom(eigenvalues, terms, multiplicities=None, R: float = 1.0,
                sign_condition: bool | None = None, seed: int = 0,
                n_samples: int = N_SAMPLES) -> ProblemDefinition:
    """Polynomial nonlinearity ``f_j(u) = sum coeff * prod u_i^powers_i`` over ``terms``.

    Each term is a mapping with keys ``component``, ``coeff`` and ``powers``
    (one nonnegative integer per coefficient).  Every term must have total
    degree >= 2; p = q = (smallest degree) - 1.
    """
    spec = SpectrumSpec(tuple(eigenvalues), tuple(multiplicities) if multiplicities else None)
    dim = spec.total_dim
    parsed = []
    for term in terms:
        j = int(term["component"])
        powers = np.asarray(term["powers"], dtype=int)
        if not 0 <= j < dim or powers.shape != (dim,) or np.any(powers < 0):
            raise ValueError(f"malformed nonlinearity term {term!r}")
        if powers.sum() < 2:
            raise ValueError("every term must have total degree >= 2")
        parsed.append((j, float(term["coeff"]), powers))
    if not parsed:
        return make_linear(spec, R=R, name="custom")
    degree = min(int(pw.sum()) for _, _, pw in parsed)

    def f(u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for j, coeff, powers in parsed:
            out[..., j] += coeff * np.prod(u ** powers, axis=-1)
        return out

    p = float(degree - 1)
    rng = np.random.default_rng(seed)
    K0, L, sign_ok = estimate_bounds(spec, f, p, p, R, rng, n=n_samples)
    sign = sign_ok if sign_condition is None else bool(sign_condition)
    bounds = OrderBounds(K0=K0, p=p, q=p, L=L, sign_condition=sign, R=R,
                         provenance={"K0": "sampled", "L": "sampled",
                                     "sign": "sampled" if sign_condition is None else "declared",
                                     "seed": seed, "samples": n_samples, "safety": SAFETY})
    return ProblemDefinition(spec, f, bounds, "custom", params={
        "eigenvalues": list(spec.eigenvalues), "multiplicities": list(spec.multiplicities),
        "terms": [dict(t) for t in terms], "R": R, "seed": seed})
