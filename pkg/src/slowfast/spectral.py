"""Diagonal nonnegative operators, states in their eigenbasis, and norms.

A state is a 1-D float array of eigen-coefficients; coefficient ``j`` belongs
to eigenvalue ``spec.mode_eigenvalues[j]``.  Batched states (shape
``(..., dim)``) are accepted by every norm.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import SemigroupOverflow

PARTS = ("minus", "below", "lambda", "plus", "kernel")


@dataclass(frozen=True)
class SpectrumSpec:
    """Eigenvalues of ``A`` (strictly increasing, nonnegative) with multiplicities."""

    eigenvalues: tuple
    multiplicities: tuple = None
    mode_eigenvalues: np.ndarray = field(init=False, repr=False, compare=False)
    mode_block: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ev = tuple(float(x) for x in self.eigenvalues)
        mult = self.multiplicities
        mult = (1,) * len(ev) if mult is None else tuple(int(m) for m in mult)
        if not ev:
            raise ValueError("spectrum must contain at least one eigenvalue")
        if len(mult) != len(ev):
            raise ValueError("one multiplicity per eigenvalue is required")
        if any(m < 1 for m in mult):
            raise ValueError("multiplicities must be positive")
        if any(not np.isfinite(x) or x < 0 for x in ev):
            raise ValueError("eigenvalues must be finite and nonnegative")
        if any(b <= a for a, b in zip(ev, ev[1:])):
            raise ValueError("eigenvalues must be strictly increasing")
        object.__setattr__(self, "eigenvalues", ev)
        object.__setattr__(self, "multiplicities", mult)
        block = np.repeat(np.arange(len(ev)), mult)
        modes = np.asarray(ev)[block]
        block.setflags(write=False)
        modes.setflags(write=False)
        object.__setattr__(self, "mode_block", block)
        object.__setattr__(self, "mode_eigenvalues", modes)

    @property
    def total_dim(self) -> int:
        return int(sum(self.multiplicities))

    @property
    def kernel_dim(self) -> int:
        return self.multiplicities[0] if self.eigenvalues[0] == 0.0 else 0

    @property
    def nu(self) -> float | None:
        """Spectral gap: the smallest strictly positive eigenvalue."""
        positive = [x for x in self.eigenvalues if x > 0]
        return positive[0] if positive else None

    def block_of(self, eigenvalue: float) -> int:
        """Index of ``eigenvalue`` in the spectrum (matched to 1e-12 relative)."""
        ev = np.asarray(self.eigenvalues)
        k = int(np.argmin(np.abs(ev - eigenvalue)))
        if abs(ev[k] - eigenvalue) > 1e-12 * max(1.0, abs(eigenvalue)):
            raise ValueError(f"{eigenvalue!r} is not an eigenvalue of this spectrum")
        return k

    def next_above(self, block: int) -> float:
        """Smallest eigenvalue larger than block ``block``; ``inf`` if none."""
        if block + 1 < len(self.eigenvalues):
            return self.eigenvalues[block + 1]
        return float("inf")

    def to_dict(self) -> dict:
        return {"eigenvalues": list(self.eigenvalues),
                "multiplicities": list(self.multiplicities)}

    @classmethod
    def from_dict(cls, doc: dict) -> "SpectrumSpec":
        return cls(tuple(doc["eigenvalues"]), tuple(doc.get("multiplicities") or ()) or None)


def as_state(spec: SpectrumSpec, coefficients) -> np.ndarray:
    """Validate ``coefficients`` as a state of ``spec`` and return a float copy."""
    u = np.array(coefficients, dtype=float)
    if u.shape[-1:] != (spec.total_dim,):
        raise ValueError(f"state has {u.shape[-1:]} coefficients, spectrum needs {spec.total_dim}")
    if not np.all(np.isfinite(u)):
        raise ValueError("state has non-finite coefficients")
    return u


def basis_vector(spec: SpectrumSpec, j: int, amplitude: float = 1.0) -> np.ndarray:
    u = np.zeros(spec.total_dim)
    u[j] = amplitude
    return u


def norm_H(u) -> np.ndarray | float:
    return np.linalg.norm(u, axis=-1)


def _power(spec: SpectrumSpec, alpha: float) -> np.ndarray:
    if alpha == 0:
        return np.ones(spec.total_dim)  # 0**0 = 1 on the kernel
    return spec.mode_eigenvalues ** (2.0 * alpha)


def norm_A_alpha(spec: SpectrumSpec, u, alpha: float = 0.5):
    """``|A^alpha u|``."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    u = np.asarray(u, dtype=float)
    return np.sqrt(np.sum(_power(spec, alpha) * u * u, axis=-1))


def norm_DA_alpha(spec: SpectrumSpec, u, alpha: float = 0.5):
    """Graph norm ``(|u|^2 + |A^alpha u|^2)^(1/2)`` of ``D(A^alpha)``."""
    u = np.asarray(u, dtype=float)
    return np.sqrt(np.sum((1.0 + _power(spec, alpha)) * u * u, axis=-1))


def norm_A(spec: SpectrumSpec, u):
    return norm_A_alpha(spec, u, 1.0)


@dataclass(frozen=True)
class SpectralSplit:
    """Index ranges cut at eigenvalue block ``block``.

    ``minus`` holds every eigenvalue <= lambda (the lower space used by the
    fast-solution construction); ``below``, ``lambda`` and ``plus`` partition
    the modes into eigenvalues <, = and > lambda.
    """

    spec: SpectrumSpec
    block: int

    def __post_init__(self):
        if not 0 <= self.block < len(self.spec.eigenvalues):
            raise ValueError("split block out of range")

    @classmethod
    def at(cls, spec: SpectrumSpec, eigenvalue: float) -> "SpectralSplit":
        return cls(spec, spec.block_of(eigenvalue))

    @property
    def threshold(self) -> float:
        return self.spec.eigenvalues[self.block]

    def mask(self, part: str) -> np.ndarray:
        b = self.spec.mode_block
        if part == "minus":
            return b <= self.block
        if part == "below":
            return b < self.block
        if part == "lambda":
            return b == self.block
        if part == "plus":
            return b > self.block
        if part == "kernel":
            return self.spec.mode_eigenvalues == 0.0
        raise ValueError(f"unknown part {part!r}; expected one of {PARTS}")

    def indices(self, part: str) -> np.ndarray:
        return np.flatnonzero(self.mask(part))


def project(u, split: SpectralSplit, part: str) -> np.ndarray:
    """Zero every coefficient outside ``part`` of ``split``."""
    return np.where(split.mask(part), u, 0.0)


def kernel_projection(spec: SpectrumSpec, u) -> np.ndarray:
    return np.where(spec.mode_eigenvalues == 0.0, u, 0.0)


def semigroup_apply(spec: SpectrumSpec, u, t: float) -> np.ndarray:
    """``exp(-t A) u``; negative ``t`` runs the flow backwards."""
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.exp(-t * spec.mode_eigenvalues) * np.asarray(u, dtype=float)
    if not np.all(np.isfinite(out)):
        raise SemigroupOverflow("semigroup overflow")
    return out
