"""phi-functions of exponential integrators and exponential quadrature weights.

    phi1(z) = (e^z - 1) / z,      phi2(z) = (e^z - 1 - z) / z^2

Both are evaluated from a Taylor series when |z| is small, because the
closed forms cancel catastrophically there and kernel modes give z = 0.
"""
import numpy as np

SERIES_CUTOFF = 1e-4


def phi1(z):
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < SERIES_CUTOFF
    zs = np.where(small, 1.0, z)
    direct = np.expm1(zs) / zs
    series = 1.0 + z / 2.0 + z * z / 6.0 + z ** 3 / 24.0
    return np.where(small, series, direct)


def phi2(z):
    z = np.asarray(z, dtype=float)
    # cancellation in e^z - 1 - z is worse than in phi1: widen the series branch
    small = np.abs(z) < 1e-2
    zs = np.where(small, 1.0, z)
    direct = (np.expm1(zs) - zs) / (zs * zs)
    series = 0.5 + z / 6.0 + z * z / 24.0 + z ** 3 / 120.0 + z ** 4 / 720.0 + z ** 5 / 5040.0
    return np.where(small, series, direct)


def linear_weights(rate, h):
    """Weights for ``int_0^h exp(-rate*s) y(s) ds`` with ``y`` linear on ``[0, h]``.

    Returns ``(w_start, w_end)`` so the integral equals
    ``w_start*y(0) + w_end*y(h)``; exact for linear ``y``.  ``rate`` must be
    nonnegative so nothing grows.
    """
    z = -np.asarray(rate, dtype=float) * h
    p1 = phi1(z)
    p2 = phi2(z)
    return h * p2, h * (p1 - p2)
