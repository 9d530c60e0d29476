"""Oscillatory Fourier integrals and small quadrature helpers.

The kernels needed here are of the form ``f(u) cos(w u)`` and
``f(u) sin(w u) / u`` on ``[0, inf)`` with ``f`` positive and decreasing.
A head segment is integrated adaptively; the remainder is split at the
zeros of the trigonometric factor, each half period is integrated with a
fixed Gauss-Legendre rule, and the resulting alternating series is
accelerated with Wynn's epsilon algorithm.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


class QuadratureError(RuntimeError):
    """A numerical integral failed to reach its tolerance."""


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances for the Fourier inversion and the density integrals.

    ``decay_cutoff`` is the value of ``u**alpha`` beyond which
    ``exp(-u**alpha)`` is treated as zero; ``half_periods`` is the number of
    half periods summed before acceleration.
    """

    epsabs: float = 1e-11
    epsrel: float = 1e-11
    limit: int = 500
    half_periods: int = 80
    decay_cutoff: float = 40.0
    series_rtol: float = 1e-15


def quad(g: Callable, a: float, b: float, epsabs: float, epsrel: float, limit: int = 500, points=None) -> float:
    """``scipy.integrate.quad`` that raises instead of warning."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(g, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit, points=points)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quad on [{a}, {b}] did not converge: {exc}") from None
    return val


def segmented_quad(g: Callable, a: float, b: float, epsabs: float, epsrel: float, limit: int = 500) -> float:
    """Adaptive quadrature over ``[a, b]`` split at decades.

    Integrands here range over many orders of magnitude in ``u`` (slowly
    decaying ``exp(-u**alpha)`` for small alpha), so a single adaptive call
    wastes most of its budget locating the scale.
    """
    edges = [a]
    e = a if a > 0 else min(b, 1e-3)
    while e < b:
        if e > edges[-1]:
            edges.append(e)
        e *= 10.0
    edges.append(b)
    tol = epsabs / len(edges)
    return sum(quad(g, lo, hi, tol, epsrel, limit) for lo, hi in zip(edges[:-1], edges[1:]))


def wynn_epsilon(partial_sums: np.ndarray) -> tuple[float, float]:
    """Wynn epsilon extrapolation of a sequence of partial sums.

    Returns the last even-column estimate and the difference from the
    previous one as an error indicator.
    """
    prev = np.zeros(len(partial_sums) + 1)
    cur = np.asarray(partial_sums, dtype=float)
    estimates = [cur[-1]]
    column = 0
    while len(cur) > 2:
        d = np.diff(cur)
        if np.any(d == 0.0):
            break
        nxt = prev[1:len(cur)] + 1.0 / d
        prev, cur = cur, nxt
        column += 1
        if column % 2 == 0:
            if not np.all(np.isfinite(cur)):
                break
            estimates.append(cur[-1])
    if len(estimates) == 1:
        return estimates[0], abs(partial_sums[-1] - partial_sums[-2])
    return estimates[-1], abs(estimates[-1] - estimates[-2])


def fourier_integral(f: Callable, w: float, kind: str, support: float, cfg: QuadratureConfig) -> float:
    """Integrate ``f(u) cos(w u)`` (``kind='cos'``) or ``f(u) sin(w u)/u``
    (``kind='sinc'``) over ``[0, inf)``.

    ``support`` is a point past which ``f`` is negligible; below it nothing
    is assumed except monotone decay of ``f`` in the tail.
    """
    if kind == "cos":
        def g(u):
            return f(u) * np.cos(w * u)
        first_zero = 1.5 * np.pi / w
    elif kind == "sinc":
        def g(u):
            return f(u) * w * np.sinc(w * u / np.pi)
        first_zero = np.pi / w
    else:
        raise ValueError(f"unknown kernel {kind!r}")

    if first_zero >= support / 20.0:
        return segmented_quad(g, 0.0, support, cfg.epsabs, cfg.epsrel, cfg.limit)

    head = segmented_quad(g, 0.0, first_zero, cfg.epsabs, cfg.epsrel, cfg.limit)
    zeros = first_zero + np.arange(cfg.half_periods + 1) * (np.pi / w)
    lo, hi = zeros[:-1], zeros[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    terms = (g(nodes) * _GL_WEIGHTS[None, :]).sum(axis=1) * half
    sums = head + np.cumsum(terms)
    if hi[-1] >= support or abs(terms[-1]) <= cfg.epsabs * 1e-3:
        return float(sums[-1])
    value, err = wynn_epsilon(sums[-30:])
    if not np.isfinite(value) or err > max(cfg.epsabs, cfg.epsrel * abs(value)) * 100:
        raise QuadratureError(f"oscillatory tail did not converge (w={w}, err={err:.3g})")
    return float(value)
