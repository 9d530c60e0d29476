"""Independent reference computations used only by the tests.

Nothing here is imported by the package; each routine takes a route that
differs from the one it checks.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate, optimize, special


def zolotarev(x: float, alpha: float) -> tuple[float, float]:
    """Density and survival function of the symmetric stable law at ``x > 0``.

    Uses Zolotarev's non-oscillatory integral over ``theta in (0, pi/2)``;
    valid for ``alpha != 1``.
    """
    a = alpha
    k = a / (a - 1.0)

    def log_v(th):
        return k * (math.log(math.cos(th)) - math.log(math.sin(a * th))) + math.log(math.cos((a - 1.0) * th)) - math.log(math.cos(th))

    log_c = k * math.log(x)
    lo, hi = 1e-12, math.pi / 2 - 1e-12
    h = lambda th: log_c + log_v(th)
    points = []
    if h(lo) * h(hi) < 0:
        points.append(optimize.brentq(h, lo, hi, xtol=1e-15))
    edges = [0.0, *points, math.pi / 2]

    def g(th):
        return math.exp(log_c + log_v(th)) if 0 < th < math.pi / 2 else 0.0

    def piecewise(f):
        return sum(integrate.quad(f, e0, e1, epsabs=0, epsrel=1e-13, limit=2000)[0] for e0, e1 in zip(edges[:-1], edges[1:]))

    dens_int = piecewise(lambda th: (lambda v: v * math.exp(-v))(g(th)))
    dens = dens_int * a / (math.pi * abs(a - 1.0) * x)
    if a > 1:
        sf = piecewise(lambda th: math.exp(-g(th))) / math.pi
    else:
        sf = piecewise(lambda th: -math.expm1(-g(th))) / math.pi
    return dens, sf


def inversion_at_time(x: float, t: float, alpha: float) -> float:
    """Direct Fourier inversion of ``exp(-t |xi|**alpha)`` at ``x`` (no scaling step)."""
    upper = (40.0 / t) ** (1.0 / alpha)
    f = lambda u: math.exp(-t * u ** alpha) * math.cos(x * u)
    edges = np.linspace(0.0, upper, 400)
    return sum(integrate.quad(f, a, b, epsabs=1e-15, epsrel=1e-13, limit=200)[0] for a, b in zip(edges[:-1], edges[1:])) / math.pi


def gaussian_heat_loss(length: float, t: float) -> float:
    """Free-kernel heat loss of an interval for variance ``2t`` Gaussian kernel.

    Integrates ``erfc`` in closed form: twice the integral of
    ``P(X_t >= u)`` over ``u in (0, length)``.
    """
    v = length / (2.0 * math.sqrt(t))
    return 2.0 * math.sqrt(t) * (v * special.erfc(v) + (1.0 - math.exp(-v * v)) / math.sqrt(math.pi))


def cauchy_heat_loss(length: float, t: float) -> float:
    m = length / t
    return 2.0 * t * (m * math.atan(1.0 / m) + 0.5 * math.log1p(m * m)) / math.pi


def fourier_heat_loss(length: float, t: float, alpha: float) -> float:
    """Heat loss from ``(2/pi) int_0^inf (1 - cos(L k)) (1 - exp(-t k**alpha)) / k**2 dk``.

    Follows from Plancherel; shares no code with the density-based route.
    """
    L = length
    # quad complains about roundoff on some head segments; the result is
    # checked against the Gaussian and Cauchy closed forms in the tests
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return _fourier_heat_loss(L, t, alpha)


def _fourier_heat_loss(L: float, t: float, alpha: float) -> float:
    def g(k):
        return -math.expm1(-t * k ** alpha) / (k * k)

    k0 = 40.0 * math.pi / L
    head_edges = np.concatenate([[0.0], np.geomspace(1e-6 / L, k0, 60)])
    head = sum(
        integrate.quad(lambda k: (1.0 - math.cos(L * k)) * g(k) if k > 0 else 0.0, a, b, epsabs=0, epsrel=1e-12, limit=400)[0]
        for a, b in zip(head_edges[:-1], head_edges[1:])
    )
    # beyond k0 split into the plain part and the cosine part
    plain_edges = np.concatenate([np.geomspace(k0, 1e12 * k0, 80), [np.inf]])
    plain = sum(integrate.quad(g, a, b, epsabs=0, epsrel=1e-12, limit=400)[0] for a, b in zip(plain_edges[:-1], plain_edges[1:]))
    osc_val = integrate.quad(g, k0, np.inf, weight="cos", wvar=L, epsabs=1e-15, limlst=200)[0]
    return 2.0 / math.pi * (head + plain - osc_val)
