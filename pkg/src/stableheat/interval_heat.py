"""Deterministic heat quantities of an interval.

Free-kernel heat loss, fractional perimeter, the Dirichlet eigen-series of
the Brownian spectral heat content and the limiting constants of the heat
loss in the three regimes of the stability index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, special

from .stable_core import StableLaw, constant_A

__all__ = [
    "Interval",
    "HeatLossCurve",
    "HeatLimit",
    "fractional_perimeter",
    "fractional_perimeter_quadrature",
    "heat_loss",
    "heat_loss_outside",
    "heat_loss_curve",
    "h_limit_constant",
    "normalizer_for",
    "spectral_Q_brownian",
    "spectral_Q_tail_bound",
]


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or not self.a < self.b:
            raise ValueError(f"need a finite interval with a < b, got ({self.a}, {self.b})")

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def boundary_count(self) -> int:
        return 2

    @classmethod
    def unit(cls) -> "Interval":
        return cls(0.0, 1.0)


def _as_law(law) -> StableLaw:
    return law if isinstance(law, StableLaw) else StableLaw(float(law))


def fractional_perimeter(alpha: float, interval: Interval) -> float:
    """``int_Omega int_Omega^c |x - y|**-(1+alpha) dx dy`` for an interval, ``0 < alpha < 1``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"the fractional perimeter of an interval is finite only for 0 < alpha < 1, got {alpha}")
    return 2.0 * interval.length ** (1.0 - alpha) / (alpha * (1.0 - alpha))


def fractional_perimeter_quadrature(alpha: float, interval: Interval, epsrel: float = 1e-10) -> float:
    """Direct two-dimensional quadrature of the perimeter double integral.

    Each side of the complement is handled separately. With ``u`` the
    distance of ``x`` to the endpoint and ``y`` at distance ``u * w`` past
    it, the integrand becomes ``u**-alpha (1 + w)**-(1 + alpha)``, which
    removes the corner singularity from the inner integral.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"the fractional perimeter of an interval is finite only for 0 < alpha < 1, got {alpha}")
    a, b = interval.a, interval.b

    def side(dist):
        def g(w, x):
            u = dist(x)
            return u * (u + u * w) ** (-1.0 - alpha)

        # inner over w in (0, inf), outer over x in (a, b)
        return integrate.dblquad(g, a, b, 0.0, np.inf, epsabs=0.0, epsrel=epsrel)[0]

    return side(lambda x: b - x) + side(lambda x: x - a)


def heat_loss(law, interval: Interval, t: float) -> float:
    """Mass carried out of the interval by the free kernel in time ``t``.

    Uses ``H = L - 2 int_0^L (L - w) p_t(w) dw`` written in the standardized
    variable ``w = t**(1/alpha) v``, so only ``P(0 <= X_1 <= M)`` and
    ``E[X_1; 0 <= X_1 <= M]`` with ``M = L t**(-1/alpha)`` are needed.
    """
    law = _as_law(law)
    if not t > 0:
        raise ValueError(f"time must be positive, got {t}")
    L = interval.length
    s = t ** (1.0 / law.alpha)
    m = L / s
    inside = 2.0 * (L * law.partial_mass(m) - s * law.partial_first_moment(m))
    return float(min(max(L - inside, 0.0), L))


def heat_loss_outside(law, interval: Interval, t: float) -> float:
    """Same quantity integrated over ``Omega x Omega^c`` directly.

    ``int_a^b [P(X_t >= x - a) + P(X_t >= b - x)] dx = 2 t**(1/alpha) int_0^M P(X_1 >= v) dv``.
    """
    law = _as_law(law)
    if not t > 0:
        raise ValueError(f"time must be positive, got {t}")
    s = t ** (1.0 / law.alpha)
    return 2.0 * s * law.integrated_tail(interval.length / s)


class HeatLimit(NamedTuple):
    normalizer: Callable[[float], float]
    constant: float
    regime: str


def normalizer_for(alpha: float) -> tuple[Callable[[float], float], str]:
    """The small-time scale of ``H`` and of ``|Omega| - Q`` for index ``alpha``."""
    if alpha > 1.0:
        return (lambda t: t ** (1.0 / alpha)), "t^(1/alpha)"
    if alpha == 1.0:
        return (lambda t: t * math.log(1.0 / t)), "t*ln(1/t)"
    return (lambda t: t), "t"


def h_limit_constant(alpha: float, interval: Interval) -> HeatLimit:
    """Limit of ``H(t) / normalizer(t)`` as ``t -> 0``."""
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    norm, regime = normalizer_for(alpha)
    if alpha > 1.0:
        c = 2.0 / math.pi * math.gamma(1.0 - 1.0 / alpha)
    elif alpha == 1.0:
        c = 2.0 / math.pi
    else:
        c = constant_A(alpha, 1) * fractional_perimeter(alpha, interval)
    return HeatLimit(norm, c, regime)


@dataclass
class HeatLossCurve:
    """``H(t)`` on a time grid; ``errors`` holds the gap between the two integration routes."""

    alpha: float
    interval: Interval
    samples: list[tuple[float, float, float]] = field(default_factory=list)

    def __post_init__(self):
        L = self.interval.length
        for t, h, _ in self.samples:
            if not t > 0 or not 0.0 <= h <= L:
                raise ValueError(f"invalid heat-loss sample (t={t}, H={h})")

    @property
    def times(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])

    @property
    def values(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples])

    @property
    def errors(self) -> np.ndarray:
        return np.array([s[2] for s in self.samples])


def heat_loss_curve(law, interval: Interval, times) -> HeatLossCurve:
    law = _as_law(law)
    samples = []
    for t in times:
        h = heat_loss(law, interval, t)
        samples.append((float(t), h, abs(h - heat_loss_outside(law, interval, t))))
    return HeatLossCurve(law.alpha, interval, samples)


def _odd_terms(L: float, t: float, n_terms: int) -> np.ndarray:
    n = 2.0 * np.arange(n_terms) + 1.0
    return 8.0 * L / (n * n * math.pi**2) * np.exp(-t * (n * math.pi / L) ** 2)


def spectral_Q_tail_bound(interval: Interval, t: float, n_terms: int) -> float:
    """Upper bound on the part of the eigen-series left out by ``n_terms`` odd modes."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    L = interval.length
    n = 2.0 * n_terms + 1.0  # first omitted odd index
    if t == 0:
        # sum_{j >= n_terms} 1/(2j+1)^2 = zeta(2, n_terms + 1/2) / 4
        return 8.0 * L / math.pi**2 * special.zeta(2.0, n_terms + 0.5) / 4.0
    lead = 8.0 * L / (n * n * math.pi**2) * math.exp(-t * (n * math.pi / L) ** 2)
    ratio = math.exp(-t * 4.0 * (n + 1.0) * (math.pi / L) ** 2)
    return lead / (1.0 - ratio)


def _default_terms(L: float, t: float) -> int:
    if t == 0:
        return 1
    # smallest odd n with exp(-t (n pi / L)^2) < 1e-12
    n = math.sqrt(12.0 * math.log(10.0) / t) * L / math.pi
    return int(n // 2) + 2


def spectral_Q_brownian(interval: Interval, t: float, n_terms: int | None = None) -> float:
    """Spectral heat content of the interval for ``alpha = 2``.

    ``Q(t) = sum_{n odd} 8 L / (n pi)**2 exp(-t (n pi / L)**2)``.  At
    ``t = 0`` the truncated remainder is added back exactly through the
    Hurwitz zeta function.
    """
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    L = interval.length
    if n_terms is None:
        n_terms = _default_terms(L, t)
    if n_terms < 1:
        raise ValueError("need at least one term")
    # add the smallest terms first
    value = float(np.sum(_odd_terms(L, t, n_terms)[::-1]))
    if t == 0:
        value += spectral_Q_tail_bound(interval, 0.0, n_terms)
    return value
