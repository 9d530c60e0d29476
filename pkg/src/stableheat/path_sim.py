"""Grid-path Monte Carlo for the stable process started at 0.

Paths are produced in fixed-size blocks. Block ``k`` draws from a Philox
generator keyed by ``(seed, k)``, so an ensemble is fully determined by
``(seed, n_paths, n_steps, block_paths)`` and does not depend on how many
workers evaluate the blocks.

Coarser grids reuse the finest grid's increments: summing ``k`` consecutive
increments of size ``dt`` gives an increment of size ``k dt`` with the exact
law, so every level of a step schedule is a valid grid path. The levels are
also coupled path by path (common random numbers).

All per-path functionals here are evaluated at horizon 1. Scaling turns a
time-``t`` question on an interval of length ``L`` into the horizon-1 path
with the interval shrunk to ``M = L t**(-1/alpha)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .interval_heat import Interval, heat_loss
from .stable_core import StableLaw

__all__ = [
    "PathSample",
    "PathEnsemble",
    "MCEstimate",
    "MCConfig",
    "BiasModel",
    "stream_for_block",
    "simulate_path",
    "simulate_ensemble",
    "q_measure",
    "l_measure",
    "r_measure",
    "free_measure",
    "estimate_Q",
    "estimate_sup_tail",
    "estimate_sup_mean",
    "estimate_L",
    "estimate_r",
    "refine_and_extrapolate",
]


@dataclass(frozen=True)
class PathSample:
    terminal: float
    running_max: float
    running_min: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be positive")
        if not (self.running_min <= min(0.0, self.terminal) and self.running_max >= max(0.0, self.terminal)):
            raise ValueError("running extremes must bracket 0 and the terminal value")

    def exited(self, interval: Interval, start: float = 0.0, scale: float = 1.0) -> bool:
        """Whether the path ``start + scale * X`` leaves the interval before the horizon."""
        return start + scale * self.running_max >= interval.b or start + scale * self.running_min <= interval.a


@dataclass(frozen=True)
class PathEnsemble:
    """Grid extremes and endpoints of many paths on ``[0, horizon]``."""

    terminal: np.ndarray
    running_max: np.ndarray
    running_min: np.ndarray
    n_steps: int
    horizon: float = 1.0
    bridge: bool = False

    def __len__(self):
        return self.terminal.shape[0]

    def __getitem__(self, i) -> PathSample:
        return PathSample(float(self.terminal[i]), float(self.running_max[i]), float(self.running_min[i]), self.n_steps)

    @property
    def range(self) -> np.ndarray:
        return self.running_max - self.running_min


@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float
    n_paths: int
    n_steps: int

    def __post_init__(self):
        if not (math.isfinite(self.value) and math.isfinite(self.std_error)) or self.std_error < 0:
            raise ValueError(f"invalid estimate ({self.value}, {self.std_error})")
        if self.n_paths < 1 or self.n_steps < 1:
            raise ValueError("n_paths and n_steps must be positive")

    @classmethod
    def from_samples(cls, values: np.ndarray, n_steps: int, offset: float = 0.0) -> "MCEstimate":
        values = np.asarray(values, dtype=float)
        n = values.shape[0]
        se = float(np.std(values, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
        return cls(float(np.mean(values)) + offset, se, n, n_steps)

    def scaled(self, factor: float) -> "MCEstimate":
        return MCEstimate(self.value * factor, self.std_error * abs(factor), self.n_paths, self.n_steps)


@dataclass(frozen=True)
class MCConfig:
    """Everything that determines an ensemble. ``workers`` only affects speed."""

    seed: int = 12345
    n_paths: int = 100_000
    n_steps: tuple[int, ...] = (1000,)
    block_paths: int = 1000
    workers: int = 1
    bridge: bool = False

    def __post_init__(self):
        steps = (self.n_steps,) if isinstance(self.n_steps, int) else tuple(int(n) for n in self.n_steps)
        object.__setattr__(self, "n_steps", steps)
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.n_paths < 2 or self.block_paths < 1 or self.workers < 1:
            raise ValueError("need n_paths >= 2, block_paths >= 1 and workers >= 1")
        finest = max(steps)
        if any(n < 1 or finest % n for n in steps):
            raise ValueError(f"every step count must divide the finest one, got {steps}")

    @property
    def finest(self) -> int:
        return max(self.n_steps)


def stream_for_block(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, block], dtype=np.uint64)))


def _bridge_extremes(prev: np.ndarray, incr: np.ndarray, dt: float, stream: np.random.Generator):
    """Exact per-step maximum and minimum of the variance-2 Brownian bridge.

    Given ``X(s + dt) - X(s) = d``, ``P(max excess >= m) = exp(-m (m - d) / dt)``.
    Maximum and minimum within a step use independent uniforms.
    """
    u_max = 1.0 - stream.random(incr.shape)  # in (0, 1]
    u_min = 1.0 - stream.random(incr.shape)
    spread = 4.0 * dt
    hi = prev + 0.5 * (incr + np.sqrt(incr * incr - spread * np.log(u_max)))
    lo = prev + 0.5 * (incr - np.sqrt(incr * incr - spread * np.log(u_min)))
    return hi.max(axis=1), lo.min(axis=1)


def _simulate_rows(law: StableLaw, rows: int, levels: Sequence[int], horizon: float, bridge: bool, stream):
    """Simulate ``rows`` paths on the finest level and read off every coarser level."""
    finest = max(levels)
    dt = horizon / finest
    incr = law.sample(stream, (rows, finest)) * dt ** (1.0 / law.alpha)
    path = np.cumsum(incr, axis=1)
    out = {}
    for n in sorted(set(levels), reverse=True):
        k = finest // n
        pts = path[:, k - 1 :: k]
        terminal = pts[:, -1].copy()
        if bridge and law.is_gaussian:
            prev = np.concatenate([np.zeros((rows, 1)), pts[:, :-1]], axis=1)
            hi, lo = _bridge_extremes(prev, pts - prev, horizon / n, stream)
        else:
            hi, lo = pts.max(axis=1), pts.min(axis=1)
        out[n] = (terminal, np.maximum(hi, 0.0), np.minimum(lo, 0.0))
    return out


def simulate_path(law: StableLaw, horizon: float, n_steps: int, stream: np.random.Generator, bridge: bool = False) -> PathSample:
    """One grid path of ``n_steps`` i.i.d. increments distributed as ``(horizon/n_steps)**(1/alpha) X_1``."""
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    terminal, hi, lo = _simulate_rows(law, 1, (n_steps,), horizon, bridge, stream)[n_steps]
    return PathSample(float(terminal[0]), float(hi[0]), float(lo[0]), n_steps)


def simulate_ensemble(law: StableLaw, config: MCConfig, horizon: float = 1.0) -> dict[int, PathEnsemble]:
    """Ensembles for every step count in ``config.n_steps``, coupled path by path."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    n_blocks = -(-config.n_paths // config.block_paths)

    def run(k):
        rows = min(config.block_paths, config.n_paths - k * config.block_paths)
        return _simulate_rows(law, rows, config.n_steps, horizon, config.bridge, stream_for_block(config.seed, k))

    if config.workers == 1:
        blocks = [run(k) for k in range(n_blocks)]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            blocks = list(pool.map(run, range(n_blocks)))
    ensembles = {}
    for n in config.n_steps:
        parts = [b[n] for b in blocks]
        ensembles[n] = PathEnsemble(
            np.concatenate([p[0] for p in parts]),
            np.concatenate([p[1] for p in parts]),
            np.concatenate([p[2] for p in parts]),
            n,
            horizon,
            config.bridge and law.is_gaussian,
        )
    return ensembles


def _scale(law: StableLaw, interval: Interval, t: float) -> tuple[float, float]:
    if not t > 0:
        raise ValueError(f"time must be positive, got {t}")
    s = t ** (1.0 / law.alpha)
    return s, interval.length / s


def q_measure(ens: PathEnsemble, law: StableLaw, interval: Interval, t: float) -> np.ndarray:
    """Per path, the measure of starting points in the interval that survive to time ``t``."""
    s, _ = _scale(law, interval, t)
    L = interval.length
    return L - np.minimum(L, s * ens.range)


def l_measure(ens: PathEnsemble, law: StableLaw, interval: Interval, t: float, symmetrize: bool = True) -> np.ndarray:
    """Per path ``int_0^M 1{u <= sup} du = min(sup, M)``.

    With ``symmetrize`` the reflected path's supremum ``-inf`` is averaged in,
    which has the same law and makes the three-term decomposition exact per path.
    """
    _, m = _scale(law, interval, t)
    up = np.minimum(ens.running_max, m)
    if not symmetrize:
        return up
    return 0.5 * (up + np.minimum(-ens.running_min, m))


def r_measure(ens: PathEnsemble, law: StableLaw, interval: Interval, t: float) -> np.ndarray:
    """Per path, the length of ``[0, M] ∩ [M + inf, sup]``."""
    _, m = _scale(law, interval, t)
    return np.maximum(0.0, np.minimum(m, ens.running_max) - np.maximum(0.0, m + ens.running_min))


def free_measure(ens: PathEnsemble, law: StableLaw, interval: Interval, t: float) -> np.ndarray:
    """Per path, the measure of starting points whose time-``t`` position is still inside.

    Its exact mean is ``L - H(t)``, which makes it a control variate for ``q_measure``.
    """
    s, _ = _scale(law, interval, t)
    L = interval.length
    return L - np.minimum(L, s * np.abs(ens.terminal))


def _ensemble(law: StableLaw, source) -> PathEnsemble:
    if isinstance(source, PathEnsemble):
        return source
    if isinstance(source, MCConfig):
        return simulate_ensemble(law, source)[source.finest]
    raise TypeError("source must be a PathEnsemble or an MCConfig")


def q_samples(ens: PathEnsemble, law: StableLaw, interval: Interval, t: float, control_variate: bool = False):
    """Per-path Q values and the constant to add to their mean."""
    q = q_measure(ens, law, interval, t)
    if not control_variate:
        return q, 0.0
    return q - free_measure(ens, law, interval, t), interval.length - heat_loss(law, interval, t)


def estimate_Q(law: StableLaw, interval: Interval, t: float, source, control_variate: bool = False) -> MCEstimate:
    """Spectral heat content ``Q(t)`` from a horizon-1 ensemble.

    With ``control_variate`` the free-kernel survival measure is subtracted
    path by path and its exact mean ``L - H(t)`` added back.
    """
    ens = _ensemble(law, source)
    vals, offset = q_samples(ens, law, interval, t, control_variate)
    return MCEstimate.from_samples(vals, ens.n_steps, offset)


def estimate_sup_tail(law: StableLaw, u: float, source) -> MCEstimate:
    """``P(u <= sup_{s <= 1} X_s)``."""
    if not u > 0:
        raise ValueError("u must be positive")
    ens = _ensemble(law, source)
    return MCEstimate.from_samples((ens.running_max >= u).astype(float), ens.n_steps)


def estimate_sup_mean(law: StableLaw, source, symmetrize: bool = True) -> MCEstimate:
    ens = _ensemble(law, source)
    vals = 0.5 * (ens.running_max - ens.running_min) if symmetrize else ens.running_max
    return MCEstimate.from_samples(vals, ens.n_steps)


def estimate_L(law: StableLaw, interval: Interval, t: float, source, symmetrize: bool = False) -> MCEstimate:
    """``int_0^M P(u <= sup X_1) du`` as the mean of the clipped supremum."""
    ens = _ensemble(law, source)
    return MCEstimate.from_samples(l_measure(ens, law, interval, t, symmetrize), ens.n_steps)


def estimate_r(law: StableLaw, interval: Interval, t: float, source) -> MCEstimate:
    ens = _ensemble(law, source)
    return MCEstimate.from_samples(r_measure(ens, law, interval, t), ens.n_steps)


@dataclass
class BiasModel:
    """``V(n) = limit + c n**-gamma`` fitted to the three finest levels."""

    limit: float
    c: float
    gamma: float
    ok: bool
    reason: str = ""
    levels: list[tuple[int, MCEstimate]] = field(default_factory=list)
    residual: float = 0.0


def refine_and_extrapolate(estimator: Callable[[int], np.ndarray], schedule: Sequence[int], offset: float = 0.0):
    """Extrapolate a grid-biased estimator to ``n_steps -> infinity``.

    ``estimator(n)`` returns per-path values on the ``n``-step grid; the
    levels must share their paths so that differences are low-noise. On
    success returns the extrapolated ``MCEstimate`` (standard error of the
    per-path combination at the fitted exponent) and the model. When the
    level means are not strictly monotone with shrinking steps, or the
    changes are within noise, the fit is reported as failed and the finest
    level is returned unchanged.
    """
    schedule = sorted(set(int(n) for n in schedule))
    if len(schedule) < 3:
        raise ValueError("need at least three step counts")
    n1, n2, n3 = schedule[-3:]
    rho = n2 / n1
    if not math.isclose(n3 / n2, rho, rel_tol=1e-12) or rho <= 1:
        raise ValueError(f"the three finest step counts must be geometric, got {schedule[-3:]}")
    samples = {n: np.asarray(estimator(n), dtype=float) for n in schedule}
    levels = [(n, MCEstimate.from_samples(samples[n], n, offset)) for n in schedule]
    x1, x2, x3 = samples[n1], samples[n2], samples[n3]
    d1 = MCEstimate.from_samples(x2 - x1, n2)
    d2 = MCEstimate.from_samples(x3 - x2, n3)
    finest = levels[-1][1]

    def failed(reason):
        return finest, BiasModel(finest.value, 0.0, float("nan"), False, reason, levels)

    if d1.value == 0.0 or d2.value == 0.0 or (d1.value > 0) != (d2.value > 0):
        return failed("level means are not monotone in the step count")
    if abs(d2.value) >= abs(d1.value):
        return failed("level differences do not shrink with refinement")
    if abs(d1.value) < 2.0 * d1.std_error:
        return failed("level differences are within noise")
    gamma = math.log(d1.value / d2.value) / math.log(rho)
    w = 1.0 / (rho**gamma - 1.0)
    combo = MCEstimate.from_samples(x3 + w * (x3 - x2), n3, offset)
    c = d2.value / (n3**-gamma - n2**-gamma)
    # with more than three levels, the coarser ones measure how well the model holds
    extra = [abs(est.value - (combo.value + c * n**-gamma)) for n, est in levels[:-3]]
    resid = max(extra) if extra else 0.0
    return combo, BiasModel(combo.value, c, gamma, True, "", levels, resid)
