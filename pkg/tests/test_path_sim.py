import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from stableheat.asymptotics import L_closed
from stableheat.interval_heat import Interval, heat_loss, spectral_Q_brownian
from stableheat.path_sim import (
    MCConfig,
    MCEstimate,
    PathSample,
    estimate_L,
    estimate_Q,
    estimate_r,
    estimate_sup_mean,
    estimate_sup_tail,
    l_measure,
    q_measure,
    r_measure,
    refine_and_extrapolate,
    simulate_ensemble,
    simulate_path,
    stream_for_block,
)
from stableheat.stable_core import StableLaw

UNIT = Interval.unit()


def ens(alpha, n_paths=4000, steps=(100,), seed=1, **kw):
    law = StableLaw(alpha)
    cfg = MCConfig(seed=seed, n_paths=n_paths, n_steps=steps, block_paths=500, **kw)
    return law, simulate_ensemble(law, cfg)


@given(st.sampled_from([0.5, 1.0, 1.5, 2.0]), st.integers(1, 50), st.integers(0, 2**32), st.booleans())
def test_path_invariants(alpha, n_steps, seed, bridge):
    p = simulate_path(StableLaw(alpha), 1.0, n_steps, np.random.default_rng(seed), bridge)
    assert p.running_min <= 0.0 <= p.running_max
    assert p.running_min <= p.terminal <= p.running_max
    assert math.isfinite(p.running_max) and math.isfinite(p.running_min)


def test_path_sample_validation_and_exit():
    with pytest.raises(ValueError):
        PathSample(0.0, 1.0, -1.0, 0)
    with pytest.raises(ValueError):
        PathSample(2.0, 1.0, -1.0, 3)
    p = PathSample(0.1, 0.4, -0.2, 3)
    assert not p.exited(UNIT, 0.5)
    assert p.exited(UNIT, 0.7)
    assert p.exited(UNIT, 0.1)


def test_simulate_path_rejects():
    with pytest.raises(ValueError):
        simulate_path(StableLaw(1.5), 1.0, 0, np.random.default_rng(0))


def test_mcestimate():
    e = MCEstimate.from_samples(np.array([1.0, 2.0, 3.0, 4.0]), 10)
    assert e.value == 2.5
    assert e.std_error == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    with pytest.raises(ValueError):
        MCEstimate(math.nan, 0.1, 1, 1)
    with pytest.raises(ValueError):
        MCEstimate(1.0, -0.1, 1, 1)


def test_config_validation():
    with pytest.raises(ValueError):
        MCConfig(n_steps=(250, 1000, 3500))
    with pytest.raises(ValueError):
        MCConfig(n_paths=1)
    assert MCConfig(n_steps=100).n_steps == (100,)


def test_worker_count_does_not_change_results():
    law = StableLaw(1.5)
    base = MCConfig(seed=9, n_paths=3333, n_steps=(10, 40), block_paths=250)
    ref = simulate_ensemble(law, base)
    for w in (2, 4, 8):
        other = simulate_ensemble(law, MCConfig(seed=9, n_paths=3333, n_steps=(10, 40), block_paths=250, workers=w))
        for n in (10, 40):
            assert np.array_equal(ref[n].running_max, other[n].running_max)
            assert np.array_equal(ref[n].running_min, other[n].running_min)
            assert np.array_equal(ref[n].terminal, other[n].terminal)


def test_blocks_use_independent_streams():
    a = stream_for_block(1, 0).random(5)
    b = stream_for_block(1, 1).random(5)
    c = stream_for_block(2, 0).random(5)
    assert not np.allclose(a, b) and not np.allclose(a, c)
    assert np.array_equal(a, stream_for_block(1, 0).random(5))


def test_coarse_levels_share_paths():
    law, e = ens(1.5, steps=(10, 40, 160))
    # same endpoint on every level; finer grids see more of the path
    assert np.array_equal(e[10].terminal, e[160].terminal)
    assert np.all(e[10].running_max <= e[40].running_max)
    assert np.all(e[40].running_max <= e[160].running_max)
    assert np.all(e[40].running_min >= e[160].running_min)


def test_terminal_law():
    # the grid endpoint is an exact draw of X_1
    for a in [0.5, 1.5]:
        law, e = ens(a, n_paths=20000, steps=(8,))
        x = np.sort(e[8].terminal)
        q = np.quantile(x, np.linspace(0.05, 0.95, 19))
        emp = np.searchsorted(x, q, side="right") / x.size
        assert np.max(np.abs(emp - (1 - law.tail_prob(q)))) < 0.015


def test_bridge_supremum_mean():
    law, e = ens(2.0, n_paths=200_000, steps=(8,), bridge=True)
    m = estimate_sup_mean(law, e[8], symmetrize=False)
    assert abs(m.value - 2 / math.sqrt(math.pi)) < 3 * m.std_error


def test_bridge_sup_tail():
    law, e = ens(2.0, n_paths=200_000, steps=(8,), bridge=True)
    p = estimate_sup_tail(law, 1.0, e[8])
    assert abs(p.value - special.erfc(0.5)) < 3 * p.std_error


def test_uncorrected_grid_max_is_biased_low_and_extrapolates_up():
    law, e = ens(2.0, n_paths=20000, steps=(16, 64, 256))
    means = [estimate_sup_mean(law, e[n], symmetrize=False).value for n in (16, 64, 256)]
    assert means[0] < means[1] < means[2] < 2 / math.sqrt(math.pi)
    est, model = refine_and_extrapolate(lambda n: e[n].running_max, (16, 64, 256))
    assert model.ok and est.value > means[2]
    assert abs(est.value - 2 / math.sqrt(math.pi)) < 3 * est.std_error + 0.01


def test_doubling_steps_reduces_bias_on_the_anchor():
    law, e = ens(2.0, n_paths=20000, steps=(32, 64, 128, 256))
    exact = 2 / math.sqrt(math.pi)
    bias = [exact - e[n].running_max.mean() for n in (32, 64, 128, 256)]
    assert all(b < a for a, b in zip(bias, bias[1:]))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_sandwich(alpha):
    law, e = ens(alpha, n_paths=50_000, steps=(32,))
    for u in [0.5, 1.0, 2.0, 4.0]:
        p = estimate_sup_tail(law, u, e[32])
        lower = np.mean(e[32].terminal >= u)
        assert p.value >= lower
        assert p.value <= 2 * law.tail_prob(u) + 3 * p.std_error
        assert p.value >= law.tail_prob(u) - 3 * p.std_error


def test_sup_tail_monotone_and_vanishing():
    law, e = ens(1.5, n_paths=20000, steps=(32,))
    us = [0.25, 0.5, 1, 2, 4, 8, 16, 64, 1000]
    ps = [estimate_sup_tail(law, u, e[32]).value for u in us]
    assert all(b <= a for a, b in zip(ps, ps[1:]))
    assert ps[-1] < 1e-3


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 2.0])
def test_decomposition_identity(alpha):
    law, e = ens(alpha, n_paths=1000, steps=(50,))
    for t in [1e-4, 1e-2, 0.3, 3.0]:
        s = t ** (1 / alpha)
        q = q_measure(e[50], law, UNIT, t)
        rhs = 1 - 2 * s * l_measure(e[50], law, UNIT, t) + s * r_measure(e[50], law, UNIT, t)
        assert np.max(np.abs(q - rhs)) < 1e-12


@pytest.mark.parametrize("c", [2.0, 0.5])
def test_scaling_identity(c):
    law, e = ens(1.5, n_paths=1000, steps=(50,))
    for t in [1e-3, 0.1]:
        big = estimate_Q(law, Interval(0, c), c**1.5 * t, e[50]).value
        small = estimate_Q(law, UNIT, t, e[50]).value
        assert big == pytest.approx(c * small, abs=1e-12)


def test_Q_bounds():
    law, e = ens(1.5, n_paths=5000, steps=(50,))
    for t in [1e-8, 1e-3, 0.1, 1.0]:
        q = estimate_Q(law, UNIT, t, e[50])
        assert q.value <= 1 + 3 * q.std_error
    assert estimate_Q(law, UNIT, 1e-12, e[50]).value == pytest.approx(1.0, abs=1e-5)
    with pytest.raises(ValueError):
        estimate_Q(law, UNIT, 0.0, e[50])


def test_control_variate_is_unbiased_and_tighter():
    law, e = ens(0.5, n_paths=20000, steps=(64,))
    t = 1e-3
    raw = estimate_Q(law, UNIT, t, e[64])
    cv = estimate_Q(law, UNIT, t, e[64], control_variate=True)
    assert cv.std_error < raw.std_error
    assert abs(raw.value - cv.value) < 3 * raw.std_error


def test_brownian_Q_against_spectral_series():
    law, e = ens(2.0, n_paths=40000, steps=(64,), bridge=True)
    t = 1e-2
    q = estimate_Q(law, UNIT, t, e[64])
    assert abs(q.value - spectral_Q_brownian(UNIT, t)) < 3 * q.std_error


def test_uncorrected_Q_extrapolates_to_bridge_value():
    law = StableLaw(2.0)
    t = 1e-2
    plain = simulate_ensemble(law, MCConfig(seed=4, n_paths=20000, n_steps=(64, 256, 1024), block_paths=500))
    bridged = simulate_ensemble(law, MCConfig(seed=5, n_paths=20000, n_steps=(64,), block_paths=500, bridge=True))[64]
    est, model = refine_and_extrapolate(lambda n: q_measure(plain[n], law, UNIT, t), (64, 256, 1024))
    ref = estimate_Q(law, UNIT, t, bridged)
    assert model.ok
    assert abs(est.value - ref.value) < 3 * math.hypot(est.std_error, ref.std_error)


def test_H_below_one_minus_Q():
    for alpha in [0.5, 1.5]:
        law, e = ens(alpha, n_paths=20000, steps=(16, 64, 256))
        for t in [1e-3, 1e-2]:
            est, _ = refine_and_extrapolate(lambda n: q_measure(e[n], law, UNIT, t), (16, 64, 256))
            assert heat_loss(law, UNIT, t) <= 1 - est.value + 3 * est.std_error


def test_L_cauchy_against_closed_form():
    law, e = ens(1.0, n_paths=40000, steps=(16, 64, 256))
    t = 1e-2
    est, model = refine_and_extrapolate(lambda n: l_measure(e[n], law, UNIT, t, symmetrize=False), (16, 64, 256))
    ref = L_closed(1.0, t)
    assert abs(est.value - ref) < 3 * est.std_error + 0.01 * ref


def test_L_and_r_limits():
    law, e = ens(1.5, n_paths=20000, steps=(64,))
    est = estimate_L(law, UNIT, 1e-6, e[64])
    lo, hi = math.gamma(1 / 3) / math.pi, 2 * math.gamma(1 / 3) / math.pi
    assert lo - 3 * est.std_error <= est.value <= hi + 3 * est.std_error
    for alpha in [0.5, 1.0, 1.5, 2.0]:
        law, e = ens(alpha, n_paths=5000, steps=(32,))
        r = [estimate_r(law, UNIT, t, e[32]).value for t in [1e-1, 1e-3, 1e-6]]
        assert min(r) >= 0
        assert r[-1] <= r[0]
        assert r[-1] < 0.05 * max(r[0], 1e-300) or r[-1] < 1e-3


def test_r_envelope():
    law, e = ens(1.0, n_paths=5000, steps=(32,))
    for t in [0.1, 1.0]:
        r = r_measure(e[32], law, UNIT, t)
        m = 1 / t
        up = np.minimum(e[32].running_max, m)
        down = np.minimum(-e[32].running_min, m)
        assert np.all(r >= 0)
        assert np.all(r <= np.minimum(up, down) + 1e-15)


def test_extrapolator_recovers_exact_power_law():
    rng = np.random.default_rng(0)
    noise = rng.normal(size=1000) * 1e-3
    est, model = refine_and_extrapolate(lambda n: 2.0 + 3.0 * n**-0.5 + noise, (100, 400, 1600))
    assert model.ok
    assert model.gamma == pytest.approx(0.5, rel=1e-10)
    assert est.value == pytest.approx(2.0 + noise.mean(), rel=1e-12)


def test_extrapolator_reports_non_monotone_schedule():
    vals = {100: 1.0, 400: 1.2, 1600: 1.1}
    est, model = refine_and_extrapolate(lambda n: np.full(10, vals[n]) + np.linspace(0, 1e-3, 10), (100, 400, 1600))
    assert not model.ok and "monotone" in model.reason
    assert est.value == pytest.approx(1.1 + 5e-4)
    with pytest.raises(ValueError):
        refine_and_extrapolate(lambda n: np.zeros(3), (100, 400))
