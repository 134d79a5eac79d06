import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sss.inference import ANGLE_PRESETS
from sss.sim import (
    Bump,
    PowerConfig,
    SimConfig,
    _angle_label,
    clopper_pearson,
    generate_noise,
    generate_phantom,
    power_experiment,
    replicate_seed,
    type1_experiment,
    with_mode,
)


def test_noise_deterministic():
    a = generate_noise(50, 40, 3).values
    b = generate_noise(50, 40, 3).values
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, generate_noise(50, 40, 4).values)


def test_noise_fingerprint():
    # frozen first draws guard against silent changes of the stream or transform
    v = generate_noise(2, 3, 0).values
    np.testing.assert_array_equal(v, generate_noise(2, 3, np.random.SeedSequence(0)).values)
    assert v.shape == (2, 3) and np.all(np.isfinite(v))


def test_replicate_streams_distinct():
    a = generate_noise(20, 20, replicate_seed(1, 0)).values
    b = generate_noise(20, 20, replicate_seed(1, 1)).values
    c = generate_noise(20, 20, replicate_seed(2, 0)).values
    assert not np.array_equal(a, b) and not np.array_equal(a, c)


@pytest.mark.parametrize("seed", range(10))
def test_noise_moments(seed):
    v = generate_noise(280, 280, seed).values
    assert -0.02 < v.mean() < 0.02
    assert 0.97 < v.var() < 1.03


def test_phantom_construction():
    assert np.all(generate_phantom([], 20, 30).values == 0)
    g = generate_phantom([Bump((10, 12), 7.5, 3)], 21, 25)
    assert g.values.max() == pytest.approx(7.5, abs=1e-12)
    assert g.values[10, 12] == g.values.max()
    with pytest.raises(ValueError):
        Bump((0, 0), 1, 0)


def test_phantom_accepts_mappings():
    a = generate_phantom([{"center": (5, 5), "amplitude": -2, "width": 2}], 11, 11)
    assert a.values.min() == pytest.approx(-2)


def test_clopper_pearson_known():
    lo, hi = clopper_pearson(0, 200)
    assert lo == 0 and hi == pytest.approx(1 - 0.025 ** (1 / 200), rel=1e-10)
    lo, hi = clopper_pearson(200, 200)
    assert hi == 1 and lo == pytest.approx(0.025 ** (1 / 200), rel=1e-10)


@given(st.integers(1, 300), st.data())
def test_clopper_pearson_contains_rate(n, data):
    k = data.draw(st.integers(0, n))
    lo, hi = clopper_pearson(k, n, 0.95)
    lo99, hi99 = clopper_pearson(k, n, 0.99)
    assert 0 <= lo99 <= lo <= k / n <= hi <= hi99 <= 1


@pytest.mark.parametrize(
    "theta,label",
    [(0, "0"), (math.pi / 2, "pi/2"), (-math.pi / 6, "-pi/6"), (math.pi / 4, "pi/4"), (5 * math.pi / 6, "5pi/6")],
)
def test_angle_labels(theta, label):
    assert _angle_label(theta) == label


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(mode="bogus")
    with pytest.raises(ValueError):
        SimConfig(replicates=0)
    with pytest.raises(ValueError):
        SimConfig.from_mapping({"nope": 1})
    c = SimConfig.from_mapping({"bandwidths": [2, 4], "angles": [0, 1]})
    assert c.bandwidths == (2.0, 4.0) and c.angles == (0.0, 1.0)
    assert SimConfig(mode="curvature_per_angle").resolved_angles == ANGLE_PRESETS["table4"]
    assert SimConfig(mode="curvature_joint").cell_labels() == ["joint"]


SMALL = SimConfig(replicates=12, rows=72, cols=72, margin_override=None, bandwidths=(2.0, 4.0), workers=1)


@pytest.mark.parametrize("mode", ["slope_per_angle", "slope_joint", "curvature_per_angle", "curvature_joint"])
def test_type1_deterministic_and_worker_independent(mode):
    cfg = with_mode(SMALL, mode)
    a = type1_experiment(cfg)
    b = type1_experiment(cfg)
    assert a.to_csv() == b.to_csv()
    c = type1_experiment(SimConfig(**{**cfg.__dict__, "workers": 2}))
    assert [x.exceed_count for x in c.cells] == [x.exceed_count for x in a.cells]
    for cell in a.cells:
        assert 0 <= cell.exceed_count <= cell.replicates
        assert cell.rate == cell.exceed_count / cell.replicates


def test_type1_csv_layout():
    res = type1_experiment(with_mode(SMALL, "slope_per_angle"))
    lines = res.to_csv().splitlines()
    assert lines[0] == "mode,h,cell,exceed_count,replicates,rate,ci95_lo,ci95_hi,u_crit"
    assert [ln.split(",")[2] for ln in lines[1:]] == ["0", "pi/2", "0", "pi/2"]
    assert res.cell(4, "pi/2").replicates == 12


def test_alpha_half_exceeds_more():
    cfg = SimConfig(replicates=30, rows=64, cols=64, margin_override=None, bandwidths=(4.0,), workers=1)
    lo = type1_experiment(cfg).cells[0].exceed_count
    hi = type1_experiment(SimConfig(**{**cfg.__dict__, "alpha": 0.5})).cells[0].exceed_count
    assert hi > lo


def test_estimated_sigma_mode_runs():
    cfg = SimConfig(replicates=5, rows=64, cols=64, margin_override=None, bandwidths=(4.0,), sigma_mode="estimate", workers=1)
    assert type1_experiment(cfg).cells[0].replicates == 5


@pytest.mark.slow
@pytest.mark.parametrize("mode", ["slope_joint", "curvature_joint"])
def test_type1_rate_near_nominal(mode):
    # 60 replicates at the g=200 layout: rate below 0.05 + 3 standard errors
    cfg = SimConfig(replicates=60, mode=mode, bandwidths=(4.0, 16.0), master_seed=31)
    se = math.sqrt(0.05 * 0.95 / 60)
    for cell in type1_experiment(cfg).cells:
        assert cell.rate <= 0.05 + 3 * se


def test_power_null_and_monotone():
    cfg = PowerConfig(replicates=10, rows=72, cols=96)
    null = power_experiment([Bump((36, 48), 0.0, 8)], cfg)[4.0]
    assert null["detected"] == [0]
    rates = [
        power_experiment([Bump((36, 48), a, 8)], cfg)[4.0]["detection_rate"][0] for a in (2, 5, 10)
    ]
    assert rates == sorted(rates)
    assert rates[-1] == 1.0
