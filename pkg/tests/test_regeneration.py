import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import path_from_steps
from gwlab.bounds import escape_probability, p_inf
from gwlab.coupling import BiasParams, run_trajectory
from gwlab.offspring import point_mass
from gwlab.regeneration import (
    FOUND,
    UNDECIDED,
    RegenConfig,
    ZeroSR,
    check_zero_sr,
    default_margin,
    detect_regens,
    first_regen_rows,
    regens_of,
    split_segments,
)
from gwlab.sampling import sample_y
from gwlab.segments import speed_regen
from gwlab.stats import mean_estimate


def brute_regens(y, mode, margin):
    """Quadratic scan straight from the definition plus the confirmation rule."""
    out = []
    for t in range(len(y)):
        if t > 0 and not y[t] > max(y[:t]):
            continue
        fut = y[t + 1:]
        if mode == "strict" and any(v <= y[t] for v in fut):
            continue
        if mode == "nonstrict" and any(v < y[t] for v in fut):
            continue
        if y[-1] - y[t] > margin:
            out.append(t)
    return out


def test_monotone_path():
    y = path_from_steps([1] * 6)
    assert detect_regens(y, 2.0, RegenConfig("strict", 2)).tolist() == [0, 1, 2, 3]


def test_hand_traced_path():
    y = path_from_steps([1, 1, -1, 1, 1] + [1] * 10)
    strict = detect_regens(y, 2.0, RegenConfig("strict", 2)).tolist()
    assert strict[:2] == [0, 5]
    assert 1 not in strict and 2 not in strict
    nonstrict = detect_regens(y, 2.0, RegenConfig("nonstrict", 2)).tolist()
    assert nonstrict[:2] == [0, 1]


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.sampled_from([-1, 1, 1]), min_size=1, max_size=60),
    st.sampled_from(["strict", "nonstrict"]),
    st.integers(1, 5),
)
def test_matches_brute_force(steps, mode, margin):
    y = path_from_steps(steps)
    got = detect_regens(y, 2.0, RegenConfig(mode, margin)).tolist()
    assert got == brute_regens(y.tolist(), mode, margin)


def test_input_validation():
    with pytest.raises(ValueError):
        detect_regens([1, 2], 2.0)
    with pytest.raises(ValueError):
        detect_regens([0, 2], 2.0)
    with pytest.raises(ValueError):
        RegenConfig("loose")
    with pytest.raises(ValueError):
        RegenConfig(margin=0)


def test_default_margin():
    assert default_margin(10.0) == 9
    assert default_margin(2.0) == 30
    for b in (1.5, 3.0, 717.0):
        m = default_margin(b)
        assert b**-m <= 1e-9 < b ** -(m - 1)


def test_check_zero_sr():
    cfg = RegenConfig("strict", 2)
    assert check_zero_sr(path_from_steps([-1, 1, 1, 1, 1]), 2.0, cfg) is ZeroSR.FAILS
    assert check_zero_sr(path_from_steps([1] * 5), 2.0, cfg) is ZeroSR.HOLDS
    assert check_zero_sr(path_from_steps([1, 1]), 2.0, cfg) is ZeroSR.UNDECIDED


def test_first_regen_rows():
    y = np.stack([
        path_from_steps([1, 1, -1, 1, 1, 1, 1, 1]),
        path_from_steps([1, -1, 1, 1, 1, 1, 1, 1]),
        path_from_steps([1, 1, -1, -1, -1, 1, 1, 1]),
    ])
    status, tau = first_regen_rows(y, "strict", 2, min_time=1)
    assert status.tolist() == [FOUND, FOUND, UNDECIDED]
    assert tau.tolist() == [5, 4, -1]


def test_split_segments_monotone():
    traj = run_trajectory(point_mass(2), BiasParams(1e9, 0.0), 50, seed=0)
    assert np.all(np.diff(traj.y) == 1)
    segs = split_segments(traj, regens_of(traj, RegenConfig(margin=2)))
    assert len(segs) == 50 - 3
    assert np.all(segs.length == 1) and np.all(segs.gain_beta == 1) and np.all(segs.gain_beta_eps == 1)


def test_split_segments_too_few():
    traj = run_trajectory(point_mass(1), BiasParams(2.0, 0.0), 5, seed=0)
    assert len(split_segments(traj, np.array([0]))) == 0
    assert len(split_segments(traj, np.array([], dtype=np.int64))) == 0


def test_ray_segments():
    beta = 3.0
    traj = run_trajectory(point_mass(1), BiasParams(beta, 0.0), 10**6, seed=7)
    segs = split_segments(traj, regens_of(traj))
    # density of regeneration times is v * (beta-1)/(beta+1) = ((beta-1)/(beta+1))^2
    length = mean_estimate(segs.length)
    assert length.within(((beta + 1) / (beta - 1)) ** 2, 3)
    assert speed_regen(segs).within(0.5, 3)
    half = len(segs) // 2
    a, b = mean_estimate(segs.length[:half]), mean_estimate(segs.length[half:])
    assert abs(a.value - b.value) < 4 * np.hypot(a.stderr, b.stderr)


def test_confirmed_regens_survive_extension():
    params = BiasParams(1.5, 0.0)
    traj = run_trajectory(point_mass(1), params, 200_000, seed=3)
    cfg = RegenConfig("strict", 5)
    full = set(detect_regens(traj.y, 1.5, cfg).tolist())
    for n in (1000, 10_000, 100_000):
        prefix = detect_regens(traj.y[: n + 1], 1.5, cfg)
        assert set(prefix.tolist()) <= full


@pytest.mark.parametrize("beta", [2.0, 3.0, 5.0])
def test_zero_sr_frequency_is_escape_probability(beta):
    s = sample_y(beta, 40_000, seed=int(beta))
    p = escape_probability(beta)
    se = np.sqrt(p * (1 - p) / 40_000)
    assert abs(s.acceptance - p) < 3 * se
    # the bound constant is smaller by the factor beta/(beta+1)
    assert s.acceptance - p_inf(beta) > 5 * se
