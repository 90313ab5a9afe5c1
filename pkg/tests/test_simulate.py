"""Exact jump-process sampling: grids, laws, clocks, serialization."""

import numpy as np
import pytest

import spindrift as sd
from spindrift.dynamics import Trajectory
from spindrift.models import CyclicParams, TabulatedSpec
from spindrift.simulate import (
    JumpPath,
    ResourceError,
    RngStream,
    grid_counts,
    mix64,
    rescaling_consistency,
    simulate_density_profile,
    simulate_spin_system,
    snap_to_grid,
    sup_distance,
)


def test_mix64_deterministic_and_spread():
    assert mix64(1, 2, 3) == mix64(1, 2, 3)
    seen = {mix64(7, n, r) for n in (100, 200) for r in range(50)}
    assert len(seen) == 100
    assert mix64(1, 2) != mix64(2, 1)


def test_rng_stream_reproducible():
    a = RngStream(42, 3).generator().random(8)
    b = RngStream(42, 3).generator().random(8)
    assert np.array_equal(a, b)
    c = RngStream(42, 4).generator().random(8)
    assert not np.array_equal(a, c)


def test_grid_checks():
    counts = grid_counts(np.array([0.25, 0.5]), 4)
    assert np.array_equal(counts, [1, 2])
    with pytest.raises(ValueError):
        grid_counts(np.array([0.3, 0.5]), 4)
    snapped, delta = snap_to_grid(np.array([0.30, 0.50]), 4)
    assert np.array_equal(snapped, [0.25, 0.5])
    assert delta == pytest.approx(0.05)


def test_path_grid_invariant(antiferro_j1, x0_off_center):
    path = simulate_density_profile(antiferro_j1, x0_off_center, 50, 2.0, RngStream(10))
    counts = path.count_path()
    assert counts.min() >= 0 and counts.max() <= 50
    assert np.all(np.diff(path.times) > 0)
    assert path.times[0] > 0 and path.times[-1] <= path.T
    assert set(np.unique(path.types)).issubset({1, 2, 3})
    assert set(np.unique(path.dirs)).issubset({-1, 1})


def test_boundary_rates_keep_grid_inside():
    # strong field drives the state against the upper boundary
    spec = sd.build_mean_field(np.zeros((2, 2)), np.full(2, 3.0))
    path = simulate_density_profile(spec, np.array([0.9, 0.9]), 10, 20.0, RngStream(11))
    counts = path.count_path()
    assert counts.max() == 10  # boundary reached ...
    assert counts.min() >= 0  # ... and never crossed


def test_reproducibility_bitwise(antiferro_j1, x0_off_center):
    a = simulate_density_profile(antiferro_j1, x0_off_center, 200, 2.0, RngStream(12, 5))
    b = simulate_density_profile(antiferro_j1, x0_off_center, 200, 2.0, RngStream(12, 5))
    assert np.array_equal(a.times, b.times)
    assert np.array_equal(a.types, b.types)
    assert np.array_equal(a.dirs, b.dirs)
    c = simulate_density_profile(antiferro_j1, x0_off_center, 200, 2.0, RngStream(12, 6))
    assert not np.array_equal(a.times, c.times)


def test_zero_rates_freeze_path():
    spec = TabulatedSpec(np.zeros(3), np.zeros(3))
    path = simulate_density_profile(spec, np.full(3, 0.5), 100, 5.0, RngStream(13))
    assert path.event_count == 0
    assert np.array_equal(path.final_state(), np.full(3, 0.5))


def test_off_grid_initial_state_rejected(antiferro_j1):
    with pytest.raises(ValueError):
        simulate_density_profile(antiferro_j1, np.array([0.333, 0.5, 0.5]), 100, 1.0, RngStream(1))


def test_event_budget_guard(antiferro_j1, x0_off_center):
    with pytest.raises(ResourceError):
        simulate_density_profile(antiferro_j1, x0_off_center, 1000, 5.0, RngStream(1),
                                 max_events=100)


def test_mean_event_count_matches_rate_integral(zero_model):
    # lam = mu = 1 gives f_i + g_i = 1 on every grid state, so the total
    # jump rate is exactly N*k and the expected event count N*k*T
    N, T, R = 1000, 10.0, 100
    counts = [
        simulate_density_profile(zero_model, np.full(3, 0.5), N, T,
                                 RngStream(mix64(5, r))).event_count
        for r in range(R)
    ]
    assert np.mean(counts) == pytest.approx(N * 3 * T, rel=0.05)


def test_terminal_state_tracks_ode(antiferro_j1, x0_off_center):
    traj = sd.integrate(antiferro_j1, x0_off_center, 5.0)
    good = 0
    for r in range(100):
        path = simulate_density_profile(antiferro_j1, x0_off_center, 10_000, 5.0,
                                        RngStream(mix64(6, r)))
        good += np.max(np.abs(path.final_state() - traj.final_state)) < 0.05
    assert good >= 95


def test_aggregated_spin_system_shares_event_list(antiferro_j1, x0_off_center):
    agg = simulate_spin_system(antiferro_j1, x0_off_center, 100, 2.0, RngStream(14),
                               mode="aggregated")
    dp = simulate_density_profile(antiferro_j1, x0_off_center, 100, 2.0, RngStream(14))
    assert np.array_equal(agg.times, dp.times)
    assert np.array_equal(agg.types, dp.types)
    assert np.array_equal(agg.dirs, dp.dirs)


def test_full_spin_mode_guards(antiferro_j1, x0_off_center):
    with pytest.raises(ResourceError):
        simulate_spin_system(antiferro_j1, x0_off_center, 20_000, 1.0, RngStream(1),
                             mode="full")
    with pytest.raises(ValueError):
        simulate_spin_system(antiferro_j1, x0_off_center, 100, 1.0, RngStream(1),
                             mode="partial")


def test_full_spin_single_type_moments():
    # independent flips with lam = mu = 1: terminal mean from the ODE,
    # terminal variance close to x(1-x)/N
    spec = sd.build_mean_field(np.zeros((1, 1)), np.zeros(1))
    N, T, R = 50, 5.0, 2000
    terms = np.array([
        simulate_spin_system(spec, np.array([0.6]), N, T, RngStream(mix64(7, r)),
                             mode="full").final_state()[0]
        for r in range(R)
    ])
    x_ode = 0.5 + 0.1 * np.exp(-2.0 * T)
    var_theory = 0.5 * 0.5 / N
    z = abs(terms.mean() - x_ode) / np.sqrt(var_theory / R)
    assert z < 3.0
    assert abs(terms.var(ddof=1) / var_theory - 1.0) < 0.25


def test_full_spin_preserves_grid(antiferro_j1, x0_off_center):
    path = simulate_spin_system(antiferro_j1, x0_off_center, 60, 2.0, RngStream(15),
                                mode="full")
    counts = path.count_path()
    assert counts.min() >= 0 and counts.max() <= 60
    assert np.all(np.diff(path.times) > 0)


def _constant_trajectory(x0, T, step=1e-2):
    times = np.arange(0.0, T + step / 2, step)
    return Trajectory(times=times, states=np.tile(x0, (times.size, 1)), step=step)


def test_sup_distance_zero_for_constant_pair():
    x0 = np.full(3, 0.5)
    path = JumpPath(x0=x0, N=10, T=1.0, times=np.empty(0),
                    types=np.empty(0, np.int16), dirs=np.empty(0, np.int8))
    traj = _constant_trajectory(x0, 1.0)
    assert sup_distance(path, traj) == 0.0
    assert sup_distance(path, traj, "max") == 0.0


def test_sup_distance_single_jump_geometry():
    x0 = np.full(3, 0.5)
    N = 10
    path = JumpPath(x0=x0, N=N, T=1.0, times=np.array([0.4]),
                    types=np.array([1], np.int16), dirs=np.array([1], np.int8))
    traj = _constant_trajectory(x0, 1.0)
    assert sup_distance(path, traj, "max") == pytest.approx(1.0 / N)
    assert sup_distance(path, traj, "euclidean") == pytest.approx(1.0 / N)
    with pytest.raises(ValueError):
        sup_distance(path, traj, "manhattan")


def test_sup_distance_input_validation(antiferro_j1, x0_off_center):
    path = simulate_density_profile(antiferro_j1, x0_off_center, 50, 2.0, RngStream(16))
    short = sd.integrate(antiferro_j1, x0_off_center, 1.0)
    with pytest.raises(ValueError):
        sup_distance(path, short)
    coarse = _constant_trajectory(x0_off_center, 2.0, step=0.5)
    with pytest.raises(ValueError):
        sup_distance(path, coarse)


def test_median_distance_decreases_with_system_size(antiferro_j1, x0_off_center):
    traj = sd.integrate(antiferro_j1, x0_off_center, 5.0)
    medians = []
    for N in (100, 400, 1600, 6400):
        dists = [
            sup_distance(
                simulate_density_profile(antiferro_j1, x0_off_center, N, 5.0,
                                         RngStream(mix64(8, N, r))), traj)
            for r in range(8)
        ]
        medians.append(np.median(dists))
    assert np.all(np.diff(medians) < 0)


def test_rescaling_identity_trivial_at_unit_size(zero_model):
    # N=1: the only grid points are the corners and both clocks coincide
    assert rescaling_consistency(zero_model, np.array([1.0, 0.0, 1.0]), 1, 2.0,
                                 RngStream(17))


def test_rescaling_identity_fixed_seed(antiferro_j1, x0_off_center):
    assert rescaling_consistency(antiferro_j1, x0_off_center, 100, 1.0, RngStream(18))


def test_binary_round_trip(antiferro_j1, x0_off_center, tmp_path):
    path = simulate_density_profile(antiferro_j1, x0_off_center, 80, 2.0, RngStream(19))
    f = tmp_path / "events.bin"
    path.to_binary(f)
    again = JumpPath.from_binary(f)
    assert again.k == path.k and again.N == path.N and again.T == path.T
    assert again.seed == path.seed
    assert np.array_equal(again.x0, path.x0)
    assert np.array_equal(again.times, path.times)
    assert np.array_equal(again.types, path.types)
    assert np.array_equal(again.dirs, path.dirs)


def test_csv_export(antiferro_j1, x0_off_center, tmp_path):
    path = simulate_density_profile(antiferro_j1, x0_off_center, 50, 1.0, RngStream(20))
    f = tmp_path / "events.csv"
    path.to_csv(f)
    lines = f.read_text().splitlines()
    assert lines[0] == "time,type,direction"
    assert len(lines) == path.event_count + 1
    t0, y0, d0 = lines[1].split(",")
    assert float(t0) == path.times[0]
    assert int(y0) == path.types[0] and int(d0) == path.dirs[0]


def test_state_at_queries(antiferro_j1, x0_off_center):
    path = simulate_density_profile(antiferro_j1, x0_off_center, 40, 2.0, RngStream(21))
    assert np.array_equal(path.state_at(0.0), path.x0)
    counts = path.count_path()
    j = path.event_count // 2
    assert np.array_equal(path.state_at(path.times[j - 1]), counts[j] / 40)


def test_spin_config_magnetization():
    cfg = sd.SpinConfig(values=np.array([[1, -1, 1, 1], [-1, -1, -1, 1]], dtype=np.int8))
    assert np.array_equal(cfg.magnetization(), [0.75, 0.25])
