import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dronehandover import montecarlo as mc
from dronehandover.analytic import ccdf_given_r0, hybrid_ccdf_tier2
from dronehandover.geometry import serving_distance_at
from dronehandover.model import (
    Constant,
    DroneNetworkModel,
    HybridTierConfig,
    SimulationConfig,
    SweepParams,
    TierParams,
    TwoPoint,
    UniformRange,
)
from dronehandover.montecarlo import (
    DroneField,
    DroneState,
    HybridConditioning,
    area_dart_oracle,
    entry_times,
    estimate_ccdf_pair,
    estimate_conditional_ccdf,
    estimate_hybrid_ccdf,
    estimate_rate_and_sojourn,
    first_handover_time,
    replication_rng,
    run_handover_process,
    sample_field,
    sample_relevant_field,
    wilson_halfwidth,
)

LAM = 5e-4
U = UniformRange(5.0, 25.0)
FIG1 = DroneNetworkModel(LAM, U)


def desk_config(lam2=1e-4):
    return HybridTierConfig(TierParams(1.0, 20.0, LAM, 4.0), TierParams(1.0, 0.0, lam2, 4.0))


# fields -----------------------------------------------------------------------


def test_sample_field_mean_count():
    model = DroneNetworkModel(LAM, U)
    counts = np.array([len(sample_field(model, 500.0, replication_rng(3, i))) for i in range(10_000)])
    mean = LAM * math.pi * 500.0**2
    assert abs(counts.mean() - mean) <= 4 * math.sqrt(mean / counts.size)
    # Poisson: variance equals mean
    assert counts.var(ddof=1) == pytest.approx(mean, rel=0.05)


def test_sample_field_exclusion_and_window():
    model = DroneNetworkModel(LAM, U)
    for i in range(200):
        f = sample_field(model, 300.0, replication_rng(1, i), exclusion=12.0)
        r = np.hypot(f.pos0[:, 0], f.pos0[:, 1])
        assert np.all(r > 12.0) and np.all(r <= 300.0)
        assert np.all((np.hypot(f.vel[:, 0], f.vel[:, 1]) >= 5.0 - 1e-12))


def test_sample_field_vanishing_density():
    model = DroneNetworkModel(1e-15, U)
    assert len(sample_field(model, 500.0, replication_rng(0, 0))) == 0
    with pytest.raises(ValueError):
        sample_field(model, 0.0, replication_rng(0, 0))


def test_sample_field_is_nested_in_radius():
    model = DroneNetworkModel(LAM, U)
    small = sample_field(model, 100.0, replication_rng(9, 4))
    big = sample_field(model, 200.0, replication_rng(9, 4))
    n = len(small)
    assert np.array_equal(big.pos0[:n], small.pos0)
    assert np.array_equal(big.vel[:n], small.vel)
    assert np.all(np.hypot(big.pos0[n:, 0], big.pos0[n:, 1]) > 100.0)


def test_relevant_field_is_exact():
    # drones inside a disk at any fixed time in [0, T] form a PPP of density lam
    model = DroneNetworkModel(LAM, U)
    R, T = 150.0, 20.0
    inside_mid = []
    for i in range(2000):
        f = sample_relevant_field(model, R, T, replication_rng(5, i))
        # every sampled drone comes within R during [0, T]
        a = np.einsum("ij,ij->i", f.vel, f.vel)
        b = 2 * np.einsum("ij,ij->i", f.pos0, f.vel)
        c = np.einsum("ij,ij->i", f.pos0, f.pos0)
        t = np.clip(-b / (2 * a), 0.0, T)
        assert np.all((a * t + b) * t + c <= R * R * (1 + 1e-12))
        inside_mid.append(np.count_nonzero(f.distance_sq(T / 2) <= R * R))
    inside_mid = np.array(inside_mid)
    mean = LAM * math.pi * R * R
    assert abs(inside_mid.mean() - mean) <= 4 * math.sqrt(mean / inside_mid.size)


def test_drone_state_round_trip():
    s = DroneState(3, (1.0, -2.0), 4.0, 0.5)
    a, b, c = s.distance_sq_coeffs()
    t = 1.7
    x, y = s.position(t)
    assert (a * t + b) * t + c == pytest.approx(x * x + y * y, rel=1e-14)
    f = DroneField.from_states([s])
    back = f.states()[0]
    assert back.pos0 == s.pos0
    assert back.speed == pytest.approx(4.0) and back.direction == pytest.approx(0.5)


# crossings --------------------------------------------------------------------


def test_first_handover_examples():
    serving = DroneState(0, (12.0, 0.0), 0.0, 0.0)
    other = DroneState(1, (20.0, 0.0), 10.0, math.pi)
    assert first_handover_time(serving, [other], 10.0) == pytest.approx(0.8, rel=1e-12)
    serving = DroneState(0, (12.0, 0.0), 10.0, 0.0)
    other = DroneState(1, (0.0, 20.0), 0.0, 0.0)
    assert first_handover_time(serving, [other], 10.0) == pytest.approx(0.8, rel=1e-12)
    assert first_handover_time(serving, [], 10.0) is None
    assert first_handover_time(serving, [other], 0.5) is None


def test_entry_times_only_counts_entries():
    # c < 0 already inside: the next entry needs the positive, downward root
    tau = entry_times(np.array([1.0, 1.0, 0.0, 0.0, 1.0]),
                      np.array([-4.0, 4.0, -2.0, 2.0, 0.0]),
                      np.array([3.0, 3.0, 1.0, 1.0, 1.0]))
    assert tau[0] == pytest.approx(1.0)
    assert np.isinf(tau[1])
    assert tau[2] == pytest.approx(0.5)
    assert np.isinf(tau[3]) and np.isinf(tau[4])


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(1e-3, 100))
def test_entry_time_is_a_root(a, b, c):
    tau = float(entry_times(a, b, c))
    if math.isfinite(tau):
        assert tau > 0
        assert abs((a * tau + b) * tau + c) <= 1e-9 * max(abs(a) * tau * tau, abs(b) * tau, c)
        assert 2 * a * tau + b < 0


# process tracker ----------------------------------------------------------------


def test_trace_invariants():
    model = DroneNetworkModel(LAM, U)
    for i in range(20):
        tr = run_handover_process(model, 200.0, replication_rng(2, i))
        assert np.all(np.diff(tr.event_times) > 0)
        assert len(tr.serving_ids) == tr.events + 1
        assert all(a != b for a, b in zip(tr.serving_ids, tr.serving_ids[1:]))
        assert all(r <= 1e-9 for r in tr.crossing_residuals)
        assert tr.window_ok
        if tr.events:
            assert 0 < tr.event_times[0] and tr.event_times[-1] <= 200.0


def test_trace_distances_cross_at_events():
    model = DroneNetworkModel(LAM, TwoPoint(10.0, 0.5))
    R = mc.track_radius(LAM, 1e-6)
    rng = replication_rng(4, 0)
    fld = sample_relevant_field(model, R, 100.0, rng)
    tr = run_handover_process(model, 100.0, replication_rng(4, 0))
    for k, t in enumerate(tr.event_times):
        d2 = fld.distance_sq(t)
        old, new = tr.serving_ids[k], tr.serving_ids[k + 1]
        assert abs(d2[new] - d2[old]) <= 1e-9 * max(d2[new], d2[old])
        # just after the event the new drone is the nearest
        after = fld.distance_sq(t + 1e-7)
        assert int(np.argmin(after)) == new


def test_static_drones_never_hand_over():
    model = DroneNetworkModel(LAM, Constant(0.0))
    for i in range(5):
        assert run_handover_process(model, 200.0, replication_rng(0, i)).events == 0
    r = estimate_rate_and_sojourn(model, SimulationConfig(200.0, 10, 0))
    assert r.handover_rate == 0 and r.sojourn_infinite


def test_rate_scales_as_sqrt_lambda():
    law = Constant(10.0)
    a = estimate_rate_and_sojourn(DroneNetworkModel(LAM, law), SimulationConfig(200.0, 200, 1))
    b = estimate_rate_and_sojourn(DroneNetworkModel(4 * LAM, law), SimulationConfig(200.0, 200, 2))
    ratio = b.handover_rate / a.handover_rate
    se = ratio * math.hypot(a.standard_error / a.handover_rate, b.standard_error / b.handover_rate)
    assert abs(ratio - 2.0) <= 4 * se


def test_two_point_rate_and_sojourn():
    r = estimate_rate_and_sojourn(DroneNetworkModel(LAM, TwoPoint(10.0, 0.5)), SimulationConfig(200.0, 200, 3))
    assert abs(r.handover_rate - 0.182980) <= 4 * r.standard_error
    # H = 1 / E[S]: the complete-gap mean is consistent with the rate
    assert r.mean_sojourn * r.handover_rate == pytest.approx(1.0, rel=0.1)


# conditional CCDF ----------------------------------------------------------------


def test_conditional_zero_grid():
    c = estimate_conditional_ccdf(FIG1, 12.0, 10.0, math.pi / 3, [0.0], 500, 0)
    assert c.values[0] == 1.0


def test_determinism_and_thread_independence(monkeypatch):
    grid = [0.0, 0.5, 1.0]
    monkeypatch.setenv(mc.THREADS_ENV, "1")
    a = estimate_ccdf_pair(FIG1, 12.0, 10.0, math.pi / 3, grid, 12000, 42)
    b = estimate_ccdf_pair(FIG1, 12.0, 10.0, math.pi / 3, grid, 12000, 42)
    monkeypatch.setenv(mc.THREADS_ENV, "3")
    c = estimate_ccdf_pair(FIG1, 12.0, 10.0, math.pi / 3, grid, 12000, 42)
    for x, y, z in zip(a, b, c):
        assert np.array_equal(x.values, y.values) and np.array_equal(x.values, z.values)
    cfg = SimulationConfig(50.0, 60, 5)
    monkeypatch.setenv(mc.THREADS_ENV, "1")
    r1 = estimate_rate_and_sojourn(FIG1, cfg)
    monkeypatch.setenv(mc.THREADS_ENV, "2")
    r2 = estimate_rate_and_sojourn(FIG1, cfg)
    assert r1 == r2


def test_replication_streams_are_distinct():
    x = replication_rng(0, 0).random(4)
    assert not np.array_equal(x, replication_rng(0, 1).random(4))
    assert not np.array_equal(x, replication_rng(1, 0).random(4))
    assert not np.array_equal(x, replication_rng(0, 0, stream=2).random(4))
    assert np.array_equal(x, replication_rng(0, 0).random(4))


def test_conditional_matches_analytic_small():
    grid = [0.0, 0.5, 1.5]
    c = estimate_conditional_ccdf(FIG1, 12.0, 10.0, math.pi / 3, grid, 20000, 11)
    for s, p, se in zip(grid, c.values, c.standard_error):
        exact = ccdf_given_r0(FIG1, 12.0, 10.0, math.pi / 3, s)
        assert abs(p - exact) <= 4 * max(se, 1e-12)


def test_window_doubling_guard():
    grid = np.linspace(0.0, 3.8, 20)
    r0, v0, th = 12.0, 10.0, math.pi / 3
    reach = max(r0, float(serving_distance_at(r0, v0, th, grid[-1]))) + U.effective_max() * grid[-1]
    base = estimate_conditional_ccdf(FIG1, r0, v0, th, grid, 10000, 8, window_radius=reach)
    wide = estimate_conditional_ccdf(FIG1, r0, v0, th, grid, 10000, 8, window_radius=2 * reach)
    assert np.all(np.abs(base.values - wide.values) < np.maximum(base.standard_error, 1e-12))


def test_endpoint_bounds_interval():
    grid = np.linspace(0.0, 3.0, 7)
    interval, endpoint = estimate_ccdf_pair(FIG1, 12.0, 10.0, math.pi / 3, grid, 10000, 6)
    # paired on the same replications, so the bound holds sample by sample
    assert np.all(endpoint.values >= interval.values)
    same = DroneNetworkModel(LAM, Constant(15.0))
    interval, endpoint = estimate_ccdf_pair(same, 12.0, 15.0, math.pi / 3, grid, 10000, 6)
    diff = endpoint.values - interval.values
    assert np.all(diff <= 4 * np.maximum(interval.standard_error, 1e-12))


def test_wilson_halfwidth():
    assert wilson_halfwidth(0.5, 100) == pytest.approx(0.0962, abs=1e-4)
    assert wilson_halfwidth(0.0, 100) > 0


# hybrid ------------------------------------------------------------------------


def test_hybrid_zero_and_validation():
    c = estimate_hybrid_ccdf(desk_config(), FIG1, 2, HybridConditioning(30.0), [0.0], 100, 0)
    assert c.values[0] == 1.0
    with pytest.raises(ValueError):
        estimate_hybrid_ccdf(desk_config(), FIG1, 3, HybridConditioning(30.0), [0.0, 1.0], 100, 0)
    with pytest.raises(ValueError):
        estimate_hybrid_ccdf(desk_config(), FIG1, 2, HybridConditioning(30.0), [0.0, 1.0], 100, 0, dt=0)


def test_hybrid_degenerate_tier_matches_single_tier():
    grid = [0.0, 0.5, 1.0]
    cond = HybridConditioning(12.0, 10.0, math.pi / 3)
    h = estimate_hybrid_ccdf(desk_config(1e-300), FIG1, 1, cond, grid, 8000, 1, dt=1e-3)
    single = estimate_conditional_ccdf(FIG1, 12.0, 10.0, math.pi / 3, grid, 8000, 2)
    se = np.hypot(h.standard_error, single.standard_error)
    assert np.all(np.abs(h.values - single.values) <= 4 * np.maximum(se, 1e-12))


def test_hybrid_tier2_matches_formula():
    grid = [0.0, 0.5, 1.0, 2.0]
    c = estimate_hybrid_ccdf(desk_config(), FIG1, 2, HybridConditioning(30.0), grid, 8000, 3, dt=1e-3)
    for s, p, se in zip(grid, c.values, c.standard_error):
        exact = hybrid_ccdf_tier2(desk_config(), FIG1, 30.0, s)
        assert abs(p - exact) <= 4 * se + 0.02 * exact


# darts -------------------------------------------------------------------------


@pytest.mark.parametrize(
    "p, exact",
    [
        (SweepParams(10, 12, 0, 0.0, 2), 480 + 144 * math.pi),
        (SweepParams(7, 12, 10, 1.0, 0), 144 * math.pi),
        (SweepParams(0, 12, 10, math.pi / 3, 1), 364 * math.pi),
    ],
)
def test_dart_examples(p, exact):
    area, se = area_dart_oracle(p, 10**6, replication_rng(0, 0, mc.STREAM_DARTS))
    assert abs(area - exact) <= 4 * se
