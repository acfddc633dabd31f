"""Planner tests: sampling kinematics, cost terms, selection, refinement.

Oracles live at the top: a closed-form circle for the bicycle model, a
shapely-based polygon rasterizer for footprint cells, and a scripted GRU
transcription for the refinement head. They are written from the math, not
from the implementation.
"""

import dataclasses
import json

import numpy as np
import pytest
from shapely.geometry import Point, Polygon

from bevpilot.numerics import grad_check
from bevpilot.perception import BevSpec
from bevpilot.planner import (
    CLIP_BOUND,
    FORWARD,
    TURN_LEFT,
    TURN_RIGHT,
    CostBreakdown,
    EgoState,
    RefineParams,
    TrajectorySet,
    build_report,
    costvolume_cost,
    costvolume_cost_backward,
    evaluate_costs,
    evaluate_costs_backward,
    footprint_cells,
    init_refine_params,
    label_command,
    pool_front_features,
    pool_front_features_backward,
    refine,
    refine_backward,
    render_report,
    roll_bicycle,
    rule_cost,
    rule_features,
    safety_cost,
    safety_features,
    sample_trajectories,
    select_best,
)

# ---------------------------------------------------------------- oracles


def circle_endpoint(radius, arc_length, heading0=0.0):
    """Closed-form endpoint of a constant-curvature arc from the origin."""
    theta = arc_length / radius
    x = radius * np.sin(heading0 + theta) - radius * np.sin(heading0)
    y = -radius * np.cos(heading0 + theta) + radius * np.cos(heading0)
    return np.array([x, y])


def rect_polygon(x, y, heading, length, width, ahead=0.0):
    rear, front, half_w = -length / 2.0, length / 2.0 + ahead, width / 2.0
    local = np.array([[rear, -half_w], [front, -half_w],
                      [front, half_w], [rear, half_w]])
    c, s = np.cos(heading), np.sin(heading)
    rot = np.array([[c, -s], [s, c]])
    return Polygon(local @ rot.T + np.array([x, y]))


def rasterize_oracle(x, y, heading, spec, length, width, ahead=0.0):
    """Brute force: test every cell center against the shapely polygon."""
    poly = rect_polygon(x, y, heading, length, width, ahead)
    cells = set()
    for i in range(spec.h):
        for j in range(spec.w):
            cx = (i + 0.5 - spec.h / 2.0) * spec.resolution
            cy = (j + 0.5 - spec.w / 2.0) * spec.resolution
            if poly.covers(Point(cx, cy)):
                cells.add((i, j))
    return cells


def scripted_refine(tau, h0, target, p):
    """Independent transcription of the refinement rollout in float64."""
    def sig(a):
        return 1.0 / (1.0 + np.exp(-a))

    h = h0.astype(np.float64)
    prev = np.zeros(2)
    outs = []
    for k in range(tau.shape[0]):
        xin = np.concatenate([prev, tau[k], target]).astype(np.float64)
        z = sig(xin @ p.gru.wz + h @ p.gru.uz + p.gru.bz)
        r = sig(xin @ p.gru.wr + h @ p.gru.ur + p.gru.br)
        n = np.tanh(xin @ p.gru.wn + (r * h) @ p.gru.un + p.gru.bn)
        h = (1.0 - z) * h + z * n
        wp = h @ p.out_w + p.out_b
        outs.append(wp)
        prev = wp
    return np.stack(outs)


def single_candidate(state, horizon, dt, accel=0.0, steer=0.0):
    return sample_trajectories(state, horizon, dt, accels=(accel,),
                               steerings=(steer,))


GRID = BevSpec(h=20, w=20, resolution=0.5)


# ---------------------------------------------------------------- sampling


def test_straight_line_waypoints():
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=2.0)
    traj = roll_bicycle(state, accel=0.0, steer=0.0, horizon=4, dt=0.5)
    np.testing.assert_allclose(traj[:, 0], [1.0, 2.0, 3.0, 4.0], atol=1e-12)
    np.testing.assert_allclose(traj[:, 1], 0.0, atol=1e-12)
    np.testing.assert_allclose(traj[:, 3], 2.0)


def test_stationary_waypoints():
    state = EgoState(x=3.0, y=-1.0, heading=0.7, velocity=0.0)
    traj = roll_bicycle(state, accel=0.0, steer=0.3, horizon=5, dt=0.5)
    np.testing.assert_allclose(traj[:, 0], 3.0)
    np.testing.assert_allclose(traj[:, 1], -1.0)
    np.testing.assert_allclose(traj[:, 2], 0.7)  # no motion, no turning
    np.testing.assert_allclose(traj[:, 3], 0.0)


def test_circle_endpoint_matches_closed_form():
    wheelbase, steer, v = 2.8, 0.2, 5.0
    radius = wheelbase / np.tan(steer)
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=v, wheelbase=wheelbase)
    horizon, dt = 40, 0.05
    traj = roll_bicycle(state, accel=0.0, steer=steer, horizon=horizon, dt=dt)
    expected = circle_endpoint(radius, v * dt * horizon)
    err = np.linalg.norm(traj[-1, :2] - expected)
    assert err <= 0.02 * np.linalg.norm(expected)


def test_braking_clamps_velocity_at_zero():
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=1.0)
    traj = roll_bicycle(state, accel=-4.0, steer=0.0, horizon=3, dt=0.5)
    np.testing.assert_allclose(traj[:, 3], [0.0, 0.0, 0.0])
    np.testing.assert_allclose(traj[:, 0], 0.0)  # no backward creep


def test_default_grid_size_and_reproducibility():
    state = EgoState(x=1.0, y=2.0, heading=0.3, velocity=4.0)
    trajs = sample_trajectories(state, horizon=4, dt=0.5)
    assert trajs.n == 4 * 13
    assert trajs.states.shape == (52, 4, 4)
    for n in range(trajs.n):
        again = roll_bicycle(state, trajs.controls[n, 0], trajs.controls[n, 1],
                             trajs.horizon, trajs.dt)
        np.testing.assert_array_equal(trajs.states[n], again)


def test_command_labels():
    assert label_command(0.0) == FORWARD
    assert label_command(np.deg2rad(20.0)) == TURN_LEFT
    assert label_command(np.deg2rad(-20.0)) == TURN_RIGHT
    assert label_command(np.deg2rad(10.0)) == FORWARD
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=5.0)
    trajs = sample_trajectories(state, horizon=4, dt=0.5)
    assert set(trajs.labels) <= {FORWARD, TURN_LEFT, TURN_RIGHT}
    # hard left at speed must label turn-left
    hard_left = np.argmax(trajs.controls[:, 1])
    assert trajs.labels[hard_left] == TURN_LEFT


def test_sampler_rejects_bad_inputs():
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=1.0)
    with pytest.raises(ValueError):
        sample_trajectories(state, horizon=4, dt=0.0)
    with pytest.raises(ValueError):
        sample_trajectories(state, horizon=0, dt=0.5)
    with pytest.raises(ValueError):
        sample_trajectories(state, horizon=4, dt=0.5, accels=())
    with pytest.raises(ValueError):
        EgoState(x=0.0, y=0.0, heading=0.0, velocity=-1.0)
    with pytest.raises(ValueError):
        EgoState(x=0.0, y=0.0, heading=0.0, velocity=1.0, wheelbase=0.0)


# ---------------------------------------------------------------- footprint


def test_footprint_matches_rasterization_oracle():
    rng = np.random.default_rng(11)
    for _ in range(50):
        x, y = rng.uniform(-4.0, 4.0, size=2)
        heading = rng.uniform(-np.pi, np.pi)
        length = rng.uniform(1.0, 6.0)
        width = rng.uniform(0.5, 3.0)
        ahead = rng.choice([0.0, rng.uniform(0.0, 3.0)])
        fi, fj = footprint_cells(x, y, heading, GRID, length, width, ahead)
        got = set(zip(fi.tolist(), fj.tolist()))
        want = rasterize_oracle(x, y, heading, GRID, length, width, ahead)
        assert got == want


def test_footprint_clamps_to_grid():
    fi, fj = footprint_cells(100.0, 100.0, 0.0, GRID, 4.7, 1.9)
    assert fi.size == 0 and fj.size == 0


# ---------------------------------------------------------------- safety


def test_empty_occupancy_is_free():
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=2.0)
    trajs = sample_trajectories(state, horizon=3, dt=0.5)
    occ = np.zeros((3, GRID.h, GRID.w), dtype=bool)
    feats = safety_features(trajs, occ, None, GRID)
    np.testing.assert_array_equal(feats, 0.0)


def test_collision_counts_three_cells():
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=0.0)
    trajs = single_candidate(state, horizon=3, dt=0.5)
    occ = np.zeros((3, GRID.h, GRID.w), dtype=bool)
    occ[1, [10, 11, 12], [10, 10, 10]] = True  # centers x=.25/.75/1.25, y=.25
    feats = safety_features(trajs, occ, None, GRID)
    np.testing.assert_allclose(feats[0], [3.0, 0.0, 0.0, 0.0])
    cost, _ = safety_cost(trajs, occ, None, GRID,
                          w_o=np.array([2.0, 0.0, 0.0, 0.0]))
    np.testing.assert_allclose(cost, [3.0 * 2.0])


def test_margin_band_scales_with_speed():
    # one step at v=10; cells sit in the 0.5 m inflation band, clear of the
    # footprint itself and short of the headway band
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=10.0)
    trajs = single_candidate(state, horizon=1, dt=0.05)
    np.testing.assert_allclose(trajs.positions[0, 0], [0.5, 0.0])
    occ = np.zeros((1, GRID.h, GRID.w), dtype=bool)
    occ[0, [10, 11, 12], [12, 12, 12]] = True  # y = 1.25: outside half-width .95
    feats = safety_features(trajs, occ, None, GRID)
    np.testing.assert_allclose(feats[0], [0.0, 3.0 * 10.0, 0.0, 0.0])
    cost, _ = safety_cost(trajs, occ, None, GRID,
                          w_o=np.array([0.0, 0.5, 0.0, 0.0]))
    np.testing.assert_allclose(cost, [15.0])


def test_headway_band_ahead_of_bumper():
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=2.0)
    trajs = single_candidate(state, horizon=1, dt=0.5)  # step at x=1, v=2
    occ = np.zeros((1, GRID.h, GRID.w), dtype=bool)
    occ[0, 18, 10] = True  # center (4.25, 0.25): past bumper 3.35, within reach 4
    feats = safety_features(trajs, occ, None, GRID)
    np.testing.assert_allclose(feats[0], [0.0, 0.0, 1.0, 0.0])


def test_lane_term_sums_nearest_distances():
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=2.0)
    trajs = single_candidate(state, horizon=2, dt=0.5)  # waypoints x=1, 2
    occ = np.zeros((2, GRID.h, GRID.w), dtype=bool)
    lane = np.zeros((GRID.h, GRID.w), dtype=bool)
    lane[12, 13] = True  # center (1.25, 1.75)
    feats = safety_features(trajs, occ, lane, GRID)
    want = np.hypot(1.25 - 1.0, 1.75) + np.hypot(1.25 - 2.0, 1.75)
    np.testing.assert_allclose(feats[0, 3], want)
    empty = np.zeros((GRID.h, GRID.w), dtype=bool)
    np.testing.assert_allclose(safety_features(trajs, occ, empty, GRID)[:, 3], 0.0)


def test_safety_rejects_mismatched_grids():
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=2.0)
    trajs = sample_trajectories(state, horizon=3, dt=0.5)
    with pytest.raises(ValueError):
        safety_features(trajs, np.zeros((2, GRID.h, GRID.w), dtype=bool), None, GRID)
    with pytest.raises(ValueError):
        safety_features(trajs, np.zeros((3, 10, 20), dtype=bool), None, GRID)


def test_safety_monotone_in_occupancy():
    rng = np.random.default_rng(5)
    state = EgoState(x=-2.0, y=0.0, heading=0.1, velocity=3.0)
    trajs = sample_trajectories(state, horizon=3, dt=0.3,
                                accels=(-2.0, 0.0), steerings=(-0.2, 0.0, 0.2))
    w_o = np.array([1.0, 1.0, 1.0, 0.0])
    for _ in range(20):
        occ = rng.random((3, GRID.h, GRID.w)) < 0.05
        base, _ = safety_cost(trajs, occ, None, GRID, w_o=w_o)
        n = rng.integers(trajs.n)
        k = rng.integers(trajs.horizon)
        x, y, psi, _ = trajs.states[n, k]
        fi, fj = footprint_cells(x, y, psi, GRID, 4.7, 1.9)
        if fi.size == 0:
            continue
        pick = rng.integers(fi.size)
        occ2 = occ.copy()
        occ2[k, fi[pick], fj[pick]] = True
        more, _ = safety_cost(trajs, occ2, None, GRID, w_o=w_o)
        assert np.all(more >= base - 1e-12)


# ---------------------------------------------------------------- cost volume


def test_costvolume_zero_volume():
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=2.0)
    trajs = single_candidate(state, horizon=4, dt=0.5)
    cv = np.zeros((4, GRID.h, GRID.w))
    cost, _ = costvolume_cost(trajs, cv, np.array([1.0]), GRID)
    np.testing.assert_allclose(cost, [0.0])


def test_costvolume_constant_two():
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=2.0)
    trajs = single_candidate(state, horizon=4, dt=0.5)  # x = 1..4, in bounds
    cv = np.full((4, GRID.h, GRID.w), 2.0)
    cost, _ = costvolume_cost(trajs, cv, np.array([1.0]), GRID)
    np.testing.assert_allclose(cost, [8.0])


def test_costvolume_clips_and_penalizes_offgrid():
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=2.0)
    trajs = single_candidate(state, horizon=4, dt=0.5)
    cv = np.full((4, GRID.h, GRID.w), 1000.0)
    cost, _ = costvolume_cost(trajs, cv, np.array([1.0]), GRID, clip_bound=100.0)
    np.testing.assert_allclose(cost, [400.0])  # 100 per step
    # fast candidate leaves the 10 m grid after step 2
    fast = single_candidate(EgoState(x=0.0, y=0.0, heading=0.0, velocity=8.0),
                            horizon=4, dt=0.5)
    assert not np.all(GRID.cell_index(fast.positions)[2])
    cost_f, _ = costvolume_cost(fast, np.zeros((4, GRID.h, GRID.w)),
                                np.array([1.0]), GRID, clip_bound=100.0)
    off = (~GRID.cell_index(fast.positions)[2]).sum()
    np.testing.assert_allclose(cost_f, [100.0 * off])


def test_costvolume_rejects_frame_mismatch():
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=2.0)
    trajs = single_candidate(state, horizon=4, dt=0.5)
    with pytest.raises(ValueError):
        costvolume_cost(trajs, np.zeros((3, GRID.h, GRID.w)), np.array([1.0]), GRID)


def test_costvolume_gradients():
    rng = np.random.default_rng(7)
    state = EgoState(x=-2.0, y=-1.0, heading=0.2, velocity=3.0)
    trajs = sample_trajectories(state, horizon=3, dt=0.4,
                                accels=(0.0, 2.0), steerings=(-0.3, 0.0, 0.3))
    cv0 = rng.uniform(-50.0, 50.0, size=(3, GRID.h, GRID.w))
    gvec = rng.normal(size=trajs.n)
    w_v = np.array([1.3])

    def fn_cv(flat):
        cv = flat.reshape(cv0.shape)
        cost, cache = costvolume_cost(trajs, cv, w_v, GRID)
        gcv, _ = costvolume_cost_backward(gvec, cache, w_v)
        return float(gvec @ cost), gcv.ravel()

    report = grad_check(fn_cv, cv0.ravel())
    assert report.passed, str(report)

    def fn_w(w):
        cost, cache = costvolume_cost(trajs, cv0, w, GRID)
        _, gw = costvolume_cost_backward(gvec, cache, w)
        return float(gvec @ cost), gw

    report = grad_check(fn_w, w_v)
    assert report.passed, str(report)


# ---------------------------------------------------------------- rules


def test_rules_stationary_all_zero():
    state = EgoState(x=0.0, y=0.0, heading=0.4, velocity=0.0)
    trajs = single_candidate(state, horizon=4, dt=0.5)
    np.testing.assert_allclose(rule_features(trajs), 0.0)


def test_rules_straight_progress_reward():
    v, dt, horizon = 2.0, 0.5, 4
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=v)
    trajs = single_candidate(state, horizon=horizon, dt=dt)
    feats = rule_features(trajs)
    np.testing.assert_allclose(feats[0, :3], 0.0, atol=1e-12)
    w_p = 0.7
    cost, _ = rule_cost(trajs, np.array([0.0, 0.0, 0.0, w_p]))
    np.testing.assert_allclose(cost, [-w_p * v * dt * horizon])


def test_rules_curvature_matches_radius():
    wheelbase, steer, v = 2.8, 0.2, 5.0
    radius = wheelbase / np.tan(steer)
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=v, wheelbase=wheelbase)
    trajs = single_candidate(state, horizon=8, dt=0.2, steer=steer)
    feats = rule_features(trajs)
    w_c = 1.0
    cost, _ = rule_cost(trajs, np.array([0.0, 0.0, w_c, 0.0]))
    assert abs(cost[0] - w_c / radius) <= 0.02 * (w_c / radius)
    # lateral acceleration = v^2 / R on the arc
    np.testing.assert_allclose(feats[0, 0], v * v / radius, rtol=0.02)
    # finite-difference curvature from positions alone agrees
    pts = np.concatenate([[[0.0, 0.0]], trajs.positions[0]], axis=0)
    seg = np.diff(pts, axis=0)
    ang = np.arctan2(seg[:, 1], seg[:, 0])
    turn = np.diff(ang)
    fd_curv = np.abs(turn) / np.linalg.norm(seg[1:], axis=1)
    np.testing.assert_allclose(feats[0, 2], fd_curv.mean(), rtol=0.02)


def test_rules_jerk_from_speed_profile():
    # v0=1, a=-4, dt=0.5: speeds clamp to (0, 0), acc = (-2, 0), jerk = 4
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=1.0)
    trajs = single_candidate(state, horizon=2, dt=0.5, accel=-4.0)
    feats = rule_features(trajs)
    np.testing.assert_allclose(feats[0, 1], 4.0)


# ---------------------------------------------------------------- combination


def fake_trajs(labels):
    n = len(labels)
    states = np.zeros((n, 2, 4))
    return TrajectorySet(states=states, controls=np.zeros((n, 2)),
                         labels=tuple(labels),
                         start=EgoState(x=0.0, y=0.0, heading=0.0, velocity=0.0),
                         dt=0.5)


def test_total_is_exact_sum():
    rng = np.random.default_rng(3)
    bd = CostBreakdown(f_o=rng.normal(size=5), f_v=rng.normal(size=5),
                       f_r=rng.normal(size=5))
    np.testing.assert_array_equal(bd.total, bd.f_o + bd.f_v + bd.f_r)


def test_evaluate_costs_composes_subcosts():
    rng = np.random.default_rng(9)
    state = EgoState(x=-2.0, y=0.0, heading=0.0, velocity=3.0)
    trajs = sample_trajectories(state, horizon=3, dt=0.4)
    occ = rng.random((3, GRID.h, GRID.w)) < 0.05
    lane = rng.random((GRID.h, GRID.w)) < 0.02
    cv = rng.normal(size=(3, GRID.h, GRID.w))
    w_o = np.array([1.0, 0.2, 0.5, 0.1])
    w_v = np.array([0.8])
    w_r = np.array([0.3, 0.1, 0.4, 1.0])
    bd, _ = evaluate_costs(trajs, occ, lane, cv, GRID, w_o, w_v, w_r)
    f_o, _ = safety_cost(trajs, occ, lane, GRID, w_o)
    f_v, _ = costvolume_cost(trajs, cv, w_v, GRID)
    f_r, _ = rule_cost(trajs, w_r)
    np.testing.assert_array_equal(bd.f_o, f_o)
    np.testing.assert_array_equal(bd.f_v, f_v)
    np.testing.assert_array_equal(bd.f_r, f_r)
    assert np.max(np.abs(bd.total - (f_o + f_v + f_r))) < 1e-6


def test_evaluate_costs_weight_gradients():
    rng = np.random.default_rng(13)
    state = EgoState(x=-2.0, y=0.0, heading=0.0, velocity=3.0)
    trajs = sample_trajectories(state, horizon=3, dt=0.4,
                                accels=(0.0,), steerings=(-0.2, 0.0, 0.2))
    occ = rng.random((3, GRID.h, GRID.w)) < 0.1
    lane = rng.random((GRID.h, GRID.w)) < 0.05
    cv = rng.uniform(-10.0, 10.0, size=(3, GRID.h, GRID.w))
    gvec = rng.normal(size=trajs.n)
    w_o = np.array([1.0, 0.2, 0.5, 0.1])
    w_v = np.array([0.8])
    w_r = np.array([0.3, 0.1, 0.4, 1.0])

    def run(wo, wv, wr):
        bd, cache = evaluate_costs(trajs, occ, lane, cv, GRID, wo, wv, wr)
        gw_o, gw_v, gw_r, _ = evaluate_costs_backward(gvec, cache, wv)
        return float(gvec @ bd.total), gw_o, gw_v, gw_r

    report = grad_check(lambda w: run(w, w_v, w_r)[0:2], w_o)
    assert report.passed, str(report)
    report = grad_check(lambda w: (run(w_o, w, w_r)[0], run(w_o, w, w_r)[2]), w_v)
    assert report.passed, str(report)
    report = grad_check(lambda w: (run(w_o, w_v, w)[0], run(w_o, w_v, w)[3]), w_r)
    assert report.passed, str(report)


# ---------------------------------------------------------------- selection


def test_select_best_examples():
    trajs = fake_trajs([FORWARD, FORWARD, FORWARD])
    bd = CostBreakdown(f_o=np.array([3.0, 1.0, 2.0]), f_v=np.zeros(3),
                       f_r=np.zeros(3))
    assert select_best(trajs, bd, FORWARD) == 1
    # single matching candidate wins regardless of cost
    trajs2 = fake_trajs([TURN_LEFT, FORWARD, TURN_LEFT])
    bd2 = CostBreakdown(f_o=np.array([0.0, 99.0, 0.5]), f_v=np.zeros(3),
                        f_r=np.zeros(3))
    assert select_best(trajs2, bd2, FORWARD) == 1


def test_select_best_affine_invariance():
    rng = np.random.default_rng(21)
    labels = [FORWARD if i % 2 == 0 else TURN_LEFT for i in range(10)]
    trajs = fake_trajs(labels)
    f = rng.normal(size=10)
    bd = CostBreakdown(f_o=f, f_v=np.zeros(10), f_r=np.zeros(10))
    scaled = CostBreakdown(f_o=7.0 * f + 100.0, f_v=np.zeros(10), f_r=np.zeros(10))
    for cmd in (FORWARD, TURN_LEFT):
        assert select_best(trajs, bd, cmd) == select_best(trajs, scaled, cmd)


def test_select_best_tie_takes_lowest_index():
    trajs = fake_trajs([FORWARD, FORWARD, FORWARD])
    bd = CostBreakdown(f_o=np.array([2.0, 1.0, 1.0]), f_v=np.zeros(3),
                       f_r=np.zeros(3))
    assert select_best(trajs, bd, FORWARD) == 1


def test_select_best_respects_command_partition():
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=5.0)
    trajs = sample_trajectories(state, horizon=4, dt=0.5)
    bd = CostBreakdown(f_o=np.zeros(trajs.n), f_v=np.zeros(trajs.n),
                       f_r=np.linspace(1.0, 0.0, trajs.n))
    idx = select_best(trajs, bd, FORWARD)
    assert trajs.labels[idx] == FORWARD
    with pytest.raises(ValueError):
        slow = sample_trajectories(
            EgoState(x=0.0, y=0.0, heading=0.0, velocity=0.0),
            horizon=2, dt=0.5, accels=(0.0,), steerings=(0.0,))
        select_best(slow, CostBreakdown(np.zeros(1), np.zeros(1), np.zeros(1)),
                    TURN_LEFT)


# ---------------------------------------------------------------- refinement


def test_refine_zero_weights_outputs_origin():
    rng = np.random.default_rng(2)
    params = init_refine_params(4, 6, rng,
                                dtype=np.float64).map(np.zeros_like)
    tau = rng.normal(size=(5, 2))
    refined, _ = refine(tau, np.ones(6), np.array([3.0, 1.0]), params)
    np.testing.assert_array_equal(refined, 0.0)


def test_refine_output_length_matches_input():
    rng = np.random.default_rng(4)
    params = init_refine_params(4, 6, rng, dtype=np.float64,
                                scale=0.4)
    for horizon in (2, 4, 6):
        tau = rng.normal(size=(horizon, 2))
        refined, _ = refine(tau, rng.normal(size=6), np.array([10.0, 0.0]), params)
        assert refined.shape == (horizon, 2)


def test_refine_matches_scripted_oracle():
    rng = np.random.default_rng(6)
    params = init_refine_params(4, 8, rng, dtype=np.float32,
                                scale=0.3)
    tau = rng.normal(size=(6, 2))
    h0 = rng.normal(size=8).astype(np.float32)
    target = np.array([12.0, 2.0])
    refined, _ = refine(tau, h0, target, params)
    want = scripted_refine(tau, h0, target, params)
    np.testing.assert_allclose(refined, want, atol=1e-5)


def test_refine_rejects_empty_horizon():
    rng = np.random.default_rng(8)
    params = init_refine_params(4, 6, rng, dtype=np.float64)
    with pytest.raises(ValueError):
        refine(np.zeros((0, 2)), np.zeros(6), np.zeros(2), params)
    with pytest.raises(ValueError):
        refine(np.zeros((4, 3)), np.zeros(6), np.zeros(2), params)


def test_refine_gradients():
    rng = np.random.default_rng(10)
    params = init_refine_params(3, 5, rng, dtype=np.float64,
                                scale=0.5)
    tau0 = rng.normal(size=(3, 2))
    h00 = rng.normal(size=5)
    target0 = rng.normal(size=2)
    gvec = rng.normal(size=(3, 2))

    def run(tau, h0, target, p):
        refined, cache = refine(tau, h0, target, p)
        gtau, gh0, gtgt, grads = refine_backward(gvec, cache, p)
        return float((gvec * refined).sum()), gtau, gh0, gtgt, grads

    report = grad_check(
        lambda t: (run(t.reshape(3, 2), h00, target0, params)[0],
                   run(t.reshape(3, 2), h00, target0, params)[1].ravel()),
        tau0.ravel())
    assert report.passed, str(report)
    report = grad_check(lambda h: run(tau0, h, target0, params)[0:3:2], h00)
    assert report.passed, str(report)
    report = grad_check(
        lambda tg: (run(tau0, h00, tg, params)[0],
                    run(tau0, h00, tg, params)[3]), target0)
    assert report.passed, str(report)

    def param_fn(field, shape, nested=False):
        def fn(flat):
            if nested:
                p = dataclasses.replace(
                    params, gru=dataclasses.replace(params.gru,
                                                    **{field: flat.reshape(shape)}))
                val, _, _, _, grads = run(tau0, h00, target0, p)
                return val, getattr(grads.gru, field).ravel()
            p = dataclasses.replace(params, **{field: flat.reshape(shape)})
            val, _, _, _, grads = run(tau0, h00, target0, p)
            return val, getattr(grads, field).ravel()
        return fn

    for field in ("out_w", "out_b"):
        shape = getattr(params, field).shape
        report = grad_check(param_fn(field, shape), getattr(params, field).ravel())
        assert report.passed, f"{field}: {report}"
    for field in ("wn", "uz", "br"):
        shape = getattr(params.gru, field).shape
        report = grad_check(param_fn(field, shape, nested=True),
                            getattr(params.gru, field).ravel())
        assert report.passed, f"gru.{field}: {report}"


def test_pool_front_features_and_gradient():
    rng = np.random.default_rng(12)
    params = init_refine_params(3, 5, rng, dtype=np.float64,
                                scale=0.5)
    feats0 = rng.normal(size=(3, 4, 6))
    h0, _ = pool_front_features(feats0, params)
    np.testing.assert_allclose(h0, feats0.mean(axis=(1, 2)) @ params.proj_w
                               + params.proj_b)
    gvec = rng.normal(size=5)

    def fn(flat):
        h, cache = pool_front_features(flat.reshape(feats0.shape), params)
        gf, _, _ = pool_front_features_backward(gvec, cache, params)
        return float(gvec @ h), gf.ravel()

    report = grad_check(fn, feats0.ravel())
    assert report.passed, str(report)


# ---------------------------------------------------------------- report


def test_report_round_trips_as_json():
    state = EgoState(x=0.0, y=0.0, heading=0.0, velocity=3.0)
    trajs = sample_trajectories(state, horizon=3, dt=0.5,
                                accels=(0.0, 2.0), steerings=(-0.3, 0.0, 0.3))
    occ = np.zeros((3, GRID.h, GRID.w), dtype=bool)
    cv = np.zeros((3, GRID.h, GRID.w))
    bd, _ = evaluate_costs(trajs, occ, None, cv, GRID,
                           np.ones(4), np.ones(1), np.ones(4))
    idx = select_best(trajs, bd, FORWARD)
    refined = trajs.positions[idx] + 0.1
    report = build_report(trajs, bd, FORWARD, idx, refined)
    text = render_report(report)
    back = json.loads(text)
    assert back["selected"] == idx
    assert len(back["candidates"]) == trajs.n
    cand = back["candidates"][idx]
    assert cand["label"] == FORWARD
    assert len(cand["waypoints"]) == trajs.horizon
    assert {"safety", "learned", "rules", "total"} <= set(cand["cost"])
    assert len(back["refined_waypoints"]) == trajs.horizon
    got = cand["cost"]["total"]
    np.testing.assert_allclose(got, bd.total[idx], atol=1e-9)
