"""Loss tests. Oracles at the top: per-cell cross-entropy enumerated with
plain numpy and sorted by hand, hinge terms enumerated explicitly."""

import numpy as np
import pytest

from bevpilot.numerics import grad_check
from bevpilot.objectives import (
    LossWeights,
    centerness_loss,
    centerness_loss_backward,
    cross_entropy,
    depth_loss,
    depth_loss_backward,
    discounted_future_loss,
    discounted_future_loss_backward,
    init_loss_weights,
    instance_losses,
    instance_losses_backward,
    masked_l1_loss,
    masked_l1_loss_backward,
    planning_loss,
    planning_loss_backward,
    topk_cross_entropy,
    topk_cross_entropy_backward,
    total_loss,
    total_loss_backward,
    trajectory_distance,
)
from bevpilot.perception import DepthBinning

# ---------------------------------------------------------------- oracles


def percell_ce_oracle(logits, labels):
    """Softmax cross-entropy per cell, computed directly."""
    c = logits.shape[0]
    flat = logits.reshape(c, -1).astype(np.float64)
    p = np.exp(flat - flat.max(axis=0))
    p /= p.sum(axis=0)
    return -np.log(p[labels.reshape(-1), np.arange(flat.shape[1])])


def topk_oracle(logits, labels, k):
    ce = np.sort(percell_ce_oracle(logits, labels))[::-1]
    keep = max(1, int(np.ceil(k * ce.size)))
    return ce[:keep].mean()


def logits_for_ce(ce_values):
    """Binary [2, n] logits whose label-0 cross-entropies equal ce_values."""
    ce = np.asarray(ce_values, dtype=np.float64)
    return np.stack([np.zeros_like(ce), np.log(np.expm1(ce))])


# ---------------------------------------------------------------- top-k CE


def test_topk_full_fraction_is_mean_ce():
    rng = np.random.default_rng(0)
    logits = rng.normal(size=(3, 5, 4))
    labels = rng.integers(0, 3, size=(5, 4))
    loss, _ = topk_cross_entropy(logits, labels, k_fraction=1.0)
    np.testing.assert_allclose(loss, percell_ce_oracle(logits, labels).mean(),
                               rtol=1e-12)
    loss_ce, _ = cross_entropy(logits, labels)
    np.testing.assert_allclose(loss_ce, loss)


def test_topk_saturated_correct_is_tiny():
    rng = np.random.default_rng(1)
    labels = rng.integers(0, 2, size=(6, 6))
    logits = np.where(labels[None] == np.arange(2)[:, None, None], 30.0, -30.0)
    loss, _ = topk_cross_entropy(logits, labels, k_fraction=0.25)
    assert loss < 1e-3


def test_topk_known_cell_values():
    logits = logits_for_ce([0.1, 0.9, 0.5, 0.3]).reshape(2, 2, 2)
    labels = np.zeros((2, 2), dtype=np.int64)
    loss, _ = topk_cross_entropy(logits, labels, k_fraction=0.5)
    np.testing.assert_allclose(loss, 0.7, rtol=1e-9)
    np.testing.assert_allclose(topk_oracle(logits, labels, 0.5), 0.7, rtol=1e-9)


def test_topk_monotone_in_k():
    rng = np.random.default_rng(2)
    logits = rng.normal(size=(4, 8, 8))
    labels = rng.integers(0, 4, size=(8, 8))
    ks = [0.1, 0.25, 0.5, 0.75, 1.0]
    vals = [topk_cross_entropy(logits, labels, k)[0] for k in ks]
    for lo, hi in zip(vals[1:], vals[:-1]):
        assert lo <= hi + 1e-12


def test_topk_matches_oracle_random():
    rng = np.random.default_rng(3)
    for _ in range(5):
        logits = rng.normal(size=(3, 7, 5))
        labels = rng.integers(0, 3, size=(7, 5))
        k = rng.uniform(0.1, 1.0)
        loss, _ = topk_cross_entropy(logits, labels, k)
        np.testing.assert_allclose(loss, topk_oracle(logits, labels, k),
                                   rtol=1e-10)


def test_topk_rejects_bad_inputs():
    logits = np.zeros((2, 3, 3))
    labels = np.zeros((3, 3), dtype=np.int64)
    with pytest.raises(ValueError):
        topk_cross_entropy(logits, np.zeros((2, 3), dtype=np.int64), 0.5)
    with pytest.raises(ValueError):
        topk_cross_entropy(logits, labels, 0.0)
    with pytest.raises(ValueError):
        topk_cross_entropy(logits, labels, 1.5)
    with pytest.raises(ValueError):
        topk_cross_entropy(logits, labels + 5, 0.5)


def test_topk_gradient():
    rng = np.random.default_rng(4)
    logits0 = rng.normal(size=(3, 4, 4))
    labels = rng.integers(0, 3, size=(4, 4))

    def fn(flat):
        loss, cache = topk_cross_entropy(flat.reshape(3, 4, 4), labels, 0.5)
        return loss, topk_cross_entropy_backward(1.0, cache).ravel()

    report = grad_check(fn, logits0.ravel())
    assert report.passed, str(report)


# ---------------------------------------------------------------- instances


def test_instance_losses_zero_when_exact():
    rng = np.random.default_rng(5)
    center = rng.random((6, 6))
    offset = rng.normal(size=(2, 6, 6))
    flow = rng.normal(size=(2, 6, 6))
    fg = rng.random((6, 6)) < 0.4
    losses, _ = instance_losses(center, offset, flow, center, offset, flow, fg)
    assert losses == {"centerness": 0.0, "offset": 0.0, "flow": 0.0}


def test_offset_unit_error_costs_half():
    fg = np.zeros((4, 4), dtype=bool)
    fg[1, 1] = fg[2, 3] = fg[0, 2] = True  # three foreground cells
    target = np.zeros((2, 4, 4))
    pred = target.copy()
    pred[0][fg] += 1.0  # (1, 0) error on every foreground cell
    loss, _ = masked_l1_loss(pred, target, fg)
    np.testing.assert_allclose(loss, 0.5)


def test_centerness_constant_error():
    target = np.zeros((5, 5))
    loss, _ = centerness_loss(target + 0.2, target)
    np.testing.assert_allclose(loss, 0.04)


def test_masked_l1_empty_mask_is_zero_everything():
    pred = np.ones((2, 3, 3))
    target = np.zeros((2, 3, 3))
    loss, cache = masked_l1_loss(pred, target, np.zeros((3, 3), dtype=bool))
    assert loss == 0.0
    np.testing.assert_array_equal(masked_l1_loss_backward(1.0, cache), 0.0)


def test_instance_loss_gradients():
    rng = np.random.default_rng(6)
    fg = rng.random((4, 4)) < 0.5
    t_center = rng.random((4, 4))
    t_off = rng.normal(size=(2, 4, 4))
    t_flow = rng.normal(size=(2, 4, 4))
    # keep prediction clear of the L1 kink
    p_center = t_center + rng.normal(size=(4, 4))
    p_off = t_off + rng.choice([-1.0, 1.0], size=(2, 4, 4)) * rng.uniform(
        0.1, 1.0, size=(2, 4, 4))
    p_flow = t_flow + rng.choice([-1.0, 1.0], size=(2, 4, 4)) * rng.uniform(
        0.1, 1.0, size=(2, 4, 4))
    g = {"centerness": 0.7, "offset": 1.3, "flow": -0.4}

    def fn(flat):
        pc = flat[:16].reshape(4, 4)
        po = flat[16:48].reshape(2, 4, 4)
        pf = flat[48:].reshape(2, 4, 4)
        losses, caches = instance_losses(pc, po, pf, t_center, t_off, t_flow, fg)
        val = sum(g[k] * losses[k] for k in g)
        gc, go, gf = instance_losses_backward(g, caches)
        return val, np.concatenate([gc.ravel(), go.ravel(), gf.ravel()])

    x0 = np.concatenate([p_center.ravel(), p_off.ravel(), p_flow.ravel()])
    report = grad_check(fn, x0)
    assert report.passed, str(report)


# ---------------------------------------------------------------- depth


def test_depth_one_hot_prediction():
    binning = DepthBinning()
    target = np.full((3, 4), 7.0)
    logits = np.full((binning.num_bins, 3, 4), -20.0)
    logits[binning.bin_index(7.0)] = 20.0
    loss, all_masked, _ = depth_loss(logits, target, binning)
    assert not all_masked
    assert loss < 1e-3


def test_depth_uniform_prediction_is_log_bins():
    binning = DepthBinning()
    target = np.full((2, 2), 10.0)
    logits = np.zeros((48, 2, 2))
    loss, _, _ = depth_loss(logits, target, binning)
    np.testing.assert_allclose(loss, np.log(48.0), rtol=1e-12)


def test_depth_nearest_bin_rule():
    binning = DepthBinning()
    assert binning.bin_index(2.4) == 0
    assert binning.bin_index(2.6) == 1
    target = np.array([[2.4]])
    logits = np.full((48, 1, 1), -20.0)
    logits[0] = 20.0
    loss, _, _ = depth_loss(logits, target, binning)
    assert loss < 1e-3


def test_depth_all_masked_flags_and_zero():
    binning = DepthBinning()
    target = np.array([[0.5, 80.0]])
    logits = np.zeros((48, 1, 2))
    loss, all_masked, cache = depth_loss(logits, target, binning)
    assert loss == 0.0 and all_masked
    np.testing.assert_array_equal(depth_loss_backward(1.0, cache), 0.0)


def test_depth_masked_pixels_get_zero_gradient():
    rng = np.random.default_rng(7)
    binning = DepthBinning()
    target = np.array([[5.0, 0.5], [120.0, 30.0]])  # two masked pixels
    logits0 = rng.normal(size=(48, 2, 2))

    def fn(flat):
        loss, _, cache = depth_loss(flat.reshape(48, 2, 2), target, binning)
        return loss, depth_loss_backward(1.0, cache).ravel()

    report = grad_check(fn, logits0.ravel())
    assert report.passed, str(report)
    _, _, cache = depth_loss(logits0, target, binning)
    g = depth_loss_backward(1.0, cache)
    np.testing.assert_array_equal(g[:, 0, 1], 0.0)
    np.testing.assert_array_equal(g[:, 1, 0], 0.0)
    assert np.abs(g[:, 0, 0]).max() > 0


def test_depth_rejects_shape_mismatch():
    binning = DepthBinning()
    with pytest.raises(ValueError):
        depth_loss(np.zeros((10, 2, 2)), np.zeros((2, 2)), binning)
    with pytest.raises(ValueError):
        depth_loss(np.zeros((48, 2, 2)), np.zeros((2, 3)), binning)


# ---------------------------------------------------------------- discounting


def test_discount_gamma_one_is_mean():
    rng = np.random.default_rng(8)
    losses = rng.random(6)
    val, _ = discounted_future_loss(losses, gamma=1.0)
    np.testing.assert_allclose(val, losses.mean())


def test_discount_known_values():
    val, _ = discounted_future_loss(np.array([1.0, 1.0]), gamma=0.5)
    np.testing.assert_allclose(val, 1.0)
    val, _ = discounted_future_loss(np.array([2.0, 0.0]), gamma=0.5)
    np.testing.assert_allclose(val, 4.0 / 3.0)


def test_discount_gradient_and_errors():
    rng = np.random.default_rng(9)
    losses0 = rng.random(5)

    def fn(l):
        val, cache = discounted_future_loss(l, gamma=0.95)
        return val, discounted_future_loss_backward(1.0, cache)

    report = grad_check(fn, losses0)
    assert report.passed, str(report)
    with pytest.raises(ValueError):
        discounted_future_loss(np.array([]), gamma=0.5)
    with pytest.raises(ValueError):
        discounted_future_loss(np.array([1.0]), gamma=0.0)


# ---------------------------------------------------------------- planning


def test_planning_loss_inactive_hinge():
    h = 4
    expert = np.zeros((h, 2))
    cands = np.stack([expert + 3.0, expert - 2.0])  # d = 6 and 4
    costs = np.array([20.0, 20.0])  # expert wins by more than the distances
    loss, _ = planning_loss(costs, cands, 1.0, expert, expert.copy())
    np.testing.assert_allclose(loss, 0.0)


def test_planning_loss_equal_cost_pays_distance():
    h = 2
    expert = np.zeros((h, 2))
    cand = expert + np.array([1.0, 0.5])  # per-waypoint L1 = 1.5
    loss, _ = planning_loss(np.array([7.0]), cand[None], 7.0, expert,
                            expert.copy())
    np.testing.assert_allclose(loss, 1.5)


def test_planning_loss_enumerated_example():
    h = 1
    expert = np.zeros((h, 2))
    cands = np.stack([expert + np.array([2.0, 0.0]),    # d = 2
                      expert + np.array([1.5, 1.5])])   # d = 3
    costs = np.array([4.0, 7.0])
    refined = expert + np.array([0.3, 0.1])             # d(tau_h, tau_o*) = 0.4
    loss, _ = planning_loss(costs, cands, 5.0, expert, refined)
    # max(relu(5-4+2), relu(5-7+3)) + 0.4
    np.testing.assert_allclose(loss, 3.4)


def test_planning_loss_nonnegative():
    rng = np.random.default_rng(10)
    for _ in range(20):
        n, h = 5, 3
        expert = rng.normal(size=(h, 2))
        cands = rng.normal(size=(n, h, 2))
        costs = rng.normal(size=n) * 10
        refined = rng.normal(size=(h, 2))
        loss, _ = planning_loss(costs, cands, rng.normal() * 10, expert, refined)
        assert loss >= 0.0


def test_planning_loss_gradients():
    rng = np.random.default_rng(11)
    n, h = 4, 3
    expert = rng.normal(size=(h, 2))
    cands = rng.normal(size=(n, h, 2))
    costs0 = rng.normal(size=n) * 5
    refined0 = expert + rng.choice([-1.0, 1.0], size=(h, 2)) * rng.uniform(
        0.2, 1.0, size=(h, 2))
    expert_cost0 = np.array([costs0.max() + 1.0])  # hinge active, no tie

    def fn_costs(c):
        loss, cache = planning_loss(c, cands, expert_cost0[0], expert, refined0)
        g, _, _ = planning_loss_backward(1.0, cache)
        return loss, g

    report = grad_check(fn_costs, costs0)
    assert report.passed, str(report)

    def fn_expert(e):
        loss, cache = planning_loss(costs0, cands, e[0], expert, refined0)
        _, ge, _ = planning_loss_backward(1.0, cache)
        return loss, np.array([ge])

    report = grad_check(fn_expert, expert_cost0)
    assert report.passed, str(report)

    def fn_refined(r):
        loss, cache = planning_loss(costs0, cands, expert_cost0[0], expert,
                                    r.reshape(h, 2))
        _, _, gr = planning_loss_backward(1.0, cache)
        return loss, gr.ravel()

    report = grad_check(fn_refined, refined0.ravel())
    assert report.passed, str(report)


def test_trajectory_distance_shape_check():
    with pytest.raises(ValueError):
        trajectory_distance(np.zeros((3, 2)), np.zeros((4, 2)))


# ---------------------------------------------------------------- weighting


def test_total_loss_plain_sum_at_zero():
    w = init_loss_weights()
    val, _ = total_loss(1.0, 2.0, 3.0, w)
    np.testing.assert_allclose(val, 6.0)
    eff = w.effective()
    assert all(v == 1.0 for v in eff.values())


def test_total_loss_gradients():
    w0 = LossWeights(s_per=np.array([0.3]), s_pre=np.array([-0.2]),
                     s_pla=np.array([0.5]))
    l = (1.5, 2.0, 0.7)

    def fn(svec):
        w = LossWeights(s_per=svec[0:1], s_pre=svec[1:2], s_pla=svec[2:3])
        val, cache = total_loss(*l, w)
        _, _, _, gw = total_loss_backward(1.0, cache)
        return val, np.concatenate([gw.s_per, gw.s_pre, gw.s_pla])

    report = grad_check(fn, np.concatenate([w0.s_per, w0.s_pre, w0.s_pla]))
    assert report.passed, str(report)
    # closed form: d total / d s_i = -exp(-s_i) L_i + 1
    _, cache = total_loss(*l, w0)
    _, _, _, gw = total_loss_backward(1.0, cache)
    np.testing.assert_allclose(gw.s_pre[0], -np.exp(0.2) * 2.0 + 1.0)


def test_total_loss_shift_matches_closed_form():
    l_pre = 2.0
    for s0, s1 in [(0.0, 0.4), (0.4, 1.0)]:
        w0 = LossWeights(np.zeros(1), np.array([s0]), np.zeros(1))
        w1 = LossWeights(np.zeros(1), np.array([s1]), np.zeros(1))
        v0, _ = total_loss(0.0, l_pre, 0.0, w0)
        v1, _ = total_loss(0.0, l_pre, 0.0, w1)
        want = (np.exp(-s1) * l_pre + s1) - (np.exp(-s0) * l_pre + s0)
        np.testing.assert_allclose(v1 - v0, want)


def test_total_loss_task_gradients():
    w = LossWeights(np.array([0.2]), np.array([0.1]), np.array([-0.3]))
    _, cache = total_loss(1.0, 2.0, 3.0, w)
    gl_per, gl_pre, gl_pla, _ = total_loss_backward(2.0, cache)
    np.testing.assert_allclose(gl_per, 2.0 * np.exp(-0.2))
    np.testing.assert_allclose(gl_pre, 2.0 * np.exp(-0.1))
    np.testing.assert_allclose(gl_pla, 2.0 * np.exp(0.3))


def test_loss_weights_validation():
    with pytest.raises(ValueError):
        LossWeights(np.zeros(2), np.zeros(1), np.zeros(1))
