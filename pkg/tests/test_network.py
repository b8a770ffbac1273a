import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polylab.data import Dataset
from polylab.errors import InvalidArgument, TrainingDiverged
from polylab.network import (
    EarlyStopper,
    NetworkModel,
    SearchSpace,
    TrainConfig,
    cross_entropy,
    forward,
    forward_batch,
    init_params,
    loss_and_gradients,
    network_from_dict,
    network_to_dict,
    predict_batch,
    predict_proba,
    random_search,
    softmax,
    train,
)
from polylab.metrics import accuracy


def hand_net(weight_list, bias_list):
    weights = tuple(np.asarray(w, dtype=np.float64) for w in weight_list)
    biases = tuple(np.asarray(b, dtype=np.float64) for b in bias_list)
    return NetworkModel(weights, biases, weights[0].shape[0], weights[-1].shape[1])


class TestNetworkModel:
    def test_shape_chain_enforced(self):
        with pytest.raises(InvalidArgument):
            hand_net([np.zeros((2, 3)), np.zeros((4, 2))], [np.zeros(3), np.zeros(2)])

    def test_non_finite_rejected(self):
        w = np.zeros((2, 2))
        w2 = np.full((2, 2), np.inf)
        with pytest.raises(InvalidArgument):
            hand_net([w, w2], [np.zeros(2), np.zeros(2)])

    def test_widths(self):
        m = hand_net(
            [np.zeros((2, 5)), np.zeros((5, 3)), np.zeros((3, 2))],
            [np.zeros(5), np.zeros(3), np.zeros(2)],
        )
        assert m.hidden_widths == (5, 3)
        assert m.hidden_layer_count == 2
        assert m.dimension == 2 and m.class_count == 2


class TestForward:
    def test_zero_weights_bias_relu(self):
        m = hand_net(
            [np.zeros((2, 3)), np.zeros((3, 2))],
            [np.array([1.0, -2.0, 0.5]), np.zeros(2)],
        )
        logits, acts = forward(m, [0.7, -0.3])
        assert acts[0].tolist() == [1.0, 0.0, 0.5]
        assert logits.tolist() == [0.0, 0.0]
        assert predict_proba(m, [0.7, -0.3]).tolist() == [0.5, 0.5]

    def test_single_neuron_relu(self):
        m = hand_net(
            [np.array([[1.0], [0.0]]), np.array([[1.0, -1.0]])],
            [np.zeros(1), np.zeros(2)],
        )
        _, acts = forward(m, [2.0, 3.0])
        assert acts[0].tolist() == [2.0]
        _, acts = forward(m, [-1.0, 3.0])
        assert acts[0].tolist() == [0.0]

    def test_two_layer_composition_by_hand(self):
        # 2-2 net evaluated manually: the second hidden unit composes the
        # rectified first layer with its own rectification.
        w0 = np.array([[0.6, -0.4], [0.3, 0.9]])
        b1 = np.array([0.1, -0.2])
        w1 = np.array([[0.5, -0.7], [0.8, 0.2]])
        b2 = np.array([-0.05, 0.3])
        head = np.array([[1.0, 0.0], [0.0, 1.0]])
        m = hand_net([w0, w1, head], [b1, b2, np.zeros(2)])
        x = np.array([0.9, -1.3])
        h1 = np.maximum(x @ w0 + b1, 0.0)
        h2 = np.maximum(h1 @ w1 + b2, 0.0)
        _, acts = forward(m, x)
        assert np.allclose(acts[0], h1, atol=1e-15)
        assert np.allclose(acts[1], h2, atol=1e-15)
        assert acts[1][1] == pytest.approx(
            max(0.0, max(0.0, x @ w0[:, 0] + b1[0]) * w1[0, 1]
                + max(0.0, x @ w0[:, 1] + b1[1]) * w1[1, 1] + b2[1]),
            abs=1e-12,
        )

    def test_dimension_mismatch(self):
        m = hand_net([np.zeros((2, 2)), np.zeros((2, 2))], [np.zeros(2), np.zeros(2)])
        with pytest.raises(InvalidArgument):
            forward(m, [1.0, 2.0, 3.0])

    def test_batch_matches_single(self):
        rng = np.random.default_rng(0)
        weights, biases = init_params(3, (4, 3), 2, rng)
        m = NetworkModel(tuple(weights), tuple(biases), 3, 2)
        X = rng.normal(size=(10, 3))
        logits_b, acts_b = forward_batch(m, X)
        for i, x in enumerate(X):
            logits, acts = forward(m, x)
            assert np.allclose(logits, logits_b[i], atol=1e-12)
            for a, ab in zip(acts, acts_b):
                assert np.allclose(a, ab[i], atol=1e-12)


class TestSoftmax:
    def test_uniform(self):
        assert softmax(np.array([0.0, 0.0])).tolist() == [0.5, 0.5]

    def test_stability(self):
        p = softmax(np.array([1000.0, 0.0]))
        assert p[0] == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.isfinite(p))

    def test_ln2_case(self):
        p = softmax(np.array([math.log(2.0), 0.0]))
        assert p[0] == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert p[1] == pytest.approx(1.0 / 3.0, abs=1e-12)

    @given(st.lists(st.floats(-15, 15), min_size=2, max_size=6),
           st.floats(-30, 30))
    def test_shift_invariance(self, logits, shift):
        logits = np.asarray(logits)
        a = softmax(logits)
        b = softmax(logits + shift)
        assert np.allclose(a, b, atol=1e-12)
        assert a.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(a > 0) and np.all(a < 1)


class TestGradients:
    @settings(max_examples=8)
    @given(st.integers(0, 2**32 - 1))
    def test_gradient_check_small(self, seed):
        rng = np.random.default_rng(seed)
        d, widths, classes, n = 2, (3,), 2, 6
        weights, biases = init_params(d, widths, classes, rng)
        X = rng.normal(size=(n, d))
        y = rng.integers(0, classes, n)
        l2 = 1e-3
        _, w_grads, b_grads = loss_and_gradients(weights, biases, X, y, l2)
        step = 1e-5

        def loss_at(ws, bs):
            loss, _, _ = loss_and_gradients(ws, bs, X, y, l2)
            return loss

        for li in range(len(weights)):
            for idx in np.ndindex(weights[li].shape):
                wp = [w.copy() for w in weights]
                wm = [w.copy() for w in weights]
                wp[li][idx] += step
                wm[li][idx] -= step
                num = (loss_at(wp, biases) - loss_at(wm, biases)) / (2 * step)
                got = w_grads[li][idx]
                assert abs(got - num) <= 1e-4 * max(1.0, abs(num))
            for j in range(len(biases[li])):
                bp = [b.copy() for b in biases]
                bm = [b.copy() for b in biases]
                bp[li][j] += step
                bm[li][j] -= step
                num = (loss_at(weights, bp) - loss_at(weights, bm)) / (2 * step)
                assert abs(b_grads[li][j] - num) <= 1e-4 * max(1.0, abs(num))

    def test_l2_applies_to_weights_only(self):
        rng = np.random.default_rng(1)
        weights, biases = init_params(2, (3,), 2, rng)
        X = rng.normal(size=(4, 2))
        y = rng.integers(0, 2, 4)
        loss0, _, b0 = loss_and_gradients(weights, biases, X, y, 0.0)
        loss1, _, b1 = loss_and_gradients(weights, biases, X, y, 1.0)
        penalty = 0.5 * sum(float((w * w).sum()) for w in weights)
        assert loss1 - loss0 == pytest.approx(penalty, rel=1e-9)
        for a, b in zip(b0, b1):
            assert np.allclose(a, b, atol=1e-12)


class TestPiecewiseLinearity:
    def test_midpoint_affine(self):
        rng = np.random.default_rng(3)
        weights, biases = init_params(2, (8, 8), 2, rng)
        m = NetworkModel(tuple(weights), tuple(biases), 2, 2)
        checked = 0
        for _ in range(500):
            x = rng.normal(scale=2.0, size=2)
            xp = x + rng.normal(scale=0.05, size=2)
            la, aa = forward(m, x)
            lb, ab = forward(m, xp)
            code_a = np.concatenate([(a > 0) for a in aa])
            code_b = np.concatenate([(a > 0) for a in ab])
            if not np.array_equal(code_a, code_b):
                continue
            mid, _ = forward(m, (x + xp) / 2.0)
            assert np.allclose(mid, (la + lb) / 2.0, atol=1e-9)
            checked += 1
        assert checked > 50


class TestEarlyStopper:
    def test_stops_after_patience_without_improvement(self):
        # Strictly increasing losses from epoch 1: the best stays at epoch 1
        # and patience 3 stops the run at epoch 4.
        stopper = EarlyStopper(patience=3)
        assert not stopper.update(1, 1.0)
        assert not stopper.update(2, 1.1)
        assert not stopper.update(3, 1.2)
        assert stopper.update(4, 1.3)
        assert stopper.best_epoch == 1

    def test_strict_improvement_required(self):
        stopper = EarlyStopper(patience=2)
        assert not stopper.update(1, 1.0)
        assert not stopper.update(2, 1.0)
        assert stopper.update(3, 1.0)
        assert stopper.best_epoch == 1

    def test_counter_resets_on_improvement(self):
        stopper = EarlyStopper(patience=2)
        stopper.update(1, 1.0)
        stopper.update(2, 1.1)
        assert not stopper.update(3, 0.9)
        assert not stopper.update(4, 1.0)
        assert stopper.update(5, 1.0)
        assert stopper.best_epoch == 3


class TestTrainConfig:
    def test_validation(self):
        with pytest.raises(InvalidArgument):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(InvalidArgument):
            TrainConfig(validation_fraction=1.0)
        with pytest.raises(InvalidArgument):
            TrainConfig(patience=10, max_epochs=5)
        with pytest.raises(InvalidArgument):
            TrainConfig(batch_size=0)

    def test_defaults(self):
        cfg = TrainConfig()
        assert cfg.learning_rate == 1e-3
        assert cfg.momentum == 0.9
        assert cfg.batch_size == 64
        assert cfg.max_epochs == 200
        assert cfg.patience == 3
        assert cfg.validation_fraction == 0.1


class TestTrain:
    def test_separable_blobs_learned(self, blobs2):
        cfg = TrainConfig(seed=0, max_epochs=200)
        m, history = train(blobs2, [20], cfg)
        acc = accuracy(predict_batch(m, blobs2.features), blobs2.labels)
        assert acc >= 0.99
        assert 1 <= history.stopped_epoch <= 200

    def test_deterministic(self, blobs2):
        cfg = TrainConfig(seed=11, max_epochs=20)
        a, _ = train(blobs2, [8], cfg)
        b, _ = train(blobs2, [8], cfg)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_raises_with_epoch(self):
        # Separable data can survive huge steps by landing on a perfect
        # classifier, so divergence needs noise labels and overflow-scale lr.
        rng = np.random.default_rng(0)
        ds = Dataset(
            rng.normal(size=(80, 2)) * 50.0,
            rng.integers(0, 2, 80),
            2,
            name="noise",
        )
        cfg = TrainConfig(seed=0, learning_rate=1e100, max_epochs=30)
        with pytest.raises(TrainingDiverged) as err:
            train(ds, [16], cfg)
        assert err.value.epoch >= 1

    def test_needs_two_classes(self):
        ds = Dataset(np.zeros((4, 1)), np.zeros(4, dtype=np.int64), 1)
        with pytest.raises(InvalidArgument):
            train(ds, [4], TrainConfig(seed=0))

    def test_restores_best_epoch_params(self, blobs2):
        cfg = TrainConfig(seed=4, max_epochs=60)
        m, history = train(blobs2, [12], cfg)
        if history.val_losses:
            assert history.best_epoch <= history.stopped_epoch
            best = min(history.val_losses)
            assert history.val_losses[history.best_epoch - 1] == pytest.approx(
                best, abs=1e-15
            )


class TestSearchSpace:
    def test_validation(self):
        with pytest.raises(InvalidArgument):
            SearchSpace(width_min=0)
        with pytest.raises(InvalidArgument):
            SearchSpace(depth_min=2, depth_max=1)
        with pytest.raises(InvalidArgument):
            SearchSpace(l2_min=1e-2, l2_max=1e-5)
        with pytest.raises(InvalidArgument):
            SearchSpace(draws=0)

    @settings(max_examples=30)
    @given(st.integers(0, 2**32 - 1))
    def test_sample_bounds(self, seed):
        space = SearchSpace()
        arch, l2 = space.sample(np.random.default_rng(seed))
        assert 1 <= len(arch) <= 3
        assert all(20 <= w <= 400 for w in arch)
        assert 1e-5 <= l2 <= 1e-2

    def test_l2_log_uniform_ks(self):
        rng = np.random.default_rng(0)
        space = SearchSpace()
        draws = np.array([space.sample(rng)[1] for _ in range(10_000)])
        u = (np.log10(draws) + 5.0) / 3.0  # map [1e-5,1e-2] onto [0,1]
        u.sort()
        grid = np.arange(1, len(u) + 1) / len(u)
        ks = np.max(np.maximum(np.abs(grid - u), np.abs(u - (grid - 1.0 / len(u)))))
        assert ks < 0.02


class TestRandomSearch:
    def test_single_draw_returned(self, blobs2):
        space = SearchSpace(width_min=8, width_max=16, depth_min=1, depth_max=1,
                            draws=1)
        cfg = TrainConfig(seed=0, max_epochs=8)
        result = random_search(blobs2, space, folds=3, seed=1, base_cfg=cfg)
        assert len(result.log) == 1
        assert result.arch == tuple(result.log[0]["arch"])
        assert result.l2 == result.log[0]["l2"]

    def test_argmax_over_draws(self, blobs2):
        space = SearchSpace(width_min=4, width_max=32, depth_min=1, depth_max=2,
                            draws=3)
        cfg = TrainConfig(seed=0, max_epochs=8)
        result = random_search(blobs2, space, folds=3, seed=2, base_cfg=cfg)
        scores = [entry["mean_kappa"] for entry in result.log]
        best = max(range(len(scores)), key=lambda i: scores[i])
        assert result.log[best]["arch"] == list(result.arch)
        assert len(result.log) == 3

    def test_deterministic(self, blobs2):
        space = SearchSpace(width_min=8, width_max=24, depth_min=1, depth_max=2,
                            draws=2)
        cfg = TrainConfig(seed=0, max_epochs=6)
        a = random_search(blobs2, space, folds=3, seed=5, base_cfg=cfg)
        b = random_search(blobs2, space, folds=3, seed=5, base_cfg=cfg)
        assert a.arch == b.arch and a.l2 == b.l2


class TestSerialization:
    def test_round_trip_exact(self, blobs2):
        cfg = TrainConfig(seed=2, max_epochs=10)
        m, _ = train(blobs2, [6, 5], cfg)
        payload = json.dumps(network_to_dict(m))
        back = network_from_dict(json.loads(payload))
        for wa, wb in zip(m.weights, back.weights):
            assert np.array_equal(wa, wb)
        for ba, bb in zip(m.biases, back.biases):
            assert np.array_equal(ba, bb)
        assert back.dimension == m.dimension
        assert back.class_count == m.class_count

    def test_family_tag(self, blobs2):
        m, _ = train(blobs2, [4], TrainConfig(seed=0, max_epochs=4))
        d = network_to_dict(m)
        assert d["family"] == "network"
        assert d["widths"] == [4, 2]
