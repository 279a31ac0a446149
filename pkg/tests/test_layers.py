import numpy as np
import pytest

from sentigru.layers import (BatchNorm, BidirectionalGru, Dense, Dropout,
                             Embedding, GruCell, GruSequence, glorot_uniform,
                             gru_sequence_forward, orthogonal, param_count,
                             softmax_cross_entropy)
from sentigru.numerics import grad_check

F64 = np.float64


def check_layer_grads(layer, loss_fn, extra_params=None, tol=1e-7):
    """Grad-check a layer's parameters (and any extra arrays) in float64.

    loss_fn must run the layer's forward pass from current array contents
    and return (loss, upstream_grad); the layer's backward fills the grads.
    """
    params = dict(layer.params())
    params.update(extra_params or {})
    layer.zero_grad()
    _, upstream = loss_fn()
    analytic = dict(backprop_into(layer, upstream, extra_params))
    report = grad_check(lambda: loss_fn()[0], params, analytic)
    assert report.max_relative_error < tol, report.per_parameter
    return report


def backprop_into(layer, upstream, extra_params):
    dx = layer.backward(upstream)
    grads = {name: g.copy() for name, g in layer.grads().items()}
    if extra_params:
        (name, _), = extra_params.items()
        grads[name] = dx.copy()
    return grads


class TestInitializers:
    def test_glorot_bounds(self):
        rng = np.random.default_rng(0)
        w = glorot_uniform(rng, (30, 50), F64)
        limit = np.sqrt(6.0 / 80.0)
        assert np.abs(w).max() <= limit
        assert abs(w.mean()) < limit / 5

    def test_orthogonal_columns(self):
        rng = np.random.default_rng(1)
        q = orthogonal(rng, 12, F64)
        assert np.allclose(q.T @ q, np.eye(12), atol=1e-10)

    def test_orthogonal_deterministic_for_seed(self):
        a = orthogonal(np.random.default_rng(3), 6, np.float32)
        b = orthogonal(np.random.default_rng(3), 6, np.float32)
        assert np.array_equal(a, b)


class TestEmbedding:
    def test_forward_gathers_rows(self):
        emb = Embedding(5, 3, np.random.default_rng(0), F64)
        ids = np.array([[0, 4], [2, 2]])
        out = emb.forward(ids)
        assert out.shape == (2, 2, 3)
        assert np.array_equal(out[0, 1], emb.weight[4])
        assert np.array_equal(out[1, 0], out[1, 1])

    def test_out_of_range_ids(self):
        emb = Embedding(5, 3, np.random.default_rng(0))
        with pytest.raises(ValueError):
            emb.forward(np.array([[5]]))
        with pytest.raises(ValueError):
            emb.forward(np.array([[-1]]))

    def test_backward_accumulates_repeated_rows(self):
        emb = Embedding(4, 2, np.random.default_rng(0), F64)
        emb.forward(np.array([[1, 1, 3]]))
        emb.backward(np.ones((1, 3, 2)))
        assert np.array_equal(emb.d_weight[1], [2.0, 2.0])
        assert np.array_equal(emb.d_weight[3], [1.0, 1.0])
        assert np.array_equal(emb.d_weight[0], [0.0, 0.0])

    def test_gradient(self):
        rng = np.random.default_rng(2)
        emb = Embedding(6, 4, rng, F64)
        ids = np.array([[0, 2, 2], [5, 1, 0]])
        r = rng.standard_normal((2, 3, 4))

        def loss_fn():
            out = emb.forward(ids)
            return float(np.sum(out * r)), r

        check_layer_grads(emb, loss_fn)

    def test_param_count(self):
        emb = Embedding(50_000, 50, np.random.default_rng(0))
        assert param_count(emb) == 2_500_000


class TestDropout:
    def test_infer_is_identity(self):
        d = Dropout(0.4)
        x = np.arange(6.0).reshape(2, 3)
        assert d.forward(x, "infer") is x
        assert d.backward(x) is x

    def test_rate_zero_is_identity_in_train(self):
        d = Dropout(0.0)
        x = np.ones((3, 3))
        assert d.forward(x, "train", np.random.default_rng(0)) is x

    def test_survivors_rescaled(self):
        d = Dropout(0.25)
        x = np.ones((40, 40))
        out = d.forward(x, "train", np.random.default_rng(0))
        values = np.unique(out)
        assert set(values.tolist()) == {0.0, 1.0 / 0.75}
        kept = (out != 0).mean()
        assert 0.65 < kept < 0.85

    def test_backward_matches_mask(self):
        d = Dropout(0.5)
        x = np.ones((8, 8))
        out = d.forward(x, "train", np.random.default_rng(1))
        g = d.backward(np.ones_like(x))
        assert np.array_equal(g == 0, out == 0)

    def test_invalid_rate(self):
        for rate in (-0.1, 1.0, 1.5):
            with pytest.raises(ValueError):
                Dropout(rate)

    def test_gradient_with_fixed_mask(self):
        d = Dropout(0.3)
        rng = np.random.default_rng(3)
        x = rng.standard_normal((4, 5))
        r = rng.standard_normal((4, 5))

        def loss_fn():
            # fresh identically-seeded rng keeps the mask fixed across calls
            out = d.forward(x, "train", np.random.default_rng(42))
            return float(np.sum(out * r)), r

        check_layer_grads(d, loss_fn, extra_params={"x": x})


class TestGruCell:
    def test_param_count_formula(self):
        rng = np.random.default_rng(0)
        for x_dim, h in [(50, 120), (240, 64), (128, 64), (3, 5)]:
            cell = GruCell(x_dim, h, rng)
            assert param_count(cell) == 3 * h * (x_dim + h + 2)
            assert sum(p.size for p in cell.params().values()) == \
                param_count(cell)

    def test_zero_input_zero_state_stays_zero(self):
        cell = GruCell(3, 4, np.random.default_rng(0), F64)
        h = cell.step(np.zeros((2, 3)), np.zeros((2, 4)))
        assert np.array_equal(h, np.zeros((2, 4)))

    def test_shape_validation(self):
        cell = GruCell(3, 4, np.random.default_rng(0))
        with pytest.raises(ValueError):
            cell.step(np.zeros((2, 5), dtype=np.float32),
                      np.zeros((2, 4), dtype=np.float32))

    def test_update_gate_interpolates(self):
        # saturate z high via huge input bias: state barely moves
        cell = GruCell(2, 3, np.random.default_rng(1), F64)
        cell.b_x[:3] = 50.0
        h_prev = np.array([[0.3, -0.2, 0.8]])
        h = cell.step(np.array([[0.1, 0.2]]), h_prev)
        assert np.allclose(h, h_prev, atol=1e-6)

    def test_single_step_gradient(self):
        rng = np.random.default_rng(4)
        cell = GruCell(3, 4, rng, F64)
        seq = GruSequence(cell, return_sequences=False)
        x = rng.standard_normal((2, 1, 3))
        r = rng.standard_normal((2, 4))

        def loss_fn():
            out = seq.forward(x)
            return float(np.sum(out * r)), r

        check_layer_grads(seq, loss_fn, extra_params={"x": x})


class TestGruSequence:
    def test_final_state_equals_last_sequence_step(self):
        rng = np.random.default_rng(5)
        cell = GruCell(3, 4, rng, F64)
        x = rng.standard_normal((2, 6, 3))
        states = GruSequence(cell, return_sequences=True).forward(x)
        final = GruSequence(cell, return_sequences=False).forward(x)
        assert np.array_equal(final, states[:, -1, :])

    def test_empty_sequence_rejected(self):
        cell = GruCell(3, 4, np.random.default_rng(0))
        with pytest.raises(ValueError):
            GruSequence(cell, True).forward(np.zeros((2, 0, 3), dtype=np.float32))

    def test_initial_state_is_used(self):
        rng = np.random.default_rng(6)
        cell = GruCell(3, 4, rng, F64)
        x = rng.standard_normal((2, 3, 3))
        h0 = rng.standard_normal((2, 4))
        manual = h0
        for t in range(3):
            manual = cell.step(x[:, t, :], manual)
        out = gru_sequence_forward(cell, x, return_sequences=False, h0=h0)
        assert np.allclose(out, manual, atol=1e-12)

    @pytest.mark.parametrize("return_sequences", [True, False])
    def test_bptt_gradient(self, return_sequences):
        rng = np.random.default_rng(7)
        cell = GruCell(3, 4, rng, F64)
        seq = GruSequence(cell, return_sequences)
        x = rng.standard_normal((2, 5, 3))
        shape = (2, 5, 4) if return_sequences else (2, 4)
        r = rng.standard_normal(shape)

        def loss_fn():
            out = seq.forward(x)
            return float(np.sum(out * r)), r

        check_layer_grads(seq, loss_fn, extra_params={"x": x})


class TestBidirectionalGru:
    def make(self, return_sequences, seed=8, x_dim=3, h=4):
        rng = np.random.default_rng(seed)
        return BidirectionalGru(GruCell(x_dim, h, rng, F64),
                                GruCell(x_dim, h, rng, F64), return_sequences)

    def test_hidden_size_mismatch_rejected(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            BidirectionalGru(GruCell(3, 4, rng), GruCell(3, 5, rng), True)

    def test_sequences_mode_halves(self):
        rng = np.random.default_rng(9)
        bi = self.make(True)
        x = rng.standard_normal((2, 5, 3))
        out = bi.forward(x)
        assert out.shape == (2, 5, 8)
        fwd_states = GruSequence(bi.fwd.cell, True).forward(x)
        bwd_states = GruSequence(bi.bwd.cell, True).forward(
            np.ascontiguousarray(x[:, ::-1, :]))
        assert np.array_equal(out[:, :, :4], fwd_states)
        assert np.array_equal(out[:, :, 4:], bwd_states[:, ::-1, :])

    def test_final_mode_concatenates_ends(self):
        rng = np.random.default_rng(10)
        bi = self.make(False)
        x = rng.standard_normal((3, 4, 3))
        out = bi.forward(x)
        assert out.shape == (3, 8)
        fwd_final = GruSequence(bi.fwd.cell, False).forward(x)
        bwd_final = GruSequence(bi.bwd.cell, False).forward(
            np.ascontiguousarray(x[:, ::-1, :]))
        assert np.array_equal(out[:, :4], fwd_final)
        assert np.array_equal(out[:, 4:], bwd_final)

    def test_param_count_doubles(self):
        bi = self.make(True)
        assert param_count(bi) == 2 * 3 * 4 * (3 + 4 + 2)

    @pytest.mark.parametrize("return_sequences", [True, False])
    def test_gradient(self, return_sequences):
        rng = np.random.default_rng(11)
        bi = self.make(return_sequences, seed=12)
        x = rng.standard_normal((2, 4, 3))
        shape = (2, 4, 8) if return_sequences else (2, 8)
        r = rng.standard_normal(shape)

        def loss_fn():
            out = bi.forward(x)
            return float(np.sum(out * r)), r

        check_layer_grads(bi, loss_fn, extra_params={"x": x})


class TestBatchNorm:
    def test_train_normalizes_batch(self):
        rng = np.random.default_rng(12)
        bn = BatchNorm(4, dtype=F64)
        x = rng.standard_normal((50, 4)) * 3.0 + 1.5
        out = bn.forward(x, "train")
        assert np.allclose(out.mean(axis=0), 0.0, atol=1e-10)
        assert np.allclose(out.var(axis=0), 1.0, atol=1e-3)

    def test_moving_stats_update_rule(self):
        rng = np.random.default_rng(13)
        bn = BatchNorm(3, momentum=0.9, dtype=F64)
        x = rng.standard_normal((20, 3))
        want_mean = 0.9 * bn.moving_mean + 0.1 * x.mean(axis=0)
        want_var = 0.9 * bn.moving_var + 0.1 * x.var(axis=0)
        bn.forward(x, "train")
        assert np.allclose(bn.moving_mean, want_mean, atol=1e-12)
        assert np.allclose(bn.moving_var, want_var, atol=1e-12)

    def test_infer_uses_moving_stats(self):
        bn = BatchNorm(2, dtype=F64)
        bn.moving_mean[:] = [1.0, -1.0]
        bn.moving_var[:] = [4.0, 0.25]
        bn.gamma[:] = [2.0, 3.0]
        bn.beta[:] = [0.5, -0.5]
        x = np.array([[3.0, 0.0]])
        want = bn.gamma * (x - bn.moving_mean) / np.sqrt(
            bn.moving_var + bn.epsilon) + bn.beta
        assert np.allclose(bn.forward(x, "infer"), want, atol=1e-12)

    def test_three_dim_input_flattens_leading(self):
        rng = np.random.default_rng(14)
        bn = BatchNorm(3, dtype=F64)
        x = rng.standard_normal((4, 5, 3))
        out = bn.forward(x, "train")
        assert out.shape == x.shape
        assert np.allclose(out.reshape(-1, 3).mean(axis=0), 0.0, atol=1e-10)

    def test_train_needs_two_samples(self):
        bn = BatchNorm(3)
        with pytest.raises(ValueError):
            bn.forward(np.zeros((1, 3), dtype=np.float32), "train")
        # a single sequence still has T samples after flattening
        bn.forward(np.zeros((1, 4, 3), dtype=np.float32), "train")

    def test_param_count_includes_moving_stats(self):
        assert param_count(BatchNorm(128)) == 512
        assert set(BatchNorm(4).buffers()) == {"moving_mean", "moving_var"}

    def test_train_gradient(self):
        rng = np.random.default_rng(15)
        bn = BatchNorm(3, dtype=F64)
        x = rng.standard_normal((6, 3))
        r = rng.standard_normal((6, 3))

        def loss_fn():
            out = bn.forward(x, "train")
            return float(np.sum(out * r)), r

        check_layer_grads(bn, loss_fn, extra_params={"x": x})

    def test_infer_gradient(self):
        rng = np.random.default_rng(16)
        bn = BatchNorm(3, dtype=F64)
        bn.moving_mean[:] = rng.standard_normal(3)
        bn.moving_var[:] = 0.5 + rng.random(3)
        x = rng.standard_normal((4, 3))
        r = rng.standard_normal((4, 3))

        def loss_fn():
            out = bn.forward(x, "infer")
            return float(np.sum(out * r)), r

        check_layer_grads(bn, loss_fn, extra_params={"x": x})


class TestDense:
    def test_affine_map(self):
        rng = np.random.default_rng(17)
        dense = Dense(3, 2, rng, F64)
        x = rng.standard_normal((4, 3))
        assert np.allclose(dense.forward(x), x @ dense.W + dense.b, atol=1e-12)

    def test_param_count(self):
        assert param_count(Dense(128, 6, np.random.default_rng(0))) == 774

    def test_gradient(self):
        rng = np.random.default_rng(18)
        dense = Dense(3, 2, rng, F64)
        x = rng.standard_normal((4, 3))
        r = rng.standard_normal((4, 2))

        def loss_fn():
            out = dense.forward(x)
            return float(np.sum(out * r)), r

        check_layer_grads(dense, loss_fn, extra_params={"x": x})

    def test_zero_grad(self):
        rng = np.random.default_rng(19)
        dense = Dense(2, 2, rng, F64)
        dense.forward(rng.standard_normal((3, 2)))
        dense.backward(np.ones((3, 2)))
        assert np.abs(dense.dW).sum() > 0
        dense.zero_grad()
        assert np.abs(dense.dW).sum() == 0
        assert np.abs(dense.db).sum() == 0


class TestSoftmaxCrossEntropy:
    def test_uniform_logits_give_log_k(self):
        loss, _ = softmax_cross_entropy(np.zeros((4, 6)), np.array([0, 1, 2, 3]))
        assert loss == pytest.approx(np.log(6.0), abs=1e-12)

    def test_gradient_rows_sum_to_zero(self):
        rng = np.random.default_rng(20)
        logits = rng.standard_normal((5, 6))
        _, d = softmax_cross_entropy(logits, np.array([0, 5, 2, 2, 1]))
        assert np.allclose(d.sum(axis=1), 0.0, atol=1e-12)

    def test_confident_correct_prediction_low_loss(self):
        logits = np.array([[30.0, 0.0, 0.0]])
        loss, _ = softmax_cross_entropy(logits, np.array([0]))
        assert loss < 1e-9

    def test_extreme_logits_stay_finite(self):
        logits = np.array([[1000.0, -1000.0], [-1000.0, 1000.0]])
        loss, d = softmax_cross_entropy(logits, np.array([0, 1]))
        assert np.isfinite(loss)
        assert np.isfinite(d).all()

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            softmax_cross_entropy(np.zeros((2, 3)), np.array([0, 3]))

    def test_gradient_against_finite_differences(self):
        rng = np.random.default_rng(21)
        logits = rng.standard_normal((3, 4))
        labels = np.array([1, 3, 0])
        _, analytic = softmax_cross_entropy(logits, labels)
        report = grad_check(
            lambda: softmax_cross_entropy(logits, labels)[0],
            {"logits": logits}, {"logits": analytic})
        assert report.max_relative_error < 1e-7
