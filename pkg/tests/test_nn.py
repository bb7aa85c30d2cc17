import numpy as np
import pytest

from prefnav import nn


def rng(seed=0):
    return np.random.default_rng(seed)


class TestForward:
    def test_identity_linear_layer(self):
        net = nn.Mlp([3, 3], out_act="linear", rng=rng())
        net.weights[0] = np.eye(3)
        net.biases[0] = np.zeros(3)
        x = np.array([0.3, -1.2, 4.0])
        assert np.allclose(net.forward(x), x)

    def test_relu_zeroes_negative(self):
        net = nn.Mlp([4, 4, 4], hidden_act="relu", out_act="relu", rng=rng())
        net.weights = [np.eye(4), np.eye(4)]
        net.biases = [np.zeros(4), np.zeros(4)]
        out = net.forward(np.array([-1.0, -0.5, -2.0, -3.0]))
        assert np.allclose(out, 0.0)

    def test_two_layer_matches_manual_matrix_product(self):
        net = nn.Mlp([3, 2, 2], hidden_act="tanh", out_act="linear", rng=rng(1))
        x = np.array([0.5, -0.25, 1.5])
        h = np.tanh(x @ net.weights[0] + net.biases[0])
        expect = h @ net.weights[1] + net.biases[1]
        assert np.allclose(net.forward(x), expect)

    def test_shape_mismatch_raises(self):
        net = nn.Mlp([3, 2], rng=rng())
        with pytest.raises(ValueError):
            net.forward(np.zeros(5))

    def test_batched_equals_rowwise(self):
        net = nn.Mlp([4, 8, 2], rng=rng(2))
        xs = rng(3).normal(size=(6, 4))
        batch = net.forward(xs)
        rows = np.stack([net.forward(x) for x in xs])
        assert np.allclose(batch, rows)


class TestBackward:
    def test_linear_squared_error_closed_form(self):
        net = nn.Mlp([3, 1], out_act="linear", rng=rng(4))
        x = np.array([0.2, -0.7, 1.1])
        y = 0.4
        pred = net.forward(x)[0]
        grads, _ = net.backward(np.array([2.0 * (pred - y)]))
        assert np.allclose(grads[0][:, 0], 2.0 * (pred - y) * x)
        assert np.allclose(grads[1], 2.0 * (pred - y))

    def test_constant_loss_gives_zero(self):
        net = nn.Mlp([3, 4, 2], rng=rng(5))
        net.forward(np.zeros(3))
        grads, _ = net.backward(np.zeros(2))
        assert all(np.allclose(g, 0.0) for g in grads)

    def test_backward_before_forward_raises(self):
        net = nn.Mlp([2, 2], rng=rng())
        with pytest.raises(RuntimeError):
            net.backward(np.zeros(2))

    @pytest.mark.parametrize("hidden_act,out_act", [("relu", "linear"), ("tanh", "tanh"), ("relu", "sigmoid")])
    def test_finite_difference_random_nets(self, hidden_act, out_act):
        r = rng(6)
        net = nn.Mlp([5, 7, 3], hidden_act=hidden_act, out_act=out_act, rng=r)
        xs = r.normal(size=(4, 5))
        target = r.normal(size=(4, 3))

        def loss_fn():
            out = net.forward(xs)
            diff = out - target
            loss = float(np.mean(diff ** 2))
            grads, _ = net.backward(2.0 * diff / diff.size)
            return loss, grads

        err = nn.finite_difference_check(loss_fn, net.parameters(), r, n_probes=24)
        assert err < 1e-4

    def test_input_gradient(self):
        r = rng(7)
        net = nn.Mlp([4, 6, 1], rng=r)
        x = r.normal(size=4)
        out = net.forward(x)
        _, gin = net.backward(np.ones(1))
        h = 1e-6
        for i in range(4):
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            num = (net.forward(xp)[0] - net.forward(xm)[0]) / (2 * h)
            assert num == pytest.approx(gin[i], rel=1e-4, abs=1e-8)


class TestAdam:
    def test_zero_gradient_keeps_parameters(self):
        net = nn.Mlp([3, 3], rng=rng(8))
        before = [p.copy() for p in net.parameters()]
        state = nn.AdamState(net.parameters(), lr=1e-3)
        nn.adam_step(state, net.parameters(), [np.zeros_like(p) for p in net.parameters()])
        for b, a in zip(before, net.parameters()):
            assert np.array_equal(b, a)

    def test_first_step_is_signed_lr(self):
        params = [np.array([1.0, -2.0, 0.5])]
        g = np.array([0.3, -0.7, 0.01])
        state = nn.AdamState(params, lr=1e-3)
        before = params[0].copy()
        nn.adam_step(state, params, [g])
        # bias-corrected first step reduces to -lr * sign(g)
        assert np.allclose(params[0], before - 1e-3 * np.sign(g), atol=1e-6)

    def test_two_steps_match_scripted_trace(self):
        lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
        p = np.array([0.5])
        params = [p]
        state = nn.AdamState(params, lr=lr, beta1=b1, beta2=b2, eps=eps)
        # hand-rolled oracle
        m = v = 0.0
        ref = 0.5
        for t, g in enumerate([0.2, -0.1], start=1):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            ref -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
            nn.adam_step(state, params, [np.array([g])])
            assert params[0][0] == pytest.approx(ref, abs=1e-15)

    def test_nan_guard(self):
        params = [np.array([1.0])]
        state = nn.AdamState(params, lr=1.0)
        with pytest.raises(FloatingPointError):
            nn.adam_step(state, params, [np.array([np.nan])])


class TestGru:
    def test_zero_everything_gives_zero(self):
        stack = nn.GruStack(3, 4, n_layers=2, rng=rng(9))
        for cell in stack.cells:
            for name in ("wz", "wr", "wh", "uz", "ur", "uh"):
                setattr(cell, name, np.zeros_like(getattr(cell, name)))
            cell.bz = np.zeros_like(cell.bz)
            cell.br = np.zeros_like(cell.br)
            cell.bh = np.zeros_like(cell.bh)
        out, hidden = nn.seq_step(stack, np.zeros(3), stack.init_hidden())
        assert np.allclose(out, 0.0)

    def test_hidden_state_bounded(self):
        stack = nn.GruStack(3, 8, rng=rng(10))
        hidden = stack.init_hidden()
        r = rng(11)
        for _ in range(50):
            out, hidden = nn.seq_step(stack, r.normal(size=3) * 5, hidden)
            for h in hidden:
                assert np.all(np.abs(h) < 1.0)

    def test_step_matches_forward(self):
        stack = nn.GruStack(3, 5, rng=rng(12))
        seq = rng(13).normal(size=(5, 3))
        final = stack.forward(seq)
        hidden = stack.init_hidden()
        for x in seq:
            out, hidden = nn.seq_step(stack, x, hidden)
        assert np.allclose(final[0], out)

    def test_bptt_matches_finite_differences(self):
        r = rng(14)
        stack = nn.GruStack(3, 6, n_layers=2, rng=r)
        seq = r.normal(size=(5, 2, 3))
        target = r.normal(size=(2, 6))

        def loss_fn():
            out = stack.forward(seq)
            diff = out - target
            loss = float(np.mean(diff ** 2))
            grads = stack.backward(2.0 * diff / diff.size)
            return loss, grads

        err = nn.finite_difference_check(loss_fn, stack.parameters(), r, n_probes=30)
        assert err < 1e-3


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        net = nn.Mlp([4, 8, 2], rng=rng(15))
        path = tmp_path / "net.npz"
        nn.save_checkpoint(path, "test_net", net.state_arrays(), seed=15, train_steps=3)
        manifest, arrays = nn.load_checkpoint(path)
        assert manifest["model_kind"] == "test_net"
        assert manifest["train_steps"] == 3
        other = nn.Mlp([4, 8, 2], rng=rng(16))
        other.load_arrays(arrays)
        x = rng(17).normal(size=4)
        assert np.allclose(net.forward(x), other.forward(x))

    def test_shape_validation(self, tmp_path):
        net = nn.Mlp([4, 8, 2], rng=rng(18))
        path = tmp_path / "net.npz"
        nn.save_checkpoint(path, "test_net", net.state_arrays())
        _, arrays = nn.load_checkpoint(path)
        wrong = nn.Mlp([4, 9, 2], rng=rng(19))
        with pytest.raises(ValueError):
            wrong.load_arrays(arrays)


class TestSoftUpdate:
    def test_exact_blend(self):
        a = nn.Mlp([3, 3], rng=rng(20))
        b = nn.Mlp([3, 3], rng=rng(21))
        expect = [(1 - 0.005) * t + 0.005 * m for t, m in zip(a.parameters(), b.parameters())]
        nn.soft_update(a, b, 0.005)
        for e, p in zip(expect, a.parameters()):
            assert np.array_equal(e, p)
