import numpy as np
import pytest

from multiscale_embed import autodiff as ad
from multiscale_embed.autodiff import Adam, Parameter, Tape, Tensor
from multiscale_embed.exceptions import TrainingError, ZeroNormError


def finite_difference(value_fn, param, h=1e-5):
    flat = param.data.reshape(-1)
    grad = np.empty_like(flat)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = value_fn()
        flat[i] = old - h
        down = value_fn()
        flat[i] = old
        grad[i] = (up - down) / (2.0 * h)
    return grad.reshape(param.data.shape)


def assert_grad_matches(value_fn, build_loss, params, tol=1e-6):
    """Analytic gradient vs central differences for every parameter."""
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        tape.backward(build_loss())
    for p in params:
        numeric = finite_difference(value_fn, p)
        denom = np.maximum(np.maximum(np.abs(numeric), np.abs(p.grad)), 1e-6)
        assert np.max(np.abs(p.grad - numeric) / denom) < tol, p.name


class TestForwardValues:
    def test_softmax_uniform(self):
        out = ad.softmax(Tensor([0.0, 0.0, 0.0]))
        assert np.allclose(out.data, [1 / 3] * 3, atol=1e-15)

    def test_softmax_normalizes_and_is_positive(self):
        rng = np.random.default_rng(0)
        logits = rng.normal(scale=50.0, size=(20, 7))
        out = ad.softmax(Tensor(logits)).data
        assert np.all(np.abs(out.sum(axis=1) - 1.0) <= 1e-12)
        assert np.all(out > 0.0) and np.all(out <= 1.0)

    def test_softmax_extreme_logits_stable(self):
        out = ad.softmax(Tensor([1000.0, 0.0, -1000.0])).data
        assert np.isfinite(out).all() and abs(out.sum() - 1.0) <= 1e-12

    def test_hinge(self):
        assert ad.hinge(Tensor([-0.5])).data[0] == 0.0
        assert ad.hinge(Tensor([0.5])).data[0] == 0.5

    def test_sigmoid_at_zero(self):
        assert ad.sigmoid(Tensor([0.0])).data[0] == 0.5

    def test_sigmoid_saturation_finite(self):
        out = ad.sigmoid(Tensor([800.0, -800.0])).data
        assert np.isfinite(out).all()
        assert out[0] == 1.0 and out[1] == 0.0

    def test_matmul_shape_error(self):
        with pytest.raises(ValueError):
            ad.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_dot_shape_error(self):
        with pytest.raises(ValueError):
            ad.dot(Tensor([1.0, 2.0]), Tensor([1.0, 2.0, 3.0]))

    def test_mean_rows(self):
        out = ad.mean_rows(Tensor([[1.0, 2.0], [3.0, 4.0]]))
        assert np.allclose(out.data, [2.0, 3.0])

    def test_unit_rows_zero_norm_raises(self):
        with pytest.raises(ZeroNormError):
            ad.unit_rows(Tensor(np.zeros((2, 3))))

    def test_repeat_rows(self):
        out = ad.repeat_rows(Tensor([[1.0, 2.0], [3.0, 4.0]]), 2)
        assert np.array_equal(out.data, [[1, 2], [1, 2], [3, 4], [3, 4]])

    def test_clip(self):
        out = ad.clip(Tensor([-1.0, 0.5, 2.0]), 0.0, 1.0)
        assert np.array_equal(out.data, [0.0, 0.5, 1.0])


class TestBackward:
    def test_linear_form_gradient(self):
        x = np.array([1.0, -2.0, 3.5])
        w = Parameter(np.zeros(3), "w")
        with Tape() as tape:
            tape.backward(ad.dot(w, Tensor(x)))
        assert np.array_equal(w.grad, x)

    def test_tanh_sum_at_zero(self):
        w = Parameter(np.zeros(4), "w")
        with Tape() as tape:
            tape.backward(ad.tsum(ad.tanh(w)))
        assert np.allclose(w.grad, np.ones(4))

    def test_backward_requires_scalar(self):
        w = Parameter(np.ones(3), "w")
        with Tape() as tape:
            y = ad.tanh(w)
            with pytest.raises(ValueError):
                tape.backward(y)

    def test_accumulation_is_linear(self):
        rng = np.random.default_rng(1)
        w = Parameter(rng.normal(size=(3, 2)), "w")
        x1, x2 = Tensor(rng.normal(size=(4, 3))), Tensor(rng.normal(size=(4, 3)))

        def loss_one():
            return ad.tsum(ad.tanh(ad.matmul(x1, w)))

        def loss_two():
            return ad.tsum(ad.sigmoid(ad.matmul(x2, w)))

        w.zero_grad()
        with Tape() as tape:
            tape.backward(ad.add(loss_one(), loss_two()))
        combined = w.grad.copy()

        w.zero_grad()
        with Tape() as tape:
            tape.backward(loss_one())
        with Tape() as tape:
            tape.backward(loss_two())
        assert np.allclose(combined, w.grad, atol=1e-12)

    def test_parameter_reused_twice_accumulates(self):
        w = Parameter(np.array([2.0]), "w")
        with Tape() as tape:
            tape.backward(ad.tsum(ad.mul(w, w)))  # d/dw w^2 = 2w
        assert np.allclose(w.grad, [4.0])

    def test_deterministic_backward(self):
        rng = np.random.default_rng(5)
        w = Parameter(rng.normal(size=(6, 5)), "w")
        x = Tensor(rng.normal(size=(3, 6)))

        def run():
            w.zero_grad()
            with Tape() as tape:
                tape.backward(ad.tsum(ad.softmax(ad.matmul(x, w))))
            return w.grad.copy()

        assert np.array_equal(run(), run())

    def test_no_tape_means_no_tracking(self):
        w = Parameter(np.ones(3), "w")
        out = ad.tanh(w)
        assert out._track is False and out.grad is None


class TestGradientsAgainstFiniteDifferences:
    def test_each_primitive(self):
        rng = np.random.default_rng(9)
        a = Parameter(rng.normal(size=(4, 5)), "a")
        b = Parameter(rng.normal(size=(5, 3)), "b")
        v = Parameter(rng.normal(size=7), "v")
        u = Parameter(rng.normal(size=7), "u")
        c = Tensor(rng.normal(size=(4, 3)))
        softmax_weights = rng.normal(size=(4, 5))
        cases = [
            (lambda: ad.tsum(ad.mul(ad.matmul(a, b), c)), [a, b]),
            (lambda: ad.tsum(ad.tanh(a)), [a]),
            (lambda: ad.tsum(ad.sigmoid(a)), [a]),
            (lambda: ad.tsum(ad.leaky_relu(a, 0.2)), [a]),
            # weight the softmax rows so the loss is not constant
            (lambda: ad.tsum(ad.mul(ad.softmax(a), softmax_weights)), [a]),
            (lambda: ad.tsum(ad.log(ad.add(ad.mul(a, a), 1.0))), [a]),
            (lambda: ad.dot(u, v), [u, v]),
            (lambda: ad.tsum(ad.mean_rows(a)), [a]),
            (lambda: ad.tsum(ad.unit_rows(a)), [a]),
            (lambda: ad.tsum(ad.mul(ad.repeat_rows(a, 3), np.ones((12, 5)))), [a]),
            (lambda: ad.tsum(ad.stack_cols([ad.mean_rows(a), ad.mean_rows(ad.tanh(a))])), [a]),
            (lambda: ad.tsum(ad.col(a, 2)), [a]),
            (lambda: ad.tsum(ad.transpose(a)), [a]),
            (lambda: ad.scale(ad.tsum(ad.sub(a, 0.5)), 2.5), [a]),
            (lambda: ad.mean(ad.rowwise_dot(a, ad.add(a, 1.0))), [a]),
        ]
        for build, params in cases:
            assert_grad_matches(lambda: float(build().data), build, params)

    def test_three_layer_network(self):
        rng = np.random.default_rng(12)
        x = Tensor(rng.normal(size=(5, 8)))
        w1 = Parameter(rng.normal(scale=0.5, size=(8, 6)), "w1")
        b1 = Parameter(rng.normal(scale=0.1, size=6), "b1")
        w2 = Parameter(rng.normal(scale=0.5, size=(6, 4)), "w2")
        b2 = Parameter(rng.normal(scale=0.1, size=4), "b2")
        w3 = Parameter(rng.normal(scale=0.5, size=(4, 1)), "w3")

        def build():
            h1 = ad.tanh(ad.add(ad.matmul(x, w1), b1))
            h2 = ad.sigmoid(ad.add(ad.matmul(h1, w2), b2))
            return ad.mean(ad.matmul(h2, w3))

        assert_grad_matches(lambda: float(build().data), build,
                            [w1, b1, w2, b2, w3], tol=1e-4)


class TestAdam:
    def test_first_step_is_bias_corrected(self):
        p = Parameter(np.array([1.0]), "p")
        opt = Adam([p], lr=0.1)
        p.grad[:] = 1.0
        opt.step()
        assert abs((1.0 - p.data[0]) - 0.1) < 1e-8

    def test_zero_gradient_is_fixed_point(self):
        p = Parameter(np.array([1.0, -2.0]), "p")
        opt = Adam([p], lr=0.1)
        opt.step()
        assert np.array_equal(p.data, [1.0, -2.0])

    def test_trajectories_are_deterministic(self):
        def run():
            p = Parameter(np.array([0.3, -0.7]), "p")
            opt = Adam([p], lr=0.05)
            history = []
            for step in range(5):
                p.grad[:] = np.sin(p.data + step)
                opt.step()
                history.append(p.data.copy())
            return np.stack(history)

        assert np.array_equal(run(), run())

    def test_nonfinite_gradient_names_parameter(self):
        p = Parameter(np.array([1.0]), "offender")
        opt = Adam([p])
        p.grad[:] = np.nan
        with pytest.raises(TrainingError, match="offender"):
            opt.step()

    def test_grad_zeroed_after_step(self):
        p = Parameter(np.array([1.0]), "p")
        opt = Adam([p], lr=0.1)
        p.grad[:] = 2.0
        opt.step()
        assert np.array_equal(p.grad, [0.0])

    def test_state_round_trip(self):
        p = Parameter(np.array([0.5, 1.5]), "p")
        opt = Adam([p], lr=0.01)
        p.grad[:] = [1.0, -1.0]
        opt.step()
        stored = opt.state_arrays("opt")
        q = Parameter(p.data.copy(), "p")
        other = Adam([q], lr=0.01)
        other.load_state_arrays("opt", {k: v.copy() for k, v in stored.items()})
        p.grad[:] = [0.2, 0.4]
        q.grad[:] = [0.2, 0.4]
        opt.step()
        other.step()
        assert np.array_equal(p.data, q.data)
