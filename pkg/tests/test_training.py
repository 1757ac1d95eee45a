import numpy as np
import pytest

from jamrec.encoding import TrainingChunks, make_training_chunks, encode_trace
from jamrec.gru import GruParams, final_probs, loss_and_grads
from jamrec.optim import SGD, Adam, make_optimizer, optimizer_step
from jamrec.sim import ConfigError, PolicyKind, SimConfig, run_episode
from jamrec.training import Hyperparams, TrainingDivergedError, predict_policy, train


def params_and_grads(seed=0):
    rng = np.random.default_rng(seed)
    p = GruParams.init(4, 3, rng)
    g = p.zeros_like()
    for _, arr in g.items():
        arr += rng.normal(size=arr.shape)
    return p, g


class TestOptimizers:
    def test_sgd_zero_gradient(self):
        p, _ = params_and_grads()
        before = p.copy()
        SGD(0.1).step(p, p.zeros_like())
        assert p.fingerprint() == before.fingerprint()

    def test_adam_zero_gradient(self):
        p, _ = params_and_grads()
        before = p.copy()
        Adam(0.1).step(p, p.zeros_like())
        assert p.fingerprint() == before.fingerprint()

    def test_sgd_rule(self):
        p, g = params_and_grads(1)
        before = p.copy()
        SGD(0.05).step(p, g)
        for name, arr in p.items():
            np.testing.assert_array_equal(arr, getattr(before, name) - 0.05 * getattr(g, name))

    def test_adam_hand_computed(self):
        p, g = params_and_grads(2)
        before = p.copy()
        opt = Adam(lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
        opt.step(p, g)
        opt.step(p, g)
        for name, arr in p.items():
            gv = getattr(g, name)
            # after two identical gradients the bias-corrected moments are g and g^2
            m1, v1 = 0.1 * gv, 0.001 * gv**2
            m2, v2 = 0.9 * m1 + 0.1 * gv, 0.999 * v1 + 0.001 * gv**2
            step1 = 0.1 * (m1 / 0.1) / (np.sqrt(v1 / 0.001) + 1e-8)
            step2 = 0.1 * (m2 / 0.19) / (np.sqrt(v2 / (1 - 0.999**2)) + 1e-8)
            np.testing.assert_allclose(arr, getattr(before, name) - step1 - step2, rtol=0, atol=1e-14)
        assert opt.t == 2

    def test_make_optimizer(self):
        assert isinstance(make_optimizer("Adam", 1e-3), Adam)
        assert isinstance(make_optimizer("sgd", 1e-3), SGD)
        with pytest.raises(ValueError):
            make_optimizer("rmsprop", 1e-3)

    def test_shape_mismatch(self):
        p, _ = params_and_grads()
        bad = GruParams.zeros(4, 2)
        with pytest.raises(ValueError):
            optimizer_step(p, bad, SGD())


def _small_dataset(seed=0, T=1200, K=25):
    trace = encode_trace(run_episode(SimConfig(switch_period=K, episode_len=T, seed=seed)), 12)
    return make_training_chunks(trace, 20)


class TestTrain:
    def test_constant_label_task(self):
        rng = np.random.default_rng(3)
        x = rng.integers(0, 2, (60, 10, 8)).astype(float)
        y = np.full((60, 10), 3)
        res = train(TrainingChunks(x, y), Hyperparams(hidden_dim=8, epochs=5, batch_size=8, seed=1))
        pred = np.argmax(final_probs(x, res.params), axis=-1)
        assert np.mean(pred == 3) >= 0.99
        assert res.train_accuracy >= 0.99

    def test_loss_history_finite_and_decreasing(self):
        res = train(_small_dataset(), Hyperparams(hidden_dim=16, epochs=4, seed=2))
        assert len(res.loss_history) == 4
        assert np.all(np.isfinite(res.loss_history))
        assert res.loss_history[-1] < res.loss_history[0]

    def test_deterministic(self):
        data = _small_dataset(1)
        hyper = Hyperparams(hidden_dim=8, epochs=2, seed=5)
        a, b = train(data, hyper), train(data, hyper)
        assert a.params.fingerprint() == b.params.fingerprint()
        assert a.loss_history == b.loss_history
        c = train(data, Hyperparams(hidden_dim=8, epochs=2, seed=6))
        assert c.params.fingerprint() != a.params.fingerprint()

    def test_sgd_trains(self):
        res = train(_small_dataset(), Hyperparams(hidden_dim=8, epochs=3, optimizer="sgd",
                                                  learning_rate=0.5, seed=0))
        assert res.loss_history[-1] < res.loss_history[0]

    def test_divergence_reported(self):
        start = GruParams.init(24, 4, np.random.default_rng(0))
        start.W_out[0, 0] = np.nan
        with np.errstate(all="ignore"), pytest.raises(TrainingDivergedError, match="non-finite"):
            train(_small_dataset(), Hyperparams(hidden_dim=4, epochs=1), params=start)

    def test_empty_dataset(self):
        with pytest.raises(ValueError):
            train(TrainingChunks(np.zeros((0, 5, 4)), np.zeros((0, 5), dtype=int)), Hyperparams())

    @pytest.mark.parametrize("field, value", [("hidden_dim", 0), ("learning_rate", 0.0),
                                              ("optimizer", "lbfgs"), ("epochs", 0)])
    def test_hyper_validation(self, field, value):
        with pytest.raises(ConfigError):
            Hyperparams(**{field: value}).validate()


class TestPredict:
    @staticmethod
    def params_with_final_logits(logits):
        p = GruParams.zeros(4, 3)
        p.b_out[:] = logits
        return p

    @pytest.mark.parametrize("probs, expected", [
        ([0.1, 0.6, 0.1, 0.1, 0.1], PolicyKind.RJ),
        ([1e-300, 1e-300, 1e-300, 1e-300, 1.0], PolicyKind.CJ),
        ([0.2] * 5, PolicyKind.SJ),
    ])
    def test_argmax_and_ties(self, probs, expected):
        # zero weights make the head output depend on the bias alone
        p = self.params_with_final_logits(np.log(probs))
        assert predict_policy(np.ones((20, 4)), p) is expected

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(4)
        p = GruParams.init(4, 6, rng, scale=1.0)
        windows = rng.integers(0, 2, (50, 12, 4)).astype(float)
        base = [predict_policy(w, p) for w in windows]
        q = p.copy()
        q.W_out *= 3.0  # logits -> 3 * logits + const is strictly increasing
        q.b_out = 3.0 * q.b_out + 7.0
        assert [predict_policy(w, q) for w in windows] == base

    def test_uses_only_final_step(self):
        rng = np.random.default_rng(5)
        p = GruParams.init(4, 6, rng, scale=1.0)
        w = rng.integers(0, 2, (9, 4)).astype(float)
        assert predict_policy(w, p) == int(np.argmax(final_probs(w, p)))

    def test_bad_window(self):
        with pytest.raises(ValueError):
            predict_policy(np.zeros((0, 4)), GruParams.zeros(4, 3))


def test_loss_and_grads_shapes():
    rng = np.random.default_rng(6)
    p = GruParams.init(4, 3, rng)
    loss, g = loss_and_grads(rng.integers(0, 2, (2, 5, 4)), rng.integers(0, 5, (2, 5)), p)
    assert loss > 0
    for name, arr in p.items():
        assert getattr(g, name).shape == arr.shape
