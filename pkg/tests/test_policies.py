import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from subspaceopt.policies import (
    FifoPolicy,
    FixedSlotPolicy,
    MlpPolicy,
    PolicyInput,
    SmallestCoefficientPolicy,
    greedy_action,
    sample_action,
)


def obs_from_row(row, h=5):
    row = np.asarray(row, dtype=float)
    hist = np.zeros((h, row.size))
    hist[0] = row
    return PolicyInput(alpha_history=hist, slots_filled=row.size)


class TestFifo:
    def test_always_zero(self):
        p = FifoPolicy()
        obs = obs_from_row([0.5, -2.0, 1.0])
        assert p.select(obs) == 0
        assert p.select(obs) == 0

    def test_probs_one_hot_at_zero(self):
        np.testing.assert_array_equal(
            FifoPolicy().probs(obs_from_row([1.0, 2.0])), [1.0, 0.0]
        )


class TestSmallestCoefficient:
    def test_picks_smallest_absolute(self):
        assert SmallestCoefficientPolicy().select(obs_from_row([0.5, -0.01, 2.0])) == 1

    def test_tie_breaks_to_lowest_index(self):
        assert SmallestCoefficientPolicy().select(obs_from_row([0.3, -0.3, 0.7])) == 0

    def test_all_zeros_gives_zero(self):
        assert SmallestCoefficientPolicy().select(obs_from_row([0.0, 0.0, 0.0])) == 0

    def test_only_filled_slots_considered(self):
        hist = np.zeros((5, 4))
        hist[0] = [0.5, 0.2, 0.0, 0.0]  # slots 2,3 unfilled
        obs = PolicyInput(alpha_history=hist, slots_filled=2)
        assert SmallestCoefficientPolicy().select(obs) == 1

    def test_errors_with_no_slots(self):
        obs = PolicyInput(alpha_history=np.zeros((5, 3)), slots_filled=0)
        with pytest.raises(ValueError):
            SmallestCoefficientPolicy().select(obs)

    @given(
        row=arrays(np.float64, 6, elements=st.floats(-100, 100, allow_nan=False)),
        signs=arrays(np.int8, 6, elements=st.sampled_from([-1, 1])),
        scale=st.floats(1e-3, 1e3),
    )
    @settings(max_examples=50, deadline=None)
    def test_invariant_to_signs_and_positive_scaling(self, row, signs, scale):
        base = SmallestCoefficientPolicy().select(obs_from_row(row))
        flipped = SmallestCoefficientPolicy().select(obs_from_row(row * signs * scale))
        assert base == flipped


class TestFixedSlot:
    def test_always_returns_index(self):
        p = FixedSlotPolicy(5)
        assert p.select(obs_from_row(np.zeros(9))) == 5

    def test_index_past_newest_clamps_to_newest(self):
        # with 9 stored slots the policy indexed 9 always evicts the newest
        p = FixedSlotPolicy(9)
        assert p.select(obs_from_row(np.zeros(9))) == 8

    def test_zero_equals_fifo(self):
        obs = obs_from_row([1.0, 2.0, 3.0])
        assert FixedSlotPolicy(0).select(obs) == FifoPolicy().select(obs)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            FixedSlotPolicy(-1)


class TestSampling:
    def test_degenerate_distribution(self):
        rng = np.random.default_rng(0)
        probs = np.array([1.0, 0.0, 0.0])
        assert all(sample_action(probs, rng) == 0 for _ in range(20))

    def test_empirical_frequencies(self):
        rng = np.random.default_rng(1)
        probs = np.array([0.3, 0.7])
        draws = np.array([sample_action(probs, rng) for _ in range(100_000)])
        assert abs(draws.mean() - 0.7) < 0.01

    def test_greedy_tie_breaks_low(self):
        assert greedy_action(np.array([0.25, 0.25, 0.25, 0.25])) == 0

    def test_rejects_invalid_distribution(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            sample_action(np.array([0.5, 0.6]), rng)
        with pytest.raises(ValueError):
            greedy_action(np.array([-0.1, 1.1]))


class TestMlpPolicy:
    def make(self, input_dim=8, n_actions=4, seed=0, hidden=(16, 16)):
        return MlpPolicy.initialize(input_dim, n_actions, hidden=hidden, seed=seed)

    def test_zero_output_layer_gives_uniform(self):
        p = self.make(n_actions=5)
        probs = p.forward_vec(np.random.default_rng(0).standard_normal(8))
        np.testing.assert_allclose(probs, 0.2, atol=1e-12)

    def test_probabilities_sum_to_one(self):
        p = self.make()
        rng = np.random.default_rng(1)
        p.theta = rng.standard_normal(p.theta.size)
        for _ in range(10):
            probs = p.forward_vec(rng.standard_normal(8))
            assert abs(probs.sum() - 1.0) < 1e-12
            assert (probs >= 0).all()

    def test_forward_is_pure(self):
        p = self.make()
        p.theta = np.random.default_rng(2).standard_normal(p.theta.size)
        x = np.random.default_rng(3).standard_normal(8)
        np.testing.assert_array_equal(p.forward_vec(x), p.forward_vec(x))

    def test_softmax_shift_invariance_via_output_bias(self):
        # adding a constant to every output bias leaves the distribution alone
        p = self.make()
        rng = np.random.default_rng(4)
        p.theta = rng.standard_normal(p.theta.size)
        x = rng.standard_normal(8)
        base = p.forward_vec(x)
        shifted = MlpPolicy(p.layer_sizes, p.theta.copy())
        shifted.theta[-p.layer_sizes[-1]:] += 3.7
        np.testing.assert_allclose(shifted.forward_vec(x), base, atol=1e-12)

    def test_logprob_grad_matches_finite_differences(self):
        p = self.make(input_dim=6, n_actions=3, hidden=(8, 8), seed=5)
        rng = np.random.default_rng(5)
        p.theta = 0.5 * rng.standard_normal(p.theta.size)
        x = rng.standard_normal(6)
        action = 1
        grad = p.logprob_grad_vec(x, action)
        coords = rng.choice(p.theta.size, size=50, replace=False)
        h = 1e-6
        for i in coords:
            tp, tm = p.theta.copy(), p.theta.copy()
            tp[i] += h
            tm[i] -= h
            lp = np.log(MlpPolicy(p.layer_sizes, tp).forward_vec(x)[action])
            lm = np.log(MlpPolicy(p.layer_sizes, tm).forward_vec(x)[action])
            fd = (lp - lm) / (2 * h)
            denom = max(abs(fd), 1e-8)
            assert abs(grad[i] - fd) / denom < 1e-5

    def test_score_function_identity(self):
        # sum_a pi(a) * grad log pi(a) = 0 exactly over the finite action set
        p = self.make(input_dim=5, n_actions=4, hidden=(8, 8), seed=6)
        rng = np.random.default_rng(6)
        p.theta = rng.standard_normal(p.theta.size)
        x = rng.standard_normal(5)
        probs = p.forward_vec(x)
        total = sum(probs[a] * p.logprob_grad_vec(x, a) for a in range(4))
        assert np.max(np.abs(total)) < 1e-10

    def test_output_bias_shift_leaves_hidden_grads_alone(self):
        p = self.make(input_dim=5, n_actions=3, hidden=(8, 8), seed=7)
        rng = np.random.default_rng(7)
        p.theta = rng.standard_normal(p.theta.size)
        x = rng.standard_normal(5)
        g1 = p.logprob_grad_vec(x, 2)
        p2 = MlpPolicy(p.layer_sizes, p.theta.copy())
        p2.theta[-3:] += 1.234
        g2 = p2.logprob_grad_vec(x, 2)
        n_hidden_params = p.theta.size - (8 * 3 + 3)
        np.testing.assert_allclose(g1[:n_hidden_params], g2[:n_hidden_params], atol=1e-12)

    def test_select_respects_greedy_flag(self):
        p = self.make(n_actions=3)
        rng = np.random.default_rng(8)
        p.theta = rng.standard_normal(p.theta.size)
        obs = PolicyInput(alpha_history=np.zeros((2, 4)), slots_filled=4)
        pg = MlpPolicy(p.layer_sizes, p.theta, greedy=True)
        probs = pg.forward_vec(obs.flat())
        assert pg.select(obs) == int(np.argmax(probs))

    def test_flattening_is_lag_major(self):
        hist = np.arange(6, dtype=float).reshape(2, 3)
        obs = PolicyInput(alpha_history=hist, slots_filled=3)
        np.testing.assert_array_equal(obs.flat(), [0, 1, 2, 3, 4, 5])

    def test_checkpoint_roundtrip_bit_exact(self, tmp_path):
        p = MlpPolicy.for_engine(d=10, h=5, seed=9)
        rng = np.random.default_rng(9)
        p.theta = rng.standard_normal(p.theta.size)
        bin_path, json_path = p.save(tmp_path / "ckpt")
        assert bin_path.exists() and json_path.exists()
        loaded = MlpPolicy.load(tmp_path / "ckpt")
        np.testing.assert_array_equal(loaded.theta, p.theta)
        assert loaded.layer_sizes == p.layer_sizes
        assert loaded.d == 10 and loaded.h == 5
        # the binary payload is the raw little-endian float64 array
        raw = np.frombuffer(bin_path.read_bytes(), dtype="<f8")
        np.testing.assert_array_equal(raw, p.theta)

    def test_engine_geometry_sizes(self):
        p = MlpPolicy.for_engine(d=10, h=5)
        assert p.layer_sizes == (45, 128, 128, 9)
