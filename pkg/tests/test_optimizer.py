import math

import numpy as np
import pytest

from stochint.baselines import random_policy
from stochint.data import SyntheticSpec, make_synthetic, train_test_split
from stochint.errors import LengthMismatch, NonFiniteReward, ValidationError
from stochint.estimator import InfluenceArrays, estimate_sie
from stochint.optimizer import (
    DeltaParam,
    RsConfig,
    delta_to_policy,
    optimize,
    policy_value,
    reward,
)


def make_arrays(t, y, p, mu0, mu1):
    return InfluenceArrays(
        np.asarray(t), np.asarray(y, dtype=float), np.asarray(p, dtype=float),
        np.asarray(mu0, dtype=float), np.asarray(mu1, dtype=float),
    )


def reference_random_search(arrays, cfg):
    """Plain-loop reimplementation of the search, kept independent of the
    package's kernels: the shifted propensity uses the ratio formula and all
    reductions are python-level sums."""
    n = arrays.n
    p = np.asarray(arrays.p_hat, dtype=float)
    m0 = np.asarray(arrays.m0, dtype=float)
    m1 = np.asarray(arrays.m1, dtype=float)

    def phi_sum(lam):
        total = 0.0
        for i in range(n):
            delta = math.exp(lam[i])
            q = delta * p[i] / (delta * p[i] + 1.0 - p[i])
            total += q * m1[i] + (1.0 - q) * m0[i]
        return total

    rng = np.random.default_rng(cfg.seed)
    lam = np.zeros(n)
    dirs = None
    if not cfg.resample_directions:
        dirs = rng.standard_normal((cfg.directions, n))
    rewards_at_iterates = [phi_sum(lam)]
    for _ in range(cfg.steps):
        if cfg.resample_directions:
            dirs = rng.standard_normal((cfg.directions, n))
        plus = [phi_sum(lam + cfg.nu * dirs[k]) for k in range(cfg.directions)]
        minus = [phi_sum(lam - cfg.nu * dirs[k]) for k in range(cfg.directions)]
        order = sorted(
            range(cfg.directions), key=lambda k: (-max(plus[k], minus[k]), k)
        )[: cfg.top_directions]
        update = np.zeros(n)
        for k in order:
            update += (plus[k] - minus[k]) * dirs[k]
        update *= cfg.alpha / cfg.top_directions
        lam = lam + update
        rewards_at_iterates.append(phi_sum(lam))
    return lam, rewards_at_iterates


class TestReward:
    def test_single_unit_worked_example(self):
        arrays = make_arrays([1], [4.0], [0.5], [1.0], [3.0])
        assert reward(arrays, np.array([math.log(1.5)])) == pytest.approx(3.4, abs=1e-12)

    def test_matches_estimator_at_no_intervention(self):
        ds, gt = make_synthetic(SyntheticSpec.default(), 1500, seed=41)
        arrays = InfluenceArrays.from_oracle(ds, gt)
        rep = estimate_sie(ds, delta=1.0, k=2, seed=0, oracle=gt)
        assert reward(arrays, np.zeros(ds.n)) == pytest.approx(
            ds.n * rep.psi_hat, rel=1e-13
        )

    def test_invariant_when_arms_agree(self):
        rng = np.random.default_rng(42)
        n = 50
        c = 1.3
        t = rng.integers(0, 2, n)
        arrays = make_arrays(t, np.full(n, c), rng.uniform(0.2, 0.8, n),
                             np.full(n, c), np.full(n, c))
        for _ in range(5):
            lam = rng.standard_normal(n)
            assert reward(arrays, lam) == pytest.approx(n * c, rel=1e-12)


class TestOptimize:
    def _toy_arrays(self, n=3, seed=43):
        rng = np.random.default_rng(seed)
        t = rng.integers(0, 2, n)
        y = rng.standard_normal(n) + 1.0
        p = rng.uniform(0.3, 0.7, n)
        mu0 = rng.standard_normal(n)
        mu1 = mu0 + rng.standard_normal(n)
        return make_arrays(t, y, p, mu0, mu1)

    def test_zero_steps_is_identity(self):
        arrays = self._toy_arrays()
        res = optimize(arrays, RsConfig(steps=0, seed=1))
        np.testing.assert_array_equal(res.param.lam, np.zeros(3))
        assert len(res.iterate_rewards) == 1
        assert res.steps == ()

    def test_symmetric_rewards_give_exactly_zero_update(self):
        rng = np.random.default_rng(44)
        n = 20
        m = rng.standard_normal(n)
        arrays = make_arrays(rng.integers(0, 2, n), m, rng.uniform(0.2, 0.8, n), m, m)
        # equal arms: m1 == m0, so forward/backward rewards tie exactly
        assert np.array_equal(arrays.m0, arrays.m1)
        res = optimize(arrays, RsConfig(steps=5, seed=2))
        np.testing.assert_array_equal(res.param.lam, np.zeros(n))
        for record in res.steps:
            assert record.update_norm == 0.0

    @pytest.mark.parametrize("resample", [True, False])
    @pytest.mark.parametrize("top", [4, 8])
    def test_matches_independent_reimplementation(self, resample, top):
        arrays = self._toy_arrays(n=3)
        cfg = RsConfig(alpha=0.1, nu=0.2, steps=12, directions=8,
                       top_directions=top, resample_directions=resample, seed=7)
        res = optimize(arrays, cfg)
        lam_ref, rewards_ref = reference_random_search(arrays, cfg)
        np.testing.assert_allclose(res.param.lam, lam_ref, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(res.iterate_rewards, rewards_ref,
                                   rtol=1e-12, atol=1e-12)

    def test_plain_two_point_search_when_b_equals_m(self):
        arrays = self._toy_arrays(n=3, seed=45)
        cfg = RsConfig(alpha=0.05, nu=0.1, steps=10, directions=6,
                       top_directions=6, seed=8)
        res = optimize(arrays, cfg)
        lam_ref, _ = reference_random_search(arrays, cfg)
        np.testing.assert_allclose(res.param.lam, lam_ref, rtol=1e-12, atol=1e-12)

    def test_trajectory_lengths(self):
        arrays = self._toy_arrays(n=5)
        res = optimize(arrays, RsConfig(steps=9, seed=3))
        assert len(res.steps) == 9
        assert len(res.iterate_rewards) == 10
        assert res.initial_reward == res.iterate_rewards[0]
        assert res.final_reward == res.iterate_rewards[-1]

    def test_bit_identical_given_config(self):
        arrays = self._toy_arrays(n=10, seed=46)
        cfg = RsConfig(steps=20, seed=11)
        a = optimize(arrays, cfg)
        b = optimize(arrays, cfg)
        np.testing.assert_array_equal(a.param.lam, b.param.lam)
        assert a.iterate_rewards == b.iterate_rewards

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_reward_aborts_with_step(self):
        arrays = make_arrays([1, 0], [1.0, 2.0], [0.5, 0.5],
                             [0.0, np.inf], [1.0, 1.0])
        with pytest.raises(NonFiniteReward) as err:
            optimize(arrays, RsConfig(steps=3, seed=0))
        assert err.value.step == 0

    def test_normalized_rewards_mode_runs(self):
        arrays = self._toy_arrays(n=6, seed=47)
        plain = optimize(arrays, RsConfig(steps=5, seed=4))
        scaled = optimize(arrays, RsConfig(steps=5, seed=4, normalize_rewards=True))
        assert not np.array_equal(plain.param.lam, scaled.param.lam)

    def test_raw_mode_clamps_degrees(self):
        arrays = self._toy_arrays(n=4, seed=48)
        res = optimize(arrays, RsConfig(steps=0, seed=5, param_mode="raw"))
        # raw parameter starts at 0 and is clamped to the smallest degree
        np.testing.assert_allclose(res.param.deltas, 1e-3, rtol=1e-12)
        res2 = optimize(arrays, RsConfig(steps=8, seed=5, param_mode="raw"))
        assert np.isfinite(res2.param.lam).all()

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            RsConfig(top_directions=40, directions=8)
        with pytest.raises(ValidationError):
            RsConfig(alpha=-1.0)
        with pytest.raises(ValidationError):
            RsConfig(param_mode="exp")

    def test_improves_reward_on_heterogeneous_effects(self):
        ds, gt = make_synthetic(SyntheticSpec.default(), 1000, seed=49)
        arrays = InfluenceArrays.from_oracle(ds, gt)
        res = optimize(arrays, RsConfig(steps=60, seed=6))
        assert res.final_reward >= res.initial_reward
        better = gt.mu1 > gt.mu0
        assert res.param.lam[better].mean() > res.param.lam[~better].mean()


class TestPolicyValue:
    def test_hand_example(self):
        value = policy_value([1, 0], [2.0, 4.0], [0.5, 0.5], [1, 1])
        assert value == pytest.approx(2.0, abs=1e-12)

    def test_full_match_unit_weights(self):
        rng = np.random.default_rng(50)
        t = rng.integers(0, 2, 40)
        y = rng.standard_normal(40)
        rho_one = np.where(t == 1, 1.0, 0.0)  # realized-arm probability one
        assert policy_value(t, y, rho_one, t) == pytest.approx(np.mean(y), rel=1e-12)

    def test_no_match_gives_zero(self):
        t = np.array([1, 0, 1])
        assert policy_value(t, [1.0, 2.0, 3.0], [0.5, 0.5, 0.5], 1 - t) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            policy_value([1, 0], [1.0], [0.5, 0.5], [1, 0])


class TestDeltaToPolicy:
    def test_huge_lambda_treats_everyone(self):
        p = np.array([0.05, 0.5, 0.95])
        np.testing.assert_array_equal(delta_to_policy(np.full(3, 50.0), p), [1, 1, 1])

    def test_identity_at_zero(self):
        assert delta_to_policy(np.zeros(1), np.array([0.6]))[0] == 1
        assert delta_to_policy(np.zeros(1), np.array([0.4]))[0] == 0

    def test_boundary_is_inclusive(self):
        lam = np.array([math.log(1.5)])
        p = np.array([0.4])  # q = 0.6/1.2 = 0.5 exactly
        assert delta_to_policy(lam, p, threshold=0.5)[0] == 1

    def test_accepts_delta_param(self):
        pol = delta_to_policy(DeltaParam(np.zeros(2)), np.array([0.7, 0.2]))
        np.testing.assert_array_equal(pol, [1, 0])


class TestEndToEndPolicy:
    def test_search_beats_random_policy_on_holdout(self):
        ds, gt = make_synthetic(SyntheticSpec.default(), 2000, seed=51)
        train_idx, test_idx = train_test_split(ds, 0.2, seed=51)
        ds_te, gt_te = ds.subset(test_idx), gt.subset(test_idx)
        arrays = InfluenceArrays.from_oracle(ds_te, gt_te)
        res = optimize(arrays, RsConfig(seed=51))
        pol = delta_to_policy(res.param.lam, arrays.p_hat)
        value = policy_value(ds_te.t, ds_te.y, arrays.p_hat, pol)
        value_random = policy_value(ds_te.t, ds_te.y, arrays.p_hat,
                                    random_policy(ds_te.n, 0.5, seed=51))
        assert value >= value_random
