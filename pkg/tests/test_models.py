"""Model-layer tests: choice weights, right-hand sides, equilibrium,
histories, conservation, symmetry, and window-average quadrature."""

import math

import numpy as np
import pytest

from qdelay import (
    CONSTANT,
    MOVING_AVERAGE,
    HistoryFunction,
    ModelParams,
    Trajectory,
    analysis,
    constant_delay_history,
    constant_delay_rhs,
    equilibrium,
    ma_from_trajectory,
    ma_history,
    ma_rhs,
    mnl_weights,
    models,
    simulate,
)

RNG = np.random.default_rng(20240311)


class TestModelParams:
    def test_valid(self):
        p = ModelParams(lam=10.0, mu=1.0, delta=0.4)
        assert (p.lam, p.mu, p.delta) == (10.0, 1.0, 0.4)

    @pytest.mark.parametrize("kwargs", [
        dict(lam=0.0, mu=1.0, delta=0.1),
        dict(lam=10.0, mu=-1.0, delta=0.1),
        dict(lam=10.0, mu=1.0, delta=-0.1),
        dict(lam=math.inf, mu=1.0, delta=0.1),
        dict(lam=10.0, mu=math.nan, delta=0.1),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ModelParams(**kwargs)


class TestMnlWeights:
    def test_equal_inputs_split_evenly(self):
        for x in (-40.0, 0.0, 0.3, 5e7):
            assert mnl_weights(x, x) == (0.5, 0.5)

    def test_log3_gives_three_to_one(self):
        w1, w2 = mnl_weights(0.0, math.log(3.0))
        assert w1 == pytest.approx(0.75, abs=1e-15)
        assert w2 == pytest.approx(0.25, abs=1e-15)

    def test_extreme_separation_saturates_without_overflow(self):
        # exact limit of e^0 / (e^0 + e^-800) at double precision is 1.0
        w1, w2 = mnl_weights(0.0, 800.0)
        assert w1 == 1.0
        assert 0.0 <= w2 < 1e-300
        w1, w2 = mnl_weights(900.0, -900.0)
        assert w2 == 1.0 and w1 == 0.0

    def test_sum_to_one_and_range(self):
        values = RNG.uniform(-50.0, 50.0, size=(300, 2))
        for a, b in values:
            w1, w2 = mnl_weights(a, b)
            assert abs(w1 + w2 - 1.0) <= 1e-15
            assert 0.0 <= w1 <= 1.0 and 0.0 <= w2 <= 1.0
            if abs(a - b) < 30.0:  # beyond ~36 the smaller weight underflows 1-w
                assert 0.0 < w1 < 1.0 and 0.0 < w2 < 1.0

    def test_swap_is_exact(self):
        for a, b in RNG.uniform(-700.0, 700.0, size=(50, 2)):
            assert mnl_weights(a, b) == tuple(reversed(mnl_weights(b, a)))

    def test_nonfinite_raises(self):
        with pytest.raises(ValueError):
            mnl_weights(math.nan, 0.0)
        with pytest.raises(ValueError):
            mnl_weights(0.0, math.inf)


class TestEquilibrium:
    @pytest.mark.parametrize("lam,mu,expected", [
        (10.0, 1.0, 5.0),
        (100.0, 5.0, 10.0),
        (2.0, 1.0, 1.0),
    ])
    def test_values(self, lam, mu, expected):
        assert equilibrium(ModelParams(lam, mu, 0.1)) == expected


class TestConstantDelayRhs:
    P = ModelParams(10.0, 1.0, 0.4)

    def test_equilibrium_is_stationary(self):
        d = constant_delay_rhs(0.0, np.array([5.0, 5.0]), np.array([5.0, 5.0]), self.P)
        np.testing.assert_array_equal(d, 0.0)

    def test_closed_form_weight(self):
        # lagged gap of 1 makes w1 = 1 / (1 + e)
        d = constant_delay_rhs(0.0, np.array([5.0, 5.0]), np.array([5.5, 4.5]), self.P)
        w1 = 1.0 / (1.0 + math.e)
        np.testing.assert_allclose(d, [10.0 * w1 - 5.0, 10.0 * (1.0 - w1) - 5.0],
                                   rtol=1e-14)
        assert d[0] == pytest.approx(-2.310585786300049, abs=1e-12)

    def test_sum_identity(self):
        # weights sum to one, so d1 + d2 = lam - mu (q1 + q2) for any inputs
        for _ in range(100):
            state = RNG.uniform(-5.0, 30.0, 2)
            lagged = RNG.uniform(-5.0, 30.0, 2)
            d = constant_delay_rhs(0.0, state, lagged, self.P)
            assert d.sum() == pytest.approx(10.0 - state.sum(), rel=1e-12, abs=1e-12)


class TestMaRhs:
    P = ModelParams(10.0, 1.0, 2.0)

    def test_equilibrium_is_stationary(self):
        x = np.full(4, 5.0)
        np.testing.assert_array_equal(ma_rhs(0.0, x, x, self.P), 0.0)

    def test_example_values(self):
        state = np.array([5.0, 5.0, 5.5, 4.5])
        lagged = np.array([4.0, 6.0, 0.0, 0.0])
        d = ma_rhs(0.0, state, lagged, self.P)
        w1 = 1.0 / (1.0 + math.e)
        np.testing.assert_allclose(
            d, [10.0 * w1 - 5.0, 10.0 * (1.0 - w1) - 5.0, 0.5, -0.5], rtol=1e-14)

    def test_queue_sum_identity(self):
        for _ in range(100):
            state = RNG.uniform(-5.0, 30.0, 4)
            lagged = RNG.uniform(-5.0, 30.0, 4)
            d = ma_rhs(0.0, state, lagged, self.P)
            assert d[0] + d[1] == pytest.approx(10.0 - state[0] - state[1],
                                                rel=1e-12, abs=1e-12)

    def test_zero_delta_rejected(self):
        p = ModelParams(10.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            ma_rhs(0.0, np.full(4, 5.0), np.full(4, 5.0), p)
        with pytest.raises(ValueError):
            models.ma_system(p)
        with pytest.raises(ValueError):
            simulate(MOVING_AVERAGE, p, horizon=1.0)


class TestHistories:
    def test_default_offsets_are_ten_percent(self):
        p = ModelParams(10.0, 1.0, 0.4)
        hist = constant_delay_history(p)
        np.testing.assert_array_equal(hist(0.0), [5.5, 4.5])

    def test_ma_constant_history_replicates_phi(self):
        p = ModelParams(10.0, 1.0, 2.0)
        hist = ma_history(p, 6.0, 4.0)
        np.testing.assert_array_equal(hist(0.0), [6.0, 4.0, 6.0, 4.0])
        np.testing.assert_array_equal(hist(-2.0), [6.0, 4.0, 6.0, 4.0])

    def test_ma_sampled_history_window_average(self):
        # linear history a + b t has window average a - b delta / 2 at t = 0
        p = ModelParams(10.0, 1.0, 2.0)
        times = np.linspace(-2.0, 0.0, 21)
        phi1 = 6.0 + 0.5 * times
        hist = ma_history(p, (times, phi1), 4.0)
        x0 = hist(0.0)
        assert x0[0] == pytest.approx(6.0, abs=1e-12)
        assert x0[1] == pytest.approx(4.0, abs=1e-12)
        assert x0[2] == pytest.approx(6.0 - 0.5 * 2.0 / 2.0, abs=1e-12)
        assert x0[3] == pytest.approx(4.0, abs=1e-12)
        # sampled part still interpolates linearly
        assert hist(-1.0)[0] == pytest.approx(5.5, abs=1e-12)


class TestConservation:
    """q1 + q2 follows s' = lam - mu s exactly in both models."""

    def test_randomized_scenarios(self):
        rng = np.random.default_rng(42)
        for model, delta_range in ((CONSTANT, (0.2, 1.0)), (MOVING_AVERAGE, (0.5, 2.0))):
            for _ in range(10):
                lam = rng.uniform(2.0, 100.0)
                mu = rng.uniform(0.5, 5.0)
                delta = rng.uniform(*delta_range)
                p = ModelParams(lam, mu, delta)
                q = equilibrium(p)
                traj = simulate(model, p, horizon=50.0, phi1=1.3 * q, phi2=0.8 * q)
                assert analysis.conservation_check(traj, p) < 1e-6

    def test_fig_scenario_sum_stays_at_fixed_point(self):
        # phi sums to lam/mu, so q1 + q2 should hold exactly at 10
        p = ModelParams(10.0, 1.0, 0.4)
        traj = simulate(CONSTANT, p, horizon=100.0, phi1=5.5, phi2=4.5)
        s = traj.states.sum(axis=1)
        assert np.max(np.abs(s - 10.0)) < 1e-6


class TestSymmetry:
    def test_identical_histories_stay_on_diagonal(self):
        for model, delta in ((CONSTANT, 0.4), (MOVING_AVERAGE, 2.0)):
            p = ModelParams(10.0, 1.0, delta)
            traj = simulate(model, p, horizon=50.0, phi1=7.0, phi2=7.0)
            assert np.max(np.abs(traj.states[:, 0] - traj.states[:, 1])) < 1e-12

    def test_swapping_histories_swaps_trajectories_exactly(self):
        for model, delta in ((CONSTANT, 0.4), (MOVING_AVERAGE, 2.0)):
            p = ModelParams(10.0, 1.0, delta)
            a = simulate(model, p, horizon=50.0, phi1=5.5, phi2=4.5)
            b = simulate(model, p, horizon=50.0, phi1=4.5, phi2=5.5)
            np.testing.assert_array_equal(a.states[:, 0], b.states[:, 1])
            np.testing.assert_array_equal(a.states[:, 1], b.states[:, 0])
            if model == MOVING_AVERAGE:
                np.testing.assert_array_equal(a.states[:, 2], b.states[:, 3])

    def test_unknown_model_rejected(self):
        with pytest.raises(ValueError):
            simulate("other", ModelParams(10.0, 1.0, 0.4), horizon=1.0)


class TestMaFromTrajectory:
    def test_constant_trajectory(self):
        p = ModelParams(10.0, 1.0, 0.4)
        traj = simulate(CONSTANT, p, horizon=10.0, phi1=5.0, phi2=5.0)
        for t in (0.0, 1.0, 7.3):
            np.testing.assert_allclose(ma_from_trajectory(traj, t, 0.4), 5.0,
                                       rtol=0.0, atol=1e-13)

    def test_linear_trajectory_integrates_exactly(self):
        # q(s) = s has window average t - delta/2; trapezoid is exact on lines
        h = 0.1
        ts = np.arange(51) * h
        traj = Trajectory(step=h, states=ts[:, None], derivs=np.ones((51, 1)),
                          history=HistoryFunction.constant([0.0], 0.0))
        for t, delta in ((1.0, 0.7), (3.0, 2.0), (5.0, 1.3)):
            got = ma_from_trajectory(traj, t, delta)
            assert got[0] == pytest.approx(t - delta / 2.0, abs=1e-12)

    def test_matches_integrated_auxiliary_state(self):
        # the quadrature and the auxiliary DDE are two routes to the same average
        p = ModelParams(10.0, 1.0, 2.0)
        traj = simulate(MOVING_AVERAGE, p, horizon=40.0)
        worst = 0.0
        for k in range(0, traj.times.size, 25):
            avg = ma_from_trajectory(traj, float(traj.times[k]), 2.0)
            worst = max(worst, np.max(np.abs(avg[:2] - traj.states[k, 2:])))
        assert worst < 5e-4

    def test_out_of_coverage_raises(self):
        p = ModelParams(10.0, 1.0, 0.4)
        traj = simulate(CONSTANT, p, horizon=5.0)
        with pytest.raises(ValueError):
            ma_from_trajectory(traj, 1.0, 3.0)  # window reaches before -delta
        with pytest.raises(ValueError):
            ma_from_trajectory(traj, 6.0, 0.4)  # window reaches past the front


class TestDefaultStep:
    def test_resolves_lag_and_relaxation(self):
        assert models.default_step(ModelParams(10.0, 1.0, 0.4)) == pytest.approx(0.01)
        assert models.default_step(ModelParams(10.0, 1.0, 0.02)) == pytest.approx(0.001)
        assert models.default_step(ModelParams(10.0, 50.0, 10.0)) == pytest.approx(0.002)
        assert models.default_step(ModelParams(10.0, 1.0, 0.0)) == pytest.approx(0.01)
