import math

import numpy as np
import pytest

from qframekit import jones as J
from qframekit.channel import (
    ChannelState,
    DriftParams,
    StabilizerState,
    observed_stokes,
    rotation_between_stokes,
    stabilizer_update,
    step_drift,
    transmit,
)

ALWAYS_DAY = DriftParams(day_start_hour=0.0, night_start_hour=24.0)


class TestStepDrift:
    def test_zero_rate_leaves_unitary_unchanged(self):
        params = DriftParams(sigma_day=0.0, sigma_night=0.0)
        state = ChannelState()
        out = step_drift(state, 1.0, params, np.random.default_rng(0))
        np.testing.assert_array_equal(out.u, np.eye(2))
        assert out.t_now == 1.0

    def test_deterministic_given_seed(self):
        a = step_drift(ChannelState(), 0.5, ALWAYS_DAY, np.random.default_rng(99))
        b = step_drift(ChannelState(), 0.5, ALWAYS_DAY, np.random.default_rng(99))
        np.testing.assert_array_equal(a.u, b.u)

    def test_rejects_nonpositive_dt(self):
        with pytest.raises(ValueError):
            step_drift(ChannelState(), 0.0, ALWAYS_DAY, np.random.default_rng(0))

    def test_regime_schedule(self):
        params = DriftParams(sigma_day=0.04, sigma_night=0.005,
                             day_start_hour=8, night_start_hour=20)
        assert params.rate_at(12 * 3600.0) == 0.04
        assert params.rate_at(2 * 3600.0) == 0.005
        assert params.rate_at(26 * 3600.0) == 0.005   # wraps around midnight

    @staticmethod
    def _excursion_angle(u):
        # rotation angle of u relative to identity (global phase removed)
        return 2.0 * math.acos(min(1.0, abs(np.trace(u)) / 2.0))

    def test_calibration_tens_of_seconds_stability(self):
        # day-rate walk: excursion ~0.2-0.35 rad over a minute, < 0.05 rad
        # over one 2 s quantum burst
        rng = np.random.default_rng(1234)
        over_60, over_2 = [], []
        for _ in range(300):
            s = ChannelState()
            for k in range(60):
                s = step_drift(s, 1.0, ALWAYS_DAY, rng)
                if k == 1:
                    over_2.append(self._excursion_angle(s.u))
            over_60.append(self._excursion_angle(s.u))
        assert 0.2 < np.mean(over_60) < 0.35
        assert np.mean(over_2) < 0.05

    def test_unitarity_over_many_steps(self):
        # long-run numerical stability: deviation never builds past 1e-6 and
        # the state stays unitary to 1e-9 thanks to re-orthonormalization
        rng = np.random.default_rng(7)
        s = ChannelState()
        worst = 0.0
        for _ in range(1_000_000):
            s = step_drift(s, 1.0, ALWAYS_DAY, rng)
        worst = s.unitarity_deviation()
        assert worst < 1e-6
        assert worst < 1e-9  # after any corrections


class TestTransmit:
    def test_paper_loss_value(self):
        _, p = transmit(J.JonesVector(1, 0), 1.0, ChannelState(loss_db=6.5))
        assert p == pytest.approx(0.2239, abs=1e-4)

    def test_zero_loss_identity(self):
        v, p = transmit(J.JonesVector(1, 0), 0.5, ChannelState(loss_db=0.0))
        assert p == 0.5
        assert v.j1 == 1 and v.j2 == 0

    def test_ten_db_is_factor_ten(self):
        _, p = transmit(J.JonesVector(0, 1), 1.0, ChannelState(loss_db=10.0))
        assert p == pytest.approx(0.1, rel=1e-12)

    def test_orthogonal_pairs_stay_orthogonal(self):
        rng = np.random.default_rng(5)
        state = ChannelState()
        for _ in range(50):
            state = step_drift(state, 10.0, ALWAYS_DAY, rng)
            h, _ = transmit(J.JonesVector(1, 0), 1.0, state)
            v, _ = transmit(J.JonesVector(0, 1), 1.0, state)
            assert abs(J.inner_product(h, v)) < 1e-10


class TestStabilizer:
    def test_already_locked_is_left_alone(self):
        stab = StabilizerState(comp=J.rotation_about_stokes_axis((0, 0, 1), 0.7).array)
        target = J.StokesVector(1, 0, 0)
        out = stabilizer_update(stab, target, target, sigma_residual=0.0)
        np.testing.assert_array_equal(out.comp, stab.comp)
        assert out.locked

    def test_v_to_h_lock(self):
        stab = StabilizerState()
        out = stabilizer_update(stab, J.StokesVector(-1, 0, 0), J.StokesVector(1, 0, 0))
        got = J.apply(J.JonesMatrix.from_array(out.comp), J.JonesVector(0, 1))
        assert J.overlap(got, J.JonesVector(1, 0)) == pytest.approx(1.0, abs=1e-10)

    def test_exact_lock_for_random_channels(self):
        rng = np.random.default_rng(17)
        target = J.StokesVector(1, 0, 0)
        for _ in range(200):
            chan = ChannelState(u=J.random_unitary(rng).array)
            stab = StabilizerState()
            measured = observed_stokes(stab, chan, J.JonesVector(1, 0))
            stab = stabilizer_update(stab, measured, target)
            arrived = J.JonesVector.from_array(stab.comp @ chan.u @ np.array([1, 0 + 0j]))
            assert J.overlap(arrived, J.JonesVector(1, 0)) == pytest.approx(1.0, abs=1e-10)
            # locking one pole locks its antipode too
            arrived_v = J.JonesVector.from_array(stab.comp @ chan.u @ np.array([0, 1 + 0j]))
            assert J.overlap(arrived_v, J.JonesVector(0, 1)) == pytest.approx(1.0, abs=1e-10)

    def test_residual_noise_is_small_and_seeded(self):
        rng = np.random.default_rng(3)
        target = J.StokesVector(1, 0, 0)
        out = stabilizer_update(StabilizerState(), target, target,
                                sigma_residual=0.05, rng=rng)
        arrived = J.apply(J.JonesMatrix.from_array(out.comp), J.JonesVector(1, 0))
        dist = J.bloch_distance(arrived, J.JonesVector(1, 0))
        assert 0.0 < dist < 0.5
        rng2 = np.random.default_rng(3)
        out2 = stabilizer_update(StabilizerState(), target, target,
                                 sigma_residual=0.05, rng=rng2)
        np.testing.assert_array_equal(out.comp, out2.comp)

    def test_requires_rng_for_noisy_update(self):
        t = J.StokesVector(1, 0, 0)
        with pytest.raises(ValueError):
            stabilizer_update(StabilizerState(), t, t, sigma_residual=0.1)


class TestRotationBetweenStokes:
    def test_antiparallel_uses_deterministic_axis(self):
        r = rotation_between_stokes(J.StokesVector(-1, 0, 0), J.StokesVector(1, 0, 0))
        out = J.stokes_from_jones(J.apply(r, J.JonesVector(0, 1)))
        np.testing.assert_allclose(out.array, [1, 0, 0], atol=1e-10)

    def test_antiparallel_on_s1_axis_falls_back(self):
        r = rotation_between_stokes(J.StokesVector(1, 0, 0), J.StokesVector(-1, 0, 0))
        out = J.stokes_from_jones(J.apply(r, J.JonesVector(1, 0)))
        np.testing.assert_allclose(out.array, [-1, 0, 0], atol=1e-10)

    def test_random_pairs(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            a = J.stokes_from_jones(J.JonesVector.from_array(rng.normal(size=2) + 1j * rng.normal(size=2)))
            b = J.stokes_from_jones(J.JonesVector.from_array(rng.normal(size=2) + 1j * rng.normal(size=2)))
            r = rotation_between_stokes(a, b)
            moved = J.stokes_from_jones(J.apply(r, J.jones_from_stokes(a)))
            np.testing.assert_allclose(moved.array, b.array, atol=1e-9)

    def test_rejects_mixed_states(self):
        with pytest.raises(ValueError):
            rotation_between_stokes(J.StokesVector(0, 0, 0), J.StokesVector(1, 0, 0))
