import math

import numpy as np
import pytest

from qframekit import photonics as P
from qframekit.jones import JonesMatrix, JonesVector


class TestClosedForms:
    def test_vacuum_gives_dark_counts_only(self):
        lp = P.LinkParams(y0_half=1e-4)
        assert P.p_correct(lp, mu=0.0) == pytest.approx(1e-4, rel=1e-9)
        assert P.p_wrong(lp, mu=0.0) == pytest.approx(1e-4, rel=1e-9)

    def test_perfect_pbs_no_dark_never_wrong(self):
        lp = P.LinkParams(a=1.0, y0_half=0.0)
        assert P.p_wrong(lp) == 0.0

    def test_fit_reproduces_table_cells(self):
        lp = P.PAPER_REGIME
        assert 10 * math.log10(P.p_correct(lp)) == pytest.approx(-25.21, abs=1e-9)
        assert 10 * math.log10(P.p_wrong(lp)) == pytest.approx(-40.25, abs=1e-9)
        assert P.p_correct(lp) == pytest.approx(3.013e-3, rel=1e-3)

    def test_fit_rejects_inconsistent_probs(self):
        with pytest.raises(ValueError):
            P.fit_link_params(-25.0, -40.0, mu=0.5, y0_half=2e-4)  # floor above pw

    def test_paper_regime_qber_near_three_percent(self):
        lp = P.PAPER_REGIME
        q, _ = P.qber_kgp(P.p_correct(lp), P.p_wrong(lp))
        assert 0.028 < q < 0.032


class TestQberKgp:
    def test_symmetric_clicks_give_half(self):
        q, k = P.qber_kgp(0.01, 0.01)
        assert q == 0.5 and k == pytest.approx(0.02)

    def test_no_wrong_clicks_gives_zero(self):
        q, _ = P.qber_kgp(0.01, 0.0)
        assert q == 0.0

    def test_undefined_when_both_zero(self):
        with pytest.raises(ValueError):
            P.qber_kgp(0.0, 0.0)


class TestPhotonNumber:
    def test_zero_intensity_never_emits(self):
        rng = np.random.default_rng(0)
        assert np.all(P.sample_photon_number(0.0, rng, size=1000) == 0)

    def test_sample_mean(self):
        rng = np.random.default_rng(1)
        n = P.sample_photon_number(0.5, rng, size=1_000_000)
        assert np.mean(n) == pytest.approx(0.5, abs=0.002)

    def test_tail_ratio(self):
        # analytic Poisson tail ratio P(n>=2)/P(n>=1) at mu = 0.5:
        # (1 - e^-mu - mu e^-mu) / (1 - e^-mu) = 0.229253
        rng = np.random.default_rng(2)
        n = P.sample_photon_number(0.5, rng, size=1_000_000)
        ratio = np.sum(n >= 2) / np.sum(n >= 1)
        expect = 0.2292529587
        sigma = 3 * math.sqrt(expect * (1 - expect) / np.sum(n >= 1))
        assert abs(ratio - expect) < sigma


class TestMonteCarlo:
    def test_no_light_no_dark_never_clicks(self):
        det = P.DetectorModel(params=P.LinkParams(y0_half=0.0))
        s = P.simulate_gate_block(1.0, 0.0, 10_000, det, np.random.default_rng(3))
        assert not s.click0.any() and not s.click1.any()

    def test_matches_closed_form(self):
        rng = np.random.default_rng(4)
        for _ in range(3):
            lp = P.LinkParams(mu=rng.uniform(0.2, 1.0), t=rng.uniform(0.02, 0.3),
                              eta=0.1, a=rng.uniform(0.9, 1.0),
                              y0_half=rng.uniform(1e-5, 2e-4))
            det = P.DetectorModel(params=lp)
            s = P.simulate_gate_block(1.0, lp.mu, 400_000, det, rng)
            counts = P.count_stream(s)
            for det_id, expected in ((0, P.p_correct(lp)), (1, P.p_wrong(lp))):
                d, t = counts[det_id]
                sigma = math.sqrt(expected * (1 - expected) / t)
                assert abs(d / t - expected) < 3 * sigma

    def test_deadtime_reduces_triggers(self):
        lp = P.LinkParams(mu=2.0, t=0.5, eta=0.5, a=1.0, y0_half=0.0)
        det = P.DetectorModel(params=lp, deadtime=10e-6, gate_rate=1e6)
        s = P.simulate_gate_block(1.0, lp.mu, 50_000, det, np.random.default_rng(5))
        assert s.live0.sum() < s.n_gates
        assert s.click0.sum() <= s.live0.sum()

    def test_deterministic_given_seed(self):
        det = P.DetectorModel(params=P.PAPER_REGIME)
        a = P.simulate_gate_block(1.0, 0.5, 10_000, det, np.random.default_rng(6))
        b = P.simulate_gate_block(1.0, 0.5, 10_000, det, np.random.default_rng(6))
        np.testing.assert_array_equal(a.click0, b.click0)
        np.testing.assert_array_equal(a.click1, b.click1)

    def test_double_clicks_resolve_to_single_event(self):
        # force frequent double clicks and check no gate reports two detections
        lp = P.LinkParams(mu=20.0, t=1.0, eta=1.0, a=0.5, y0_half=0.0)
        det = P.DetectorModel(params=lp, deadtime=0.0)
        s = P.simulate_gate_block(0.5, lp.mu, 5_000, det, np.random.default_rng(7))
        assert not np.any(s.click0 & s.click1)
        assert s.click0.sum() > 0 and s.click1.sum() > 0

    def test_double_click_rate_far_below_singles(self):
        lp = P.PAPER_REGIME
        pc, pw = P.p_correct(lp), P.p_wrong(lp)
        p_double = pc * pw
        p_single = pc * (1 - pw) + pw * (1 - pc)
        assert p_double / p_single < 1e-4  # at least four orders of magnitude

    def test_single_gate_api(self):
        det = P.DetectorModel(params=P.LinkParams(mu=5.0, t=1.0, eta=1.0, a=1.0, y0_half=0.0))
        c0, c1 = P.simulate_detection(JonesVector(1, 0), 5.0, det,
                                      JonesMatrix.identity(), np.random.default_rng(8))
        assert c0 is True and c1 is False


class TestMonotonicity:
    def test_p_correct_increasing_in_each_parameter(self):
        base = dict(mu=0.5, t=0.05, eta=0.1, a=0.95, y0_half=1e-5)
        for name in ("mu", "t", "eta", "a"):
            lo = P.LinkParams(**base)
            hi_args = dict(base)
            hi_args[name] = base[name] * 1.05
            hi = P.LinkParams(**hi_args)
            assert P.p_correct(hi) > P.p_correct(lo)

    def test_qber_decreasing_in_extinction(self):
        for a0, a1 in [(0.9, 0.95), (0.95, 0.99)]:
            q0, _ = P.qber_kgp(P.p_correct(P.LinkParams(a=a0)), P.p_wrong(P.LinkParams(a=a0)))
            q1, _ = P.qber_kgp(P.p_correct(P.LinkParams(a=a1)), P.p_wrong(P.LinkParams(a=a1)))
            assert q1 < q0


class TestSplitterPenalty:
    def test_four_detector_kgp_three_db_above_two_detector(self):
        lp = P.PAPER_REGIME
        kgp4 = P.p_correct(lp) + P.p_wrong(lp)
        lp2 = P.with_transmission_factor(lp, 0.5)
        kgp2 = P.p_correct(lp2) + P.p_wrong(lp2)
        gain_db = 10 * math.log10(kgp4 / kgp2)
        assert gain_db == pytest.approx(3.0, abs=0.5)


class TestDetectionRecords:
    def test_invariant(self):
        with pytest.raises(ValueError):
            P.DetectionRecord("H", "H", "signal", 0, detections=5, triggers=4)

    def test_csv_round_trip(self, tmp_path):
        records = [
            P.DetectionRecord("H", "H", "signal", 0, 37639, 12504218),
            P.DetectionRecord("H", "H", "signal", 1, 1569, 13254716),
            P.DetectionRecord("R", "L", "decoy", 0, 12, 100000),
        ]
        path = tmp_path / "counts.csv"
        P.write_detection_csv(records, path)
        back = P.read_detection_csv(path)
        assert back == records

    def test_csv_schema_enforced(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("pol_cframe,detections\nH,1\n")
        with pytest.raises(ValueError, match="missing columns"):
            P.read_detection_csv(path)

    def test_probability_db(self):
        r = P.DetectionRecord("H", "H", "signal", 0, 37639, 12504218)
        assert r.probability_db == pytest.approx(-25.21, abs=0.005)


class TestLinkParamsValidation:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            P.LinkParams(t=1.5)
        with pytest.raises(ValueError):
            P.LinkParams(f_ec=0.9)
        with pytest.raises(ValueError):
            P.LinkParams(mu=-0.1)
