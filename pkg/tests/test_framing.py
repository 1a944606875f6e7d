import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qframekit import framing as F
from qframekit.channel import DriftParams
from qframekit.config import SESSION_LINK
from qframekit.photonics import PAPER_REGIME

FAST = F.SessionSchedule(pattern="two_detector", cframe_s=1.0, qdata_s=1.0, gate_rate=2e4)
QUIET = DriftParams(sigma_day=0.0, sigma_night=0.0)


class TestHeaderCodec:
    def test_round_trip(self):
        h = F.CFrameHeader(sender_addr=0xA11C, receiver_addr=0xB0B0,
                           encoding="polarization", protocol="bb84_decoy",
                           stabilization_pol="R", duration_ms=5000)
        assert F.parse_header(F.encode_header(h)) == h

    def test_wire_length_and_preamble(self):
        blob = F.encode_header(F.CFrameHeader(1, 2))
        assert len(blob) == 14
        assert blob[:2] == b"\xa5\x5a"

    def test_crc_detects_corruption(self):
        blob = bytearray(F.encode_header(F.CFrameHeader(1, 2)))
        blob[5] ^= 0x40
        with pytest.raises(F.FramingError, match="CRC"):
            F.parse_header(bytes(blob))

    def test_bad_preamble(self):
        blob = b"\x00" * 14
        with pytest.raises(F.FramingError, match="preamble"):
            F.parse_header(blob)

    def test_wrong_length(self):
        with pytest.raises(F.FramingError, match="14 bytes"):
            F.parse_header(b"\xa5\x5a\x00")

    def test_duration_floor_enforced(self):
        with pytest.raises(ValueError, match="duration_ms"):
            F.CFrameHeader(1, 2, duration_ms=10)

    def test_symbol_modulation_round_trip(self):
        h = F.CFrameHeader(513, 77, protocol="b92", stabilization_pol="L",
                           duration_ms=60)
        symbols = F.header_symbols(h)
        assert len(symbols) == 56
        assert set(symbols) <= set("HVRL")
        assert F.symbols_to_header(symbols) == h

    @given(st.integers(0, 0xFFFF), st.integers(0, 0xFFFF),
           st.sampled_from(F.ENCODINGS), st.sampled_from(F.PROTOCOLS),
           st.sampled_from(F.POLARIZATIONS), st.integers(18, 0xFFFF))
    @settings(max_examples=300, deadline=None)
    def test_round_trip_all_field_combinations(self, snd, rcv, enc, proto, pol, ms):
        h = F.CFrameHeader(snd, rcv, enc, proto, pol, ms)
        assert F.parse_header(F.encode_header(h)) == h
        assert F.symbols_to_header(F.header_symbols(h)) == h


class TestSequences:
    def test_two_detector_prefix_and_length(self):
        seq = F.measurement_sequence("two_detector")
        assert len(seq) == 16
        assert seq[:4] == (("H", "H"), ("H", "L"), ("H", "V"), ("H", "R"))

    def test_four_detector_prefix_and_length(self):
        seq = F.measurement_sequence("four_detector")
        assert len(seq) == 32
        assert seq[:4] == (("H", "H"), ("R", "H"), ("V", "H"), ("L", "H"))

    def test_four_detector_each_combo_once_per_parity(self):
        seq = F.measurement_sequence("four_detector")
        odd = [seq[i] for i in range(0, 32, 2)]    # 1-based odd frames
        even = [seq[i] for i in range(1, 32, 2)]
        combos = {(c, q) for c in "HVRL" for q in "HVRL"}
        assert set(odd) == combos and len(set(odd)) == 16
        assert set(even) == combos and len(set(even)) == 16

    def test_no_sequence_for_production(self):
        with pytest.raises(ValueError):
            F.measurement_sequence("production")


class TestDutyCycle:
    def test_default_frame_split(self):
        rep = F.duty_cycle_report(F.SessionSchedule(cframe_s=5.0, qdata_s=2.0))
        assert rep.current == pytest.approx(2.0 / 7.0)
        assert rep.current == pytest.approx(0.2857, abs=1e-4)

    def test_projection_to_stabilizer_response_time(self):
        rep = F.duty_cycle_report(F.SessionSchedule(cframe_s=5.0, qdata_s=2.0))
        assert rep.projected == pytest.approx(2.0 / 2.018)
        assert rep.projected == pytest.approx(0.9911, abs=1e-4)

    def test_zero_cframe(self):
        rep = F.duty_cycle_report(F.SessionSchedule(cframe_s=0.0, qdata_s=2.0))
        assert rep.current == 1.0


class TestQFrame:
    def test_length_invariant(self):
        hdr = F.CFrameHeader(1, 2)
        sched = F.SessionSchedule(qdata_s=0.5, gate_rate=1000)
        q = F.make_qframe(hdr, sched, F.DecoySchedule(), np.random.default_rng(0))
        assert len(q.basis) == 500
        with pytest.raises(ValueError, match="duration\\*rate"):
            F.QFrame(header=hdr, basis=q.basis[:-1], bit=q.bit[:-1],
                     intensity_class=q.intensity_class[:-1],
                     qdata_duration=0.5, rate=1000)

    def test_fixed_polarization_frames(self):
        hdr = F.CFrameHeader(1, 2)
        sched = F.SessionSchedule(qdata_s=0.1, gate_rate=1000)
        q = F.make_qframe(hdr, sched, F.DecoySchedule(), np.random.default_rng(0),
                          qubit_pol="L")
        assert np.all(q.polarizations == "L")

    def test_decoy_mixture(self):
        hdr = F.CFrameHeader(1, 2)
        sched = F.SessionSchedule(qdata_s=20.0, gate_rate=1000)
        q = F.make_qframe(hdr, sched, F.DecoySchedule(), np.random.default_rng(1))
        fractions = np.bincount(q.intensity_class, minlength=3) / len(q.basis)
        assert fractions[0] == pytest.approx(0.875, abs=0.01)
        assert fractions[1] == pytest.approx(0.0625, abs=0.008)


class TestRunSession:
    def test_ideal_link_zero_qber(self):
        link = replace(PAPER_REGIME, a=1.0, y0_half=0.0)
        res = F.run_session(FAST, link, QUIET, F.StabilizerConfig(sigma_residual=0.0),
                            120.0, np.random.default_rng(0))
        assert res.mean_qber == 0.0
        assert res.sifted_correct > 0

    def test_deterministic(self):
        res1 = F.run_session(FAST, SESSION_LINK, DriftParams(),
                             F.StabilizerConfig(sigma_residual=0.11), 60.0,
                             np.random.default_rng(5))
        res2 = F.run_session(FAST, SESSION_LINK, DriftParams(),
                             F.StabilizerConfig(sigma_residual=0.11), 60.0,
                             np.random.default_rng(5))
        assert res1.records == res2.records
        np.testing.assert_array_equal(res1.stokes_locked, res2.stokes_locked)

    def test_frame_alternation_invariant(self):
        # every burst is preceded by a completed control frame whose basis
        # matches the module that evaluates it
        res = F.run_session(FAST, SESSION_LINK, DriftParams(),
                            F.StabilizerConfig(sigma_residual=0.11), 120.0,
                            np.random.default_rng(6))
        seq = F.measurement_sequence("two_detector")
        for rec in res.frame_log:
            assert rec["type"] == "qframe"
            assert rec["stab_basis"] == seq[rec["frame_idx"] % 16][0]

    def test_detection_records_well_formed(self):
        res = F.run_session(FAST, SESSION_LINK, DriftParams(),
                            F.StabilizerConfig(sigma_residual=0.11), 240.0,
                            np.random.default_rng(7))
        assert all(r.detections <= r.triggers for r in res.records)
        classes = {r.intensity_class for r in res.records}
        assert classes == {"signal", "decoy", "vacuum"}

    def test_stokes_contrast_stabilizer_on_off(self):
        drift = DriftParams(sigma_day=0.038, sigma_night=0.038,
                            day_start_hour=0, night_start_hour=24)
        on = F.run_session(FAST, SESSION_LINK, drift,
                           F.StabilizerConfig(sigma_residual=0.11), 1800.0,
                           np.random.default_rng(8))
        # locked control polarization hugs its own PBS pole
        dev = np.arccos(np.clip(np.abs(on.stokes_locked[:, 0]), 0, 1))
        assert dev.max() < 5 * 0.11
        # without stabilization the received polarization wanders the sphere
        mon = on.stokes_monitor[::7]
        dots = mon @ mon.T
        angles = np.arccos(np.clip(dots[np.triu_indices_from(dots, k=1)], -1, 1))
        assert angles.mean() > 1.0

    def test_four_detector_partition(self):
        res = F.run_session(
            F.SessionSchedule(pattern="four_detector", cframe_s=1.0, qdata_s=1.0,
                              gate_rate=2e4),
            SESSION_LINK, DriftParams(), F.StabilizerConfig(sigma_residual=0.11),
            128.0, np.random.default_rng(9))
        seq = F.measurement_sequence("four_detector")
        for rec in res.frame_log:
            expected_module = 0 if (rec["frame_idx"] % 2) == 0 else 1
            assert rec["module"] == expected_module
        # detector ids 0/1 belong to module one (odd frames), 2/3 to module two
        for r in res.records:
            assert r.detector_id in (0, 1, 2, 3)

    def test_named_streams_equivalent_paths(self):
        from qframekit.config import rng_streams
        res = F.run_session(FAST, SESSION_LINK, DriftParams(),
                            F.StabilizerConfig(sigma_residual=0.11), 60.0,
                            rng_streams(3))
        assert res.sifted_correct + res.sifted_wrong > 0

    def test_rejects_bad_duration(self):
        with pytest.raises(ValueError):
            F.run_session(FAST, SESSION_LINK, DriftParams(),
                          F.StabilizerConfig(), 0.0, np.random.default_rng(0))

    def test_jsonl_log(self, tmp_path):
        res = F.run_session(FAST, SESSION_LINK, DriftParams(),
                            F.StabilizerConfig(sigma_residual=0.11), 30.0,
                            np.random.default_rng(10))
        path = tmp_path / "session.jsonl"
        res.write_jsonl(path)
        import json
        lines = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(lines) == len(res.frame_log)
        assert lines[0]["schema_version"] == 1
        assert {"frame_idx", "type", "stab_basis", "stokes_after_lock",
                "clicks", "qber_window"} <= set(lines[0])


class TestSift:
    @staticmethod
    def _session(duration=420.0, seed=11, link=None, sigma_residual=0.11):
        return F.run_session(
            F.SessionSchedule(pattern="production", cframe_s=1.0, qdata_s=1.0,
                              gate_rate=2e4),
            link or SESSION_LINK, DriftParams(),
            F.StabilizerConfig(sigma_residual=sigma_residual), duration,
            np.random.default_rng(seed), collect_gates=True)

    def test_keys_equal_length_and_positions(self):
        alice, bob = F.sift(self._session().gates)
        assert len(alice) == len(bob)
        assert np.all(np.diff(alice.positions) > 0)

    def test_identical_keys_on_ideal_link(self):
        link = replace(PAPER_REGIME, a=1.0, y0_half=0.0)
        gates = self._session(link=link, sigma_residual=0.0).gates
        alice, bob = F.sift(gates)
        assert len(alice) > 0
        np.testing.assert_array_equal(alice.bits, bob.bits)

    def test_only_matching_basis_retained(self):
        gates = self._session().gates
        alice, _ = F.sift(gates)
        assert np.all(gates.basis[alice.positions] == gates.module_basis[alice.positions])

    def test_mismatch_rate_tracks_session_qber(self):
        sess = self._session(duration=900.0)
        alice, bob = F.sift(sess.gates)
        signal = alice.intensity_class == 0
        mismatch = np.mean(alice.bits[signal] != bob.bits[signal])
        n = int(signal.sum())
        sigma = math.sqrt(sess.mean_qber * (1 - sess.mean_qber) / n)
        assert abs(mismatch - sess.mean_qber) < 4 * sigma

    def test_misaligned_streams_rejected(self):
        gates = self._session(duration=60.0).gates
        gates.bit = gates.bit[:-1]
        with pytest.raises(F.FramingError):
            F.sift(gates)


class TestStabilizerOffQber:
    def test_long_run_approaches_half(self):
        drift = DriftParams(sigma_day=0.038, sigma_night=0.038,
                            day_start_hour=0, night_start_hour=24)
        res = F.run_session(F.SessionSchedule(pattern="two_detector", gate_rate=1e4),
                            SESSION_LINK, drift, F.StabilizerConfig(enabled=False),
                            6 * 3600.0, np.random.default_rng(12))
        assert 0.35 < res.mean_qber < 0.65
