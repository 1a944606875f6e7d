"""Framed-link protocol: control frames, quantum bursts, sessions, sifting.

A frame pairs a strong-pulse classical control block (sync, addressing,
protocol fields, and a fixed-polarization stabilization tail) with a burst
of faint-pulse quantum data.  The control frame's polarization re-locks one
measurement module; the following burst is evaluated against the module the
frame just locked.  A module locked with a linear-basis control frame
measures the linear qubit basis at its PBS, a circular lock measures the
circular basis, so alternating control polarizations time-share one or two
physical modules across both bases.

Wire format of the control-frame header (big-endian, 14 bytes):

    [preamble:2][version:1][sender:2][receiver:2][encoding:1]
    [protocol:1][stab_pol:1][duration_ms:2][crc:2]

The CRC is CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF) over bytes 2..11.
Header bytes modulate onto strong pulses at 2 bits per pulse over the four
polarization states (00=H 01=V 10=R 11=L, most significant bits first).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import jones
from .channel import ChannelState, DriftParams, StabilizerState, stabilizer_update, step_drift
from .jones import JonesVector, StokesVector, stokes_from_jones
from .photonics import DetectionRecord, DetectorModel, LinkParams, simulate_gate_block

SCHEMA_VERSION = 1

PREAMBLE = 0xA55A
WIRE_VERSION = 1
HEADER_BYTES = 14
MIN_DURATION_MS = 18          # polarization stabilizer response time

ENCODINGS = ("polarization", "time_bin")
PROTOCOLS = ("bb84_decoy", "bb84", "b92")
POLARIZATIONS = ("H", "V", "R", "L")
BASIS_OF = {"H": "lin", "V": "lin", "R": "circ", "L": "circ"}
BIT_OF = {"H": 0, "V": 1, "R": 0, "L": 1}
# stabilization reference on the detection-frame Poincare sphere: the lock
# maps the control polarization onto its own PBS port pole
LOCK_TARGET = {"H": (1.0, 0.0, 0.0), "V": (-1.0, 0.0, 0.0),
               "R": (1.0, 0.0, 0.0), "L": (-1.0, 0.0, 0.0)}

TWO_DETECTOR_SEQUENCE = (
    ("H", "H"), ("H", "L"), ("H", "V"), ("H", "R"),
    ("L", "H"), ("L", "L"), ("L", "V"), ("L", "R"),
    ("V", "H"), ("V", "L"), ("V", "V"), ("V", "R"),
    ("R", "H"), ("R", "L"), ("R", "V"), ("R", "R"),
)
FOUR_DETECTOR_SEQUENCE = (
    ("H", "H"), ("R", "H"), ("V", "H"), ("L", "H"),
    ("R", "H"), ("H", "H"), ("L", "H"), ("V", "H"),
    ("H", "R"), ("R", "R"), ("V", "R"), ("L", "R"),
    ("R", "R"), ("H", "R"), ("L", "R"), ("V", "R"),
    ("H", "V"), ("R", "V"), ("V", "V"), ("L", "V"),
    ("R", "V"), ("H", "V"), ("L", "V"), ("V", "V"),
    ("H", "L"), ("R", "L"), ("V", "L"), ("L", "L"),
    ("R", "L"), ("H", "L"), ("L", "L"), ("V", "L"),
)


class FramingError(ValueError):
    """Malformed control frame or misaligned streams."""


def crc16_ccitt(data: bytes, init: int = 0xFFFF) -> int:
    crc = init
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021 if crc & 0x8000 else crc << 1) & 0xFFFF
    return crc


@dataclass(frozen=True)
class CFrameHeader:
    """Classical control-frame header fields."""

    sender_addr: int
    receiver_addr: int
    encoding: str = "polarization"
    protocol: str = "bb84_decoy"
    stabilization_pol: str = "H"
    duration_ms: int = 5000
    version: int = WIRE_VERSION

    def __post_init__(self):
        for name, value, bound in (("sender_addr", self.sender_addr, 0xFFFF),
                                   ("receiver_addr", self.receiver_addr, 0xFFFF)):
            if not 0 <= value <= bound:
                raise ValueError(f"{name} out of range: {value}")
        if self.encoding not in ENCODINGS:
            raise ValueError(f"unknown encoding {self.encoding!r}")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.stabilization_pol not in POLARIZATIONS:
            raise ValueError(f"unknown stabilization polarization {self.stabilization_pol!r}")
        if not MIN_DURATION_MS <= self.duration_ms <= 0xFFFF:
            raise ValueError(
                f"duration_ms must be in [{MIN_DURATION_MS}, 65535] "
                f"(stabilizer response floor), got {self.duration_ms}")

    @property
    def duration(self) -> float:
        return self.duration_ms / 1000.0


def encode_header(h: CFrameHeader) -> bytes:
    body = bytes([h.version]) \
        + h.sender_addr.to_bytes(2, "big") \
        + h.receiver_addr.to_bytes(2, "big") \
        + bytes([ENCODINGS.index(h.encoding), PROTOCOLS.index(h.protocol),
                 POLARIZATIONS.index(h.stabilization_pol)]) \
        + h.duration_ms.to_bytes(2, "big")
    return PREAMBLE.to_bytes(2, "big") + body + crc16_ccitt(body).to_bytes(2, "big")


def parse_header(data: bytes) -> CFrameHeader:
    if len(data) != HEADER_BYTES:
        raise FramingError(f"header must be {HEADER_BYTES} bytes, got {len(data)}")
    if int.from_bytes(data[:2], "big") != PREAMBLE:
        raise FramingError("bad preamble")
    body, crc = data[2:12], int.from_bytes(data[12:], "big")
    if crc16_ccitt(body) != crc:
        raise FramingError("CRC mismatch")
    version = body[0]
    if version != WIRE_VERSION:
        raise FramingError(f"unsupported header version {version}")
    try:
        return CFrameHeader(
            sender_addr=int.from_bytes(body[1:3], "big"),
            receiver_addr=int.from_bytes(body[3:5], "big"),
            encoding=ENCODINGS[body[5]],
            protocol=PROTOCOLS[body[6]],
            stabilization_pol=POLARIZATIONS[body[7]],
            duration_ms=int.from_bytes(body[8:10], "big"),
            version=version)
    except IndexError:
        raise FramingError("enum field out of range") from None


def header_symbols(h: CFrameHeader) -> list[str]:
    """Polarization pulse sequence carrying the header (2 bits per pulse)."""
    out = []
    for byte in encode_header(h):
        for shift in (6, 4, 2, 0):
            out.append(POLARIZATIONS[(byte >> shift) & 0b11])
    return out


def symbols_to_header(symbols) -> CFrameHeader:
    if len(symbols) != 4 * HEADER_BYTES:
        raise FramingError(f"expected {4 * HEADER_BYTES} pulses, got {len(symbols)}")
    data = bytearray()
    for k in range(0, len(symbols), 4):
        byte = 0
        for s in symbols[k:k + 4]:
            byte = (byte << 2) | POLARIZATIONS.index(s)
        data.append(byte)
    return parse_header(bytes(data))


# ---------------------------------------------------------------------------
# schedule and frames
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecoySchedule:
    """Per-pulse intensity-class mixture."""

    p_signal: float = 0.875
    p_decoy: float = 0.0625
    p_vacuum: float = 0.0625

    def __post_init__(self):
        total = self.p_signal + self.p_decoy + self.p_vacuum
        if abs(total - 1.0) > 1e-9 or min(self.p_signal, self.p_decoy, self.p_vacuum) < 0:
            raise ValueError("class probabilities must be nonnegative and sum to 1")

    @property
    def probs(self) -> tuple[float, float, float]:
        return (self.p_signal, self.p_decoy, self.p_vacuum)


INTENSITY_CLASSES = ("signal", "decoy", "vacuum")


@dataclass(frozen=True)
class SessionSchedule:
    """Frame timing and measurement pattern."""

    cframe_s: float = 5.0
    qdata_s: float = 2.0
    pulse_rate: float = 50e6
    gate_rate: float = 1e6
    pattern: str = "production"            # two_detector | four_detector | production
    cframe_cycle: tuple = ("H", "V", "R")  # production stabilization cycle

    def __post_init__(self):
        if self.cframe_s < 0 or self.qdata_s <= 0:
            raise ValueError("frame durations must be positive")
        if self.pattern not in ("two_detector", "four_detector", "production"):
            raise ValueError(f"unknown pattern {self.pattern!r}")
        for p in self.cframe_cycle:
            if p not in POLARIZATIONS:
                raise ValueError(f"bad cycle polarization {p!r}")

    @property
    def frame_s(self) -> float:
        return self.cframe_s + self.qdata_s

    @property
    def duty_cycle(self) -> float:
        return self.qdata_s / self.frame_s

    @property
    def gates_per_burst(self) -> int:
        return int(round(self.qdata_s * self.gate_rate))


@dataclass(frozen=True)
class DutyCycleReport:
    current: float
    projected: float          # control frame shrunk to the stabilizer response time
    cframe_s: float
    qdata_s: float
    response_time: float


def duty_cycle_report(schedule: SessionSchedule,
                      response_time: float = 0.018) -> DutyCycleReport:
    """Fraction of wall time spent on quantum data, now and with the control
    frame shrunk to the stabilizer response time."""
    return DutyCycleReport(
        current=schedule.duty_cycle,
        projected=schedule.qdata_s / (response_time + schedule.qdata_s),
        cframe_s=schedule.cframe_s, qdata_s=schedule.qdata_s,
        response_time=response_time)


@dataclass
class QFrame:
    """One control frame plus its quantum-data pulse train.

    ``rate`` is the pulse rate the train represents; session simulation uses
    the detector gate rate (only gated pulses can be detected), while
    protocol-level objects may carry the full source rate.
    """

    header: CFrameHeader
    basis: np.ndarray            # per pulse: 0 = lin, 1 = circ
    bit: np.ndarray              # per pulse: 0/1 within the basis
    intensity_class: np.ndarray  # per pulse: index into INTENSITY_CLASSES
    qdata_duration: float
    rate: float

    def __post_init__(self):
        expect = int(round(self.qdata_duration * self.rate))
        if not (len(self.basis) == len(self.bit) == len(self.intensity_class) == expect):
            raise ValueError(
                f"qdata length {len(self.basis)} != duration*rate = {expect}")

    @property
    def polarizations(self) -> np.ndarray:
        table = np.array([["H", "V"], ["R", "L"]])
        return table[self.basis, self.bit]


def measurement_sequence(pattern: str) -> tuple[tuple[str, str], ...]:
    """Fixed (control pol, qubit pol) frame orderings of the field tests."""
    if pattern == "two_detector":
        return TWO_DETECTOR_SEQUENCE
    if pattern == "four_detector":
        return FOUR_DETECTOR_SEQUENCE
    raise ValueError(f"no fixed sequence for pattern {pattern!r}")


def make_qframe(header: CFrameHeader, schedule: SessionSchedule,
                decoys: DecoySchedule, rng: np.random.Generator,
                qubit_pol: str | None = None, rate: float | None = None) -> QFrame:
    """Generate a frame's qubit train: fixed polarization (measurement
    patterns) or uniformly random basis and bit (production)."""
    rate = schedule.gate_rate if rate is None else rate
    count = int(round(schedule.qdata_s * rate))
    cls = rng.choice(3, size=count, p=decoys.probs).astype(np.int8)
    if qubit_pol is None:
        basis = rng.integers(0, 2, size=count, dtype=np.int8)
        bit = rng.integers(0, 2, size=count, dtype=np.int8)
    else:
        basis = np.full(count, 0 if BASIS_OF[qubit_pol] == "lin" else 1, dtype=np.int8)
        bit = np.full(count, BIT_OF[qubit_pol], dtype=np.int8)
    return QFrame(header=header, basis=basis, bit=bit, intensity_class=cls,
                  qdata_duration=schedule.qdata_s, rate=rate)


# ---------------------------------------------------------------------------
# session simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StabilizerConfig:
    sigma_residual: float = 0.11
    response_time: float = 0.018
    enabled: bool = True


@dataclass
class GateLog:
    """Per-gate record of a (short) session, for sifting."""

    frame_idx: np.ndarray
    basis: np.ndarray           # Alice's basis per gate (0 lin, 1 circ)
    bit: np.ndarray             # Alice's bit per gate
    intensity_class: np.ndarray
    module_basis: np.ndarray    # evaluating module's lock basis per gate
    module_locked: np.ndarray   # evaluating module held a valid lock
    click0: np.ndarray
    click1: np.ndarray


@dataclass
class SiftedKey:
    bits: np.ndarray
    positions: np.ndarray
    intensity_class: np.ndarray

    def __len__(self):
        return len(self.bits)


@dataclass
class SessionResult:
    records: list[DetectionRecord]
    frame_log: list[dict]
    qber_timeline: np.ndarray       # rolling-window QBER per frame (nan before fill)
    stokes_locked: np.ndarray       # (frames, 3) post-lock control polarization
    stokes_monitor: np.ndarray      # (frames, 3) without compensation
    mean_qber: float
    sifted_correct: int
    sifted_wrong: int
    gates: GateLog | None = None

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.frame_log:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _module_for_frame(pattern: str, frame_idx: int, stab_pol: str) -> int:
    if pattern == "four_detector":
        return 0 if (frame_idx + 1) % 2 == 1 else 1   # 1-based odd -> module 1
    if pattern == "production":
        return 0 if BASIS_OF[stab_pol] == "lin" else 1
    return 0


def run_session(schedule: SessionSchedule, link: LinkParams, drift: DriftParams,
                stab_cfg: StabilizerConfig, duration_s: float,
                rng, decoys: DecoySchedule | None = None,
                phi_pmf: float = 0.0, qber_window_frames: int = 200,
                collect_gates: bool = False, deadtime: float = 10e-6,
                sender: int = 0xA11C, receiver: int = 0xB0B0) -> SessionResult:
    """Simulate a framed QKD session.

    Alternates control frames (drift, then a stabilizer re-lock of the
    module addressed by the frame) with quantum bursts whose gates are
    Monte-Carlo sampled photon by photon.  The link's scalar loss budget
    lives entirely in ``link.t``; ``link.a`` is the PBS extinction alone and
    residual misalignment enters through the compensated channel unitary.

    ``rng`` is either a single generator or a mapping with "channel",
    "source" and "detector" streams (fibre drift and stabilizer residuals;
    Alice's pulse train; detection sampling), so the three noise sources can
    be re-seeded independently.  Deterministic for given generator states.
    """
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    if isinstance(rng, np.random.Generator):
        rng_ch = rng_src = rng_det = rng
    else:
        rng_ch, rng_src, rng_det = rng["channel"], rng["source"], rng["detector"]
    decoys = decoys or DecoySchedule()
    n_frames = int(duration_s // schedule.frame_s)
    if n_frames < 1:
        raise ValueError("duration shorter than one frame")
    det = DetectorModel(params=link, gate_rate=schedule.gate_rate, deadtime=deadtime)
    mu_of_class = (link.mu, link.nu, 0.0)

    channel = ChannelState(u=np.eye(2, dtype=complex), loss_db=0.0, t_now=0.0)
    stabs = [StabilizerState(reference="lin", response_time=stab_cfg.response_time),
             StabilizerState(reference="circ", response_time=stab_cfg.response_time)]

    if schedule.pattern in ("two_detector", "four_detector"):
        seq = measurement_sequence(schedule.pattern)
    counts: dict[tuple, list[int]] = {}
    frame_log: list[dict] = []
    stokes_locked = np.zeros((n_frames, 3))
    stokes_monitor = np.zeros((n_frames, 3))
    qber_timeline = np.full(n_frames, np.nan)
    window: list[tuple[int, int]] = []
    total_c, total_w = 0, 0
    gate_chunks: list[tuple] = []

    header_duration = max(MIN_DURATION_MS, int(round(schedule.cframe_s * 1000))) \
        if schedule.cframe_s * 1000 <= 0xFFFF else 0xFFFF

    prepared = {p: jones.prepared_state(p, phi_pmf) for p in POLARIZATIONS}

    for f in range(n_frames):
        if schedule.pattern == "production":
            stab_pol = schedule.cframe_cycle[f % len(schedule.cframe_cycle)]
            qubit_pol = None
        else:
            stab_pol, qubit_pol = seq[f % len(seq)]
        module = _module_for_frame(schedule.pattern, f, stab_pol)

        # control frame: drift while it plays out, then re-lock
        remaining = schedule.cframe_s
        while remaining > 1e-9:
            dt = min(1.0, remaining)
            channel = step_drift(channel, dt, drift, rng_ch)
            remaining -= dt
        incoming = jones.JonesVector.from_array(channel.u @ prepared[stab_pol].array)
        stokes_monitor[f] = stokes_from_jones(incoming).array
        if stab_cfg.enabled:
            seen = stokes_from_jones(jones.JonesVector.from_array(
                stabs[module].comp @ incoming.array))
            stabs[module] = stabilizer_update(
                stabs[module], seen, StokesVector(*LOCK_TARGET[stab_pol]),
                sigma_residual=stab_cfg.sigma_residual, rng=rng_ch)
        stabs[module] = replace(stabs[module], reference=BASIS_OF[stab_pol])
        stokes_locked[f] = stokes_from_jones(jones.JonesVector.from_array(
            stabs[module].comp @ incoming.array)).array

        # quantum burst, evaluated against the module this frame just locked
        # (measurement patterns) or against the basis-matching module
        # (production); channel unitary frozen across the 2 s burst
        frame_c, frame_w, frame_clicks = 0, 0, 0
        gates = schedule.gates_per_burst
        if schedule.pattern == "production":
            pol_counts = rng_src.multinomial(gates, [0.25] * 4)
            pol_iter = list(zip(POLARIZATIONS, pol_counts))
        else:
            pol_iter = [(qubit_pol, gates)]
        for pol, n_pol in pol_iter:
            if n_pol == 0:
                continue
            eval_module = module if schedule.pattern != "production" \
                else (0 if BASIS_OF[pol] == "lin" else 1)
            stab = stabs[eval_module]
            # an unlocked module has no calibrated frame yet; its gates are
            # not key material (when the stabilizer is disabled on purpose,
            # the nominal schedule basis still attributes gates)
            sifts = (stab.locked or not stab_cfg.enabled) \
                and stab.reference == BASIS_OF[pol]
            u_eff = stab.comp @ channel.u
            out = u_eff @ prepared[pol].array
            p_h = float(abs(out[0]) ** 2 / (abs(out[0]) ** 2 + abs(out[1]) ** 2))
            correct_port = BIT_OF[pol]  # H/R exit port 0, V/L port 1
            cls_counts = rng_src.multinomial(n_pol, decoys.probs)
            for cls_idx, n_cls in enumerate(cls_counts):
                if n_cls == 0:
                    continue
                stream = simulate_gate_block(p_h, mu_of_class[cls_idx],
                                             n_cls, det, rng_det)
                det_base = 2 * eval_module
                c0, l0 = int(stream.click0.sum()), int(stream.live0.sum())
                c1, l1 = int(stream.click1.sum()), int(stream.live1.sum())
                key0 = (stab_pol, pol, INTENSITY_CLASSES[cls_idx], det_base)
                key1 = (stab_pol, pol, INTENSITY_CLASSES[cls_idx], det_base + 1)
                for key, dd, tt in ((key0, c0, l0), (key1, c1, l1)):
                    acc = counts.setdefault(key, [0, 0])
                    acc[0] += dd
                    acc[1] += tt
                frame_clicks += c0 + c1
                if sifts and cls_idx == 0:
                    n_correct = c0 if correct_port == 0 else c1
                    n_wrong = c1 if correct_port == 0 else c0
                    frame_c += n_correct
                    frame_w += n_wrong
                if collect_gates:
                    n_g = len(stream.click0)
                    gate_chunks.append((
                        np.full(n_g, f),
                        np.full(n_g, 0 if BASIS_OF[pol] == "lin" else 1, dtype=np.int8),
                        np.full(n_g, BIT_OF[pol], dtype=np.int8),
                        np.full(n_g, cls_idx, dtype=np.int8),
                        np.full(n_g, 0 if stab.reference == "lin" else 1, dtype=np.int8),
                        np.full(n_g, stab.locked or not stab_cfg.enabled, dtype=bool),
                        stream.click0.copy(), stream.click1.copy()))
        channel = replace(channel, t_now=channel.t_now + schedule.qdata_s)

        total_c += frame_c
        total_w += frame_w
        window.append((frame_c, frame_w))
        if len(window) > qber_window_frames:
            window.pop(0)
        wc = sum(w[0] for w in window)
        ww = sum(w[1] for w in window)
        if len(window) == qber_window_frames and wc + ww > 0:
            qber_timeline[f] = ww / (wc + ww)
        frame_log.append({
            "schema_version": SCHEMA_VERSION, "frame_idx": f, "type": "qframe",
            "stab_basis": stab_pol, "module": module,
            "stokes_after_lock": [round(x, 6) for x in stokes_locked[f]],
            "stokes_monitor": [round(x, 6) for x in stokes_monitor[f]],
            "clicks": frame_clicks,
            "qber_window": None if math.isnan(qber_timeline[f])
            else round(float(qber_timeline[f]), 6),
        })

    records = [DetectionRecord(pol_cframe=k[0], pol_qubit=k[1], intensity_class=k[2],
                               detector_id=k[3], detections=v[0], triggers=v[1])
               for k, v in sorted(counts.items(),
                                  key=lambda kv: (kv[0][0], kv[0][1], kv[0][2], kv[0][3]))]
    gates = None
    if gate_chunks:
        cols = [np.concatenate([ch[i] for ch in gate_chunks]) for i in range(8)]
        gates = GateLog(*cols)
    mean_qber = total_w / (total_c + total_w) if total_c + total_w else float("nan")
    return SessionResult(records=records, frame_log=frame_log,
                         qber_timeline=qber_timeline, stokes_locked=stokes_locked,
                         stokes_monitor=stokes_monitor, mean_qber=mean_qber,
                         sifted_correct=total_c, sifted_wrong=total_w, gates=gates)


def sift(gates: GateLog) -> tuple[SiftedKey, SiftedKey]:
    """Keep single-click gates measured in Alice's basis; returns the
    (Alice, Bob) key pair with positions into the gate stream."""
    arrays = (gates.frame_idx, gates.basis, gates.bit, gates.intensity_class,
              gates.module_basis, gates.module_locked, gates.click0, gates.click1)
    n = {len(a) for a in arrays}
    if len(n) != 1:
        raise FramingError("gate log streams are misaligned")
    one_click = gates.click0 ^ gates.click1
    keep = one_click & gates.module_locked & (gates.basis == gates.module_basis)
    pos = np.flatnonzero(keep)
    alice = SiftedKey(bits=gates.bit[pos].astype(np.uint8), positions=pos,
                      intensity_class=gates.intensity_class[pos])
    bob_bits = np.where(gates.click1[pos], 1, 0).astype(np.uint8)
    bob = SiftedKey(bits=bob_bits, positions=pos,
                    intensity_class=gates.intensity_class[pos])
    return alice, bob
