"""Decoy-state security analytics: gains, single-photon bounds, key rates.

Implements the standard vacuum+weak-decoy lower/upper bounds on the
single-photon gain, yield and error rate, and the GLLP secret-key rate

    S = 1/2 [ Q1 (1 - H2(e1)) - Q_mu f H2(E_mu) ]

evaluated three ways: from the fair-loss single-photon forward model
("fair_loss_single_photon"), from decoy bounds fed by the forward model
("fair_loss_decoy"), and from decoy bounds fed by measured or simulated
counts ("measured_decoy").  The vacuum error rate e0 is 1/2 (dark counts
carry no bit information).  All rates are per emitted gated signal pulse and
assume an infinite sifted key.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .photonics import DetectionRecord, LinkParams, p_correct, p_wrong

E0_VACUUM = 0.5

BASIS_OF = {"H": "lin", "V": "lin", "R": "circ", "L": "circ"}
# port parity of the detector a correctly received qubit lands in
CORRECT_PORT_PARITY = {"H": 0, "R": 0, "V": 1, "L": 1}


class MissingDataError(ValueError):
    """Measured counts required but not supplied."""


class NoPositiveRateError(ValueError):
    """The whole key-rate curve is non-positive."""


def shannon_entropy(x: float) -> float:
    """Binary Shannon entropy H2(x) in bits; H2(0) = H2(1) = 0 by continuity."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"entropy argument must be in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def gain_error_signal(lp: LinkParams, mu: float | None = None) -> tuple[float, float]:
    """Gain and error rate of pulses with mean photon number mu (forward model)."""
    pc = p_correct(lp, mu)
    pw = p_wrong(lp, mu)
    return pc + pw, pw / (pc + pw)


def gain_error_single_fair(lp: LinkParams, mu: float | None = None) -> tuple[float, float]:
    """Single-photon gain and error rate under the fair-loss assumption."""
    m = lp.mu if mu is None else mu
    te = lp.t * lp.eta
    base = 1.0 - lp.y0_half
    y1 = 2.0 - base * (2.0 - te)
    q1 = m * math.exp(-m) * y1
    e1 = (1.0 - base * (1.0 - (1.0 - lp.a) * te)) / y1
    return q1, e1


@dataclass(frozen=True)
class DecoyBounds:
    """Vacuum+weak-decoy bounds; negative intermediates are clamped to zero
    (raw values retained) and the error bound is capped at 1/2."""

    q1_lower: float
    e1_upper: float
    y1_lower: float
    q1_raw: float
    y1_raw: float
    e1_raw: float
    clamped: bool


def decoy_bounds(q_mu: float, e_mu: float, q_nu: float, e_nu: float, y0: float,
                 mu: float, nu: float, e0: float = E0_VACUUM) -> DecoyBounds:
    """Single-photon bounds from signal, weak-decoy and vacuum statistics.

    Requires 0 < nu < mu; at nu = 0 or nu = mu the estimator denominators
    degenerate.
    """
    if not 0.0 < nu < mu:
        raise ValueError(f"decoy bounds need 0 < nu < mu, got nu={nu}, mu={mu}")
    denom = mu * nu - nu ** 2
    core = (q_nu * math.exp(nu) - q_mu * math.exp(mu) * nu ** 2 / mu ** 2
            - (mu ** 2 - nu ** 2) / mu ** 2 * y0)
    y1_raw = mu / denom * core
    q1_raw = mu ** 2 * math.exp(-mu) / denom * core
    clamped = False
    y1 = y1_raw
    q1 = q1_raw
    if y1_raw <= 0.0:
        clamped = True
        warnings.warn("decoy yield bound non-positive; clamped to 0", stacklevel=2)
        y1 = 0.0
        q1 = 0.0
        e1_raw = e0
        e1 = e0
    else:
        e1_raw = (e_nu * q_nu * math.exp(nu) - e0 * y0) / (y1_raw * nu)
        e1 = e1_raw
        if e1_raw < 0.0:
            clamped = True
            warnings.warn("decoy error bound negative; clamped to 0", stacklevel=2)
            e1 = 0.0
        elif e1_raw > E0_VACUUM:
            clamped = True
            e1 = E0_VACUUM
    if q1_raw < 0.0:
        q1 = 0.0
    return DecoyBounds(q1_lower=q1, e1_upper=e1, y1_lower=y1,
                       q1_raw=q1_raw, y1_raw=y1_raw, e1_raw=e1_raw, clamped=clamped)


def gllp_rate(q1: float, e1: float, q_mu: float, e_mu: float,
              f_ec: float = 1.22) -> tuple[float, float]:
    """Secret bits per emitted signal pulse; returns (clamped, raw)."""
    raw = 0.5 * (q1 * (1.0 - shannon_entropy(min(e1, 0.5)))
                 - q_mu * f_ec * shannon_entropy(e_mu))
    return max(0.0, raw), raw


@dataclass(frozen=True)
class MeasuredRates:
    """Gains and error rates extracted from a detection-record set."""

    q_mu: float
    e_mu: float
    q_nu: float
    e_nu: float
    y0: float
    # per-class (detections_correct, detections_wrong, triggers_correct,
    # triggers_wrong) for uncertainty propagation
    counts: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RateInputs:
    """Everything the key-rate evaluation needs."""

    lp: LinkParams
    measured: MeasuredRates | None = None

    def __post_init__(self):
        m = self.measured
        if m is None:
            return
        for name in ("q_mu", "e_mu", "q_nu", "e_nu", "y0"):
            v = getattr(m, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"measured {name} must be in [0, 1], got {v}")
        for name in ("e_mu", "e_nu"):
            if getattr(m, name) > 0.5:
                warnings.warn(f"measured {name} above 1/2; inputs look inconsistent",
                              stacklevel=2)


@dataclass(frozen=True)
class KeyRateReport:
    """One evaluated point of a key-rate curve."""

    s: float
    s_raw: float
    q1: float
    e1: float
    y1: float
    mu_used: float
    method: str


def aggregate_measured(records: list[DetectionRecord]) -> MeasuredRates:
    """Reduce detection records to the per-class gains and error rates.

    Only same-basis rows (frame polarization basis equal to qubit
    polarization basis) enter; the correct port for a qubit is detector id 0
    (mod 2) for H/R and 1 (mod 2) for V/L.
    """
    per_class = {}
    for r in records:
        if BASIS_OF.get(r.pol_cframe) != BASIS_OF.get(r.pol_qubit):
            continue
        dc, dw, tc, tw = per_class.get(r.intensity_class, (0, 0, 0, 0))
        if r.detector_id % 2 == CORRECT_PORT_PARITY[r.pol_qubit]:
            dc += r.detections
            tc += r.triggers
        else:
            dw += r.detections
            tw += r.triggers
        per_class[r.intensity_class] = (dc, dw, tc, tw)

    def rates(cls: str) -> tuple[float, float]:
        if cls not in per_class:
            raise MissingDataError(f"no same-basis records for intensity class {cls!r}")
        dc, dw, tc, tw = per_class[cls]
        if tc == 0 or tw == 0:
            raise MissingDataError(f"no triggers recorded for intensity class {cls!r}")
        pc_, pw_ = dc / tc, dw / tw
        q = pc_ + pw_
        return q, (pw_ / q if q > 0 else 0.0)

    q_mu, e_mu = rates("signal")
    q_nu, e_nu = rates("decoy")
    y0, _ = rates("vacuum")
    return MeasuredRates(q_mu=q_mu, e_mu=e_mu, q_nu=q_nu, e_nu=e_nu, y0=y0,
                         counts=dict(per_class))


def rate_fair_single(lp: LinkParams, mu: float) -> KeyRateReport:
    q_mu, e_mu = gain_error_signal(lp, mu)
    q1, e1 = gain_error_single_fair(lp, mu)
    s, raw = gllp_rate(q1, e1, q_mu, e_mu, lp.f_ec)
    y1 = q1 / (mu * math.exp(-mu)) if mu > 0 else 0.0
    return KeyRateReport(s=s, s_raw=raw, q1=q1, e1=e1, y1=y1, mu_used=mu,
                         method="fair_loss_single_photon")


def rate_fair_decoy(lp: LinkParams, mu: float, nu: float) -> KeyRateReport:
    q_mu, e_mu = gain_error_signal(lp, mu)
    q_nu, e_nu = gain_error_signal(lp, nu)
    b = decoy_bounds(q_mu, e_mu, q_nu, e_nu, lp.y0, mu, nu)
    s, raw = gllp_rate(b.q1_lower, b.e1_upper, q_mu, e_mu, lp.f_ec)
    return KeyRateReport(s=s, s_raw=raw, q1=b.q1_lower, e1=b.e1_upper,
                         y1=b.y1_lower, mu_used=mu, method="fair_loss_decoy")


def rate_measured_decoy(measured: MeasuredRates, mu: float, nu: float,
                        f_ec: float = 1.22) -> KeyRateReport:
    b = decoy_bounds(measured.q_mu, measured.e_mu, measured.q_nu,
                     measured.e_nu, measured.y0, mu, nu)
    s, raw = gllp_rate(b.q1_lower, b.e1_upper, measured.q_mu, measured.e_mu, f_ec)
    return KeyRateReport(s=s, s_raw=raw, q1=b.q1_lower, e1=b.e1_upper,
                         y1=b.y1_lower, mu_used=mu, method="measured_decoy")


def rate_measured_sigma(measured: MeasuredRates, mu: float, nu: float,
                        f_ec: float = 1.22, n_boot: int = 500,
                        seed: int = 20) -> float:
    """1-sigma statistical uncertainty of the measured-decoy rate.

    Parametric bootstrap: the per-port detection probabilities are resampled
    with their binomial standard errors and the rate recomputed.
    """
    if not measured.counts:
        raise MissingDataError("per-class counts required for uncertainty")
    rng = np.random.default_rng(seed)
    rates = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(n_boot):
            cls_rates = {}
            for cls, (dc, dw, tc, tw) in measured.counts.items():
                pc_ = rng.normal(dc / tc, math.sqrt(max(dc, 1)) / tc)
                pw_ = rng.normal(dw / tw, math.sqrt(max(dw, 1)) / tw)
                pc_, pw_ = max(pc_, 0.0), max(pw_, 0.0)
                q = pc_ + pw_
                cls_rates[cls] = (q, pw_ / q if q > 0 else 0.0)
            try:
                b = decoy_bounds(cls_rates["signal"][0], cls_rates["signal"][1],
                                 cls_rates["decoy"][0], cls_rates["decoy"][1],
                                 cls_rates["vacuum"][0], mu, nu)
                s, _ = gllp_rate(b.q1_lower, b.e1_upper,
                                 cls_rates["signal"][0], cls_rates["signal"][1], f_ec)
            except ValueError:
                continue
            rates.append(s)
    return float(np.std(rates))


def curves(lp: LinkParams, mu_grid, nu: float,
           measured: dict[float, MeasuredRates] | None = None
           ) -> dict[str, list[KeyRateReport]]:
    """Evaluate the three key-rate curves over a grid of signal intensities.

    Curve C is only evaluated at grid points for which measured rates exist;
    asking for C without any measured data raises MissingDataError.
    """
    mu_grid = list(mu_grid)
    if not mu_grid:
        raise ValueError("mu grid must be nonempty")
    out = {"A": [], "B": [], "C": []}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for mu in mu_grid:
            out["A"].append(rate_fair_single(lp, mu))
            out["B"].append(rate_fair_decoy(lp, mu, nu))
            if measured and mu in measured:
                out["C"].append(rate_measured_decoy(measured[mu], mu, nu, lp.f_ec))
    if measured is not None and not out["C"]:
        raise MissingDataError("measured data supplied but matches no grid point")
    return out


def optimal_mu(lp: LinkParams, nu: float, lo: float = 0.01, hi: float = 1.5,
               tol: float = 1e-3) -> float:
    """Signal intensity maximizing the decoy-bounded (curve B) key rate.

    Golden-section search on (lo, hi]; the floor is clamped above nu, where
    the decoy estimator is defined.  Raises NoPositiveRateError when the
    curve has no positive point.
    """
    lo = max(lo, 1.05 * nu)
    if hi <= lo:
        raise ValueError("search interval empty after clamping above nu")

    def f(mu):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return rate_fair_decoy(lp, mu, nu).s

    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    best = 0.5 * (a + b)
    if f(best) <= 0.0:
        raise NoPositiveRateError("key rate is non-positive over the whole range")
    return best


RATE_CSV_FIELDS = ["mu", "rate_A", "rate_B", "rate_C", "q1_B", "e1_B"]


def write_rate_csv(path, curve_set: dict[str, list[KeyRateReport]]) -> None:
    c_by_mu = {r.mu_used: r for r in curve_set.get("C", [])}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RATE_CSV_FIELDS)
        for ra, rb in zip(curve_set["A"], curve_set["B"]):
            rc = c_by_mu.get(ra.mu_used)
            w.writerow([f"{ra.mu_used:.6g}", f"{ra.s:.10g}", f"{rb.s:.10g}",
                        f"{rc.s:.10g}" if rc else "",
                        f"{rb.q1:.10g}", f"{rb.e1:.10g}"])
