"""Time-varying fibre channel and the feedback polarization stabilizer.

The channel is a drifting SU(2) birefringence plus scalar insertion loss.
Drift is modeled as an isotropic random walk: each step composes a small
rotation about a uniformly random Poincare-sphere axis, with the step angle
drawn as |N(0, sigma*sqrt(dt))| and a regime-dependent rate (fast during the
day, quiet at night).

The stabilizer is a closed-loop device: it observes the polarization of the
control frame at its own output and composes the minimal corrective rotation
on top of its current compensation, optionally followed by a small random
residual rotation modeling an imperfect lock.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .jones import (
    JonesMatrix,
    JonesVector,
    StokesVector,
    rotation_about_stokes_axis,
    stokes_from_jones,
)

UNITARY_DEVIATION_LIMIT = 1e-9


@dataclass
class ChannelState:
    """Current unitary transformation, loss and clock of one fibre link."""

    u: np.ndarray = field(default_factory=lambda: np.eye(2, dtype=complex))
    loss_db: float = 6.5
    t_now: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=complex)
        if self.loss_db < 0:
            raise ValueError("loss_db must be >= 0")

    def unitarity_deviation(self) -> float:
        return float(np.max(np.abs(self.u.conj().T @ self.u - np.eye(2))))

    @property
    def transmission(self) -> float:
        return 10.0 ** (-self.loss_db / 10.0)


@dataclass(frozen=True)
class DriftParams:
    """Drift rates (rad/sqrt(s)) and the day/night regime schedule.

    Defaults are calibrated so that the free-running polarization excursion
    is a few hundredths of a radian over a 2 s quantum burst and ~0.2-0.3 rad
    over a minute in the fast regime, i.e. stable on a time scale of tens of
    seconds.
    """

    sigma_day: float = 0.038
    sigma_night: float = 0.006
    day_start_hour: float = 8.0
    night_start_hour: float = 20.0

    def __post_init__(self):
        if self.sigma_day < 0 or self.sigma_night < 0:
            raise ValueError("drift rates must be >= 0")

    def rate_at(self, t_seconds: float) -> float:
        hour = (t_seconds / 3600.0) % 24.0
        if self.day_start_hour <= hour < self.night_start_hour:
            return self.sigma_day
        return self.sigma_night


@dataclass
class StabilizerState:
    """Compensation unitary of one measurement module's stabilizer."""

    comp: np.ndarray = field(default_factory=lambda: np.eye(2, dtype=complex))
    reference: str = "linear"  # which qubit basis this module's lock serves
    response_time: float = 0.018
    locked: bool = False

    def __post_init__(self):
        self.comp = np.asarray(self.comp, dtype=complex)


def _random_axis(rng: np.random.Generator) -> np.ndarray:
    while True:
        v = rng.normal(size=3)
        n = np.linalg.norm(v)
        if n > 1e-12:
            return v / n


def step_drift(state: ChannelState, dt: float, params: DriftParams,
               rng: np.random.Generator) -> ChannelState:
    """Advance the channel unitary by one random-walk step of duration dt.

    Implemented with scalar complex arithmetic: the walk is composed of
    millions of 2x2 products over a long run, and array dispatch would
    dominate the cost.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    sigma = params.rate_at(state.t_now)
    if sigma == 0.0:
        return replace(state, t_now=state.t_now + dt)
    angle = abs(rng.normal(0.0, sigma * math.sqrt(dt)))
    n1, n2, n3 = _random_axis(rng)
    c = math.cos(angle / 2.0)
    s = math.sin(angle / 2.0)
    # cos(a/2) I - i sin(a/2) (n1 sz + n2 sx + n3 sy)
    r00 = complex(c, -s * n1)
    r01 = complex(-s * n3, -s * n2)
    r10 = complex(s * n3, -s * n2)
    r11 = complex(c, s * n1)
    a, b = complex(state.u[0, 0]), complex(state.u[0, 1])
    cc, d = complex(state.u[1, 0]), complex(state.u[1, 1])
    ua, ub = r00 * a + r01 * cc, r00 * b + r01 * d
    uc, ud = r10 * a + r11 * cc, r10 * b + r11 * d
    g00 = abs(ua * ua.conjugate() + uc * uc.conjugate() - 1.0)
    g11 = abs(ub * ub.conjugate() + ud * ud.conjugate() - 1.0)
    g01 = abs(ua.conjugate() * ub + uc.conjugate() * ud)
    u = np.array([[ua, ub], [uc, ud]], dtype=complex)
    if max(g00, g01, g11) > UNITARY_DEVIATION_LIMIT:
        u = reorthonormalize(u)
    return ChannelState(u=u, loss_db=state.loss_db, t_now=state.t_now + dt)


def reorthonormalize(u: np.ndarray) -> np.ndarray:
    """Project a nearly-unitary matrix back onto U(2) (polar decomposition)."""
    w, _, vh = np.linalg.svd(u)
    return w @ vh


def transmit(v: JonesVector, power: float, state: ChannelState) -> tuple[JonesVector, float]:
    """Send a state of the given mean photon number through the link."""
    out = JonesVector.from_array(state.u @ v.array)
    return out, power * state.transmission


def rotation_between_stokes(measured: StokesVector, target: StokesVector) -> JonesMatrix:
    """Minimal-angle Poincare-sphere rotation taking ``measured`` onto ``target``.

    For (numerically) anti-parallel inputs the rotation axis is ambiguous; it
    is chosen deterministically as the s1 axis projected orthogonal to the
    measured state (falling back to s2 when the measured state is itself on
    the s1 axis).
    """
    m = measured.array
    t = target.array
    nm, nt = np.linalg.norm(m), np.linalg.norm(t)
    if nm < 1e-9 or nt < 1e-9:
        raise ValueError("measured and target must be pure (unit) states")
    m, t = m / nm, t / nt
    cross = np.cross(m, t)
    sin_a = float(np.linalg.norm(cross))
    cos_a = float(np.dot(m, t))
    if sin_a < 1e-12:
        if cos_a > 0:
            return JonesMatrix.identity()
        for seed_axis in (np.array([1.0, 0, 0]), np.array([0, 1.0, 0])):
            axis = seed_axis - np.dot(seed_axis, m) * m
            if np.linalg.norm(axis) > 1e-6:
                return rotation_about_stokes_axis(axis, math.pi)
    return rotation_about_stokes_axis(cross, math.atan2(sin_a, cos_a))


def stabilizer_update(stab: StabilizerState, measured_cframe: StokesVector,
                      target: StokesVector, sigma_residual: float = 0.0,
                      rng: np.random.Generator | None = None) -> StabilizerState:
    """Re-lock a stabilizer given the control-frame polarization at its output.

    ``measured_cframe`` must be the Stokes vector observed *after* the current
    compensation; the update composes the corrective rotation on top, so an
    already-locked stabilizer (measured == target) is left untouched when
    ``sigma_residual`` is zero.
    """
    corrective = rotation_between_stokes(measured_cframe, target).array
    comp = corrective @ stab.comp
    if sigma_residual > 0.0:
        if rng is None:
            raise ValueError("rng required when sigma_residual > 0")
        comp = rotation_about_stokes_axis(_random_axis(rng),
                                          rng.normal(0.0, sigma_residual)).array @ comp
    return StabilizerState(comp=comp, reference=stab.reference,
                           response_time=stab.response_time, locked=True)


def observed_stokes(stab: StabilizerState, channel: ChannelState,
                    prepared: JonesVector) -> StokesVector:
    """Polarization the stabilizer sees at its output for a prepared state."""
    return stokes_from_jones(JonesVector.from_array(stab.comp @ channel.u @ prepared.array))
