"""Jones-calculus models of the polarization hardware.

Everything here is exact 2x2 complex linear algebra: polarization states,
device transfer matrices, the Faraday mirror, and the modulator built from a
phase modulator with 45-degree rotated polarization-maintaining input fibre
plus a Faraday mirror ("basic unit").  The Faraday mirror is antilinear
(it conjugates the field), so the basic unit as a whole acts as

    v_out = M . conj(v_in)

and functions returning a ``JonesMatrix`` for it return the linear factor M,
to be applied with :func:`basic_unit_apply`.

Handedness convention: Stokes components are s1 = |j1|^2 - |j2|^2,
s2 = 2 Re(j1* j2), s3 = 2 Im(j1* j2).  The pole s3 = +1 is labelled "R" for
stabilizer reference purposes; the choice is arbitrary but used consistently.
Note that the circular *protocol* states drift around the sphere with the
PM-fibre phase, so protocol labels R/L are not fixed sphere points.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10

# Protocol modulation phases for the four prepared polarizations.
PROTOCOL_PHASES = {"H": math.pi / 2, "V": 0.0, "R": -math.pi / 4, "L": math.pi / 4}

_SIGMA = (
    np.array([[1, 0], [0, -1]], dtype=complex),   # pairs with s1
    np.array([[0, 1], [1, 0]], dtype=complex),    # pairs with s2
    np.array([[0, -1j], [1j, 0]], dtype=complex), # pairs with s3
)

# FM . v = F . conj(v)
_F = np.array([[0, 1], [-1, 0]], dtype=complex)


@dataclass(frozen=True)
class JonesVector:
    """Pure polarization state; normalized to |j1|^2 + |j2|^2 = 1."""

    j1: complex
    j2: complex

    def __post_init__(self):
        n = abs(self.j1) ** 2 + abs(self.j2) ** 2
        if abs(n - 1.0) > NORM_TOL:
            raise ValueError(f"Jones vector not normalized: |v|^2 = {n!r}")

    @classmethod
    def from_components(cls, j1: complex, j2: complex) -> "JonesVector":
        """Build a normalized state from arbitrary (not both zero) amplitudes."""
        n = math.sqrt(abs(j1) ** 2 + abs(j2) ** 2)
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls(j1 / n, j2 / n)

    @classmethod
    def from_array(cls, arr) -> "JonesVector":
        return cls.from_components(complex(arr[0]), complex(arr[1]))

    @property
    def array(self) -> np.ndarray:
        return np.array([self.j1, self.j2], dtype=complex)


@dataclass(frozen=True)
class JonesMatrix:
    """2x2 complex transfer operator with entries [[a, b], [c, d]]."""

    a: complex
    b: complex
    c: complex
    d: complex

    @classmethod
    def from_array(cls, arr) -> "JonesMatrix":
        arr = np.asarray(arr, dtype=complex)
        return cls(complex(arr[0, 0]), complex(arr[0, 1]),
                   complex(arr[1, 0]), complex(arr[1, 1]))

    @classmethod
    def identity(cls) -> "JonesMatrix":
        return cls(1.0, 0.0, 0.0, 1.0)

    @property
    def array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        m = self.array
        return bool(np.max(np.abs(m.conj().T @ m - np.eye(2))) <= tol)


@dataclass(frozen=True)
class StokesVector:
    """Point on (or inside) the Poincare sphere."""

    s1: float
    s2: float
    s3: float

    def __post_init__(self):
        r2 = self.s1 ** 2 + self.s2 ** 2 + self.s3 ** 2
        if r2 > 1.0 + 1e-9:
            raise ValueError(f"Stokes vector outside the unit sphere: |s|^2 = {r2!r}")

    @property
    def array(self) -> np.ndarray:
        return np.array([self.s1, self.s2, self.s3], dtype=float)

    def degree_of_polarization(self) -> float:
        return float(np.linalg.norm(self.array))


@dataclass(frozen=True)
class ModulationSetting:
    """Drive setting of the two-way modulator.

    ``delta_phi_m`` is half the difference between the phase shifts of the two
    waveguide passes; the four protocol values are pi/2 (H), 0 (V), -pi/4 (R)
    and +pi/4 (L).  ``phi_pmf`` is the slow birefringent phase of the
    polarization-maintaining fibre.
    """

    delta_phi_m: float
    phi_pmf: float = 0.0

    @classmethod
    def for_polarization(cls, pol: str, phi_pmf: float = 0.0) -> "ModulationSetting":
        try:
            return cls(PROTOCOL_PHASES[pol], phi_pmf)
        except KeyError:
            raise ValueError(f"unknown polarization label {pol!r}") from None


def apply(m: JonesMatrix, v: JonesVector, renormalize: bool = True) -> JonesVector:
    """Apply a transfer matrix to a state.

    With ``renormalize`` (the default) the result is projected back to a pure
    state, which is what protocol-level code wants; power bookkeeping is done
    separately by the callers that need it.
    """
    out = m.array @ v.array
    if renormalize:
        return JonesVector.from_array(out)
    return JonesVector(complex(out[0]), complex(out[1]))


def apply_array(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    return m @ v


def faraday_mirror(v: JonesVector) -> JonesVector:
    """Reflect off the Faraday mirror: (j1, j2) -> (j2*, -j1*), orthogonal to the input."""
    return JonesVector(v.j2.conjugate(), -v.j1.conjugate())


def faraday_mirror_array(v: np.ndarray) -> np.ndarray:
    return _F @ np.conj(v)


def inner_product(u: JonesVector, v: JonesVector) -> complex:
    """Hermitian inner product <u|v>."""
    return complex(np.vdot(u.array, v.array))


def overlap(u: JonesVector, v: JonesVector) -> float:
    """Projection probability |<u|v>|^2."""
    return abs(inner_product(u, v)) ** 2


def conjugation_identity_check(m: JonesMatrix, v: JonesVector) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate both sides of the mirror-compensation identity.

    Returns (M^dag . FM . M . v,  det(M*) . FM . v) as raw complex arrays;
    for non-unitary M the sides are not normalized, so no ``JonesVector``
    wrapping is applied.  The two arrays agree for arbitrary 2x2 M.
    """
    marr = m.array
    lhs = marr.conj().T @ faraday_mirror_array(marr @ v.array)
    det_conj = (marr[0, 0] * marr[1, 1] - marr[0, 1] * marr[1, 0]).conjugate()
    rhs = det_conj * faraday_mirror_array(v.array)
    return lhs, rhs


def unitary_from_params(a: float, alpha: float, beta: float) -> JonesMatrix:
    """General unitary of a single-mode fibre in canonical form.

    ``a`` in [0, 1] sets the power split, ``alpha`` and ``beta`` the phases:
    [[sqrt(a), sqrt(1-a) e^{i alpha}], [sqrt(1-a) e^{i beta}, -sqrt(a) e^{i(alpha+beta)}]].
    """
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"power-split parameter a must be in [0, 1], got {a}")
    ra, rb = math.sqrt(a), math.sqrt(1.0 - a)
    return JonesMatrix(ra, rb * cmath.exp(1j * alpha),
                       rb * cmath.exp(1j * beta), -ra * cmath.exp(1j * (alpha + beta)))


def random_unitary(rng: np.random.Generator) -> JonesMatrix:
    """Haar-ish random canonical-form unitary (uniform a, alpha, beta)."""
    return unitary_from_params(rng.uniform(0, 1), rng.uniform(0, 2 * math.pi),
                               rng.uniform(0, 2 * math.pi))


def rotation_45() -> JonesMatrix:
    """Real rotation by 45 degrees between PM fibre axes and the waveguide."""
    c = 1.0 / math.sqrt(2.0)
    return JonesMatrix(c, -c, c, c)


def basic_unit_matrix(setting: ModulationSetting, phi_e: float = 0.0,
                      smf: JonesMatrix | None = None,
                      phi_m_mean: float = 0.0) -> JonesMatrix:
    """Full go-and-return operator product of the modulator unit.

    The product is PMF^dag . R45^T . WG_back . SMF^dag . FM . SMF . WG_fwd
    . R45 . PMF, where WG_fwd/WG_back carry the per-pass waveguide phases
    (phi_m_mean -/+ delta_phi_m, both offset by phi_e) and FM is the Faraday
    mirror.  Because FM conjugates, the returned matrix is the linear factor
    M of the antilinear map v -> M . conj(v); apply with
    :func:`basic_unit_apply`.  Rejects a non-unitary ``smf``.
    """
    if smf is None:
        smf = JonesMatrix.identity()
    if not smf.is_unitary():
        raise ValueError("SMF transfer matrix must be unitary")
    phi_in = phi_m_mean - setting.delta_phi_m
    phi_out = phi_m_mean + setting.delta_phi_m
    pmf = np.array([[1, 0], [0, cmath.exp(1j * setting.phi_pmf)]], dtype=complex)
    r45 = rotation_45().array
    wg_fwd = np.array([[1, 0], [0, cmath.exp(1j * (phi_in + phi_e))]], dtype=complex)
    wg_back = np.array([[1, 0], [0, cmath.exp(-1j * (phi_out + phi_e))]], dtype=complex)
    s = smf.array
    left = pmf.conj().T @ r45.T @ wg_back @ s.conj().T
    right = s @ wg_fwd @ r45 @ pmf
    # v -> left . F . conj(right . v) = (left . F . conj(right)) . conj(v)
    return JonesMatrix.from_array(left @ _F @ np.conj(right))


def basic_unit_closed_form(setting: ModulationSetting, phi_e: float = 0.0,
                           phi_m_mean: float = 0.0, alpha: float = 0.0,
                           beta: float = 0.0) -> JonesMatrix:
    """Closed form of :func:`basic_unit_matrix` for a canonical-form SMF.

    All SMF dependence collapses to the global phase -e^{-i(alpha+beta)}; the
    polarization action is the cos/sin matrix in delta_phi_m and phi_pmf
    composed with the Faraday mirror.
    """
    d = setting.delta_phi_m
    p = setting.phi_pmf
    scalar = -cmath.exp(-1j * (alpha + beta)) * cmath.exp(-1j * (phi_m_mean + phi_e + p))
    cs = np.array([[math.cos(d), -1j * cmath.exp(1j * p) * math.sin(d)],
                   [-1j * cmath.exp(-1j * p) * math.sin(d), math.cos(d)]], dtype=complex)
    return JonesMatrix.from_array(scalar * cs @ _F)


def basic_unit_apply(m: JonesMatrix, v: JonesVector, renormalize: bool = True) -> JonesVector:
    """Send a state through the (antilinear) basic unit: v -> M . conj(v)."""
    out = m.array @ np.conj(v.array)
    if renormalize:
        return JonesVector.from_array(out)
    return JonesVector(complex(out[0]), complex(out[1]))


def basic_unit_output_h(setting: ModulationSetting) -> JonesVector:
    """Output state for horizontal input, up to a global phase.

    [-i e^{i phi_pmf} sin(delta_phi_m),  cos(delta_phi_m)]; this is the whole
    state dependence of the unit -- no SMF or waveguide-dispersion term
    survives the double pass.
    """
    d = setting.delta_phi_m
    return JonesVector.from_components(
        -1j * cmath.exp(1j * setting.phi_pmf) * math.sin(d), math.cos(d))


def prepared_state(pol: str, phi_pmf: float = 0.0) -> JonesVector:
    """Protocol state actually emitted for a polarization label."""
    return basic_unit_output_h(ModulationSetting.for_polarization(pol, phi_pmf))


def intensity_modulator_transmission(setting: ModulationSetting) -> float:
    """Fraction of input power in the vertical output port of the PBS.

    The PBS selects the second (vertical) component of the basic-unit output
    for horizontal input, so the transmission is cos^2(delta_phi_m),
    independent of phi_pmf.
    """
    out = basic_unit_output_h(setting)
    return abs(out.j2) ** 2


def stokes_from_jones(v: JonesVector) -> StokesVector:
    """Standard Stokes components of a pure state (unit norm by construction)."""
    j1, j2 = v.j1, v.j2
    return StokesVector(abs(j1) ** 2 - abs(j2) ** 2,
                        2.0 * (j1.conjugate() * j2).real,
                        2.0 * (j1.conjugate() * j2).imag)


def jones_from_stokes(s: StokesVector) -> JonesVector:
    """A pure state with the given (unit) Stokes vector; global phase fixed arbitrarily."""
    r = s.degree_of_polarization()
    if abs(r - 1.0) > 1e-9:
        raise ValueError("only pure (unit-norm) Stokes vectors map to Jones states")
    theta = math.acos(max(-1.0, min(1.0, s.s1 / r)))
    phi = math.atan2(s.s3, s.s2)
    return JonesVector.from_components(math.cos(theta / 2.0),
                                       math.sin(theta / 2.0) * cmath.exp(1j * phi))


def bloch_distance(u: JonesVector, v: JonesVector) -> float:
    """Euclidean distance between Stokes vectors (global phase insensitive)."""
    return float(np.linalg.norm(stokes_from_jones(u).array - stokes_from_jones(v).array))


def rotation_about_stokes_axis(axis, angle: float) -> JonesMatrix:
    """SU(2) element rotating Stokes vectors by ``angle`` about ``axis`` (right-handed)."""
    n = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(n)
    if norm == 0.0:
        raise ValueError("rotation axis must be nonzero")
    n = n / norm
    gen = n[0] * _SIGMA[0] + n[1] * _SIGMA[1] + n[2] * _SIGMA[2]
    m = math.cos(angle / 2.0) * np.eye(2) - 1j * math.sin(angle / 2.0) * gen
    return JonesMatrix.from_array(m)


def extinction_ratio_db(p_max: float, p_min: float) -> float:
    """Power ratio between the two device outputs, in dB."""
    if p_min <= 0.0:
        raise ValueError("extinction ratio is unmeasurable for zero blocked power")
    return 10.0 * math.log10(p_max / p_min)
