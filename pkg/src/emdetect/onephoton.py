"""Single-photon detection in the counterpropagating two-mode field.

Basis ordering is (|R>, |L>) throughout. At position x the detector
amplitude couples to ``(1+zeta) a_R e^{ikx} + (1-zeta) a_L e^{-ikx}``
(times the single-photon field amplitude), so ``zeta`` selects which
superposition of propagation directions is measured.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .core import PreconditionError, ResponseLike, as_zeta
from .table import ScanTable

TWO_PI = 2.0 * math.pi
DEFAULT_K = TWO_PI
NORM_TOL = 1e-12


@dataclass(frozen=True)
class OnePhotonState:
    """Pure one-photon qubit ``alpha|R> + beta|L>``."""

    alpha: complex
    beta: complex

    def __post_init__(self) -> None:
        a, b = complex(self.alpha), complex(self.beta)
        if not (cmath.isfinite(a) and cmath.isfinite(b)):
            raise PreconditionError("state amplitudes must be finite")
        norm = abs(a) ** 2 + abs(b) ** 2
        if abs(norm - 1.0) > NORM_TOL:
            raise PreconditionError(f"|alpha|^2 + |beta|^2 = {norm!r}, expected 1")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @classmethod
    def from_phase(cls, phi: float) -> "OnePhotonState":
        """Balanced state (|R> + e^{i phi}|L>)/sqrt(2)."""
        s = 1.0 / math.sqrt(2.0)
        return cls(s, cmath.exp(1j * phi) * s)

    @classmethod
    def normalized(cls, alpha: complex, beta: complex) -> "OnePhotonState":
        n = math.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
        if n == 0.0:
            raise PreconditionError("cannot normalize the zero vector")
        return cls(alpha / n, beta / n)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.alpha, self.beta], dtype=complex)


@dataclass(frozen=True)
class FieldScale:
    """Single-photon field amplitude (arbitrary units)."""

    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if not (self.amplitude > 0.0 and math.isfinite(self.amplitude)):
            raise PreconditionError(f"field amplitude must be > 0, got {self.amplitude}")


@dataclass(frozen=True)
class PovmElement:
    """Rank-one detection operator on the one-photon subspace."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise PreconditionError(f"POVM element must be 2x2, got shape {m.shape}")
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.conj().T).max() > 1e-12 * scale:
            raise PreconditionError("POVM element is not Hermitian")
        lo, hi = np.linalg.eigvalsh(m)
        if lo < -1e-12 * scale:
            raise PreconditionError(f"POVM element has negative eigenvalue {lo}")
        if abs(lo) > 1e-10 * max(hi, 0.0) and hi > 0.0:
            raise PreconditionError("POVM element has rank > 1")
        object.__setattr__(self, "matrix", m)

    def expectation(self, state: OnePhotonState) -> float:
        v = state.vector
        return float(np.real(v.conj() @ self.matrix @ v))

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))


@dataclass(frozen=True)
class FringeSummary:
    mean_level: float
    visibility: float
    phase_offset: float


def _scale(scale: FieldScale | None) -> float:
    return 1.0 if scale is None else scale.amplitude


def _principal(angle: float) -> float:
    """Map to (-pi, pi]."""
    if angle <= -math.pi:
        angle += TWO_PI
    elif angle > math.pi:
        angle -= TWO_PI
    return angle


def _arg(z: complex) -> float:
    return 0.0 if z == 0 else _principal(math.atan2(z.imag, z.real))


def detection_amplitude(resp: ResponseLike, x, phi: float, scale: FieldScale | None = None, k: float = DEFAULT_K):
    """Vacuum amplitude left by the detector acting on the balanced state of relative phase ``phi``."""
    zeta = as_zeta(resp)
    e = _scale(scale)
    x = np.asarray(x, dtype=float)
    amp = (e / math.sqrt(2.0)) * (
        (1.0 + zeta) * np.exp(1j * k * x) + (1.0 - zeta) * np.exp(-1j * k * x) * cmath.exp(1j * phi)
    )
    return amp if amp.ndim else complex(amp)


def detection_probability(
    state: OnePhotonState,
    resp: ResponseLike,
    x,
    scale: FieldScale | None = None,
    k: float = DEFAULT_K,
):
    """``E^2 |(1+zeta) alpha e^{ikx} + (1-zeta) beta e^{-ikx}|^2``.

    For the balanced state this is exactly ``|detection_amplitude|^2``.
    """
    zeta = as_zeta(resp)
    e = _scale(scale)
    x = np.asarray(x, dtype=float)
    amp = (1.0 + zeta) * state.alpha * np.exp(1j * k * x) + (1.0 - zeta) * state.beta * np.exp(-1j * k * x)
    p = e**2 * (amp.real**2 + amp.imag**2)
    return p if p.ndim else float(p)


def visibility(resp):
    """Fringe contrast ``|1 - zeta^2| / (1 + |zeta|^2)``; accepts arrays of zeta."""
    if isinstance(resp, np.ndarray):
        zeta = resp.astype(complex)
    else:
        zeta = as_zeta(resp)
    v = np.abs(1.0 - zeta**2) / (1.0 + np.abs(zeta) ** 2)
    return v if np.ndim(v) else float(v)


def path_bias(zeta_real):
    """Signed path bias ``2 zeta / (1 + zeta^2)`` for real zeta.

    Its magnitude is the path distinguishability. Complex zeta is rejected:
    the bias is only defined for a real response ratio.
    """
    z = np.asarray(getattr(zeta_real, "zeta", zeta_real))
    if np.iscomplexobj(z):
        if np.any(z.imag != 0.0):
            raise PreconditionError("path_bias is defined for real zeta only")
        z = z.real
    z = z.astype(float)
    if not np.all(np.isfinite(z)):
        raise PreconditionError("zeta must be finite")
    b = 2.0 * z / (1.0 + z * z)
    return b if b.ndim else float(b)


def channel_weights(zeta_real: float) -> tuple[float, float]:
    """Right/left channel weights ``(1+zeta)^2`` and ``(1-zeta)^2``."""
    z = float(zeta_real)
    return (1.0 + z) ** 2, (1.0 - z) ** 2


def fringe_summary(resp: ResponseLike, scale: FieldScale | None = None) -> FringeSummary:
    """Mean level, visibility and phase offset of the balanced-state fringe.

    The fringe is ``mean * (1 + V cos(2kx - phi - delta))`` with
    ``delta = arg[(1+zeta)^* (1-zeta)]`` in (-pi, pi], taken as 0 when that
    product vanishes (zero visibility, phase unobservable).
    """
    zeta = as_zeta(resp)
    q = (1.0 + zeta).conjugate() * (1.0 - zeta)
    return FringeSummary(
        mean_level=_scale(scale) ** 2 * (1.0 + abs(zeta) ** 2),
        visibility=visibility(zeta),
        phase_offset=_arg(q),
    )


def fringe_coefficients(
    state: OnePhotonState, resp: ResponseLike, scale: FieldScale | None = None
) -> tuple[float, float, float]:
    """Return ``(mean, contrast, shift)`` with ``P(x) = mean (1 + contrast cos(2kx - shift))``.

    Valid for any one-photon state. For the balanced state ``contrast`` is
    the visibility and ``shift = phi + delta``.
    """
    zeta = as_zeta(resp)
    e2 = _scale(scale) ** 2
    mean = e2 * (abs(1.0 + zeta) ** 2 * abs(state.alpha) ** 2 + abs(1.0 - zeta) ** 2 * abs(state.beta) ** 2)
    cross = (1.0 + zeta) * state.alpha * ((1.0 - zeta) * state.beta).conjugate()
    if mean == 0.0:
        return 0.0, 0.0, 0.0
    contrast = min(2.0 * e2 * abs(cross) / mean, 1.0)
    return mean, contrast, _arg(cross.conjugate())


def selected_mode(resp: ResponseLike, x: float = 0.0, k: float = DEFAULT_K) -> np.ndarray:
    """Normalized mode ``[(1+zeta)e^{ikx}, (1-zeta)e^{-ikx}] / sqrt(2(1+|zeta|^2))``."""
    zeta = as_zeta(resp)
    norm = math.sqrt(2.0 * (1.0 + abs(zeta) ** 2))
    return np.array(
        [(1.0 + zeta) * cmath.exp(1j * k * x), (1.0 - zeta) * cmath.exp(-1j * k * x)],
        dtype=complex,
    ) / norm


def povm_element(
    resp: ResponseLike, x: float = 0.0, scale: FieldScale | None = None, k: float = DEFAULT_K
) -> PovmElement:
    """One-photon restriction of ``O^dagger O``.

    The detector annihilates the photon with row vector ``selected_mode``, so
    the projector is built from its complex conjugate; this is what makes
    ``<psi|Pi|psi>`` equal the detection probability for every state.
    """
    zeta = as_zeta(resp)
    chi = selected_mode(zeta, x, k).conj()
    prefactor = 2.0 * _scale(scale) ** 2 * (1.0 + abs(zeta) ** 2)
    m = prefactor * np.outer(chi, chi.conj())
    # exact Hermitian symmetry
    m = 0.5 * (m + m.conj().T)
    return PovmElement(m)


def bloch_vector(mode) -> np.ndarray:
    """Bloch vector of a normalized (c_R, c_L); |R> is the north pole."""
    c = np.asarray(mode, dtype=complex)
    if c.shape != (2,):
        raise PreconditionError(f"mode must be a 2-vector, got shape {c.shape}")
    norm = math.sqrt(float(np.sum(np.abs(c) ** 2)))
    if abs(norm - 1.0) > 1e-9:
        raise PreconditionError(f"mode is not normalized (norm {norm!r})")
    cross = c[0].conjugate() * c[1]
    return np.array([2.0 * cross.real, 2.0 * cross.imag, abs(c[0]) ** 2 - abs(c[1]) ** 2])


def extracted_visibility(values: np.ndarray) -> float:
    """Numerical contrast ``(max - min) / (max + min)``; 0 for an all-zero pattern."""
    hi, lo = float(np.max(values)), float(np.min(values))
    if hi + lo == 0.0:
        return 0.0
    return (hi - lo) / (hi + lo)


def fringe_scan(
    state: OnePhotonState,
    resp: ResponseLike,
    scale: FieldScale | None = None,
    k: float = DEFAULT_K,
    x_range: tuple[float, float] | None = None,
    n_points: int = 1001,
) -> ScanTable:
    """Detection probability on a uniform closed grid covering at least one period ``pi/k``."""
    period = math.pi / k
    x_min, x_max = (0.0, period) if x_range is None else map(float, x_range)
    if n_points < 3:
        raise PreconditionError(f"n_points must be >= 3, got {n_points}")
    if not x_max - x_min >= period * (1.0 - 1e-12):
        raise PreconditionError(f"x range must span at least one period pi/k = {period}")

    x = np.linspace(x_min, x_max, n_points)
    p = detection_probability(state, resp, x, scale, k)
    mean, contrast, shift = fringe_coefficients(state, resp, scale)
    normalized = p / mean if mean > 0.0 else np.zeros_like(p)
    zeta = as_zeta(resp)
    summary = fringe_summary(zeta, scale)
    meta = {
        "zeta": zeta,
        "alpha": state.alpha,
        "beta": state.beta,
        "k": k,
        "field_amplitude": _scale(scale),
        "mean_level": mean,
        "visibility_closed_form": contrast,
        "visibility_extracted": extracted_visibility(p),
        "fringe_shift": shift,
        "detector_visibility": summary.visibility,
        "phase_offset_delta": summary.phase_offset,
    }
    return ScanTable({"x": x, "probability": p, "normalized": normalized}, meta)
