"""Far-field patterns of two in-phase z-dipoles at x = +-d/2.

The detector projects the electric field on theta-hat and the rescaled
magnetic field ``c*B`` on phi-hat. Both projections share the angular factor
``sin(theta) * cos(delta/2)``, so the generalized pattern is the electric-only
(Glauber) pattern times the detector weight ``|1 + zeta|**2``. Radial,
frequency and normalization prefactors are set to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ComplexResponse, PreconditionError, ResponseLike, as_zeta
from .table import ScanTable

DEFAULT_POINTS = 721
ARGMAX_RTOL = 1e-12


@dataclass(frozen=True)
class DipolePairGeometry:
    separation_d: float
    wavenumber_k: float = 2.0 * math.pi

    def __post_init__(self) -> None:
        if not (self.separation_d >= 0.0 and math.isfinite(self.separation_d)):
            raise PreconditionError(f"separation_d must be >= 0, got {self.separation_d}")
        if not (self.wavenumber_k > 0.0 and math.isfinite(self.wavenumber_k)):
            raise PreconditionError(f"wavenumber_k must be > 0, got {self.wavenumber_k}")

    @classmethod
    def from_wavelengths(cls, d_over_lambda: float, wavelength: float = 1.0) -> "DipolePairGeometry":
        return cls(separation_d=d_over_lambda * wavelength, wavenumber_k=2.0 * math.pi / wavelength)

    @property
    def kd(self) -> float:
        return self.wavenumber_k * self.separation_d


class Direction:
    """Observation direction; ``theta`` and ``phi`` may be scalars or arrays.

    ``phi`` is reduced modulo 2*pi on construction.
    """

    __slots__ = ("theta", "phi")

    def __init__(self, theta, phi=0.0):
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        if not np.all(np.isfinite(theta)) or not np.all(np.isfinite(phi)):
            raise PreconditionError("direction angles must be finite")
        if np.any(theta < 0.0) or np.any(theta > math.pi):
            raise PreconditionError("theta must lie in [0, pi]")
        self.theta = theta if theta.ndim else float(theta)
        phi = np.mod(phi, 2.0 * math.pi)
        self.phi = phi if phi.ndim else float(phi)

    def __repr__(self) -> str:
        return f"Direction(theta={self.theta!r}, phi={self.phi!r})"


def phase_delta(geom: DipolePairGeometry, direction: Direction):
    """Far-field phase difference ``k d sin(theta) cos(phi)`` between the sources."""
    return geom.kd * np.sin(direction.theta) * np.cos(direction.phi)


def glauber_pattern(geom: DipolePairGeometry, direction: Direction):
    """Electric-only weight ``sin^2(theta) cos^2(delta/2)``."""
    delta = phase_delta(geom, direction)
    return np.sin(direction.theta) ** 2 * np.cos(0.5 * delta) ** 2


def detector_factor(resp: ResponseLike) -> float:
    """Detector weight ``1 + |zeta|^2 + 2 Re(zeta)``, i.e. ``|1 + zeta|^2``.

    Computed as a sum of squares so that ``zeta = -1`` gives exactly 0.
    """
    zeta = as_zeta(resp)
    return (1.0 + zeta.real) ** 2 + zeta.imag**2


def generalized_pattern(geom: DipolePairGeometry, direction: Direction, resp: ResponseLike):
    return glauber_pattern(geom, direction) * detector_factor(resp)


def argmax_set(values: np.ndarray, rtol: float = ARGMAX_RTOL) -> np.ndarray:
    """Indices whose value is within ``rtol`` (relative) of the maximum.

    An identically zero array has no maxima and returns an empty set.
    """
    values = np.asarray(values)
    peak = values.max()
    if peak <= 0.0:
        return np.array([], dtype=int)
    return np.flatnonzero(values >= peak * (1.0 - rtol))


def _normalize(values: np.ndarray) -> np.ndarray:
    peak = values.max()
    if peak == 0.0:
        return np.zeros_like(values)
    return values / peak


def pattern_scan(
    geom: DipolePairGeometry,
    resp: ResponseLike,
    cut: str = "polar",
    n_points: int = DEFAULT_POINTS,
    fixed_angle: float | None = None,
) -> ScanTable:
    """Tabulate Glauber and generalized weights along one angular cut.

    ``cut="polar"`` sweeps theta over [0, pi] at fixed phi (default 0);
    ``cut="azimuthal"`` sweeps phi over [0, 2*pi] at fixed theta (default
    pi/2). Both grids are uniform and include their endpoints.
    """
    if n_points < 2:
        raise PreconditionError(f"n_points must be >= 2, got {n_points}")
    if cut == "polar":
        fixed = 0.0 if fixed_angle is None else float(fixed_angle)
        angle = np.linspace(0.0, math.pi, n_points)
        direction = Direction(angle, np.full_like(angle, fixed))
    elif cut == "azimuthal":
        fixed = 0.5 * math.pi if fixed_angle is None else float(fixed_angle)
        angle = np.linspace(0.0, 2.0 * math.pi, n_points)
        direction = Direction(np.full_like(angle, fixed), angle)
    else:
        raise PreconditionError(f"cut must be 'polar' or 'azimuthal', got {cut!r}")

    zeta = as_zeta(resp)
    glauber = glauber_pattern(geom, direction)
    general = glauber * detector_factor(zeta)
    meta = {
        "cut": cut,
        "fixed_angle": fixed,
        "separation_d": geom.separation_d,
        "wavenumber_k": geom.wavenumber_k,
        "zeta": zeta,
        "detector_factor": detector_factor(zeta),
        "glauber_max": float(glauber.max()),
        "generalized_max": float(general.max()),
    }
    return ScanTable(
        {
            "angle": angle,
            "glauber": glauber,
            "generalized": general,
            "glauber_normalized": _normalize(glauber),
            "generalized_normalized": _normalize(general),
        },
        meta,
    )


__all__ = [
    "ComplexResponse",
    "DipolePairGeometry",
    "Direction",
    "argmax_set",
    "detector_factor",
    "generalized_pattern",
    "glauber_pattern",
    "pattern_scan",
    "phase_delta",
]
