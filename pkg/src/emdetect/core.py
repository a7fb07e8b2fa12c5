"""Shared detector-response type and error class."""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Union


class PreconditionError(ValueError):
    """Raised when an input violates a numerical precondition."""


@dataclass(frozen=True)
class ComplexResponse:
    """Relative magnetic-to-electric response amplitude of the detector.

    ``zeta = 0`` is the electric-only (Glauber) detector. The polarization
    directions the detector projects onto are fixed by each geometry.
    """

    zeta: complex = 0j

    def __post_init__(self) -> None:
        z = complex(self.zeta)
        if not cmath.isfinite(z):
            raise PreconditionError(f"zeta must be finite, got {self.zeta!r}")
        object.__setattr__(self, "zeta", z)


ResponseLike = Union[ComplexResponse, complex, float, int]


def as_zeta(resp: ResponseLike) -> complex:
    if isinstance(resp, ComplexResponse):
        return resp.zeta
    return ComplexResponse(resp).zeta
