"""Lossy resonant detector in temporal coupled-mode (input-output) form.

A single resonance couples radiatively to an electric channel (rate
``gamma_e``) and a magnetic channel (``gamma_m``) and decays internally at
``gamma_i``. The radiative channels are recombined into a bright and a dark
superposition; the drive is matched to the bright one. All quantities are
in the frame rotating at the drive frequency.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .core import PreconditionError
from .table import ScanTable

DARK_RTOL = 1e-12
STABILITY_FACTOR = 0.1


@dataclass(frozen=True)
class BrightDarkRates:
    gamma_b: float
    gamma_d: float
    gamma_r: float


def _check_rate(name: str, value: float) -> float:
    value = float(value)
    if not (value >= 0.0 and math.isfinite(value)):
        raise PreconditionError(f"{name} must be a finite rate >= 0, got {value}")
    return value


def bright_dark_rates(gamma_e: float, gamma_m: float) -> BrightDarkRates:
    """Split the radiative rates into bright ``(sqrt(ge)+sqrt(gm))^2/2`` and dark ``(sqrt(ge)-sqrt(gm))^2/2``.

    When the two couplings are balanced (equal, or equal square roots to a
    relative 1e-12) the dark rate is set to exactly zero.
    """
    ge = _check_rate("gamma_e", gamma_e)
    gm = _check_rate("gamma_m", gamma_m)
    gr = ge + gm
    se, sm = math.sqrt(ge), math.sqrt(gm)
    if ge == gm or abs(se - sm) < DARK_RTOL * math.sqrt(gr):
        return BrightDarkRates(gamma_b=gr, gamma_d=0.0, gamma_r=gr)
    return BrightDarkRates(gamma_b=0.5 * (se + sm) ** 2, gamma_d=0.5 * (se - sm) ** 2, gamma_r=gr)


@dataclass(frozen=True)
class ResonantDetector:
    gamma_e: float
    gamma_m: float
    gamma_i: float
    omega0: float = 1.0

    def __post_init__(self) -> None:
        for name in ("gamma_e", "gamma_m", "gamma_i"):
            object.__setattr__(self, name, _check_rate(name, getattr(self, name)))
        if self.gamma_e + self.gamma_m + self.gamma_i <= 0.0:
            raise PreconditionError("total linewidth must be > 0")

    @classmethod
    def balanced(cls, gamma_r: float = 1.0, gamma_i: float = 1.0) -> "ResonantDetector":
        return cls(gamma_e=0.5 * gamma_r, gamma_m=0.5 * gamma_r, gamma_i=gamma_i)

    @property
    def rates(self) -> BrightDarkRates:
        return bright_dark_rates(self.gamma_e, self.gamma_m)

    @property
    def gamma_r(self) -> float:
        return self.gamma_e + self.gamma_m

    @property
    def linewidth(self) -> float:
        """Total linewidth ``gamma_e + gamma_m + gamma_i``."""
        return self.gamma_e + self.gamma_m + self.gamma_i


@dataclass(frozen=True)
class DriveSpec:
    detuning: float = 0.0
    s_in: complex = 1.0 + 0j

    def __post_init__(self) -> None:
        if not math.isfinite(self.detuning) or not cmath.isfinite(complex(self.s_in)):
            raise PreconditionError("drive parameters must be finite")
        object.__setattr__(self, "s_in", complex(self.s_in))


@dataclass(frozen=True)
class ChannelOutputs:
    a_ss: complex
    s_b_out: complex
    s_d_out: complex
    absorbed_fraction: float
    absorbed_power: float


def _denominator(det: ResonantDetector, detuning: float) -> complex:
    gamma = det.linewidth
    if gamma <= 0.0:
        raise PreconditionError("total linewidth must be > 0")
    return complex(0.5 * gamma, -detuning)


def steady_amplitude(det: ResonantDetector, drive: DriveSpec) -> complex:
    """Monochromatic steady state ``sqrt(gamma_b) s_in / (Gamma/2 - i Delta)``."""
    return math.sqrt(det.rates.gamma_b) * drive.s_in / _denominator(det, drive.detuning)


def channel_outputs(det: ResonantDetector, drive: DriveSpec) -> ChannelOutputs:
    rates = det.rates
    denom = _denominator(det, drive.detuning)
    s_in = drive.s_in
    a = math.sqrt(rates.gamma_b) * s_in / denom
    s_b = (1.0 - rates.gamma_b / denom) * s_in
    # sign convention of the dark output kept as written; only |s_d|^2 is physical
    s_d = -math.sqrt(rates.gamma_b * rates.gamma_d) / denom * s_in
    power_in = abs(s_in) ** 2
    if power_in == 0.0:
        return ChannelOutputs(0j, 0j, 0j, 0.0, 0.0)
    fraction = 1.0 - (abs(s_b) ** 2 + abs(s_d) ** 2) / power_in
    return ChannelOutputs(
        a_ss=a,
        s_b_out=s_b,
        s_d_out=s_d,
        absorbed_fraction=min(max(fraction, 0.0), 1.0),
        absorbed_power=det.gamma_i * abs(a) ** 2,
    )


def absorption(det: ResonantDetector, detuning):
    """Absorbed fraction ``gamma_b gamma_i / (Delta^2 + (Gamma/2)^2)``; vectorized over detuning."""
    _denominator(det, 0.0)
    d = np.asarray(detuning, dtype=float)
    a = det.rates.gamma_b * det.gamma_i / (d * d + (0.5 * det.linewidth) ** 2)
    return a if a.ndim else float(a)


def absorbed_power_rate(det: ResonantDetector, drive: DriveSpec) -> float:
    """Power dissipated internally, ``gamma_i |a|^2``."""
    a = steady_amplitude(det, drive)
    return det.gamma_i * (a.real**2 + a.imag**2)


def resonant_absorption_peak(gamma_r, gamma_i):
    """On-resonance absorption in the balanced regime, ``4 gamma_r gamma_i / (gamma_r + gamma_i)^2``."""
    gr = np.asarray(gamma_r, dtype=float)
    gi = np.asarray(gamma_i, dtype=float)
    out = 4.0 * gr * gi / (gr + gi) ** 2
    return out if out.ndim else float(out)


def _fwhm(x: np.ndarray, y: np.ndarray) -> float | None:
    """Full width at half maximum by linear interpolation of the outermost crossings."""
    i_peak = int(np.argmax(y))
    half = 0.5 * y[i_peak]
    if half <= 0.0:
        return None
    above = y >= half
    left = i_peak
    while left > 0 and above[left - 1]:
        left -= 1
    right = i_peak
    while right < len(y) - 1 and above[right + 1]:
        right += 1
    if left == 0 or right == len(y) - 1:
        return None

    def cross(i_out: int, i_in: int) -> float:
        y0, y1 = y[i_out], y[i_in]
        return x[i_out] + (half - y0) * (x[i_in] - x[i_out]) / (y1 - y0)

    return cross(right + 1, right) - cross(left - 1, left)


def absorption_spectrum(
    det: ResonantDetector,
    detuning_range: tuple[float, float] = (-10.0, 10.0),
    n_points: int = 801,
) -> ScanTable:
    """Absorption and normalized bright/dark outputs over a uniform detuning grid.

    The metadata carries the peak value, its detuning and the numerically
    extracted FWHM (``None`` if the half-maximum is not bracketed).
    """
    lo, hi = map(float, detuning_range)
    if n_points < 3:
        raise PreconditionError(f"n_points must be >= 3, got {n_points}")
    if not lo < hi:
        raise PreconditionError(f"degenerate detuning range [{lo}, {hi}]")
    delta = np.linspace(lo, hi, n_points)
    rates = det.rates
    denom = 0.5 * det.linewidth - 1j * delta
    s_b = 1.0 - rates.gamma_b / denom
    s_d = -math.sqrt(rates.gamma_b * rates.gamma_d) / denom
    a = absorption(det, delta)
    i_peak = int(np.argmax(a))
    meta = {
        "gamma_e": det.gamma_e,
        "gamma_m": det.gamma_m,
        "gamma_i": det.gamma_i,
        "gamma_b": rates.gamma_b,
        "gamma_d": rates.gamma_d,
        "linewidth": det.linewidth,
        "peak_absorption": float(a[i_peak]),
        "peak_detuning": float(delta[i_peak]),
        "fwhm": _fwhm(delta, a),
    }
    return ScanTable(
        {
            "detuning": delta,
            "absorption": a,
            "bright_output": np.abs(s_b) ** 2,
            "dark_output": np.abs(s_d) ** 2,
        },
        meta,
    )


def coupling_ratio_scan(
    gamma_e: float = 1.0,
    ratio_range: tuple[float, float] = (0.0, 4.0),
    n_points: int = 401,
    gamma_i: float | None = None,
    detuning: float = 0.0,
) -> ScanTable:
    """Sweep the magnetic-to-electric coupling ratio ``gamma_m / gamma_e``.

    Tabulates the bright and dark rates, the normalized dark output and the
    absorption at fixed detuning. ``gamma_i=None`` tracks critical coupling,
    ``gamma_i = gamma_r``, at every ratio.
    """
    lo, hi = map(float, ratio_range)
    if n_points < 2:
        raise PreconditionError(f"n_points must be >= 2, got {n_points}")
    if not (0.0 <= lo < hi):
        raise PreconditionError(f"ratio range must satisfy 0 <= min < max, got [{lo}, {hi}]")
    ratio = np.linspace(lo, hi, n_points)
    cols = {k: np.empty(n_points) for k in ("gamma_b", "gamma_d", "gamma_i", "dark_output", "absorption")}
    for j, r in enumerate(ratio):
        gm = r * gamma_e
        gi = gamma_e + gm if gamma_i is None else gamma_i
        det = ResonantDetector(gamma_e, gm, gi)
        out = channel_outputs(det, DriveSpec(detuning, 1.0))
        rates = det.rates
        cols["gamma_b"][j] = rates.gamma_b
        cols["gamma_d"][j] = rates.gamma_d
        cols["gamma_i"][j] = gi
        cols["dark_output"][j] = abs(out.s_d_out) ** 2
        cols["absorption"][j] = absorption(det, detuning)
    meta = {
        "gamma_e": gamma_e,
        "gamma_i": "critical" if gamma_i is None else gamma_i,
        "detuning": detuning,
    }
    return ScanTable({"ratio": ratio, **cols}, meta)


def _rk4_step(f, t: float, y: complex, h: float) -> complex:
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def time_evolve(
    det: ResonantDetector,
    drive: DriveSpec,
    t_end: float,
    dt: float,
    a0: complex = 0j,
    sample_every: int = 1,
) -> ScanTable:
    """Integrate ``da/dt = (i Delta - Gamma/2) a + sqrt(gamma_b) s_in`` with classical RK4.

    The step is shrunk to ``t_end / ceil(t_end / dt)`` so the grid lands on
    ``t_end``. Steps above ``0.1 / Gamma`` are rejected. Every
    ``sample_every``-th step is recorded, and the final step always is.
    """
    gamma = det.linewidth
    a0 = complex(a0)
    if not cmath.isfinite(a0):
        raise PreconditionError("a0 must be finite")
    if not (dt > 0.0 and math.isfinite(dt)):
        raise PreconditionError(f"dt must be > 0, got {dt}")
    if dt > STABILITY_FACTOR / gamma * (1.0 + 1e-12):
        raise PreconditionError(f"dt = {dt} exceeds the stability bound 0.1/Gamma = {STABILITY_FACTOR / gamma}")
    if not t_end >= dt:
        raise PreconditionError(f"t_end must be >= dt, got t_end={t_end}, dt={dt}")
    if sample_every < 1:
        raise PreconditionError("sample_every must be >= 1")

    n_steps = math.ceil(t_end / dt - 1e-9)
    h = t_end / n_steps
    rate = complex(-0.5 * gamma, drive.detuning)
    source = math.sqrt(det.rates.gamma_b) * drive.s_in

    def rhs(_t: float, a: complex) -> complex:
        return rate * a + source

    times, values = [0.0], [a0]
    a = a0
    for n in range(1, n_steps + 1):
        a = _rk4_step(rhs, (n - 1) * h, a, h)
        if n % sample_every == 0 or n == n_steps:
            times.append(n * h)
            values.append(a)
    t = np.array(times)
    v = np.array(values, dtype=complex)
    meta = {
        "gamma_e": det.gamma_e,
        "gamma_m": det.gamma_m,
        "gamma_i": det.gamma_i,
        "detuning": drive.detuning,
        "s_in": drive.s_in,
        "a0": a0,
        "dt": h,
        "n_steps": n_steps,
        "a_steady": steady_amplitude(det, drive),
    }
    return ScanTable(
        {"t": t, "re_a": v.real, "im_a": v.imag, "absorbed_power": det.gamma_i * np.abs(v) ** 2},
        meta,
    )


def relaxation_closed_form(det: ResonantDetector, drive: DriveSpec, t, a0: complex = 0j):
    """Exact solution ``a_ss + (a0 - a_ss) exp((i Delta - Gamma/2) t)``."""
    a_ss = steady_amplitude(det, drive)
    rate = complex(-0.5 * det.linewidth, drive.detuning)
    return a_ss + (a0 - a_ss) * np.exp(rate * np.asarray(t, dtype=float))


def critical_coupling_locus(gamma_r: float = 1.0, n_points: int = 401, ratio_max: float = 4.0) -> ScanTable:
    """On-resonance balanced absorption versus ``gamma_i / gamma_r`` over ``[0, ratio_max]``."""
    if not (gamma_r > 0.0 and math.isfinite(gamma_r)):
        raise PreconditionError(f"gamma_r must be > 0, got {gamma_r}")
    if n_points < 2:
        raise PreconditionError(f"n_points must be >= 2, got {n_points}")
    if not ratio_max > 0.0:
        raise PreconditionError("ratio_max must be > 0")
    ratio = np.linspace(0.0, ratio_max, n_points)
    gamma_i = ratio * gamma_r
    peak = resonant_absorption_peak(gamma_r, gamma_i)
    i_max = int(np.argmax(peak))
    meta = {
        "gamma_r": gamma_r,
        "ratio_max": ratio_max,
        "max_absorption": float(peak[i_max]),
        "argmax_ratio": float(ratio[i_max]),
    }
    return ScanTable({"ratio": ratio, "gamma_i": gamma_i, "absorption_peak": peak}, meta)
