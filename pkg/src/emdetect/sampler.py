"""Synthetic photon-counting experiment on the single-photon fringe.

Events are independent and distributed over one fringe period with density
proportional to the detection probability; the run is conditioned on a
fixed total number of events since no absolute rate scale is modeled.

Sampling is by inversion of the closed-form CDF. Uniform variates come from
numpy's PCG64 bit generator, one stream per shard of ``SHARD_SIZE`` events,
seeded with ``SeedSequence(seed, spawn_key=(shard,))``. Output is therefore
independent of how shards are distributed over threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import PreconditionError, ResponseLike, as_zeta
from .onephoton import DEFAULT_K, FieldScale, OnePhotonState, fringe_coefficients
from .table import ScanTable

SHARD_SIZE = 1 << 16
ROOT_TOL = 1e-12
RNG_ALGORITHM = f"numpy.random.PCG64/SeedSequence(seed,spawn_key=(shard,))/shard={SHARD_SIZE}/numpy-{np.__version__}"
MIN_EVENTS_FOR_ESTIMATE = 100


@dataclass(frozen=True)
class SamplerConfig:
    n_events: int
    seed: int = 0
    n_bins: int = 64
    x_period: float | None = None  # defaults to pi/k

    def __post_init__(self) -> None:
        if int(self.n_events) != self.n_events or self.n_events < 1:
            raise PreconditionError(f"n_events must be a positive integer, got {self.n_events}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise PreconditionError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.n_bins < 8:
            raise PreconditionError(f"n_bins must be >= 8, got {self.n_bins}")
        if self.x_period is not None and not self.x_period > 0.0:
            raise PreconditionError("x_period must be > 0")

    def period(self, k: float) -> float:
        period = math.pi / k
        if self.x_period is not None and abs(self.x_period - period) > 1e-12 * period:
            raise PreconditionError(f"x_period {self.x_period} does not match pi/k = {period}")
        return period


@dataclass(frozen=True)
class VisibilityEstimate:
    v_hat: float
    v_err: float
    phase_hat: float
    n_events: int

    @property
    def phase_err(self) -> float:
        """Approximate one-sigma error of ``phase_hat`` (large N, nonzero visibility)."""
        if self.v_hat == 0.0:
            return math.inf
        return math.sqrt(2.0 / self.n_events) / self.v_hat


def fringe_cdf(theta, contrast: float, shift: float):
    """CDF on [0, 2pi) of the density ``(1 + contrast cos(theta - shift)) / 2pi``."""
    theta = np.asarray(theta, dtype=float)
    return (theta + contrast * (np.sin(theta - shift) + math.sin(shift))) / (2.0 * math.pi)


def invert_fringe_cdf(
    u: np.ndarray, contrast: float, shift: float, tol: float = ROOT_TOL, grid_size: int = 2049
) -> np.ndarray:
    """Solve ``fringe_cdf(theta) = u`` by bracketed (safeguarded) Newton iteration.

    Each root starts from the grid cell of a tabulated CDF that brackets it,
    with a linear-interpolation first guess; Newton steps leaving the
    bracket fall back to bisection.
    """
    u = np.asarray(u, dtype=float)
    target = 2.0 * math.pi * u
    if contrast == 0.0:
        return target.copy()
    offset = contrast * math.sin(shift)

    grid = np.linspace(0.0, 2.0 * math.pi, grid_size)
    cdf = fringe_cdf(grid, contrast, shift)
    cdf[0], cdf[-1] = 0.0, 1.0
    j = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, grid_size - 2)
    lo, hi = grid[j], grid[j + 1]
    width = cdf[j + 1] - cdf[j]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(width > 0.0, (u - cdf[j]) / width, 0.5)
    theta = lo + np.clip(frac, 0.0, 1.0) * (hi - lo)

    idx = np.arange(theta.size)
    th, lo, hi, tgt = theta, lo, hi, target
    for _ in range(200):
        g = th + contrast * np.sin(th - shift) + offset - tgt
        dg = 1.0 + contrast * np.cos(th - shift)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dg > 0.0, g / dg, np.inf)
        converged = np.abs(step) <= tol
        neg = g < 0.0
        lo = np.where(neg, th, lo)
        hi = np.where(neg, hi, th)
        new = th - step
        outside = ~((new >= lo) & (new <= hi))
        new = np.where(outside & ~converged, 0.5 * (lo + hi), new)
        theta[idx] = new
        keep = ~(converged | (hi - lo <= tol))
        if not keep.any():
            break
        idx, th, lo, hi, tgt = idx[keep], new[keep], lo[keep], hi[keep], tgt[keep]
    return theta


def _shard_uniforms(seed: int, shard: int, size: int) -> np.ndarray:
    ss = np.random.SeedSequence(seed, spawn_key=(shard,))
    return np.random.Generator(np.random.PCG64(ss)).random(size)


def sample_positions(
    state: OnePhotonState,
    resp: ResponseLike,
    scale: FieldScale | None,
    k: float,
    cfg: SamplerConfig,
    workers: int = 1,
) -> np.ndarray:
    """Draw ``cfg.n_events`` detection positions in ``[0, pi/k)``.

    Deterministic for a fixed config; ``workers`` only changes wall time.
    """
    period = cfg.period(k)
    mean, contrast, shift = fringe_coefficients(state, resp, scale)
    if mean <= 0.0:
        raise PreconditionError("detection probability vanishes everywhere; nothing to sample")

    n = int(cfg.n_events)
    bounds = [(s, min(s + SHARD_SIZE, n)) for s in range(0, n, SHARD_SIZE)]

    def run(i: int) -> np.ndarray:
        start, stop = bounds[i]
        u = _shard_uniforms(int(cfg.seed), i, stop - start)
        return invert_fringe_cdf(u, contrast, shift)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(bounds))))
    else:
        parts = [run(i) for i in range(len(bounds))]
    theta = np.concatenate(parts)
    x = theta * (period / (2.0 * math.pi))
    # theta can round up to 2*pi for u just below 1
    return np.minimum(x, np.nextafter(period, 0.0))


def estimate_visibility(positions, k: float, cfg: SamplerConfig | None = None) -> VisibilityEstimate:
    """Visibility and fringe shift from the first circular moment of ``2 k x``.

    ``v_hat = 2|m|`` clipped to [0, 1] and ``phase_hat = arg m`` (the
    ``phi + delta`` convention of the fringe). ``v_err`` is the large-N
    delta-method one-sigma ``sqrt((2 - v_hat^2) / N)``.
    """
    x = np.asarray(positions, dtype=float)
    n = x.size
    if n < MIN_EVENTS_FOR_ESTIMATE:
        raise PreconditionError(f"need at least {MIN_EVENTS_FOR_ESTIMATE} events, got {n}")
    m = np.mean(np.exp(2j * k * x))
    v_hat = min(2.0 * abs(m), 1.0)
    return VisibilityEstimate(
        v_hat=v_hat,
        v_err=math.sqrt((2.0 - v_hat**2) / n),
        phase_hat=float(np.angle(m)) if m != 0 else 0.0,
        n_events=n,
    )


def histogram_chi2(positions, state, resp, scale, k: float, cfg: SamplerConfig) -> tuple[float, float]:
    """Pearson chi-square of binned positions against the analytic density; returns (statistic, p)."""
    from scipy import stats

    period = cfg.period(k)
    _, contrast, shift = fringe_coefficients(state, resp, scale)
    edges = np.linspace(0.0, period, cfg.n_bins + 1)
    observed, _ = np.histogram(positions, bins=edges)
    cdf = fringe_cdf(edges * (2.0 * math.pi / period), contrast, shift)
    expected = np.diff(cdf) * len(positions)
    keep = expected > 0.0
    if np.any(observed[~keep]):
        return math.inf, 0.0
    expected = expected[keep] * (observed[keep].sum() / expected[keep].sum())
    result = stats.chisquare(observed[keep], expected)
    return float(result.statistic), float(result.pvalue)


def events_table(positions, state: OnePhotonState, resp: ResponseLike, k: float, cfg: SamplerConfig, phi=None) -> ScanTable:
    """Single-column event list with the metadata needed to regenerate it."""
    meta = {
        "seed": int(cfg.seed),
        "n_events": int(cfg.n_events),
        "zeta": as_zeta(resp),
        "phi": phi,
        "alpha": state.alpha,
        "beta": state.beta,
        "k": k,
        "rng": RNG_ALGORITHM,
    }
    return ScanTable({"x": np.asarray(positions)}, meta)
