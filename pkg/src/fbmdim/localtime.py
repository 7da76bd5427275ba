"""Occupation-density local time, level sets, and derived statistics.

The local time L^x_t is the density at level x of the occupation measure of
the path up to time t.  On a sampled path it is estimated by binned
occupation: time spent within a level band of half-width ``bandwidth``,
divided by the band width.  Level sets are extracted from band hits plus
sign changes between adjacent samples, which keeps crossing cells even when
no sample lands inside the band.

The partial-sum series tracks the normalized local-time increment per
annulus,

    Y_n = (L^{x 2^{nH}}_{2^n} - L^{x 2^{nH}}_{2^{n-1}}) / 2^{n(1-H)},

whose terms share one distribution across n by self-similarity and whose
partial sums diverge almost surely; the modulus statistic bounds increments
of local time uniformly over levels, windows, and window lengths.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import QuadratureError
from .fbm import FbmPath, HurstIndex

__all__ = [
    "LocalTimeGrid",
    "LevelSetRecord",
    "PartialSumSeries",
    "occupation_localtime",
    "expected_localtime_increment",
    "level_set_extract",
    "partial_sum_series",
    "xiao_modulus_stat",
    "DEFAULT_BANDWIDTH_SCALE",
]

#: Level-bin half-width per annulus n is this factor times 2^{nH}, keeping the
#: relative bin resolution constant across annuli.
DEFAULT_BANDWIDTH_SCALE = 0.05


@dataclass
class LocalTimeGrid:
    """Occupation-density estimates on a levels x checkpoints grid."""

    levels: np.ndarray
    checkpoints: np.ndarray
    values: np.ndarray  # shape (len(levels), len(checkpoints))
    bandwidth: float


@dataclass
class LevelSetRecord:
    """Cells visited by the level set {t : B_t = x} of a sampled path."""

    x: float
    bandwidth: float
    horizon_exponent: int
    resolution_exponent: int
    cells: np.ndarray  # all occupied cells, including cell 0 when hit

    @property
    def cells_by_annulus(self) -> dict[int, np.ndarray]:
        """Cells per annulus S_n, n >= 1 (cell 0 belongs to S_0 and is dropped)."""
        out = {}
        positive = self.cells[self.cells >= 1]
        annulus = np.frexp(positive.astype(np.float64))[1]
        for n in range(1, self.horizon_exponent + 1):
            out[n] = positive[annulus == n]
        return out


@dataclass
class PartialSumSeries:
    """Per-annulus normalized local-time increments Y and partial sums F."""

    x: float
    h: HurstIndex
    terms: np.ndarray  # Y[n], index 0 holds n=1
    partial_sums: np.ndarray
    bandwidth_scale: float


def occupation_localtime(path: FbmPath, levels, checkpoints, bandwidth: float) -> LocalTimeGrid:
    """Binned occupation density L[x][t] on a grid of levels and times.

    L[x][t] = delta * #{j : 0 < j delta <= t, |B_{j delta} - x| <= bandwidth}
              / (2 * bandwidth).
    """
    levels = np.atleast_1d(np.asarray(levels, dtype=float))
    checkpoints = np.atleast_1d(np.asarray(checkpoints, dtype=float))
    if levels.size == 0 or checkpoints.size == 0:
        raise ValueError("levels and checkpoints must be non-empty")
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    if np.any(checkpoints <= 0) or np.any(checkpoints > path.horizon + 1e-9):
        raise ValueError("checkpoints must lie in (0, horizon]")
    levels = np.sort(levels)
    checkpoints = np.sort(checkpoints)

    delta = path.delta
    values = np.empty((levels.size, checkpoints.size))
    for col, t in enumerate(checkpoints):
        j_max = int(np.floor(t / delta + 1e-9))
        prefix = np.sort(path.samples[1 : j_max + 1])
        lo = np.searchsorted(prefix, levels - bandwidth, side="left")
        hi = np.searchsorted(prefix, levels + bandwidth, side="right")
        values[:, col] = (hi - lo) * delta / (2.0 * bandwidth)
    return LocalTimeGrid(levels=levels, checkpoints=checkpoints, values=values, bandwidth=bandwidth)


def expected_localtime_increment(x: float, s: float, t: float, h: HurstIndex, tolerance: float = 1e-10) -> float:
    """E[L^x_t - L^x_s] = (2 pi)^{-1/2} * integral_s^t exp(-x^2/(2 u^{2H})) u^{-H} du."""
    if not 0.0 < s < t:
        raise ValueError(f"need 0 < s < t, got s={s}, t={t}")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    two_h = 2.0 * h.h

    def integrand(u: float) -> float:
        return np.exp(-x * x / (2.0 * u**two_h)) * u**-h.h

    val, err = quad(integrand, s, t, epsabs=tolerance * np.sqrt(2.0 * np.pi) / 2.0, epsrel=1e-12, limit=200)
    if not np.isfinite(val) or err > tolerance * np.sqrt(2.0 * np.pi):
        raise QuadratureError(f"local-time increment quadrature stalled: error estimate {err}")
    return float(val / np.sqrt(2.0 * np.pi))


def level_set_extract(path: FbmPath, x: float, bandwidth: float = 0.0) -> LevelSetRecord:
    """Cells containing a band hit |B - x| <= bandwidth or a sign change of B - x.

    A sign change between adjacent samples marks the cell of the left sample,
    which is where the crossing lies for grid spacings <= 1.
    """
    if bandwidth < 0:
        raise ValueError(f"bandwidth must be nonnegative, got {bandwidth}")
    diff = path.samples - x
    times = np.arange(path.samples.size) * path.delta

    hit = np.abs(diff) <= bandwidth
    crossing = diff[:-1] * diff[1:] < 0.0

    cells = np.concatenate([times[:-1][crossing], times[hit]]).astype(np.int64)
    cells = np.unique(cells[cells < 2**path.horizon_exponent])
    return LevelSetRecord(
        x=x,
        bandwidth=bandwidth,
        horizon_exponent=path.horizon_exponent,
        resolution_exponent=path.resolution_exponent,
        cells=cells,
    )


def partial_sum_series(
    path: FbmPath, x: float, bandwidth_scale: float = DEFAULT_BANDWIDTH_SCALE
) -> PartialSumSeries:
    """Normalized local-time increments per annulus and their partial sums.

    Term n measures the local time accumulated at level x * 2^{nH} during
    (2^{n-1}, 2^n], normalized by 2^{n(1-H)}; the level bin half-width is
    bandwidth_scale * 2^{nH}, tracking the path amplitude.
    """
    if bandwidth_scale <= 0:
        raise ValueError("bandwidth_scale must be positive")
    n_annuli = path.horizon_exponent
    hurst = path.h.h
    delta = path.delta
    terms = np.empty(n_annuli)
    for n in range(1, n_annuli + 1):
        level = x * 2.0 ** (n * hurst)
        bw = bandwidth_scale * 2.0 ** (n * hurst)
        j_lo = int(2 ** (n - 1) / delta)  # first index with j delta > 2^{n-1}
        j_hi = int(2**n / delta)
        window = path.samples[j_lo + 1 : j_hi + 1]
        count = int(np.count_nonzero(np.abs(window - level) <= bw))
        increment = count * delta / (2.0 * bw)
        terms[n - 1] = increment / 2.0 ** (n * (1.0 - hurst))
    return PartialSumSeries(
        x=x,
        h=path.h,
        terms=terms,
        partial_sums=np.cumsum(terms),
        bandwidth_scale=bandwidth_scale,
    )


def xiao_modulus_stat(
    path: FbmPath,
    n: int,
    probe_counts: tuple[int, int, int] = (16, 16, 16),
    bandwidth: float | None = None,
) -> float:
    """Discrete maximization of the normalized local-time increment modulus.

    Scans (L^x_{t+h} - L^x_t) / (h^{1-H} (n - log2 h)^H) over a probe grid:
    uniform window starts t <= 2^n, log-spaced window lengths h <= 2^{n-1},
    and levels spanning the visited range.  A lower bound for the continuum
    supremum by construction.
    """
    num_t, num_h, num_x = probe_counts
    if min(num_t, num_h, num_x) < 1:
        raise ValueError("probe counts must be positive")
    if 2**n + 2 ** (n - 1) > path.horizon:
        raise ValueError(f"need horizon >= 1.5 * 2^n to scan windows, got n={n}, N={path.horizon_exponent}")
    hurst = path.h.h
    if bandwidth is None:
        bandwidth = DEFAULT_BANDWIDTH_SCALE * 2.0 ** (n * hurst)
    delta = path.delta
    j_span = int(1.5 * 2**n / delta)
    segment = path.samples[: j_span + 1]

    levels = np.linspace(segment.min(), segment.max(), num_x)
    h_grid = np.unique(np.geomspace(max(delta, 1.0), 2.0 ** (n - 1), num_h))
    t_grid = np.linspace(0.0, 2.0**n, num_t)

    # prefix counts per level turn every window increment into two lookups
    prefixes = np.empty((num_x, segment.size), dtype=np.int64)
    for i, x in enumerate(levels):
        inside = np.abs(segment - x) <= bandwidth
        inside[0] = False  # occupation counts samples at j >= 1
        np.cumsum(inside, out=prefixes[i])

    best = 0.0
    for h_len in h_grid:
        norm = h_len ** (1.0 - hurst) * (n - np.log2(h_len)) ** hurst
        for t in t_grid:
            j1 = int(np.floor(t / delta + 1e-9))
            j2 = int(np.floor((t + h_len) / delta + 1e-9))
            counts = prefixes[:, j2] - prefixes[:, j1]
            increment = counts.max() * delta / (2.0 * bandwidth)
            best = max(best, increment / norm)
    return float(best)
