"""Sojourn sets of a path inside the envelope |B_t| <= t^gamma.

The sojourn set of a sampled path is read off the grid: a time t = j*delta is
a hit when |B_t| <= t^gamma.  Hits are tallied per dyadic annulus
S_n = [2^{n-1}, 2^n) as occupied unit cells, hit counts, and a Riemann
approximation of the Lebesgue measure.  A hit between grid points can be
missed; the bias shrinks once the envelope t^gamma dominates the path
oscillation over one grid step, which drives the resolution choices of the
experiment harness.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fbm import FbmPath, HurstIndex, covariance_R
from .rng import stream

__all__ = [
    "GammaExponent",
    "SojournRecord",
    "HitProbEstimate",
    "extract_sojourn",
    "sojourn_measure_S",
    "boundary_hit_probability",
]


@dataclass(frozen=True)
class GammaExponent:
    """Envelope exponent gamma, restricted to [0, H) for Hurst index H."""

    gamma: float
    h: HurstIndex

    def __post_init__(self):
        if not 0.0 <= self.gamma < self.h.h:
            raise ValueError(f"gamma must lie in [0, H) = [0, {self.h.h}), got {self.gamma}")


@dataclass
class SojournRecord:
    """Per-annulus tallies of envelope hits for one path.

    For each annulus n = 1..N: the sorted occupied unit cells, the number of
    hit grid samples, and hit_count * delta as the Lebesgue approximation.
    """

    gamma: GammaExponent
    horizon_exponent: int
    resolution_exponent: int
    cells_by_annulus: dict[int, np.ndarray]
    hits_by_annulus: dict[int, int]
    leb_by_annulus: dict[int, float]

    @property
    def total_cells(self) -> int:
        return sum(len(c) for c in self.cells_by_annulus.values())


def extract_sojourn(path: FbmPath, gamma: GammaExponent) -> SojournRecord:
    """Tally the envelope hits of ``path`` per dyadic annulus.

    Time 0 is excluded and so is the closing sample at exactly 2^N, which
    falls outside the half-open annulus S_N.
    """
    if gamma.h != path.h:
        raise ValueError(f"gamma was built for H={gamma.h.h}, path has H={path.h.h}")
    n_annuli = path.horizon_exponent
    delta = path.delta
    times = np.arange(1, path.samples.size) * delta
    hits = np.abs(path.samples[1:]) <= times**gamma.gamma

    hit_times = times[hits]
    hit_cells = hit_times.astype(np.int64)
    keep = (hit_cells >= 1) & (hit_cells < 2**n_annuli)
    hit_cells = hit_cells[keep]
    annulus = np.frexp(hit_cells.astype(np.float64))[1]  # bit length: S_n owns [2^{n-1}, 2^n)

    cells_by_annulus = {}
    hits_by_annulus = {}
    leb_by_annulus = {}
    for n in range(1, n_annuli + 1):
        in_annulus = annulus == n
        count = int(np.count_nonzero(in_annulus))
        cells_by_annulus[n] = np.unique(hit_cells[in_annulus])
        hits_by_annulus[n] = count
        leb_by_annulus[n] = count * delta
    return SojournRecord(
        gamma=gamma,
        horizon_exponent=n_annuli,
        resolution_exponent=path.resolution_exponent,
        cells_by_annulus=cells_by_annulus,
        hits_by_annulus=hits_by_annulus,
        leb_by_annulus=leb_by_annulus,
    )


def sojourn_measure_S(path: FbmPath, gamma: GammaExponent, t: float) -> float:
    """Riemann approximation of Leb{0 <= s <= t : |B_s| <= s^gamma}."""
    if gamma.h != path.h:
        raise ValueError(f"gamma was built for H={gamma.h.h}, path has H={path.h.h}")
    if not 0.0 < t <= path.horizon:
        raise ValueError(f"t must lie in (0, 2^{path.horizon_exponent}], got {t}")
    delta = path.delta
    j_max = int(np.floor(t / delta + 1e-9))
    times = np.arange(1, j_max + 1) * delta
    hits = np.abs(path.samples[1 : j_max + 1]) <= times**gamma.gamma
    return float(np.count_nonzero(hits) * delta)


# ---------------------------------------------------------------------------
# Boundary-hit probabilities on windows around t = 1
# ---------------------------------------------------------------------------

@dataclass
class HitProbEstimate:
    """Monte Carlo estimate of a window hit probability."""

    probability: float
    stderr: float
    threshold: float
    epsilon: float
    side: str
    replicas: int


@lru_cache(maxsize=8)
def _window_cholesky(h_value: float, epsilon: float, side: str, resolution: int) -> np.ndarray:
    """Cholesky factor of the joint law of (B_anchor, scaled window increments).

    The window increments from the anchor are an FBM in law (stationary
    increments); dividing them by epsilon^H reduces their covariance to the
    unit-grid kernel, which keeps the matrix well scaled for factorization.
    """
    anchor = 1.0 - epsilon if side == "before" else 1.0
    m = 2**resolution
    u = np.arange(1, m + 1) / m  # scaled offsets within (0, 1]
    h = HurstIndex(h_value)
    two_h = 2.0 * h_value

    cov = np.empty((m + 1, m + 1))
    cov[0, 0] = anchor**two_h
    offs = epsilon * u
    cross = 0.5 * ((anchor + offs) ** two_h - anchor**two_h - offs**two_h) * epsilon**-h_value
    cov[0, 1:] = cross
    cov[1:, 0] = cross
    cov[1:, 1:] = covariance_R(u[:, None], u[None, :], h)

    jitter = 0.0
    scale = float(np.mean(np.diag(cov)))
    for attempt in range(6):
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(m + 1))
        except np.linalg.LinAlgError:
            jitter = scale * 10.0 ** (attempt - 14)
    raise np.linalg.LinAlgError(f"window covariance not factorizable (H={h_value}, eps={epsilon})")


@lru_cache(maxsize=8)
def _window_abs_minima(
    h_value: float, epsilon: float, side: str, replicas: int, resolution: int, seed: int
) -> np.ndarray:
    """Per-replica minimum of |B| over the window grid, for threshold reuse."""
    factor = _window_cholesky(h_value, epsilon, side, resolution)
    m = factor.shape[0] - 1
    amplitude = epsilon**h_value
    g = stream(seed)
    minima = np.empty(replicas)
    done = 0
    chunk = max(1, min(replicas, 2**22 // (m + 1)))
    while done < replicas:
        batch = min(chunk, replicas - done)
        z = g.standard_normal((m + 1, batch))
        vals = factor @ z
        interior = np.abs(vals[:1, :] + amplitude * vals[1:, :]).min(axis=0)
        minima[done : done + batch] = np.minimum(interior, np.abs(vals[0, :]))
        done += batch
    minima.setflags(write=False)
    return minima


def boundary_hit_probability(
    h: HurstIndex,
    gamma: float,
    epsilon: float,
    side: str,
    replicas: int,
    fine_resolution: int = 12,
    seed: int = 0,
) -> HitProbEstimate:
    """Monte Carlo probability that |B| dips under the window threshold.

    side="before" samples the window [1-eps, 1] against the threshold
    eps^{H-gamma}; side="after" samples [1, 1+eps] against 2 eps^{H-gamma}.
    The window is simulated exactly from the joint Gaussian law of the
    anchor value and the local increments on a grid of 2^fine_resolution
    steps (spacing eps * 2^-fine_resolution).
    """
    if side not in ("before", "after"):
        raise ValueError(f"side must be 'before' or 'after', got {side!r}")
    if not 0.0 < epsilon < 0.5:
        raise ValueError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    if replicas < 100:
        raise ValueError(f"need at least 100 replicas for a meaningful estimate, got {replicas}")
    if not 0.0 <= gamma < h.h:
        raise ValueError(f"gamma must lie in [0, H), got {gamma}")

    threshold = epsilon ** (h.h - gamma)
    if side == "after":
        threshold *= 2.0
    minima = _window_abs_minima(h.h, epsilon, side, replicas, fine_resolution, seed)
    p = float(np.mean(minima <= threshold))
    stderr = float(np.sqrt(p * (1.0 - p) / replicas))
    return HitProbEstimate(
        probability=p,
        stderr=stderr,
        threshold=threshold,
        epsilon=epsilon,
        side=side,
        replicas=replicas,
    )
