"""Covering functionals and large-scale dimension estimators.

For a set E restricted to the dyadic annulus S_n = [2^{n-1}, 2^n), the
covering functional at exponent rho in [0, 1] is the infimum over finite
covers of E by integer-boundary intervals I inside S_n of

    sum (len(I) / 2^n)^rho                      (plain)
    sum (len(I) / 2^n)^rho |log2(len(I)/2^n)|^{1-rho}    (log_weighted)

On an empirical set given by occupied unit cells the infimum is attained by
partitions of the cells into contiguous groups, each covered by its convex
hull: any cover can be shrunk to the hulls of the cells it covers without
increasing cost, because the per-interval cost is subadditive in the length
for every rho <= 1.  The one exception is the log-weighted cost, which is
decreasing in the length once rho(n - log2 len) < (1-rho)/ln 2; there the
cost of a group is min(hull cost, full-annulus interval cost), and a cover
containing a full-annulus interval absorbs everything else, so the optimum
is either a pure hull partition or that single interval.

The hull-partition optimum is a dynamic program over contiguous groups,
O(m^2) in the number of maximal runs of adjacent cells.  An exhaustive
enumeration over all 2^{m-1} contiguous partitions of the raw cells (with
per-group interval length optimized by table lookup straight from the
definition) serves as the oracle.

Densities and the critical covering exponent are estimated from per-annulus
statistics by least-squares slopes of base-2 logarithms against the annulus
index; the critical exponent is the interpolated root of the slope-vs-rho
curve.
"""

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numba import njit
from scipy.stats import linregress

__all__ = [
    "AnnulusCellSet",
    "NuValue",
    "DimensionEstimate",
    "InequalityReport",
    "nu_exact",
    "nu_bruteforce",
    "nu_slope_curve",
    "den_log_estimate",
    "den_pix_estimate",
    "dimh_estimate",
    "dimh_estimate_pooled",
    "dimension_inequality_check",
    "alpha_grid_set",
    "default_rho_grid",
]

Variant = Literal["plain", "log_weighted"]

BRUTEFORCE_MAX_CELLS = 15


@dataclass
class AnnulusCellSet:
    """Occupied unit cells [c, c+1) inside the annulus S_n = [2^{n-1}, 2^n)."""

    n: int
    cells: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"annulus index must be >= 1, got {self.n}")
        cells = np.asarray(self.cells, dtype=np.int64)
        if cells.ndim != 1:
            raise ValueError("cells must be one-dimensional")
        if cells.size:
            if np.any(np.diff(cells) <= 0):
                raise ValueError("cells must be sorted and unique")
            lo, hi = 2 ** (self.n - 1), 2**self.n
            if cells[0] < lo or cells[-1] >= hi:
                raise ValueError(f"cells must lie in [{lo}, {hi}) for annulus {self.n}")
        self.cells = cells


@dataclass
class NuValue:
    """Optimal covering cost of a cell set, with the realizing partition.

    ``partition`` lists the covering intervals [a, b) in order; its groups
    are disjoint and jointly cover the input cells, and ``value`` equals the
    summed interval costs exactly.
    """

    rho: float
    n: int
    value: float
    partition: list[tuple[int, int]]
    variant: Variant


@dataclass
class DimensionEstimate:
    """A density or dimension point estimate with regression diagnostics."""

    estimand: Literal["den_log", "den_pix", "dim_h"]
    point: float
    fit_range: tuple[int, int]
    stderr: float
    slope_curve: list[tuple[float, float]] = field(default_factory=list)
    replica_spread: float = 0.0
    boundary: bool = False
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Exact evaluation
# ---------------------------------------------------------------------------

@njit(cache=True)
def _interval_cost(length: float, scale: float, rho: float, log_weighted: bool) -> float:
    rel = length * scale
    cost = rel**rho
    if log_weighted:
        cost *= (-np.log2(rel)) ** (1.0 - rho)
    return cost


@njit(cache=True)
def _hull_partition_dp(starts, ends, scale, rho, log_weighted):
    """Min-cost partition of cell blocks into contiguous hull-covered groups.

    Returns (value, parents); parents[i] is the first block of the group
    ending at block i.  Ties resolve to fewer intervals, then to the longest
    (leftmost-starting) final group.
    """
    n_blocks = starts.size
    best_cost = np.empty(n_blocks + 1)
    best_count = np.zeros(n_blocks + 1, dtype=np.int64)
    parents = np.full(n_blocks, -1, dtype=np.int64)
    best_cost[0] = 0.0
    for i in range(n_blocks):
        end_i = ends[i]
        cur = np.inf
        cur_count = 0
        cur_j = -1
        for j in range(i, -1, -1):
            raw = _interval_cost(float(end_i - starts[j]), scale, rho, log_weighted)
            if not log_weighted and raw > cur:
                break  # spans only grow leftward and the plain cost is monotone
            cand = best_cost[j] + raw
            cand_count = best_count[j] + 1
            if cand < cur or (cand == cur and cand_count <= cur_count):
                cur = cand
                cur_count = cand_count
                cur_j = j
        best_cost[i + 1] = cur
        best_count[i + 1] = cur_count
        parents[i] = cur_j
    return best_cost[n_blocks], parents


def _cell_blocks(cells: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Collapse sorted cells into maximal runs; returns (starts, ends) with ends exclusive."""
    breaks = np.flatnonzero(np.diff(cells) > 1)
    starts = cells[np.concatenate(([0], breaks + 1))]
    ends = cells[np.concatenate((breaks, [cells.size - 1]))] + 1
    return starts, ends


def nu_exact(cells: AnnulusCellSet, rho: float, variant: Variant = "plain") -> NuValue:
    """Exact optimal covering cost of ``cells`` at exponent ``rho``.

    Dynamic programming over contiguous hull-covered groups; for the
    log-weighted variant the single full-annulus interval is checked as the
    only non-hull alternative that can beat a hull partition.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    log_weighted = _check_variant(variant)
    n = cells.n
    if cells.cells.size == 0:
        return NuValue(rho=rho, n=n, value=0.0, partition=[], variant=variant)
    scale = 2.0**-n
    starts, ends = _cell_blocks(cells.cells)
    value, parents = _hull_partition_dp(starts, ends, scale, rho, log_weighted)

    if log_weighted:
        annulus_len = float(2 ** (n - 1))
        full_cost = _interval_cost(annulus_len, scale, rho, True)
        if full_cost < value:
            partition = [(2 ** (n - 1), 2**n)]
            return NuValue(rho=rho, n=n, value=float(full_cost), partition=partition, variant=variant)

    partition = []
    i = starts.size - 1
    while i >= 0:
        j = parents[i]
        partition.append((int(starts[j]), int(ends[i])))
        i = j - 1
    partition.reverse()
    return NuValue(rho=rho, n=n, value=float(value), partition=partition, variant=variant)


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

@njit(cache=True)
def _cost_tables(max_len: int, scale: float, rho: float, log_weighted: bool):
    """Per-length interval cost and its suffix minimum over lengths <= max_len."""
    cost = np.empty(max_len + 1)
    cost[0] = np.inf
    for length in range(1, max_len + 1):
        cost[length] = _interval_cost(float(length), scale, rho, log_weighted)
    suffix_min = cost.copy()
    for length in range(max_len - 1, 0, -1):
        if suffix_min[length + 1] < suffix_min[length]:
            suffix_min[length] = suffix_min[length + 1]
    return cost, suffix_min


@njit(cache=True)
def _enumerate_partitions(cells, suffix_min):
    """Exhaustive minimum over all contiguous-group partitions of the cells.

    Each group is covered by the cheapest admissible interval at least as
    long as its hull (suffix-min lookup).  Returns (value, best break mask).
    """
    m = cells.size
    best = np.inf
    best_mask = 0
    for mask in range(1 << (m - 1)):
        total = 0.0
        start = 0
        for b in range(m - 1):
            if (mask >> b) & 1:
                total += suffix_min[cells[b] - cells[start] + 1]
                start = b + 1
                if total >= best:
                    break
        if total < best:
            total += suffix_min[cells[m - 1] - cells[start] + 1]
            if total < best:
                best = total
                best_mask = mask
    return best, best_mask


def nu_bruteforce(cells: AnnulusCellSet, rho: float, variant: Variant = "plain") -> NuValue:
    """Definition-level oracle for ``nu_exact``, limited to small cell sets."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    log_weighted = _check_variant(variant)
    n = cells.n
    if cells.cells.size == 0:
        return NuValue(rho=rho, n=n, value=0.0, partition=[], variant=variant)
    if cells.cells.size > BRUTEFORCE_MAX_CELLS:
        raise ValueError(f"brute force limited to {BRUTEFORCE_MAX_CELLS} cells, got {cells.cells.size}")
    annulus_len = 2 ** (n - 1)
    cost, suffix_min = _cost_tables(annulus_len, 2.0**-n, rho, log_weighted)
    value, mask = _enumerate_partitions(cells.cells, suffix_min)

    partition = []
    group = [int(cells.cells[0])]
    for idx in range(1, cells.cells.size + 1):
        done = idx == cells.cells.size
        if done or (mask >> (idx - 1)) & 1:
            hull = group[-1] - group[0] + 1
            length = hull + int(np.argmin(cost[hull : annulus_len + 1]))
            a = min(group[0], 2**n - length)
            partition.append((a, a + length))
            if not done:
                group = [int(cells.cells[idx])]
        else:
            group.append(int(cells.cells[idx]))
    return NuValue(rho=rho, n=n, value=float(value), partition=partition, variant=variant)


def _check_variant(variant: str) -> bool:
    if variant not in ("plain", "log_weighted"):
        raise ValueError(f"unknown variant {variant!r}")
    return variant == "log_weighted"


# ---------------------------------------------------------------------------
# Per-annulus statistics -> dimension estimates
# ---------------------------------------------------------------------------

def _by_annulus(records, attribute: str) -> dict:
    """Accept a record object exposing ``attribute`` or a plain mapping."""
    data = getattr(records, attribute, records)
    return dict(data)


def _fit_slope(ns, logs):
    fit = linregress(ns, logs)
    return float(fit.slope), float(fit.stderr)


def _cumulative_log2_fit(per_annulus: dict, fit_range: tuple[int, int], min_points: int):
    n_min, n_max = fit_range
    if n_max < n_min:
        raise ValueError(f"empty fit range {fit_range}")
    top = max(per_annulus) if per_annulus else 0
    cumulative = {}
    running = 0.0
    for n in range(1, max(top, n_max) + 1):
        running += float(per_annulus.get(n, 0.0))
        cumulative[n] = running
    ns, logs = [], []
    for n in range(n_min, n_max + 1):
        if cumulative.get(n, 0.0) > 0.0:
            ns.append(n)
            logs.append(np.log2(cumulative[n]))
    if len(ns) < min_points:
        raise ValueError(
            f"need at least {min_points} annuli with positive mass in {fit_range}, found {len(ns)}"
        )
    return np.array(ns), np.array(logs)


def den_log_estimate(records, fit_range: tuple[int, int]) -> DimensionEstimate:
    """Growth exponent of the Lebesgue measure of E over [1, 2^n].

    Least-squares slope of log2 Leb(E cap [1, 2^n]) against n over the fit
    range, clamped to [0, 1].
    """
    leb = _by_annulus(records, "leb_by_annulus")
    ns, logs = _cumulative_log2_fit(leb, fit_range, min_points=4)
    slope, stderr = _fit_slope(ns, logs)
    return DimensionEstimate(
        estimand="den_log",
        point=float(np.clip(slope, 0.0, 1.0)),
        fit_range=fit_range,
        stderr=stderr,
        diagnostics={"per_annulus_log2": list(zip(ns.tolist(), logs.tolist()))},
    )


def den_pix_estimate(records, fit_range: tuple[int, int]) -> DimensionEstimate:
    """Growth exponent of the occupied-cell count of E over [1, 2^n]."""
    cells = _by_annulus(records, "cells_by_annulus")
    counts = {n: len(c) for n, c in cells.items()}
    ns, logs = _cumulative_log2_fit(counts, fit_range, min_points=4)
    slope, stderr = _fit_slope(ns, logs)
    return DimensionEstimate(
        estimand="den_pix",
        point=float(np.clip(slope, 0.0, 1.0)),
        fit_range=fit_range,
        stderr=stderr,
        diagnostics={"per_annulus_log2": list(zip(ns.tolist(), logs.tolist()))},
    )


#: How many noise standard errors below zero a fitted slope may sit and still
#: count as part of the zero plateau of s(rho).  The covering-cost slope of a
#: clustered set is flat (within noise) up to the critical exponent and
#: decays linearly after it, so the root is read where the slope becomes
#: significantly negative.
SLOPE_NOISE_Z = 1.0


def default_rho_grid(step: float = 0.05) -> np.ndarray:
    if not 0.0 < step <= 0.05:
        raise ValueError(f"rho step must lie in (0, 0.05], got {step}")
    count = int(round(1.0 / step)) + 1
    return np.linspace(0.0, 1.0, count)


def _validate_rho_grid(rho_grid) -> np.ndarray:
    rho_grid = np.asarray(rho_grid, dtype=float)
    if rho_grid[0] > 1e-9 or rho_grid[-1] < 1.0 - 1e-9 or np.max(np.diff(rho_grid)) > 0.05 + 1e-12:
        raise ValueError("rho_grid must span [0, 1] with step <= 0.05")
    return rho_grid


def nu_slope_curve(
    records,
    fit_range: tuple[int, int],
    rho_grid=None,
    variant: Variant = "plain",
) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict]:
    """Fitted slope of log2 nu^n_rho against n, per rho.

    Returns (rho_grid, slopes, stderrs, nu_table) where nu_table maps
    (rho, n) to the exact covering cost; annuli with empty covers are
    excluded from the fits and slopes needing fewer than 3 annuli are NaN.
    """
    rho_grid = default_rho_grid() if rho_grid is None else _validate_rho_grid(rho_grid)
    n_min, n_max = fit_range
    if n_max - n_min + 1 < 5:
        raise ValueError(f"fit range {fit_range} must contain at least 5 annuli")
    cells = _by_annulus(records, "cells_by_annulus")
    annuli = [
        AnnulusCellSet(n, np.asarray(cells.get(n, ()), dtype=np.int64))
        for n in range(n_min, n_max + 1)
    ]
    slopes = np.full(rho_grid.size, np.nan)
    stderrs = np.full(rho_grid.size, np.nan)
    table = {}
    for k, rho in enumerate(rho_grid):
        ns, logs = [], []
        for cell_set in annuli:
            if cell_set.cells.size == 0:
                continue
            value = nu_exact(cell_set, float(rho), variant).value
            table[(float(rho), cell_set.n)] = value
            if value > 0.0:
                ns.append(cell_set.n)
                logs.append(np.log2(value))
        if len(ns) >= 3:
            slopes[k], stderrs[k] = _fit_slope(np.array(ns), np.array(logs))
    return rho_grid, slopes, stderrs, table


def _root_from_slope_curve(rho_grid, slopes, stderrs, fit_range) -> DimensionEstimate:
    """Rightmost departure of s(rho) from its zero plateau, interpolated."""
    valid = np.isfinite(slopes)
    if not valid.any():
        raise ValueError("no annulus in the fit range produced a positive covering cost")
    noise = np.where(np.isfinite(stderrs), stderrs, 0.0)
    threshold = -SLOPE_NOISE_Z * np.maximum(noise, 1e-12)
    nonneg = np.flatnonzero(valid & (slopes >= threshold))
    curve = [(float(r), float(s)) for r, s in zip(rho_grid, slopes) if np.isfinite(s)]
    if nonneg.size == 0:
        point, stderr, boundary = 0.0, float(np.nanmax(noise[valid])), True
    elif nonneg[-1] == rho_grid.size - 1 or not np.isfinite(slopes[nonneg[-1] + 1]):
        point, stderr, boundary = 1.0, float(noise[nonneg[-1]]), True
    else:
        k = int(nonneg[-1])
        s0, s1 = max(float(slopes[k]), 0.0), float(slopes[k + 1])
        r0, r1 = float(rho_grid[k]), float(rho_grid[k + 1])
        point = r0 + s0 * (r1 - r0) / (s0 - s1)
        stderr = float(max(noise[k], noise[k + 1]) * (r1 - r0) / max(s0 - s1, 1e-12))
        boundary = False
    return DimensionEstimate(
        estimand="dim_h",
        point=float(np.clip(point, 0.0, 1.0)),
        fit_range=tuple(fit_range),
        stderr=stderr,
        slope_curve=curve,
        boundary=boundary,
    )


def dimh_estimate(
    records,
    fit_range: tuple[int, int],
    rho_grid=None,
    variant: Variant = "plain",
) -> DimensionEstimate:
    """Critical covering exponent from per-annulus optimal covering costs.

    For each rho on the grid the covering cost is evaluated exactly on every
    annulus in the fit range and the slope s(rho) of log2 value against n is
    fitted (empty-cover annuli excluded).  The covering-cost series over
    annuli converges exactly when the slope is negative, so the estimate is
    the interpolated point where s leaves its zero plateau and turns
    significantly negative, clamped to [0, 1].  Without such a departure the
    estimate is pinned to the boundary and flagged.
    """
    rho_grid, slopes, stderrs, _ = nu_slope_curve(records, fit_range, rho_grid, variant)
    return _root_from_slope_curve(rho_grid, slopes, stderrs, fit_range)


def dimh_estimate_pooled(
    record_list,
    fit_range: tuple[int, int],
    rho_grid=None,
    variant: Variant = "plain",
) -> DimensionEstimate:
    """Critical covering exponent pooled over replica records.

    Per-replica slope curves are averaged pointwise in rho, the replica
    spread supplies the noise scale for the plateau-departure rule, and the
    per-replica roots populate ``replica_spread``.
    """
    if not record_list:
        raise ValueError("need at least one record")
    curves, points = [], []
    grid = None
    for records in record_list:
        grid, slopes, stderrs, _ = nu_slope_curve(records, fit_range, rho_grid, variant)
        curves.append(slopes)
        points.append(_root_from_slope_curve(grid, slopes, stderrs, fit_range).point)
    arr = np.array(curves)
    counts = np.sum(np.isfinite(arr), axis=0)
    mean_slopes = np.where(counts > 0, np.nanmean(arr, axis=0), np.nan)
    with np.errstate(invalid="ignore"):
        spread = np.where(counts > 1, np.nanstd(arr, axis=0, ddof=1), np.nan)
    se = np.where(counts > 1, spread / np.sqrt(np.maximum(counts, 1)), np.nan)
    estimate = _root_from_slope_curve(grid, mean_slopes, se, fit_range)
    estimate.replica_spread = float(np.std(points, ddof=1)) if len(points) > 1 else 0.0
    estimate.diagnostics["per_replica_points"] = [float(p) for p in points]
    return estimate


@dataclass
class InequalityReport:
    """Outcome of the cross-estimator dimension inequalities."""

    passed: bool
    dim_h: float
    den_pix: float
    den_log: float
    tolerance: float
    violations: list[str]


def dimension_inequality_check(
    dim_h: DimensionEstimate,
    den_pix: DimensionEstimate,
    den_log: DimensionEstimate,
    tolerance: float = 0.05,
) -> InequalityReport:
    """Check dim_h <= den_pix + tol and den_log <= den_pix + tol."""
    violations = []
    if dim_h.point > den_pix.point + tolerance:
        violations.append(f"dim_h {dim_h.point:.4f} > den_pix {den_pix.point:.4f} + {tolerance}")
    if den_log.point > den_pix.point + tolerance:
        violations.append(f"den_log {den_log.point:.4f} > den_pix {den_pix.point:.4f} + {tolerance}")
    return InequalityReport(
        passed=not violations,
        dim_h=dim_h.point,
        den_pix=den_pix.point,
        den_log=den_log.point,
        tolerance=tolerance,
        violations=violations,
    )


def alpha_grid_set(alpha: float, n_max: int) -> dict[int, np.ndarray]:
    """Synthetic benchmark: ~2^{n*alpha} evenly spaced unit cells per annulus.

    Both the pixel density and the critical covering exponent of this set
    equal ``alpha``, which makes it a ground-truth calibration target.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    out = {}
    for n in range(1, n_max + 1):
        width = 2 ** (n - 1)
        k = min(int(np.ceil(2.0 ** (n * alpha))), width)
        cells = 2 ** (n - 1) + np.unique((np.arange(k) * (width / k)).astype(np.int64))
        out[n] = cells
    return out
