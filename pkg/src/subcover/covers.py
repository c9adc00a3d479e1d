"""Exact, event-driven box counting on jump skeletons.

Counting conventions (fixed so that independent routines agree exactly):

* the range is the closure of the path's value set -- closed drift
  segments, left-closed at jump landings;
* greedy cover intervals are closed ``[b, b + delta]`` and a new
  interval opens on strict exceedance of ``b + delta``;
* value-lattice cells are ``[k delta, (k+1) delta)``; a segment
  endpoint landing exactly on a cell boundary does not open the next
  cell (a degenerate single-point segment still gets its cell);
* on the time axis the horizon endpoint does open its cell, which is
  what makes the mesh identity ``M_G = floor(t/delta) + M`` agree with
  direct two-dimensional counting when t is a lattice multiple.

All counters are 64-bit safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PrecisionError
from .paths import JumpSkeleton, first_passage, value_at


def _check_delta(skel: JumpSkeleton, delta: float):
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta}")
    if delta < skel.eps:
        raise PrecisionError(
            f"delta={delta:g} below the skeleton cutoff {skel.eps:g}")


@dataclass(frozen=True)
class CoverResult:
    """All counting schemes evaluated on one (path, delta) pair."""
    delta: float
    N: int
    M: int
    L: float
    Y: int
    M_G: int
    N_G: int
    t: float
    replica: int = 0


def count_N(skel: JumpSkeleton, delta: float) -> int:
    """Minimal number of length-delta intervals covering the range.

    Greedy first-passage walk: an interval sits at base ``b``; the next
    one opens at the first range point strictly above ``b + delta``
    (the passage value for a drift crossing, the landing value for a
    jump crossing).  Greedy is optimal for a totally ordered set.
    """
    _check_delta(skel, delta)
    d = skel.effective_drift
    vr = skel.values_after_jumps()
    sizes = skel.sizes
    x_final = skel.final_value()
    m = len(skel)
    b = 0.0
    n = 1
    i = 0
    while True:
        target = b + delta
        j = i + int(np.searchsorted(vr[i:], target, side="right"))
        x_end = (vr[j] - sizes[j]) if j < m else x_final
        if x_end > target:
            # one or more bases fit inside the drift stretch before event j
            k = max(1, math.ceil((x_end - b) / delta) - 1)
            n += k
            b = b + k * delta
            i = j
        elif j < m:
            n += 1
            b = vr[j]
            i = j + 1
        else:
            return n


def _segment_cells(starts, ends, delta):
    """Number of distinct value-lattice cells hit by a non-decreasing
    chain of closed segments ``[starts[i], ends[i]]``."""
    starts = np.asarray(starts, dtype=float)
    ends = np.asarray(ends, dtype=float)
    k_lo = np.floor(starts / delta)
    k_hi = np.floor(ends / delta)
    on_boundary = (k_hi * delta == ends) & (ends > starts)
    k_hi = np.maximum(k_hi - on_boundary, k_lo)
    total = int(np.sum(k_hi - k_lo + 1))
    if len(starts) > 1:
        total -= int(np.count_nonzero(k_lo[1:] <= k_hi[:-1]))
    return total


def _segments(skel: JumpSkeleton):
    vr = skel.values_after_jumps()
    starts = np.concatenate(([0.0], vr))
    ends = np.concatenate((vr - skel.sizes, [skel.final_value()]))
    return starts, ends


def count_M(skel: JumpSkeleton, delta: float) -> int:
    """Number of delta-lattice cells intersecting the range.  Drift
    segments cover contiguous cell runs; jumps skip cells."""
    _check_delta(skel, delta)
    starts, ends = _segments(skel)
    return _segment_cells(starts, ends, delta)


def count_Y(skel: JumpSkeleton, delta: float) -> int:
    """Number of jumps of size strictly larger than delta."""
    _check_delta(skel, delta)
    return int(np.count_nonzero(skel.sizes > delta))


def l_stat(skel: JumpSkeleton, delta: float) -> float:
    """Capped-jump count statistic: path value with every jump capped
    at delta, divided by delta."""
    _check_delta(skel, delta)
    return value_at(skel, skel.t, "shortened", delta) / delta


def graph_cover_count(skel: JumpSkeleton, delta: float) -> int:
    """Sequential box cover of the graph.

    Boxes are delta x delta squares for effective drift >= 1 or zero
    drift, and (delta/d) x delta rectangles for drift in (0, 1); a new
    box is anchored whenever the path leaves the current one, through
    the top (value passage) or through the right side (time width).
    """
    _check_delta(skel, delta)
    d = skel.effective_drift
    if d >= 1.0 or d == 0.0:
        width = delta
    else:
        width = delta / d
    s = 0.0
    v = 0.0
    count = 1
    while True:
        tp = first_passage(skel, v + delta)
        step_end = s + width
        if tp is not None and tp <= step_end and tp <= skel.t:
            count += 1
            s = tp
            v = value_at(skel, tp, "raw")
        elif step_end < skel.t:
            count += 1
            s = step_end
            v = value_at(skel, step_end, "raw")
        else:
            return count


def graph_counts(skel: JumpSkeleton, delta: float):
    """(M_G, N_G): mesh count of the graph via the floor identity, and
    the sequential graph cover."""
    _check_delta(skel, delta)
    m_g = int(math.floor(skel.t / delta)) + count_M(skel, delta)
    return m_g, graph_cover_count(skel, delta)


def mesh_boxes_direct(skel: JumpSkeleton, delta: float) -> int:
    """Direct two-dimensional lattice count of the graph (debug route
    for the floor identity): scan time columns, count value cells hit
    in each."""
    _check_delta(skel, delta)
    n_cols = int(math.floor(skel.t / delta))
    vr = skel.values_after_jumps()
    vl = vr - skel.sizes
    total = 0
    for j in range(n_cols + 1):
        s0 = j * delta
        s1 = min((j + 1) * delta, skel.t)
        lo = int(np.searchsorted(skel.times, s0, side="right"))
        hi = int(np.searchsorted(skel.times, s1, side="right"))
        starts = np.concatenate(([value_at(skel, s0, "raw")], vr[lo:hi]))
        ends = np.concatenate((vl[lo:hi], [value_at(skel, min(s1, skel.t), "raw")]))
        total += _segment_cells(starts, ends, delta)
    return total


def brute_force_N(skel: JumpSkeleton, delta: float, grid_n: int = 100_000) -> int:
    """Test oracle for ``count_N``: sample the path on a uniform time
    grid plus all event times (left and right limits), then run
    textbook greedy interval covering on the sorted point set."""
    if grid_n < 10_000:
        raise DomainError(f"grid_n must be at least 10000, got {grid_n}")
    if len(skel) > 10_000:
        raise DomainError("oracle is restricted to skeletons with at "
                          "most 10000 events")
    _check_delta(skel, delta)
    d = skel.effective_drift
    grid = np.linspace(0.0, skel.t, grid_n + 1)
    idx = np.searchsorted(skel.times, grid, side="right")
    cum = np.concatenate(([0.0], skel.cum_sizes))
    grid_vals = d * grid + cum[idx]
    rights = d * skel.times + skel.cum_sizes
    lefts = rights - skel.sizes
    pts = np.unique(np.concatenate((grid_vals, lefts, rights)))
    b = pts[0]
    n = 1
    while True:
        j = int(np.searchsorted(pts, b + delta, side="right"))
        if j >= pts.size:
            return n
        b = float(pts[j])
        n += 1


def cover_result(skel: JumpSkeleton, delta: float, graph: bool = True,
                 replica: int = None) -> CoverResult:
    """Evaluate every counting scheme on one skeleton."""
    _check_delta(skel, delta)
    n = count_N(skel, delta)
    m = count_M(skel, delta)
    m_g = int(math.floor(skel.t / delta)) + m
    n_g = graph_cover_count(skel, delta) if graph else 0
    return CoverResult(delta=delta, N=n, M=m, L=l_stat(skel, delta),
                       Y=count_Y(skel, delta), M_G=m_g, N_G=n_g,
                       t=skel.t,
                       replica=skel.replica if replica is None else replica)
