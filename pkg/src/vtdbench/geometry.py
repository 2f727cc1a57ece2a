"""Similarity kernels and combinatorial matching.

The assignment solver is exact: costs are carried as rationals and ties
between equal-cost optima are broken canonically (lowest row index, then
lowest column index), so every caller sees one reproducible matching.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ShapeError, ValidationError
from .labels import Box2D, Keypoints
from .rle import RleMask, mask_intersection_area

# Uniform fallback; the 18-joint skeleton has no published per-joint
# constants, so presets keep the knob explicit.
DEFAULT_OKS_SIGMAS = (0.072,) * 18
OKS_SIGMA_PRESETS = {"uniform": DEFAULT_OKS_SIGMAS}


def box_iou(a: Box2D, b: Box2D) -> float:
    """Intersection over union of two boxes; 0 when the union is empty."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0 or iy <= 0:
        inter = 0.0
    else:
        inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def mask_iou(a: RleMask, b: RleMask) -> float:
    """IoU computed directly on runs; integer counts, one final division."""
    if a.size != b.size:
        raise ShapeError(f"mask size mismatch: {a.size} vs {b.size}")
    inter = mask_intersection_area(a, b)
    union = a.area() + b.area() - inter
    if union == 0:
        return 0.0
    return inter / union


def oks(
    pred: Keypoints,
    gt: Keypoints,
    gt_area: float,
    sigmas=DEFAULT_OKS_SIGMAS,
) -> float:
    """Object keypoint similarity over visible ground-truth joints.

    Per joint i with k_i = 2 * sigmas[i] and squared pixel distance d2:
    exp(-d2 / (2 * gt_area * k_i**2)), averaged over visible gt joints.
    """
    if gt_area <= 0:
        raise ValidationError(f"gt_area must be positive, got {gt_area}")
    if len(sigmas) != len(gt.joints):
        raise ValidationError(
            f"{len(sigmas)} sigmas for {len(gt.joints)} joints"
        )
    visible = gt.visible()
    if not visible:
        raise ValidationError("similarity undefined: no visible gt joints")
    total = 0.0
    for i in visible:
        px, py, _ = pred.joints[i]
        gx, gy, _ = gt.joints[i]
        d2 = (px - gx) ** 2 + (py - gy) ** 2
        k = 2.0 * sigmas[i]
        total += math.exp(-d2 / (2.0 * gt_area * k * k))
    return total / len(visible)


def dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Chebyshev dilation with a square element of side 2*radius + 1."""
    if radius < 0:
        raise ValidationError(f"radius must be non-negative, got {radius}")
    out = np.asarray(mask).astype(bool)
    if radius == 0:
        return out.copy()
    # separable: horizontal then vertical max filters
    for axis in (1, 0):
        acc = out.copy()
        for shift in range(1, radius + 1):
            acc[_shifted(axis, shift)] |= out[_shifted(axis, -shift)]
            acc[_shifted(axis, -shift)] |= out[_shifted(axis, shift)]
        out = acc
    return out


def _shifted(axis: int, shift: int):
    if shift > 0:
        sl = slice(shift, None)
    else:
        sl = slice(None, shift)
    return (sl, slice(None)) if axis == 0 else (slice(None), sl)


@dataclass(frozen=True)
class Matching:
    pairs: tuple[tuple[int, int], ...]
    unmatched_rows: tuple[int, ...]
    unmatched_cols: tuple[int, ...]
    total_cost: float


def solve_assignment(costs, eligible=None) -> Matching:
    """Minimum-cost assignment of maximal cardinality.

    `costs` is a rows x cols array of finite costs. When `eligible` is
    given, only marked pairs may be matched and cardinality is maximal
    over the eligible pairs. Ties between equal-cost optima resolve to
    the lexicographically smallest (row, col) pair list.
    """
    cost_arr = np.asarray(costs, dtype=float)
    if cost_arr.size == 0:
        n_rows = cost_arr.shape[0] if cost_arr.ndim >= 1 else 0
        n_cols = cost_arr.shape[1] if cost_arr.ndim == 2 else 0
        return Matching(
            pairs=(),
            unmatched_rows=tuple(range(n_rows)),
            unmatched_cols=tuple(range(n_cols)),
            total_cost=0.0,
        )
    if cost_arr.ndim != 2:
        raise ValidationError(f"cost matrix must be 2-D, got {cost_arr.ndim}-D")
    if not np.all(np.isfinite(cost_arr)):
        raise ValidationError("cost matrix contains non-finite entries")
    n_rows, n_cols = cost_arr.shape
    if eligible is None:
        eligible_arr = np.ones((n_rows, n_cols), dtype=bool)
    else:
        eligible_arr = np.asarray(eligible, dtype=bool)
        if eligible_arr.shape != cost_arr.shape:
            raise ShapeError(
                f"eligibility shape {eligible_arr.shape} != costs {cost_arr.shape}"
            )

    pairs = _solve_exact(cost_arr, eligible_arr)
    matched_rows = {r for r, _ in pairs}
    matched_cols = {c for _, c in pairs}
    total = float(sum(cost_arr[r, c] for r, c in pairs))
    return Matching(
        pairs=tuple(pairs),
        unmatched_rows=tuple(r for r in range(n_rows) if r not in matched_rows),
        unmatched_cols=tuple(c for c in range(n_cols) if c not in matched_cols),
        total_cost=total,
    )


def _solve_exact(costs: np.ndarray, eligible: np.ndarray) -> list[tuple[int, int]]:
    """Exact Jonker-Volgenant over 3-component values.

    Each pair's value is (ineligible_count, rational_cost, -tie_weight);
    componentwise sums under lexicographic order make the optimum unique
    up to the arrangement of ineligible/padding pairs, which are dropped
    from the result.
    """
    n_rows, n_cols = costs.shape
    n = max(n_rows, n_cols)
    shift = n_rows * n_cols  # tie weights 2**(shift - idx) dominate later pairs
    zero = (0, Fraction(0), 0)

    value = [[zero] * (n + 1) for _ in range(n + 1)]  # 1-based
    for i in range(n_rows):
        row_costs = costs[i]
        row_elig = eligible[i]
        for j in range(n_cols):
            if row_elig[j]:
                idx = i * n_cols + j
                value[i + 1][j + 1] = (0, Fraction(float(row_costs[j])), -(1 << (shift - idx)))
            else:
                value[i + 1][j + 1] = (1, Fraction(0), 0)

    u = [zero] * (n + 1)
    v = [zero] * (n + 1)
    p = [0] * (n + 1)  # p[j] = row matched to col j
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv: list = [None] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = None
            j1 = -1
            u_i0 = u[i0]
            row = value[i0]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                a = row[j]
                b = v[j]
                cur = (
                    a[0] - u_i0[0] - b[0],
                    a[1] - u_i0[1] - b[1],
                    a[2] - u_i0[2] - b[2],
                )
                if minv[j] is None or cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if delta is None or minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    uj = u[p[j]]
                    u[p[j]] = (uj[0] + delta[0], uj[1] + delta[1], uj[2] + delta[2])
                    vj = v[j]
                    v[j] = (vj[0] - delta[0], vj[1] - delta[1], vj[2] - delta[2])
                elif minv[j] is not None:
                    mj = minv[j]
                    minv[j] = (mj[0] - delta[0], mj[1] - delta[1], mj[2] - delta[2])
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    pairs = []
    for j in range(1, n + 1):
        i = p[j]
        if 1 <= i <= n_rows and 1 <= j <= n_cols and eligible[i - 1][j - 1]:
            pairs.append((i - 1, j - 1))
    pairs.sort()
    return pairs
