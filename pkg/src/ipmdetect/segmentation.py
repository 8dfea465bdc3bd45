"""Connected-component labeling and per-region shape features.

Labeling is the classic two-pass union-find scheme run over horizontal pixel
runs (8-connectivity): pass one builds runs and unions vertically adjacent
ones, pass two resolves roots and renumbers labels contiguously in raster-scan
first-appearance order.

Second central moments are normalized by area (variance-like, pixels^2) and
accumulated in exact integer arithmetic, so eigenvalues of a region and of
its 90/180/270-degree rotations are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotPSD, UnknownLabel
from .geometry import PixelCoord

PSD_TOL = 1e-9


@dataclass(frozen=True)
class LabelImage:
    """Per-pixel region labels, 0 = background, regions numbered 1..count."""

    labels: np.ndarray  # int32, shape (height, width)
    count: int

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class Region:
    """One segmented blob with its rotation-invariant shape descriptors.

    quad holds the axis-aligned bounding box corners ordered top-left,
    top-right, bottom-right, bottom-left (bird-view pixel coordinates).
    """

    label: int
    area: int
    centroid: tuple[float, float]  # (u, v)
    mu20: float
    mu02: float
    mu11: float
    lambda1: float
    lambda2: float
    quad: tuple[PixelCoord, PixelCoord, PixelCoord, PixelCoord]
    color_class: str = ""


class _UnionFind:
    __slots__ = ("parent",)

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        parent = self.parent
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:  # path compression
            parent[i], i = root, parent[i]
        return root

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            if ri < rj:
                self.parent[rj] = ri
            else:
                self.parent[ri] = rj


def _mask_runs(mask: np.ndarray):
    """All horizontal runs of set pixels, raster order.

    Returns (rows, starts, stops) as int arrays with half-open column spans.
    """
    height, width = mask.shape
    padded = np.zeros((height, width + 2), dtype=np.int8)
    padded[:, 1:-1] = mask
    d = np.diff(padded, axis=1)
    rows, start_cols = np.nonzero(d == 1)
    stop_rows, stop_cols = np.nonzero(d == -1)
    assert np.array_equal(rows, stop_rows)
    return rows, start_cols, stop_cols


def label_components(mask: np.ndarray) -> LabelImage:
    """Two-pass union-find labeling of a boolean mask under 8-connectivity."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise ValueError("mask must be 2-D")
    height, _ = mask.shape

    run_rows, run_starts, run_stops = _mask_runs(mask)
    runs: list[tuple[int, int, int]] = [
        (int(r), int(a), int(b)) for r, a, b in zip(run_rows, run_starts, run_stops)
    ]
    # Run-index range per row; runs arrive sorted by (row, column).
    row_bounds = np.searchsorted(run_rows, np.arange(height + 1))
    row_spans = [(int(row_bounds[v]), int(row_bounds[v + 1])) for v in range(height)]

    uf = _UnionFind(len(runs))
    for v in range(1, height):
        cur_lo, cur_hi = row_spans[v]
        prev_lo, prev_hi = row_spans[v - 1]
        if cur_lo == cur_hi or prev_lo == prev_hi:
            continue
        j = prev_lo
        for i in range(cur_lo, cur_hi):
            _, a, b = runs[i]
            while j < prev_hi and runs[j][2] < a:  # prev run ends left of 8-neighborhood
                j += 1
            k = j
            while k < prev_hi and runs[k][1] <= b:  # overlaps under 8-connectivity
                uf.union(i, k)
                k += 1
            if k > j:
                k -= 1  # last prev run may also touch the next current run
            j = k

    labels = np.zeros(mask.shape, dtype=np.int32)
    remap: dict[int, int] = {}
    for idx, (v, a, b) in enumerate(runs):
        root = uf.find(idx)
        lbl = remap.get(root)
        if lbl is None:
            lbl = len(remap) + 1
            remap[root] = lbl
        labels[v, a:b] = lbl
    return LabelImage(labels=labels, count=len(remap))


def inertia_eigenvalues(mu20: float, mu02: float, mu11: float) -> tuple[float, float]:
    """Ordered eigenvalues of the symmetric moment matrix [[mu20, mu11], [mu11, mu02]].

    Raises NotPSD when an eigenvalue falls below -1e-9 (an upstream moment bug);
    eigenvalues within [-1e-9, 0) are clamped to zero.
    """
    t = 0.5 * (mu20 + mu02)
    d = math.hypot(0.5 * (mu20 - mu02), mu11)
    lam1 = t + d
    lam2 = t - d
    if lam2 < -PSD_TOL:
        raise NotPSD(f"moment matrix has negative eigenvalue {lam2}")
    return lam1, max(lam2, 0.0)


def _moments_from_sums(n: int, su: int, sv: int, suu: int, svv: int, suv: int):
    """Area-normalized central moments from exact integer raw sums."""
    n2 = n * n
    mu20 = (n * suu - su * su) / n2
    mu02 = (n * svv - sv * sv) / n2
    mu11 = (n * suv - su * sv) / n2
    return mu20, mu02, mu11


def region_properties(li: LabelImage, label: int, color_class: str = "") -> Region:
    """Area, centroid, central moments, eigenvalues and bounding box of one region."""
    if not (1 <= label <= li.count):
        raise UnknownLabel(f"label {label} outside 1..{li.count}")
    vs, us = np.nonzero(li.labels == label)
    return _build_region(label, us, vs, color_class)


def all_region_properties(li: LabelImage, color_class: str = "") -> list[Region]:
    """Properties of every region, one pass over the label image."""
    vs, us = np.nonzero(li.labels)
    lbls = li.labels[vs, us]
    order = np.argsort(lbls, kind="stable")
    vs, us, lbls = vs[order], us[order], lbls[order]
    bounds = np.searchsorted(lbls, np.arange(1, li.count + 2))
    out = []
    for label in range(1, li.count + 1):
        lo, hi = bounds[label - 1], bounds[label]
        out.append(_build_region(label, us[lo:hi], vs[lo:hi], color_class))
    return out


def _build_region(label: int, us: np.ndarray, vs: np.ndarray, color_class: str) -> Region:
    n = us.size
    us64 = us.astype(np.int64)
    vs64 = vs.astype(np.int64)
    # Exact integer sums keep the moments (and thus the eigenvalues) identical
    # under any pixel permutation, including exact 90-degree rotations.
    su = int(us64.sum())
    sv = int(vs64.sum())
    suu = int((us64 * us64).sum())
    svv = int((vs64 * vs64).sum())
    suv = int((us64 * vs64).sum())
    mu20, mu02, mu11 = _moments_from_sums(n, su, sv, suu, svv, suv)
    lam1, lam2 = inertia_eigenvalues(mu20, mu02, mu11)
    u_min, u_max = float(us.min()), float(us.max())
    v_min, v_max = float(vs.min()), float(vs.max())
    quad = (
        PixelCoord(u_min, v_min),
        PixelCoord(u_max, v_min),
        PixelCoord(u_max, v_max),
        PixelCoord(u_min, v_max),
    )
    return Region(
        label=label,
        area=int(n),
        centroid=(su / n, sv / n),
        mu20=mu20,
        mu02=mu02,
        mu11=mu11,
        lambda1=lam1,
        lambda2=lam2,
        quad=quad,
        color_class=color_class,
    )
