"""Top-down segmentation.

The pyramid top is segmented by incremental-mean region growing. The label
map and the region means are then carried down one level at a time: labels
are upsampled by nearest neighbour, pixels that disagree with their inherited
region mean are refined against neighbouring regions, and whatever remains
unexplained seeds new regions (or is merged away when too small).
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from ._backend import kernels
from .pyramid import DEFAULT_TOP_MAX_PIXELS, build_pyramid
from .raster import Raster

__all__ = [
    "SegParams",
    "LabelMap",
    "RegionStats",
    "Segmentation",
    "DimensionMismatch",
    "segment_top",
    "expand_level",
    "extract_segments",
    "compute_stats",
]


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class SegParams:
    tau_seg: float = 12
    tau_refine: float = 12
    min_seed: int = 4
    max_refine_passes: int = 5
    top_max_pixels: int = DEFAULT_TOP_MAX_PIXELS

    def __post_init__(self):
        object.__setattr__(self, "tau_seg", float(self.tau_seg))
        object.__setattr__(self, "tau_refine", float(self.tau_refine))
        if not (self.tau_seg >= 0 and self.tau_refine >= 0):
            raise ValueError("tolerances must be >= 0")
        if int(self.min_seed) != self.min_seed or self.min_seed < 1:
            raise ValueError("min_seed must be an integer >= 1")
        if int(self.max_refine_passes) != self.max_refine_passes or self.max_refine_passes < 1:
            raise ValueError("max_refine_passes must be an integer >= 1")
        if int(self.top_max_pixels) != self.top_max_pixels or self.top_max_pixels < 1:
            raise ValueError("top_max_pixels must be an integer >= 1")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Per-pixel region ids (``int32``, shape ``(height, width)``), all >= 1."""

    labels: np.ndarray
    next_label: int

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LabelMap):
            return NotImplemented
        return self.next_label == other.next_label and np.array_equal(self.labels, other.labels)


@dataclass(frozen=True, eq=False)
class RegionStats:
    """Per-label statistics, arrays indexed by label id (index 0 unused).

    Labels with ``counts == 0`` are not present at this level.
    """

    counts: np.ndarray
    means: np.ndarray
    centroids: np.ndarray  # (n, 2) as (x, y) in pixel index coordinates

    def present(self) -> np.ndarray:
        return np.flatnonzero(self.counts)

    def mean(self, label: int) -> float:
        return float(self.means[label])

    def __eq__(self, other):
        if not isinstance(other, RegionStats):
            return NotImplemented
        return (
            np.array_equal(self.counts, other.counts)
            and np.array_equal(self.means, other.means)
            and np.array_equal(self.centroids, other.centroids)
        )


class Segmentation(NamedTuple):
    labels: LabelMap
    stats: RegionStats


def compute_stats(ref: Raster, labels: np.ndarray, next_label: int) -> RegionStats:
    flat = labels.reshape(-1)
    h, w = labels.shape
    vals = ref.data.reshape(-1).astype(np.float64)
    ys, xs = np.divmod(np.arange(h * w, dtype=np.int64), w)
    counts = np.bincount(flat, minlength=next_label).astype(np.int64)
    sums = np.bincount(flat, weights=vals, minlength=next_label)
    sx = np.bincount(flat, weights=xs.astype(np.float64), minlength=next_label)
    sy = np.bincount(flat, weights=ys.astype(np.float64), minlength=next_label)
    safe = np.maximum(counts, 1)
    means = np.where(counts > 0, sums / safe, 0.0)
    centroids = np.stack([np.where(counts > 0, sx / safe, 0.0), np.where(counts > 0, sy / safe, 0.0)], axis=1)
    return RegionStats(counts, means, centroids)


def segment_top(r: Raster, p: SegParams = SegParams()) -> Segmentation:
    labels = np.zeros((r.height, r.width), dtype=np.int32)
    mask = np.ones((r.height, r.width), dtype=np.uint8)
    nxt = kernels.grow_regions(np.ascontiguousarray(r.data), mask, float(p.tau_seg), labels, 1)
    lm = LabelMap(labels, int(nxt))
    return Segmentation(lm, compute_stats(r, labels, lm.next_label))


def _region_means(ref_vals, labels, keep, fallback):
    """Mean intensity per label over pixels where ``keep`` is set."""
    n = len(fallback)
    sel = labels[keep]
    counts = np.bincount(sel, minlength=n)
    sums = np.bincount(sel, weights=ref_vals[keep], minlength=n)
    return np.where(counts > 0, sums / np.maximum(counts, 1), fallback)


_SHIFTS = ((-1, 0), (0, -1), (0, 1), (1, 0))


def _neighbour_pairs(src_ids, dst_labels, src_mask, dst_mask):
    """(src id, dst label) for every 4-adjacent pixel pair src->dst under the masks."""
    h, w = src_ids.shape
    out_a, out_b = [], []
    for dy, dx in _SHIFTS:
        ys = slice(max(0, -dy), h - max(0, dy))
        xs = slice(max(0, -dx), w - max(0, dx))
        yd = slice(max(0, dy), h - max(0, -dy))
        xd = slice(max(0, dx), w - max(0, -dx))
        both = src_mask[ys, xs] & dst_mask[yd, xd]
        out_a.append(src_ids[ys, xs][both])
        out_b.append(dst_labels[yd, xd][both])
    return np.concatenate(out_a), np.concatenate(out_b)


def _absorb_small(ref_vals, labels, comp, small_ids, next_label):
    """Merge undersized deviant components into the adjacent region with the nearest mean.

    Works in rounds so components only reachable through other small
    components are absorbed once their neighbours are. A component with no
    labelled neighbour at all becomes a region of its own.
    """
    pending = np.zeros(comp.max() + 1, dtype=bool)
    pending[small_ids] = True
    comp_sizes = np.bincount(comp.reshape(-1), minlength=len(pending))
    comp_sums = np.bincount(comp.reshape(-1), weights=ref_vals.reshape(-1), minlength=len(pending))
    comp_means = comp_sums / np.maximum(comp_sizes, 1)

    in_pending = pending[comp]
    region_means = _region_means(ref_vals, labels, ~in_pending, np.zeros(next_label))

    while in_pending.any():
        a, b = _neighbour_pairs(comp, labels, in_pending, ~in_pending)
        assigned_any = False
        if a.size:
            dist = np.abs(comp_means[a] - region_means[b])
            # per component: nearest mean first, lowest label on ties
            order = np.lexsort((b, dist, a))
            a, b = a[order], b[order]
            first = np.r_[True, a[1:] != a[:-1]]
            target = np.zeros(len(pending), dtype=np.int64)
            target[a[first]] = b[first]
            hit = (target[comp] > 0) & in_pending
            labels[hit] = target[comp][hit]
            pending[target > 0] = False
            assigned_any = True
        if not assigned_any:
            cid = int(np.flatnonzero(pending)[0])
            sel = comp == cid
            labels[sel] = next_label
            if next_label >= len(region_means):
                region_means = np.append(region_means, comp_means[cid])
            next_label += 1
            pending[cid] = False
        in_pending = pending[comp]
    return next_label


def _split_disconnected(labels, next_label):
    """Give every 4-connected piece of a label its own id.

    The first piece found in row-major order keeps the original label; the
    rest get fresh ids in discovery order. Returns the next unused label.
    """
    comp = np.zeros(labels.shape, dtype=np.int32)
    n = kernels.label_components(labels, comp)
    comp_label = np.zeros(n + 1, dtype=np.int64)
    comp_label[comp.reshape(-1)] = labels.reshape(-1)
    _, first = np.unique(comp_label[1:], return_index=True)
    keeps = np.zeros(n + 1, dtype=bool)
    keeps[first + 1] = True
    extra = np.flatnonzero(~keeps[1:]) + 1
    if extra.size == 0:
        return next_label
    comp_label[extra] = np.arange(next_label, next_label + extra.size)
    labels[...] = comp_label[comp]
    return next_label + int(extra.size)


def _merge_homogeneous(ref_vals, labels, next_label, tau):
    """Merge touching regions whose union keeps every pixel within ``tau`` of its mean.

    Pieces of one patch that were split at a coarser level (or born
    separately) end up here with near-identical means. Candidate pairs are
    tried closest-mean first, lowest labels first on ties; the lower label
    survives. Repeats until no pair qualifies.
    """
    a = np.concatenate([labels[:, :-1].reshape(-1), labels[:-1, :].reshape(-1)]).astype(np.int64)
    b = np.concatenate([labels[:, 1:].reshape(-1), labels[1:, :].reshape(-1)]).astype(np.int64)
    diff = a != b
    if not diff.any():
        return
    lo = np.minimum(a[diff], b[diff])
    hi = np.maximum(a[diff], b[diff])
    pairs = np.unique(lo * next_label + hi)
    lo, hi = np.divmod(pairs, next_label)

    flat = labels.reshape(-1)
    vals = ref_vals.reshape(-1)
    counts = np.bincount(flat, minlength=next_label).astype(np.float64)
    sums = np.bincount(flat, weights=vals, minlength=next_label)
    mins = np.full(next_label, np.inf)
    maxs = np.full(next_label, -np.inf)
    np.minimum.at(mins, flat, vals)
    np.maximum.at(maxs, flat, vals)
    means = sums / np.maximum(counts, 1)
    order = np.lexsort((hi, lo, np.abs(means[lo] - means[hi])))
    cand = list(zip(lo[order].tolist(), hi[order].tolist()))

    counts, sums, mins, maxs = counts.tolist(), sums.tolist(), mins.tolist(), maxs.tolist()
    root = list(range(next_label))

    def find(x):
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    changed = True
    while changed:
        changed = False
        for p, q in cand:
            rp, rq = find(p), find(q)
            if rp == rq:
                continue
            c = counts[rp] + counts[rq]
            s = sums[rp] + sums[rq]
            m = s / c
            mn = min(mins[rp], mins[rq])
            mx = max(maxs[rp], maxs[rq])
            if mx - m <= tau and m - mn <= tau:
                keep, drop = min(rp, rq), max(rp, rq)
                root[drop] = keep
                counts[keep], sums[keep], mins[keep], maxs[keep] = c, s, mn, mx
                changed = True
    lut = np.array([find(x) for x in range(next_label)], dtype=labels.dtype)
    labels[...] = lut[labels]


def expand_level(coarse: Segmentation, ref: Raster, p: SegParams = SegParams(), trace=None) -> Segmentation:
    """Carry a coarse segmentation down to ``ref``'s resolution and refine it.

    If ``trace`` is a list, the deviant pixel count is appended to it once
    before refinement and once after every pass.
    """
    coarse_lm, coarse_rs = coarse
    ch, cw = coarse_lm.labels.shape
    if (ref.width + 1) // 2 != cw or (ref.height + 1) // 2 != ch:
        raise DimensionMismatch(
            f"reference {ref.width}x{ref.height} does not squeeze to coarse {cw}x{ch}"
        )
    h, w = ref.height, ref.width
    labels = np.ascontiguousarray(
        np.repeat(np.repeat(coarse_lm.labels, 2, axis=0), 2, axis=1)[:h, :w], dtype=np.int32
    )
    next_label = coarse_lm.next_label
    ref_u8 = np.ascontiguousarray(ref.data)
    ref_vals = ref_u8.astype(np.float64)
    means = np.ascontiguousarray(coarse_rs.means, dtype=np.float64)
    tau = float(p.tau_refine)

    deviant = (np.abs(ref_vals - means[labels]) > tau).astype(np.uint8)
    refined = bool(deviant.any())
    if trace is not None:
        trace.append(int(deviant.sum()))
    for _ in range(p.max_refine_passes):
        if not deviant.any():
            break
        resolved = kernels.refine_pass(ref_u8, labels, deviant, means, tau)
        if trace is not None:
            trace.append(int(deviant.sum()))
        if resolved == 0:
            break
        means = np.ascontiguousarray(_region_means(ref_vals, labels, deviant == 0, means))

    if deviant.any():
        comp = np.zeros((h, w), dtype=np.int32)
        n_comp = kernels.grow_regions(ref_u8, deviant, tau, comp, 1)
        sizes = np.bincount(comp[deviant.astype(bool)], minlength=n_comp)
        big = np.flatnonzero(sizes >= p.min_seed)
        big = big[big > 0]
        remap = np.zeros(n_comp, dtype=np.int64)
        remap[big] = np.arange(next_label, next_label + big.size)
        next_label += int(big.size)
        born = remap[comp] > 0
        labels[born] = remap[comp][born]
        small = np.flatnonzero((sizes > 0) & (sizes < p.min_seed))
        if small.size:
            comp_small = np.where(np.isin(comp, small), comp, 0)
            next_label = _absorb_small(ref_vals, labels, comp_small, small, next_label)

    if refined:
        # a clean upscale keeps the coarse partition as is
        next_label = _split_disconnected(labels, next_label)
        _merge_homogeneous(ref_vals, labels, next_label, tau)
    lm = LabelMap(labels, int(next_label))
    return Segmentation(lm, compute_stats(ref, labels, lm.next_label))


def extract_segments(r: Raster, p: SegParams = SegParams()) -> list[Segmentation]:
    """Segment every pyramid level, ordered top first, level 0 last."""
    pyr = build_pyramid(r, p.top_max_pixels)
    cur = segment_top(pyr.top, p)
    out = [cur]
    for level in reversed(pyr.levels[:-1]):
        cur = expand_level(cur, level, p)
        out.append(cur)
    return out
