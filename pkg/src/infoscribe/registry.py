"""Object registry: per-level region descriptors and their relations."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .segmenter import LabelMap, RegionStats

KINDS = ("sub_part_of", "adjacent_to", "contains", "left_of", "above")
_KIND_RANK = {k: i for i, k in enumerate(KINDS)}

# normalized centroid gap required for left_of / above
DIRECTION_GAP = 0.1


def _r6(x) -> float:
    # stored reals are pre-rounded so the 6-decimal text form round-trips exactly
    v = round(float(x), 6)
    return 0.0 if v == 0 else v


@dataclass(frozen=True)
class Relation:
    kind: str
    target_level: int
    target_label: int
    strength: float


@dataclass(frozen=True)
class RegionDescriptor:
    level: int
    label: int
    area: int
    area_fraction: float
    centroid: tuple[float, float]
    mean_intensity: float
    parent: int | None = None
    relations: tuple[Relation, ...] = ()

    @property
    def id(self) -> tuple[int, int]:
        return (self.level, self.label)

    def related(self, kind: str) -> list[Relation]:
        return [r for r in self.relations if r.kind == kind]


def _project_parents(lm: LabelMap, coarse_lm: LabelMap):
    """Majority coarse label under the (x//2, y//2) projection, per fine label.

    Returns ``{fine_label: (parent_label, overlap_fraction)}``; ties pick the
    lowest coarse label.
    """
    h, w = lm.labels.shape
    ys, xs = np.mgrid[0:h, 0:w]
    under = coarse_lm.labels[ys // 2, xs // 2].reshape(-1).astype(np.int64)
    fine = lm.labels.reshape(-1).astype(np.int64)
    key = fine * coarse_lm.next_label + under
    uniq, counts = np.unique(key, return_counts=True)
    f_ids, c_ids = np.divmod(uniq, coarse_lm.next_label)
    out = {}
    totals = {}
    for f, c, n in zip(f_ids.tolist(), c_ids.tolist(), counts.tolist()):
        totals[f] = totals.get(f, 0) + n
        best = out.get(f)
        # uniq is sorted by (fine, coarse), so strict > keeps the lowest coarse label on ties
        if best is None or n > best[1]:
            out[f] = (c, n)
    return {f: (c, n / totals[f]) for f, (c, n) in out.items()}


def register_level(level_index: int, lm: LabelMap, rs: RegionStats,
                   coarse_lm: LabelMap | None = None) -> list[RegionDescriptor]:
    """One descriptor per region present at this level, in label order.

    Non-top levels pass the label map of the level above so each region gets
    a parent and a ``sub_part_of`` relation.
    """
    h, w = lm.labels.shape
    total = h * w
    parents = _project_parents(lm, coarse_lm) if coarse_lm is not None else {}
    out = []
    for label in rs.present().tolist():
        cx, cy = rs.centroids[label]
        parent = None
        rels = ()
        if label in parents:
            parent, overlap = parents[label]
            rels = (Relation("sub_part_of", level_index + 1, parent, _r6(overlap)),)
        out.append(
            RegionDescriptor(
                level=level_index,
                label=label,
                area=int(rs.counts[label]),
                area_fraction=_r6(rs.counts[label] / total),
                centroid=(_r6((cx + 0.5) / w), _r6((cy + 0.5) / h)),
                mean_intensity=_r6(rs.means[label]),
                parent=parent,
                relations=rels,
            )
        )
    return out


def border_edges(labels: np.ndarray) -> dict[tuple[int, int], int]:
    """Shared 4-neighbour edge counts for every unordered pair of touching labels."""
    a = np.concatenate([labels[:, :-1].reshape(-1), labels[:-1, :].reshape(-1)]).astype(np.int64)
    b = np.concatenate([labels[:, 1:].reshape(-1), labels[1:, :].reshape(-1)]).astype(np.int64)
    diff = a != b
    lo = np.minimum(a[diff], b[diff])
    hi = np.maximum(a[diff], b[diff])
    if lo.size == 0:
        return {}
    base = int(hi.max()) + 1
    uniq, counts = np.unique(lo * base + hi, return_counts=True)
    return {(int(k // base), int(k % base)): int(n) for k, n in zip(uniq, counts)}


def bounding_boxes(labels: np.ndarray) -> dict[int, tuple[int, int, int, int]]:
    """``{label: (xmin, ymin, xmax, ymax)}`` inclusive pixel bounds."""
    h, w = labels.shape
    flat = labels.reshape(-1)
    order = np.argsort(flat, kind="stable")
    sorted_labels = flat[order]
    ys, xs = np.divmod(order, w)
    starts = np.flatnonzero(np.r_[True, sorted_labels[1:] != sorted_labels[:-1]])
    out = {}
    mins_x = np.minimum.reduceat(xs, starts)
    maxs_x = np.maximum.reduceat(xs, starts)
    mins_y = np.minimum.reduceat(ys, starts)
    maxs_y = np.maximum.reduceat(ys, starts)
    for i, s in enumerate(starts.tolist()):
        out[int(sorted_labels[s])] = (int(mins_x[i]), int(mins_y[i]), int(maxs_x[i]), int(maxs_y[i]))
    return out


def compute_relations(descriptors: list[RegionDescriptor], lm: LabelMap) -> list[RegionDescriptor]:
    """Fill in the within-level relations of one level's descriptors.

    Relations are only evaluated between regions that share a border:

    * ``adjacent_to``: shared edges over the smaller region's perimeter
      (edges against other regions, image border excluded);
    * ``left_of`` / ``above``: normalized centroid gap above ``DIRECTION_GAP``
      along the dominant axis, strength 1;
    * ``contains``: the other region's bounding box lies strictly inside
      this one's; strength is the share of the inner region's perimeter
      touching this one.
    """
    if not descriptors:
        return []
    level = descriptors[0].level
    by_label = {d.label: d for d in descriptors}
    edges = border_edges(lm.labels)
    perimeter: dict[int, int] = {}
    for (a, b), n in edges.items():
        perimeter[a] = perimeter.get(a, 0) + n
        perimeter[b] = perimeter.get(b, 0) + n
    boxes = bounding_boxes(lm.labels) if edges else {}

    rels: dict[int, list[Relation]] = {d.label: list(d.relations) for d in descriptors}
    for (a, b), shared in edges.items():
        da, db = by_label[a], by_label[b]
        small = a if (da.area, perimeter[a]) <= (db.area, perimeter[b]) else b
        s = _r6(shared / perimeter[small])
        rels[a].append(Relation("adjacent_to", level, b, s))
        rels[b].append(Relation("adjacent_to", level, a, s))
        for src, dst in ((da, db), (db, da)):
            dx = dst.centroid[0] - src.centroid[0]
            dy = dst.centroid[1] - src.centroid[1]
            if dx > DIRECTION_GAP and abs(dy) <= abs(dx):
                rels[src.label].append(Relation("left_of", level, dst.label, 1.0))
            if dy > DIRECTION_GAP and abs(dx) < abs(dy):
                rels[src.label].append(Relation("above", level, dst.label, 1.0))
            ox0, oy0, ox1, oy1 = boxes[src.label]
            ix0, iy0, ix1, iy1 = boxes[dst.label]
            if ox0 < ix0 and oy0 < iy0 and ix1 < ox1 and iy1 < oy1:
                rels[src.label].append(Relation("contains", level, dst.label, _r6(shared / perimeter[dst.label])))

    out = []
    for d in descriptors:
        ordered = sorted(rels[d.label], key=lambda r: (_KIND_RANK[r.kind], r.target_level, r.target_label))
        out.append(replace(d, relations=tuple(ordered)))
    return out
