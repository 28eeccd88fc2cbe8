"""Hierarchical image descriptions: build, serialize, validate, reconstruct.

A description holds, for every pyramid level from the top down, the region
descriptors and a run-length encoded label map ("support"). That is enough
to repaint each level from region means alone, which is what
:func:`reconstruct` does.

The text form is canonical JSON: fixed key order, no insignificant
whitespace, every real printed with exactly six decimals. Field order::

    {"version": "pid-1",
     "meta": {"width", "height", "params": {tau_seg, tau_refine, min_seed,
              max_refine_passes, top_max_pixels}},
     "levels": [{"level", "width", "height",
                 "regions": [{"label", "area", "area_fraction", "centroid",
                              "mean_intensity", "parent", "relations":
                              [{"kind", "target": [level, label], "strength"}]}],
                 "support": [[label, run_length], ...]}],
     "density": [{"level", "bytes", "density"}]}      # optional

Levels are listed top (coarsest) first; ``level`` 0 is the original image.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._backend import kernels
from ._canon import emit as _emit
from ._canon import fmt_real as _f
from .pyramid import level_shapes
from .raster import Raster
from .registry import KINDS, RegionDescriptor, Relation, compute_relations, register_level
from .segmenter import SegParams, extract_segments

FORMAT_VERSION = "pid-1"

__all__ = [
    "FORMAT_VERSION",
    "LevelDescription",
    "ImageDescription",
    "DescriptionError",
    "SchemaError",
    "VersionError",
    "InvariantViolation",
    "UnknownLevel",
    "describe",
    "reconstruct",
    "serialize",
    "deserialize",
    "density_profile",
    "level_bytes",
    "label_map",
]


class DescriptionError(ValueError):
    pass


class SchemaError(DescriptionError):
    pass


class VersionError(DescriptionError):
    pass


class InvariantViolation(DescriptionError):
    pass


class UnknownLevel(LookupError):
    pass


@dataclass(frozen=True)
class LevelDescription:
    level: int
    width: int
    height: int
    regions: tuple[RegionDescriptor, ...]
    support: tuple[tuple[int, int], ...]

    def region(self, label: int) -> RegionDescriptor:
        for r in self.regions:
            if r.label == label:
                return r
        raise KeyError(label)


@dataclass(frozen=True)
class ImageDescription:
    width: int
    height: int
    params: SegParams
    levels: tuple[LevelDescription, ...]
    density: tuple[tuple[int, int, float], ...] | None = None
    version: str = FORMAT_VERSION
    # rendered level texts, filled by describe(); not copied by replace()
    _texts: tuple[str, ...] | None = field(default=None, init=False, compare=False, repr=False)

    def level(self, index: int) -> LevelDescription:
        for lv in self.levels:
            if lv.level == index:
                return lv
        raise UnknownLevel(f"no level {index}; description has levels 0..{len(self.levels) - 1}")

    @property
    def finest(self) -> LevelDescription:
        return self.levels[-1]


# ---------------------------------------------------------------- building

def describe(r: Raster, p: SegParams = SegParams(), with_density: bool = True) -> ImageDescription:
    segs = extract_segments(r, p)
    n = len(segs)
    levels = []
    for i, (lm, rs) in enumerate(segs):
        index = n - 1 - i
        coarse = segs[i - 1].labels if i > 0 else None
        descs = compute_relations(register_level(index, lm, rs, coarse), lm)
        vals, lens = kernels.run_lengths(lm.labels.reshape(-1))
        support = tuple(zip(vals.tolist(), lens.tolist()))
        levels.append(LevelDescription(index, lm.width, lm.height, tuple(descs), support))
    d = ImageDescription(r.width, r.height, p, tuple(levels))
    texts = tuple(_level_text(lv) for lv in d.levels)
    if with_density:
        d = replace(d, density=tuple(_density_rows(d, texts)))
    object.__setattr__(d, "_texts", texts)
    return d


def label_map(d: ImageDescription, level: int) -> np.ndarray:
    lv = d.level(level)
    vals = np.fromiter((lab for lab, _ in lv.support), dtype=np.int32, count=len(lv.support))
    lens = np.fromiter((n for _, n in lv.support), dtype=np.int64, count=len(lv.support))
    return np.repeat(vals, lens).reshape(lv.height, lv.width)


def reconstruct(d: ImageDescription, level: int = 0) -> Raster:
    """Paint every pixel of ``level`` with its region's mean, rounded half up."""
    lv = d.level(level)
    labels = label_map(d, level)
    lut = np.zeros(int(labels.max()) + 1, dtype=np.uint8)
    for reg in lv.regions:
        lut[reg.label] = min(255, math.floor(reg.mean_intensity + 0.5))
    return Raster(lut[labels])


# ---------------------------------------------------------------- text form

def _region_obj(reg: RegionDescriptor) -> dict:
    return {
        "label": reg.label,
        "area": reg.area,
        "area_fraction": float(reg.area_fraction),
        "centroid": [float(reg.centroid[0]), float(reg.centroid[1])],
        "mean_intensity": float(reg.mean_intensity),
        "parent": reg.parent,
        "relations": [
            {"kind": rel.kind, "target": [rel.target_level, rel.target_label], "strength": float(rel.strength)}
            for rel in reg.relations
        ],
    }


def _level_obj(lv: LevelDescription) -> dict:
    return {
        "level": lv.level,
        "width": lv.width,
        "height": lv.height,
        "regions": [_region_obj(r) for r in lv.regions],
        "support": [[lab, n] for lab, n in lv.support],
    }


def _params_obj(p: SegParams) -> dict:
    return {
        "tau_seg": float(p.tau_seg),
        "tau_refine": float(p.tau_refine),
        "min_seed": int(p.min_seed),
        "max_refine_passes": int(p.max_refine_passes),
        "top_max_pixels": int(p.top_max_pixels),
    }


def _level_text(lv: LevelDescription) -> str:
    # hand-rolled equivalent of _emit(_level_obj(lv)); levels dominate output size
    regions = []
    for r in lv.regions:
        rels = ",".join(
            f'{{"kind":"{x.kind}","target":[{x.target_level},{x.target_label}],"strength":{_f(x.strength)}}}'
            for x in r.relations
        )
        parent = "null" if r.parent is None else str(r.parent)
        regions.append(
            f'{{"label":{r.label},"area":{r.area},"area_fraction":{_f(r.area_fraction)},'
            f'"centroid":[{_f(r.centroid[0])},{_f(r.centroid[1])}],"mean_intensity":{_f(r.mean_intensity)},'
            f'"parent":{parent},"relations":[{rels}]}}'
        )
    support = ",".join(f"[{lab},{n}]" for lab, n in lv.support)
    return (
        f'{{"level":{lv.level},"width":{lv.width},"height":{lv.height},'
        f'"regions":[{",".join(regions)}],"support":[{support}]}}'
    )


def level_bytes(lv: LevelDescription) -> int:
    """Size in bytes of the canonical text of one level (descriptors + support)."""
    return len(_level_text(lv).encode("utf-8"))


def _level_texts(d: ImageDescription):
    return d._texts if d._texts is not None else [_level_text(lv) for lv in d.levels]


def _density_rows(d: ImageDescription, texts=None):
    texts = texts if texts is not None else _level_texts(d)
    for lv, text in zip(d.levels, texts):
        nb = len(text.encode("utf-8"))
        yield lv.level, nb, round(nb / (lv.width * lv.height), 6)


def density_profile(d: ImageDescription) -> list[tuple[int, float]]:
    """Description bytes per pixel for every level, top first."""
    return [(lv, dens) for lv, _, dens in _density_rows(d)]


def serialize(d: ImageDescription) -> str:
    head = _emit({"version": d.version, "meta": {"width": d.width, "height": d.height, "params": _params_obj(d.params)}})
    out = head[:-1] + ',"levels":[' + ",".join(_level_texts(d)) + "]"
    if d.density is not None:
        out += ',"density":' + _emit([{"level": lv, "bytes": nb, "density": float(dens)} for lv, nb, dens in d.density])
    return out + "}"


def serialize_generic(d: ImageDescription) -> str:
    """Slow reference serializer built on the generic emitter; must equal :func:`serialize`."""
    doc = {
        "version": d.version,
        "meta": {"width": d.width, "height": d.height, "params": _params_obj(d.params)},
        "levels": [_level_obj(lv) for lv in d.levels],
    }
    if d.density is not None:
        doc["density"] = [{"level": lv, "bytes": nb, "density": float(dens)} for lv, nb, dens in d.density]
    return _emit(doc)


# ---------------------------------------------------------------- parsing

def _need(obj, key, kind, where):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"{where}: missing field {key!r}")
    return _typed(obj[key], kind, f"{where}.{key}")


def _typed(v, kind, where):
    if kind is int:
        ok = isinstance(v, int) and not isinstance(v, bool)
    elif kind is float:
        ok = isinstance(v, (int, float)) and not isinstance(v, bool)
        if ok:
            v = float(v)
    else:
        ok = isinstance(v, kind)
    if not ok:
        raise SchemaError(f"{where}: expected {getattr(kind, '__name__', kind)}, got {type(v).__name__}")
    return v


def _check_keys(obj, allowed, where):
    extra = set(obj) - set(allowed)
    if extra:
        raise SchemaError(f"{where}: unexpected fields {sorted(extra)}")


def _parse_region(obj, level, where) -> RegionDescriptor:
    _typed(obj, dict, where)
    _check_keys(obj, ("label", "area", "area_fraction", "centroid", "mean_intensity", "parent", "relations"), where)
    cen = _need(obj, "centroid", list, where)
    if len(cen) != 2:
        raise SchemaError(f"{where}.centroid: expected [x, y]")
    if "parent" not in obj:
        raise SchemaError(f"{where}: missing field 'parent'")
    parent = obj["parent"]
    if parent is not None:
        parent = _typed(parent, int, f"{where}.parent")
    rels = []
    for j, r in enumerate(_need(obj, "relations", list, where)):
        rw = f"{where}.relations[{j}]"
        _typed(r, dict, rw)
        _check_keys(r, ("kind", "target", "strength"), rw)
        kind = _need(r, "kind", str, rw)
        if kind not in KINDS:
            raise SchemaError(f"{rw}.kind: unknown relation {kind!r}")
        tgt = _need(r, "target", list, rw)
        if len(tgt) != 2:
            raise SchemaError(f"{rw}.target: expected [level, label]")
        rels.append(Relation(kind, _typed(tgt[0], int, rw), _typed(tgt[1], int, rw), _need(r, "strength", float, rw)))
    return RegionDescriptor(
        level=level,
        label=_need(obj, "label", int, where),
        area=_need(obj, "area", int, where),
        area_fraction=_need(obj, "area_fraction", float, where),
        centroid=(_typed(cen[0], float, where), _typed(cen[1], float, where)),
        mean_intensity=_need(obj, "mean_intensity", float, where),
        parent=parent,
        relations=tuple(rels),
    )


def _parse_params(obj) -> SegParams:
    where = "meta.params"
    _typed(obj, dict, where)
    _check_keys(obj, ("tau_seg", "tau_refine", "min_seed", "max_refine_passes", "top_max_pixels"), where)
    try:
        return SegParams(
            tau_seg=_need(obj, "tau_seg", float, where),
            tau_refine=_need(obj, "tau_refine", float, where),
            min_seed=_need(obj, "min_seed", int, where),
            max_refine_passes=_need(obj, "max_refine_passes", int, where),
            top_max_pixels=_need(obj, "top_max_pixels", int, where),
        )
    except SchemaError:
        raise
    except ValueError as exc:
        raise InvariantViolation(f"{where}: {exc}") from None


def deserialize(text) -> ImageDescription:
    """Parse and fully validate a description; raises a :class:`DescriptionError`."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaError(f"not UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or "version" not in doc:
        raise SchemaError("missing version field")
    if doc["version"] != FORMAT_VERSION:
        raise VersionError(f"unsupported version {doc['version']!r}; expected {FORMAT_VERSION!r}")
    try:
        d = _parse_description(doc)
    except (TypeError, AttributeError, KeyError) as exc:
        raise SchemaError(f"malformed description: {exc}") from None
    validate(d)
    return d


def _parse_description(doc) -> ImageDescription:
    _check_keys(doc, ("version", "meta", "levels", "density"), "document")
    meta = _need(doc, "meta", dict, "document")
    _check_keys(meta, ("width", "height", "params"), "meta")
    width = _need(meta, "width", int, "meta")
    height = _need(meta, "height", int, "meta")
    params = _parse_params(_need(meta, "params", dict, "meta"))

    levels = []
    for i, lo in enumerate(_need(doc, "levels", list, "document")):
        where = f"levels[{i}]"
        _typed(lo, dict, where)
        _check_keys(lo, ("level", "width", "height", "regions", "support"), where)
        index = _need(lo, "level", int, where)
        support = []
        for j, run in enumerate(_need(lo, "support", list, where)):
            if not isinstance(run, list) or len(run) != 2:
                raise SchemaError(f"{where}.support[{j}]: expected [label, run_length]")
            support.append((_typed(run[0], int, where), _typed(run[1], int, where)))
        regions = tuple(
            _parse_region(r, index, f"{where}.regions[{k}]") for k, r in enumerate(_need(lo, "regions", list, where))
        )
        levels.append(
            LevelDescription(index, _need(lo, "width", int, where), _need(lo, "height", int, where), regions, tuple(support))
        )

    density = None
    if "density" in doc:
        density = []
        for j, row in enumerate(_typed(doc["density"], list, "density")):
            where = f"density[{j}]"
            _typed(row, dict, where)
            _check_keys(row, ("level", "bytes", "density"), where)
            density.append((_need(row, "level", int, where), _need(row, "bytes", int, where), _need(row, "density", float, where)))
        density = tuple(density)

    return ImageDescription(width, height, params, tuple(levels), density)


def validate(d: ImageDescription) -> None:
    """Check every structural invariant; raises :class:`InvariantViolation`."""

    def fail(msg):
        raise InvariantViolation(msg)

    if d.width < 1 or d.height < 1:
        fail("image dimensions must be positive")
    shapes = level_shapes(d.width, d.height, d.params.top_max_pixels)
    if len(d.levels) != len(shapes):
        fail(f"expected {len(shapes)} levels for {d.width}x{d.height}, found {len(d.levels)}")

    labels_at = {}
    for pos, lv in enumerate(d.levels):
        expect_index = len(shapes) - 1 - pos
        if lv.level != expect_index:
            fail(f"level at position {pos} should be {expect_index}, found {lv.level}")
        if (lv.width, lv.height) != shapes[expect_index]:
            fail(f"level {lv.level}: dims {lv.width}x{lv.height}, expected {shapes[expect_index]}")
        npx = lv.width * lv.height
        areas: dict[int, int] = {}
        prev = None
        for lab, n in lv.support:
            if lab < 1 or n < 1:
                fail(f"level {lv.level}: support run ({lab}, {n}) is not positive")
            if lab == prev:
                fail(f"level {lv.level}: consecutive runs share label {lab}")
            prev = lab
            areas[lab] = areas.get(lab, 0) + n
        if sum(areas.values()) != npx:
            fail(f"level {lv.level}: run lengths sum to {sum(areas.values())}, expected {npx}")
        seen = [r.label for r in lv.regions]
        if seen != sorted(set(seen)):
            fail(f"level {lv.level}: region labels must be unique and ascending")
        if set(seen) != set(areas):
            fail(f"level {lv.level}: descriptor labels and support labels differ")
        frac = 0.0
        for r in lv.regions:
            if r.area != areas[r.label]:
                fail(f"level {lv.level} region {r.label}: area {r.area} != support count {areas[r.label]}")
            if not 0.0 < r.area_fraction <= 1.0:
                fail(f"level {lv.level} region {r.label}: area_fraction out of (0, 1]")
            if not 0.0 <= r.mean_intensity <= 255.0:
                fail(f"level {lv.level} region {r.label}: mean_intensity out of range")
            if not all(0.0 <= c <= 1.0 for c in r.centroid):
                fail(f"level {lv.level} region {r.label}: centroid out of [0, 1]")
            frac += r.area_fraction
        if abs(frac - 1.0) > 1e-6 * max(1, len(lv.regions)):
            fail(f"level {lv.level}: area fractions sum to {frac}")
        labels_at[lv.level] = set(seen)

    top = len(shapes) - 1
    for lv in d.levels:
        for r in lv.regions:
            if (r.parent is None) != (lv.level == top):
                fail(f"level {lv.level} region {r.label}: parent must be absent exactly at the top level")
            if r.parent is not None and r.parent not in labels_at[lv.level + 1]:
                fail(f"level {lv.level} region {r.label}: parent {r.parent} missing at level {lv.level + 1}")
            pairs = set()
            for rel in r.relations:
                if rel.kind == "sub_part_of":
                    if rel.target_level != lv.level + 1 or rel.target_label != r.parent:
                        fail(f"level {lv.level} region {r.label}: sub_part_of must target the parent")
                elif rel.target_level != lv.level:
                    fail(f"level {lv.level} region {r.label}: {rel.kind} must stay within the level")
                if rel.target_label not in labels_at.get(rel.target_level, ()):
                    fail(f"level {lv.level} region {r.label}: relation target {rel.target_label} does not exist")
                if rel.kind != "sub_part_of" and rel.target_label == r.label:
                    fail(f"level {lv.level} region {r.label}: reflexive {rel.kind}")
                if not 0.0 < rel.strength <= 1.0:
                    fail(f"level {lv.level} region {r.label}: relation strength out of (0, 1]")
                pairs.add((rel.kind, rel.target_label))
            if r.parent is not None and ("sub_part_of", r.parent) not in pairs:
                fail(f"level {lv.level} region {r.label}: missing sub_part_of relation")
        by_label = {r.label: {(x.kind, x.target_label) for x in r.relations} for r in lv.regions}
        for a, rels in by_label.items():
            for kind, b in rels:
                if kind == "adjacent_to" and ("adjacent_to", a) not in by_label[b]:
                    fail(f"level {lv.level}: adjacency {a}-{b} is not symmetric")
                if kind in ("left_of", "above") and (kind, a) in by_label[b]:
                    fail(f"level {lv.level}: {kind} between {a} and {b} is not antisymmetric")
                if kind == "left_of" and ("above", b) in rels:
                    fail(f"level {lv.level}: {a} is both left_of and above {b}")

    if d.density is not None:
        if tuple(d.density) != tuple(_density_rows(d)):
            fail("density rows do not match the stored levels")
