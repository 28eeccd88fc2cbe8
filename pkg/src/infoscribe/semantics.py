"""Rule-based labeling of described regions from an external lexicon.

Nothing here knows any word or phrase: all vocabulary comes from a lexicon
file. Labeling runs on the finest level of a description and reads only the
region descriptors (attributes and relations), never pixels.

Lexicon file (JSON, version ``lex-1``)::

    {
      "version": "lex-1",
      "title_pattern": "Scene: {phrases}.",      # optional; {phrases} = affirmed phrase names
      "words": [
        {"name": "sky",
         "intensity": [180, 255],                 # optional, inclusive, within [0, 255]
         "area_fraction": [0.05, 1.0],            # optional, inclusive, within [0, 1]
         "relations": [{"kind": "above", "target": "ground"}]},   # optional
        {"name": "ground", "intensity": [0, 120]}
      ],
      "phrases": [
        {"name": "landscape",
         "members": ["sky", "ground"],
         "relations": [{"from": "sky", "kind": "above", "to": "ground"}],
         "sentence": "The {sky} is above the {ground}."}
      ]
    }

A word fires on a region when every one of its constraints holds. A word
relation ``(kind, target)`` holds when the region has a ``kind`` relation to
some other region whose intensity/area attributes match ``target``. When
several words fire, the one with the most constraints wins; declaration
order breaks ties.
"""

from __future__ import annotations

import itertools
import json
import string
from dataclasses import dataclass

from ._canon import emit as _emit
from .description import ImageDescription

LEXICON_VERSION = "lex-1"
ANNOTATION_VERSION = "ann-1"
DEFAULT_TITLE = "Scene: {phrases}."
NO_PHRASES = "No phrases affirmed."
WORD_RELATION_KINDS = ("adjacent_to", "contains", "left_of", "above")


class LexiconError(ValueError):
    pass


class SchemaError(LexiconError):
    pass


class DanglingReference(LexiconError):
    pass


class EmptyRange(LexiconError):
    pass


@dataclass(frozen=True)
class Word:
    name: str
    intensity: tuple[float, float] | None = None
    area_fraction: tuple[float, float] | None = None
    relations: tuple[tuple[str, str], ...] = ()

    @property
    def n_constraints(self) -> int:
        return (self.intensity is not None) + (self.area_fraction is not None) + len(self.relations)

    def attributes_match(self, region) -> bool:
        if self.intensity is not None:
            lo, hi = self.intensity
            if not lo <= region.mean_intensity <= hi:
                return False
        if self.area_fraction is not None:
            lo, hi = self.area_fraction
            if not lo <= region.area_fraction <= hi:
                return False
        return True


@dataclass(frozen=True)
class Phrase:
    name: str
    members: tuple[str, ...]
    relations: tuple[tuple[str, str, str], ...]  # (from word, kind, to word)
    sentence: str


@dataclass(frozen=True)
class Lexicon:
    words: tuple[Word, ...] = ()
    phrases: tuple[Phrase, ...] = ()
    title_pattern: str = DEFAULT_TITLE

    def word(self, name: str) -> Word:
        for w in self.words:
            if w.name == name:
                return w
        raise KeyError(name)


@dataclass(frozen=True)
class AffirmedPhrase:
    phrase: str
    bindings: tuple[tuple[str, int], ...]  # (word, region label) in member order


@dataclass(frozen=True)
class Annotation:
    level: int
    assignments: tuple[tuple[int, str], ...]  # (region label, word), label order
    affirmed: tuple[AffirmedPhrase, ...]
    narrative: str
    unmatched: tuple[int, ...]

    @property
    def is_empty(self) -> bool:
        return not self.assignments and not self.affirmed


# ---------------------------------------------------------------- lexicon io

def _placeholders(pattern: str, where: str) -> list[str]:
    try:
        return [f for _, f, _, _ in string.Formatter().parse(pattern) if f is not None]
    except ValueError as exc:
        raise SchemaError(f"{where}: bad pattern {pattern!r}: {exc}") from None


def _range(v, lo_bound, hi_bound, where):
    if v is None:
        return None
    if (
        not isinstance(v, list)
        or len(v) != 2
        or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)
    ):
        raise SchemaError(f"{where}: expected [lo, hi]")
    lo, hi = float(v[0]), float(v[1])
    if not (lo_bound <= lo <= hi_bound and lo_bound <= hi <= hi_bound):
        raise SchemaError(f"{where}: bounds must lie in [{lo_bound:g}, {hi_bound:g}]")
    if lo > hi:
        raise EmptyRange(f"{where}: empty range [{v[0]}, {v[1]}]")
    return (lo, hi)


def _obj(v, keys, required, where):
    if not isinstance(v, dict):
        raise SchemaError(f"{where}: expected an object")
    extra = set(v) - set(keys)
    if extra:
        raise SchemaError(f"{where}: unexpected fields {sorted(extra)}")
    for k in required:
        if k not in v:
            raise SchemaError(f"{where}: missing field {k!r}")
    return v


def _str(v, where):
    if not isinstance(v, str) or not v:
        raise SchemaError(f"{where}: expected a non-empty string")
    return v


def load_lexicon(text) -> Lexicon:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaError(f"not UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from None
    try:
        return _parse_lexicon(doc)
    except (TypeError, AttributeError) as exc:
        raise SchemaError(f"malformed lexicon: {exc}") from None


def _parse_lexicon(doc) -> Lexicon:
    _obj(doc, ("version", "title_pattern", "words", "phrases"), ("version",), "lexicon")
    if doc["version"] != LEXICON_VERSION:
        raise SchemaError(f"unsupported lexicon version {doc['version']!r}; expected {LEXICON_VERSION!r}")

    title = doc.get("title_pattern")
    title = DEFAULT_TITLE if title is None else title
    if not isinstance(title, str):
        raise SchemaError("title_pattern: expected a string")
    for f in _placeholders(title, "title_pattern"):
        if f != "phrases":
            raise SchemaError(f"title_pattern: unknown placeholder {{{f}}}")

    raw_words = doc.get("words") or []
    raw_phrases = doc.get("phrases") or []
    if not isinstance(raw_words, list) or not isinstance(raw_phrases, list):
        raise SchemaError("words and phrases must be lists")

    words = []
    names = set()
    for i, w in enumerate(raw_words):
        where = f"words[{i}]"
        _obj(w, ("name", "intensity", "area_fraction", "relations"), ("name",), where)
        name = _str(w["name"], f"{where}.name")
        if name in names:
            raise SchemaError(f"{where}: duplicate word {name!r}")
        names.add(name)
        rels = []
        if not isinstance(w.get("relations") or [], list):
            raise SchemaError(f"{where}.relations: expected a list")
        for j, r in enumerate(w.get("relations") or []):
            rw = f"{where}.relations[{j}]"
            _obj(r, ("kind", "target"), ("kind", "target"), rw)
            if r["kind"] not in WORD_RELATION_KINDS:
                raise SchemaError(f"{rw}: unsupported relation kind {r['kind']!r}")
            rels.append((r["kind"], _str(r["target"], f"{rw}.target")))
        words.append(
            Word(
                name,
                _range(w.get("intensity"), 0.0, 255.0, f"{where}.intensity"),
                _range(w.get("area_fraction"), 0.0, 1.0, f"{where}.area_fraction"),
                tuple(rels),
            )
        )
    for w in words:
        for kind, target in w.relations:
            if target not in names:
                raise DanglingReference(f"word {w.name!r} relation {kind} names undeclared word {target!r}")

    phrases = []
    pnames = set()
    for i, p in enumerate(raw_phrases):
        where = f"phrases[{i}]"
        _obj(p, ("name", "members", "relations", "sentence"), ("name", "members", "sentence"), where)
        name = _str(p["name"], f"{where}.name")
        if name in pnames:
            raise SchemaError(f"{where}: duplicate phrase {name!r}")
        pnames.add(name)
        members = p["members"]
        if not isinstance(members, list) or not members:
            raise SchemaError(f"{where}.members: expected a non-empty list")
        members = tuple(_str(m, f"{where}.members") for m in members)
        if len(set(members)) != len(members):
            raise SchemaError(f"{where}.members: duplicate member")
        for m in members:
            if m not in names:
                raise DanglingReference(f"phrase {name!r} names undeclared word {m!r}")
        rels = []
        if not isinstance(p.get("relations") or [], list):
            raise SchemaError(f"{where}.relations: expected a list")
        for j, r in enumerate(p.get("relations") or []):
            rw = f"{where}.relations[{j}]"
            _obj(r, ("from", "kind", "to"), ("from", "kind", "to"), rw)
            if r["kind"] not in WORD_RELATION_KINDS:
                raise SchemaError(f"{rw}: unsupported relation kind {r['kind']!r}")
            for end in ("from", "to"):
                if r[end] not in members:
                    raise DanglingReference(f"phrase {name!r} relation refers to non-member {r[end]!r}")
            rels.append((r["from"], r["kind"], r["to"]))
        sentence = p["sentence"]
        if not isinstance(sentence, str):
            raise SchemaError(f"{where}.sentence: expected a string")
        for f in _placeholders(sentence, f"{where}.sentence"):
            if f not in members:
                raise DanglingReference(f"phrase {name!r} sentence uses non-member placeholder {{{f}}}")
        phrases.append(Phrase(name, members, tuple(rels), sentence))

    return Lexicon(tuple(words), tuple(phrases), title)


def dump_lexicon(lex: Lexicon) -> str:
    """Canonical text for a lexicon; ``load_lexicon`` inverts it."""

    def rng(r):
        return None if r is None else [float(r[0]), float(r[1])]

    return _emit(
        {
            "version": LEXICON_VERSION,
            "title_pattern": lex.title_pattern,
            "words": [
                {
                    "name": w.name,
                    "intensity": rng(w.intensity),
                    "area_fraction": rng(w.area_fraction),
                    "relations": [{"kind": k, "target": t} for k, t in w.relations],
                }
                for w in lex.words
            ],
            "phrases": [
                {
                    "name": p.name,
                    "members": list(p.members),
                    "relations": [{"from": a, "kind": k, "to": b} for a, k, b in p.relations],
                    "sentence": p.sentence,
                }
                for p in lex.phrases
            ],
        }
    )


# ---------------------------------------------------------------- labeling

def _relation_index(level):
    return {r.label: {(x.kind, x.target_label) for x in r.relations if x.target_level == level.level} for r in level.regions}


def fire_labels(d: ImageDescription, lex: Lexicon) -> dict[int, str]:
    """Best-matching word for every finest-level region that any word fits."""
    level = d.finest
    rels = _relation_index(level)
    attr = {w.name: {r.label for r in level.regions if w.attributes_match(r)} for w in lex.words}
    out = {}
    for region in level.regions:
        best = None
        for w in lex.words:
            if region.label not in attr[w.name]:
                continue
            if not all(
                any(k == kind and s != region.label and s in attr[target] for k, s in rels[region.label])
                for kind, target in w.relations
            ):
                continue
            if best is None or w.n_constraints > best.n_constraints:
                best = w
        if best is not None:
            out[region.label] = best.name
    return out


def affirm_context(assignments: dict[int, str], d: ImageDescription, lex: Lexicon) -> list[AffirmedPhrase]:
    level = d.finest
    rels = _relation_index(level)
    by_word: dict[str, list[int]] = {}
    for label in sorted(assignments):
        by_word.setdefault(assignments[label], []).append(label)
    out = []
    for phrase in lex.phrases:
        pools = [by_word.get(m, []) for m in phrase.members]
        for combo in itertools.product(*pools):
            if len(set(combo)) != len(combo):
                continue
            bound = dict(zip(phrase.members, combo))
            if all((kind, bound[b]) in rels[bound[a]] for a, kind, b in phrase.relations):
                out.append(AffirmedPhrase(phrase.name, tuple(zip(phrase.members, combo))))
    return out


def compose_narrative(affirmed: list[AffirmedPhrase], lex: Lexicon) -> str:
    names = list(dict.fromkeys(a.phrase for a in affirmed))
    lines = [lex.title_pattern.format(phrases=", ".join(names) if names else "none")]
    phrases = {p.name: p for p in lex.phrases}
    order = {p.name: i for i, p in enumerate(lex.phrases)}
    # stable sort keeps binding order within a phrase
    for a in sorted(affirmed, key=lambda a: order[a.phrase]):
        lines.append(phrases[a.phrase].sentence.format_map({w: w for w, _ in a.bindings}))
    if not affirmed:
        lines.append(NO_PHRASES)
    return "\n".join(lines)


def annotate(d: ImageDescription, lex: Lexicon) -> Annotation:
    assignments = fire_labels(d, lex)
    affirmed = affirm_context(assignments, d, lex)
    level = d.finest
    return Annotation(
        level=level.level,
        assignments=tuple(sorted(assignments.items())),
        affirmed=tuple(affirmed),
        narrative=compose_narrative(affirmed, lex),
        unmatched=tuple(r.label for r in level.regions if r.label not in assignments),
    )


def dump_annotation(a: Annotation) -> str:
    return _emit(
        {
            "version": ANNOTATION_VERSION,
            "level": a.level,
            "assignments": [{"label": lab, "word": w} for lab, w in a.assignments],
            "affirmed": [
                {"phrase": x.phrase, "bindings": [{"word": w, "label": lab} for w, lab in x.bindings]}
                for x in a.affirmed
            ],
            "unmatched": list(a.unmatched),
            "narrative": a.narrative,
        }
    )


def load_annotation(text) -> Annotation:
    try:
        doc = json.loads(text)
        if doc["version"] != ANNOTATION_VERSION:
            raise SchemaError(f"unsupported annotation version {doc['version']!r}")
        return Annotation(
            level=int(doc["level"]),
            assignments=tuple((int(x["label"]), str(x["word"])) for x in doc["assignments"]),
            affirmed=tuple(
                AffirmedPhrase(str(x["phrase"]), tuple((str(b["word"]), int(b["label"])) for b in x["bindings"]))
                for x in doc["affirmed"]
            ),
            narrative=str(doc["narrative"]),
            unmatched=tuple(int(v) for v in doc["unmatched"]),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"malformed annotation: {exc}") from None


def demo_lexicon() -> Lexicon:
    """The sky/ground/sun/tree lexicon shipped with the package."""
    from importlib.resources import files

    return load_lexicon(files("infoscribe").joinpath("data/demo_lexicon.json").read_bytes())
