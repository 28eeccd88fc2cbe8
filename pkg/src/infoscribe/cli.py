"""Command line interface: ``infoscribe <extract|reconstruct|density|label>``.

Exit codes: 0 ok, 2 bad input (image, description, config), 3 output not
writable, 4 unknown level, 5 bad lexicon. Data goes to stdout, diagnostics
to stderr.

Segmentation parameters resolve as: built-in defaults, then the JSON file
named by ``$INFOSCRIBE_CONFIG``, then ``--config FILE``, then flags.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

from . import __version__
from .description import DescriptionError, UnknownLevel, density_profile, deserialize, describe, level_bytes, reconstruct, serialize
from .raster import RasterError, read_image, save_image
from .segmenter import SegParams
from .semantics import LexiconError, annotate, dump_annotation, load_lexicon

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_OUTPUT = 3
EXIT_LEVEL = 4
EXIT_LEXICON = 5

CONFIG_ENV = "INFOSCRIBE_CONFIG"
_PARAM_NAMES = [f.name for f in fields(SegParams)]
_EXTRA_KEYS = {"jobs", "csv"}


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _err(msg):
    print(f"infoscribe: {msg}", file=sys.stderr)


def _load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}", EXIT_INPUT) from None
    if not isinstance(raw, dict):
        raise CliError(f"config {path}: expected a JSON object", EXIT_INPUT)
    out = {}
    for key, value in raw.items():
        norm = key.replace("-", "_")
        if norm not in _PARAM_NAMES and norm not in _EXTRA_KEYS:
            raise CliError(f"config {path}: unknown key {key!r}", EXIT_INPUT)
        out[norm] = value
    return out


def resolve_config(args) -> dict:
    """Merge defaults, env config, --config and flags into a concrete dict."""
    cfg = SegParams().as_dict()
    cfg.update(jobs=1, csv=False)
    env = os.environ.get(CONFIG_ENV)
    if env:
        cfg.update(_load_config_file(env))
    if getattr(args, "config", None):
        cfg.update(_load_config_file(args.config))
    for name in list(cfg):
        flag = getattr(args, name, None)
        if flag is not None and flag is not False:
            cfg[name] = flag
    try:
        SegParams(**{k: cfg[k] for k in _PARAM_NAMES})
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid parameters: {exc}", EXIT_INPUT) from None
    return cfg


def _params(cfg) -> SegParams:
    return SegParams(**{k: cfg[k] for k in _PARAM_NAMES})


def _write(path, data: bytes):
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_OUTPUT) from None


def _read_description(path):
    try:
        with open(path, "rb") as fh:
            return deserialize(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_INPUT) from None
    except DescriptionError as exc:
        raise CliError(f"{path}: invalid description: {exc}", EXIT_INPUT) from None


def _stem(path: str, known_suffix: str) -> str:
    if path.endswith(known_suffix):
        return path[: -len(known_suffix)]
    return str(Path(path).with_suffix(""))


# ---------------------------------------------------------------- extract

def _extract_one(image_path, out_path, params):
    try:
        raster = read_image(image_path)
    except OSError as exc:
        raise CliError(f"cannot read {image_path}: {exc.strerror or exc}", EXIT_INPUT) from None
    except RasterError as exc:
        raise CliError(f"{image_path}: {exc}", EXIT_INPUT) from None
    d = describe(raster, params)
    _write(out_path, serialize(d).encode("utf-8"))
    return [(lv.level, lv.width, lv.height, len(lv.regions)) for lv in d.levels]


def _extract_job(job):
    image_path, out_path, params = job
    try:
        return EXIT_OK, _extract_one(image_path, out_path, params), None
    except CliError as exc:
        return exc.code, None, str(exc)


def cmd_extract(args) -> int:
    cfg = resolve_config(args)
    params = _params(cfg)
    if args.output and len(args.images) > 1:
        raise CliError("-o/--output needs exactly one input image", EXIT_INPUT)
    jobs = [(img, args.output or _stem(img, ".pgm") + ".pid.json", params) for img in args.images]
    n_workers = max(1, int(cfg["jobs"]))
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_extract_job, jobs))
    else:
        results = [_extract_job(j) for j in jobs]

    code = EXIT_OK
    for (img, out, _), (status, rows, message) in zip(jobs, results):
        if status != EXIT_OK:
            _err(message)
            code = max(code, status)
            continue
        print(f"# {img} -> {out}")
        print("level\twidth\theight\tregions")
        for row in rows:
            print("\t".join(str(v) for v in row))
    return code


# ---------------------------------------------------------------- reconstruct

def cmd_reconstruct(args) -> int:
    d = _read_description(args.description)
    try:
        raster = reconstruct(d, args.level)
    except UnknownLevel as exc:
        raise CliError(str(exc), EXIT_LEVEL) from None
    out = args.output or f"{_stem(args.description, '.pid.json')}.L{args.level}.pgm"
    _write(out, save_image(raster))
    print(out)
    return EXIT_OK


# ---------------------------------------------------------------- density

def cmd_density(args) -> int:
    cfg = resolve_config(args)
    d = _read_description(args.description)
    sep = "," if cfg["csv"] else "\t"
    if args.header:
        print(sep.join(("level", "width", "height", "bytes", "density")))
    for (level, dens), lv in zip(density_profile(d), d.levels):
        print(sep.join((str(level), str(lv.width), str(lv.height), str(level_bytes(lv)), f"{dens:.6f}")))
    return EXIT_OK


# ---------------------------------------------------------------- label

def cmd_label(args) -> int:
    d = _read_description(args.description)
    try:
        with open(args.lexicon, "rb") as fh:
            lex = load_lexicon(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read lexicon {args.lexicon}: {exc.strerror or exc}", EXIT_LEXICON) from None
    except LexiconError as exc:
        raise CliError(f"{args.lexicon}: invalid lexicon ({type(exc).__name__}): {exc}", EXIT_LEXICON) from None
    ann = annotate(d, lex)
    out = args.output or f"{_stem(args.description, '.pid.json')}.ann.json"
    _write(out, dump_annotation(ann).encode("utf-8"))
    print(ann.narrative)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _add_param_flags(p):
    p.add_argument("--config", help="JSON config file (keys as flag names)")
    p.add_argument("--tau-seg", dest="tau_seg", type=float, help="top-level growing tolerance")
    p.add_argument("--tau-refine", dest="tau_refine", type=float, help="refinement deviation threshold")
    p.add_argument("--min-seed", dest="min_seed", type=int, help="minimum pixels for a new region")
    p.add_argument("--max-refine-passes", dest="max_refine_passes", type=int)
    p.add_argument("--top-max-pixels", dest="top_max_pixels", type=int, help="pyramid top size bound")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infoscribe", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"infoscribe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="describe an image (PGM/PPM)")
    p.add_argument("images", nargs="+")
    p.add_argument("-o", "--output")
    p.add_argument("--jobs", type=int, help="process several images in parallel")
    _add_param_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("reconstruct", help="repaint one level of a description as PGM")
    p.add_argument("description")
    p.add_argument("-o", "--output")
    p.add_argument("--level", type=int, default=0)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("density", help="per-level description bytes per pixel")
    p.add_argument("description")
    p.add_argument("--csv", action="store_true", default=None)
    p.add_argument("--header", action="store_true")
    p.add_argument("--config")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("label", help="apply a lexicon to a description")
    p.add_argument("description")
    p.add_argument("lexicon")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_label)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code not in (None, 0) else 0
    try:
        return args.func(args)
    except CliError as exc:
        _err(exc)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
