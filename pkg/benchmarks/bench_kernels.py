"""Compare the compiled and pure-Python kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--size 128] [--repeat 3]

Each kernel is timed on the same inputs with both backends, then the whole
``describe`` pipeline is timed in a child process per backend (the backend
is chosen once at import, through ``INFOSCRIBE_PURE``).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from infoscribe import _pykernels

try:
    from infoscribe import _kernels as compiled
except ImportError:
    compiled = None

PIPELINE = """
import sys, time, numpy as np
from infoscribe._backend import BACKEND
from infoscribe.description import describe, serialize
from infoscribe.raster import Raster
rng = np.random.default_rng(0)
size = int(sys.argv[1])
# smooth-ish field: random walk rows, so regions are neither trivial nor pixel noise
img = np.clip(np.cumsum(rng.integers(-3, 4, (size, size)), axis=1) + 128, 0, 255).astype(np.uint8)
times = []
for _ in range(int(sys.argv[2])):
    t0 = time.perf_counter()
    serialize(describe(Raster(img)))
    times.append(time.perf_counter() - t0)
print(BACKEND, min(times))
"""


def _inputs(size, rng):
    values = np.clip(np.cumsum(rng.integers(-3, 4, (size, size)), axis=1) + 128, 0, 255).astype(np.uint8)
    labels = (np.arange(size * size).reshape(size, size) // (size * 4) + 1).astype(np.int32)
    means = np.linspace(0, 255, int(labels.max()) + 1)
    return values, labels, means


def _cases(mod, values, labels, means):
    mask = np.ones(values.shape, dtype=np.uint8)
    return {
        "squeeze": lambda: mod.squeeze(values),
        "grow_regions": lambda: mod.grow_regions(values, mask, 12.0, np.zeros(values.shape, np.int32), 1),
        "refine_pass": lambda: mod.refine_pass(values, labels.copy(), mask.copy(), means, 12.0),
        "label_components": lambda: mod.label_components(labels, np.zeros_like(labels)),
        "run_lengths": lambda: mod.run_lengths(labels.reshape(-1)),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=128, help="square image side in pixels")
    ap.add_argument("--repeat", type=int, default=3, help="best-of repetitions")
    args = ap.parse_args(argv)

    values, labels, means = _inputs(args.size, np.random.default_rng(0))
    backends = [("python", _pykernels)] + ([("cython", compiled)] if compiled else [])
    timings = {}
    for name, mod in backends:
        for kernel, fn in _cases(mod, values, labels, means).items():
            timings[(kernel, name)] = min(timeit.repeat(fn, number=1, repeat=args.repeat))

    print(f"kernels on {args.size}x{args.size} (best of {args.repeat}, seconds)")
    print(f"{'kernel':<18}{'python':>12}{'cython':>12}{'speedup':>10}")
    for kernel in _cases(_pykernels, values, labels, means):
        py = timings[(kernel, "python")]
        cy = timings.get((kernel, "cython"))
        cy_s = f"{cy:12.5f}" if cy is not None else f"{'n/a':>12}"
        sp = f"{py / cy:9.1f}x" if cy else f"{'':>10}"
        print(f"{kernel:<18}{py:12.5f}{cy_s}{sp}")

    print(f"\ndescribe + serialize on {args.size}x{args.size}")
    for pure in ("1", "0"):
        env = dict(os.environ, INFOSCRIBE_PURE=pure)
        out = subprocess.run([sys.executable, "-c", PIPELINE, str(args.size), str(args.repeat)],
                             capture_output=True, text=True, env=env, check=True).stdout.split()
        print(f"{out[0]:<18}{float(out[1]):12.4f}")


if __name__ == "__main__":
    main()
