"""Pure-Python implementations of the pixel kernels.

Used when the compiled ``_kernels`` extension is unavailable, and as the
reference the extension is checked against. Every function here must stay
output-identical to its counterpart in ``_kernels.pyx``.
"""

from collections import deque

import numpy as np

NAME = "python"


def squeeze(a):
    """2x2 block mean, round half up, odd edges padded by replication."""
    h, w = a.shape
    if h % 2:
        a = np.concatenate([a, a[-1:, :]], axis=0)
    if w % 2:
        a = np.concatenate([a, a[:, -1:]], axis=1)
    s = a.astype(np.int32)
    total = s[0::2, 0::2] + s[0::2, 1::2] + s[1::2, 0::2] + s[1::2, 1::2]
    return ((total + 2) // 4).astype(np.uint8)


def grow_regions(values, mask, tau, labels, start_label):
    """Incremental-mean region growing over the pixels where ``mask`` is set.

    Seeds are taken in row-major order; each region grows breadth-first with
    neighbours visited up, left, right, down. A neighbour joins when its
    intensity is within ``tau`` of the region's running mean. ``labels`` is
    written in place for masked pixels only. Returns the next unused label.
    """
    h, w = values.shape
    vals = values.tolist()
    m = mask.tolist()
    lab = labels.tolist()
    todo = [[bool(m[y][x]) for x in range(w)] for y in range(h)]
    nxt = start_label
    for sy in range(h):
        row = todo[sy]
        for sx in range(w):
            if not row[sx]:
                continue
            row[sx] = False
            lab[sy][sx] = nxt
            total = vals[sy][sx]
            count = 1
            queue = deque([(sy, sx)])
            while queue:
                y, x = queue.popleft()
                for ny, nx in ((y - 1, x), (y, x - 1), (y, x + 1), (y + 1, x)):
                    if ny < 0 or nx < 0 or ny >= h or nx >= w or not todo[ny][nx]:
                        continue
                    v = vals[ny][nx]
                    if abs(v * count - total) <= tau * count:
                        todo[ny][nx] = False
                        lab[ny][nx] = nxt
                        total += v
                        count += 1
                        queue.append((ny, nx))
            nxt += 1
    labels[...] = np.asarray(lab, dtype=labels.dtype)
    return nxt


def refine_pass(ref, labels, deviant, means, tau):
    """One row-major sweep over deviant pixels.

    A deviant pixel takes the candidate label (its own or a 4-neighbour's)
    whose region mean is closest to its intensity, if that distance is within
    ``tau``; ties go to the lowest label. Updates are visible to later pixels
    of the same sweep. Returns the number of pixels resolved.
    """
    h, w = ref.shape
    vals = ref.tolist()
    lab = labels.tolist()
    dev = deviant.tolist()
    mu = means.tolist()
    resolved = 0
    for y in range(h):
        for x in range(w):
            if not dev[y][x]:
                continue
            v = vals[y][x]
            best = -1
            best_d = 0.0
            for ny, nx in ((y, x), (y - 1, x), (y, x - 1), (y, x + 1), (y + 1, x)):
                if ny < 0 or nx < 0 or ny >= h or nx >= w:
                    continue
                cand = lab[ny][nx]
                d = abs(v - mu[cand])
                if best < 0 or d < best_d or (d == best_d and cand < best):
                    best = cand
                    best_d = d
            if best_d <= tau:
                lab[y][x] = best
                dev[y][x] = 0
                resolved += 1
    labels[...] = np.asarray(lab, dtype=labels.dtype)
    deviant[...] = np.asarray(dev, dtype=deviant.dtype)
    return resolved


def run_lengths(flat):
    """Run-length encode a 1-D label array into (values, lengths)."""
    flat = np.asarray(flat)
    if flat.size == 0:
        return flat[:0].astype(np.int64), np.zeros(0, dtype=np.int64)
    starts = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate([[0], starts])
    lengths = np.diff(np.concatenate([starts, [flat.size]]))
    return flat[starts].astype(np.int64), lengths.astype(np.int64)


def label_components(labels, out):
    """4-connected components of equal label, numbered from 1 in row-major discovery order.

    Writes component ids into ``out``; returns the component count.
    """
    h, w = labels.shape
    lab = labels.tolist()
    comp = [[0] * w for _ in range(h)]
    n = 0
    for sy in range(h):
        for sx in range(w):
            if comp[sy][sx]:
                continue
            n += 1
            v = lab[sy][sx]
            comp[sy][sx] = n
            queue = deque([(sy, sx)])
            while queue:
                y, x = queue.popleft()
                for ny, nx in ((y - 1, x), (y, x - 1), (y, x + 1), (y + 1, x)):
                    if 0 <= ny < h and 0 <= nx < w and not comp[ny][nx] and lab[ny][nx] == v:
                        comp[ny][nx] = n
                        queue.append((ny, nx))
    out[...] = np.asarray(comp, dtype=out.dtype)
    return n
