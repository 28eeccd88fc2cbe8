# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pixel kernels. Output-identical to ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from libc.stdlib cimport malloc, free

cnp.import_array()

NAME = "cython"


def squeeze(const cnp.uint8_t[:, ::1] a):
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1]
    cdef Py_ssize_t oh = (h + 1) // 2, ow = (w + 1) // 2
    cdef Py_ssize_t y, x, y0, y1, x0, x1
    out = np.empty((oh, ow), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] o = out
    for y in range(oh):
        y0 = 2 * y
        y1 = y0 + 1 if y0 + 1 < h else y0
        for x in range(ow):
            x0 = 2 * x
            x1 = x0 + 1 if x0 + 1 < w else x0
            o[y, x] = <cnp.uint8_t>((<int>a[y0, x0] + a[y0, x1] + a[y1, x0] + a[y1, x1] + 2) // 4)
    return out


def grow_regions(const cnp.uint8_t[:, ::1] values, const cnp.uint8_t[:, ::1] mask,
                 double tau, cnp.int32_t[:, ::1] labels, cnp.int32_t start_label):
    cdef Py_ssize_t h = values.shape[0], w = values.shape[1], n = h * w
    cdef Py_ssize_t sy, sx, p, q, head, tail, k
    cdef Py_ssize_t y, x, ny, nx
    cdef cnp.int32_t nxt = start_label
    cdef long long total, count, v
    cdef Py_ssize_t *queue = <Py_ssize_t *>malloc(n * sizeof(Py_ssize_t))
    cdef unsigned char *todo = <unsigned char *>malloc(n)
    if queue == NULL or todo == NULL:
        free(queue)
        free(todo)
        raise MemoryError()
    try:
        for y in range(h):
            for x in range(w):
                todo[y * w + x] = 1 if mask[y, x] else 0
        for sy in range(h):
            for sx in range(w):
                p = sy * w + sx
                if not todo[p]:
                    continue
                todo[p] = 0
                labels[sy, sx] = nxt
                total = values[sy, sx]
                count = 1
                head = 0
                tail = 0
                queue[tail] = p
                tail += 1
                while head < tail:
                    p = queue[head]
                    head += 1
                    y = p // w
                    x = p - y * w
                    # neighbour order: up, left, right, down
                    for k in range(4):
                        if k == 0:
                            ny = y - 1
                            nx = x
                        elif k == 1:
                            ny = y
                            nx = x - 1
                        elif k == 2:
                            ny = y
                            nx = x + 1
                        else:
                            ny = y + 1
                            nx = x
                        if ny < 0 or nx < 0 or ny >= h or nx >= w:
                            continue
                        q = ny * w + nx
                        if not todo[q]:
                            continue
                        v = values[ny, nx]
                        if fabs(<double>(v * count - total)) <= tau * count:
                            todo[q] = 0
                            labels[ny, nx] = nxt
                            total += v
                            count += 1
                            queue[tail] = q
                            tail += 1
                nxt += 1
    finally:
        free(queue)
        free(todo)
    return nxt


def refine_pass(const cnp.uint8_t[:, ::1] ref, cnp.int32_t[:, ::1] labels,
                cnp.uint8_t[:, ::1] deviant, const double[::1] means, double tau):
    cdef Py_ssize_t h = ref.shape[0], w = ref.shape[1]
    cdef Py_ssize_t y, x, ny, nx, k
    cdef cnp.int32_t best, cand
    cdef double best_d, d, v
    cdef Py_ssize_t resolved = 0
    for y in range(h):
        for x in range(w):
            if not deviant[y, x]:
                continue
            v = ref[y, x]
            best = -1
            best_d = 0.0
            # candidates: self, up, left, right, down
            for k in range(5):
                if k == 0:
                    ny = y
                    nx = x
                elif k == 1:
                    ny = y - 1
                    nx = x
                elif k == 2:
                    ny = y
                    nx = x - 1
                elif k == 3:
                    ny = y
                    nx = x + 1
                else:
                    ny = y + 1
                    nx = x
                if ny < 0 or nx < 0 or ny >= h or nx >= w:
                    continue
                cand = labels[ny, nx]
                d = fabs(v - means[cand])
                if best < 0 or d < best_d or (d == best_d and cand < best):
                    best = cand
                    best_d = d
            if best_d <= tau:
                labels[y, x] = best
                deviant[y, x] = 0
                resolved += 1
    return resolved


def run_lengths(flat):
    cdef cnp.int64_t[::1] src = np.ascontiguousarray(flat, dtype=np.int64)
    cdef Py_ssize_t n = src.shape[0], i, r = 0
    vals = np.empty(n, dtype=np.int64)
    lens = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] vv = vals, ll = lens
    if n == 0:
        return vals, lens
    vv[0] = src[0]
    ll[0] = 1
    for i in range(1, n):
        if src[i] == vv[r]:
            ll[r] += 1
        else:
            r += 1
            vv[r] = src[i]
            ll[r] = 1
    return vals[:r + 1].copy(), lens[:r + 1].copy()


def label_components(const cnp.int32_t[:, ::1] labels, cnp.int32_t[:, ::1] out):
    cdef Py_ssize_t h = labels.shape[0], w = labels.shape[1], n = h * w
    cdef Py_ssize_t sy, sx, p, q, head, tail, y, x, ny, nx, k
    cdef cnp.int32_t count = 0, v
    cdef Py_ssize_t *queue = <Py_ssize_t *>malloc(max(n, 1) * sizeof(Py_ssize_t))
    if queue == NULL:
        raise MemoryError()
    try:
        for y in range(h):
            for x in range(w):
                out[y, x] = 0
        for sy in range(h):
            for sx in range(w):
                if out[sy, sx]:
                    continue
                count += 1
                v = labels[sy, sx]
                out[sy, sx] = count
                head = 0
                tail = 1
                queue[0] = sy * w + sx
                while head < tail:
                    p = queue[head]
                    head += 1
                    y = p // w
                    x = p - y * w
                    for k in range(4):
                        if k == 0:
                            ny = y - 1
                            nx = x
                        elif k == 1:
                            ny = y
                            nx = x - 1
                        elif k == 2:
                            ny = y
                            nx = x + 1
                        else:
                            ny = y + 1
                            nx = x
                        if ny < 0 or nx < 0 or ny >= h or nx >= w:
                            continue
                        if out[ny, nx] or labels[ny, nx] != v:
                            continue
                        out[ny, nx] = count
                        queue[tail] = ny * w + nx
                        tail += 1
    finally:
        free(queue)
    return count
