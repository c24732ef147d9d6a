"""Brute-force reference implementations used as independent test oracles.

Everything here is written with plain loops over Python numbers; none of
it shares code with the package under test.
"""

import math
from collections import deque

import numpy as np


def gray_pixel(r, g, b):
    return math.floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5)


def blur(img, radius):
    h, w = len(img), len(img[0])
    sigma = radius / 2.0
    taps = [math.exp(-(t * t) / (2 * sigma * sigma)) for t in range(-radius, radius + 1)]
    norm = sum(taps)
    k = [t / norm for t in taps]
    out = [[0] * w for _ in range(h)]
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for i, ky in enumerate(k):
                yy = min(max(y + i - radius, 0), h - 1)
                for j, kx in enumerate(k):
                    xx = min(max(x + j - radius, 0), w - 1)
                    acc += ky * kx * img[yy][xx]
            out[y][x] = min(max(math.floor(acc + 0.5), 0), 255)
    return out


def ssim_at(a, b, y, x, window, c1, c2):
    h, w = len(a), len(a[0])
    r = window // 2
    pa, pb = [], []
    for yy in range(max(y - r, 0), min(y + r + 1, h)):
        for xx in range(max(x - r, 0), min(x + r + 1, w)):
            pa.append(float(a[yy][xx]))
            pb.append(float(b[yy][xx]))
    n = len(pa)
    ma = sum(pa) / n
    mb = sum(pb) / n
    va = sum((v - ma) ** 2 for v in pa) / n
    vb = sum((v - mb) ** 2 for v in pb) / n
    cov = sum((u - ma) * (v - mb) for u, v in zip(pa, pb)) / n
    return ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))


def components(mask):
    """8-connected components by BFS: list of sets of (y, x)."""
    h, w = len(mask), len(mask[0])
    seen = [[False] * w for _ in range(h)]
    comps = []
    for y in range(h):
        for x in range(w):
            if not mask[y][x] or seen[y][x]:
                continue
            comp = set()
            q = deque([(y, x)])
            seen[y][x] = True
            while q:
                cy, cx = q.popleft()
                comp.add((cy, cx))
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < h and 0 <= nx < w and mask[ny][nx] and not seen[ny][nx]:
                            seen[ny][nx] = True
                            q.append((ny, nx))
            comps.append(comp)
    return comps


def bbox_of(comp):
    ys = [p[0] for p in comp]
    xs = [p[1] for p in comp]
    return min(xs), min(ys), max(xs) - min(xs) + 1, max(ys) - min(ys) + 1


def bilinear(src, out_size):
    """Half-pixel-centre bilinear resize with clamped sample positions."""
    h, w = len(src), len(src[0])
    out = [[0.0] * out_size for _ in range(out_size)]
    for oy in range(out_size):
        sy = min(max((oy + 0.5) * h / out_size - 0.5, 0.0), h - 1)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, h - 1)
        fy = sy - y0
        for ox in range(out_size):
            sx = min(max((ox + 0.5) * w / out_size - 0.5, 0.0), w - 1)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, w - 1)
            fx = sx - x0
            top = src[y0][x0] * (1 - fx) + src[y0][x1] * fx
            bot = src[y1][x0] * (1 - fx) + src[y1][x1] * fx
            out[oy][ox] = (top * (1 - fy) + bot * fy) / 255.0
    return out


def conv2d(x, k, b):
    h, w, c = x.shape
    kk, _, _, f = k.shape
    out = np.zeros((h - kk + 1, w - kk + 1, f))
    for y in range(h - kk + 1):
        for xx in range(w - kk + 1):
            for ff in range(f):
                acc = float(b[ff])
                for dy in range(kk):
                    for dx in range(kk):
                        for cc in range(c):
                            acc += float(x[y + dy, xx + dx, cc]) * float(k[dy, dx, cc, ff])
                out[y, xx, ff] = acc
    return out


def maxpool(x):
    h, w, c = x.shape
    out = np.zeros((h // 2, w // 2, c))
    for y in range(h // 2):
        for xx in range(w // 2):
            for cc in range(c):
                out[y, xx, cc] = max(x[2 * y, 2 * xx, cc], x[2 * y + 1, 2 * xx, cc],
                                     x[2 * y, 2 * xx + 1, cc], x[2 * y + 1, 2 * xx + 1, cc])
    return out


def dense(x, wt, b):
    n, m = wt.shape
    return np.array([float(b[j]) + sum(float(x[i]) * float(wt[i, j]) for i in range(n))
                     for j in range(m)])


def gmm_pixel_run(values, k=3, alpha=0.05, lam=2.5, init_var=225.0, floor=4.0, low=0.05):
    """Scalar adaptive-mixture recurrence for one pixel.

    Returns the final list of (weight, mean, variance), ranked by
    weight / sqrt(variance) descending.
    """
    comps = [[1.0, 0.0, init_var]] + [[0.0, 0.0, init_var] for _ in range(k - 1)]
    for x in values:
        match = None
        for i, (w, m, v) in enumerate(comps):
            if w > 0 and abs(x - m) <= lam * math.sqrt(v):
                match = i
                break
        for i, c in enumerate(comps):
            c[0] = (1 - alpha) * c[0] + (alpha if i == match else 0.0)
        if match is not None:
            w, m, v = comps[match]
            rho = alpha / max(w, alpha)
            d = x - m
            comps[match] = [w, m + rho * d, max(v + rho * (d * d - v), floor)]
        else:
            comps[-1] = [low, float(x), init_var]
        total = sum(c[0] for c in comps)
        for c in comps:
            c[0] /= total
        comps.sort(key=lambda c: -c[0] / math.sqrt(c[2]))
    return comps
