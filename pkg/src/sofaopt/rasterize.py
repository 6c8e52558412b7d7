"""Pixel-grid oracles, independent of the envelope/waterfall pipeline.

The movement oracle rasterizes the set of points that stay inside the
corridor at every sampled pose (the honest unswept region) and measures its
largest connected component. Membership along one pixel column is evaluated
through 64-bit row masks so a 4000 x 4000 grid over thousands of poses stays
fast on one core; a plain per-pixel reference predicate is provided for
cross-checking the packed kernel.

The half-plane oracle rasterizes rotated-corridor / butterfly constraint sets
directly from their inequalities, for checking the column-interval algebra.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy import ndimage

from .validation import check_count

_ONES = np.uint64(0xFFFFFFFFFFFFFFFF)


def corridor_membership(x, y, pose_x, pose_y, pose_angle):
    """Reference predicate: is (x, y) inside the corridor at this pose?

    The corridor is the union of a horizontal arm {0 <= eta <= 1, xi <= 1}
    and a vertical arm {0 <= xi <= 1, eta <= 1} in the pose's local frame.
    """
    c = np.cos(pose_angle)
    s = np.sin(pose_angle)
    dx = np.asarray(x, dtype=np.float64) - pose_x
    dy = np.asarray(y, dtype=np.float64) - pose_y
    xi = dx * c + dy * s
    eta = -dx * s + dy * c
    arm_h = (eta >= 0.0) & (eta <= 1.0) & (xi <= 1.0)
    arm_v = (xi >= 0.0) & (xi <= 1.0) & (eta <= 1.0)
    return arm_h | arm_v


@njit(cache=True)
def _word_mask(w, ilo, ihi):
    lo = ilo - 64 * w
    hi = ihi - 64 * w
    if lo < 0:
        lo = 0
    if hi > 63:
        hi = 63
    if lo > hi:
        return np.uint64(0)
    m = _ONES << np.uint64(lo)
    return m & (_ONES >> np.uint64(63 - hi))


@njit(cache=True)
def _interval_rows(p_lo, q_lo, p_hi, q_hi, extra_p, extra_q, y0, dy, ny):
    """Row range satisfying lo<=lin<=hi plus one more <=1 constraint.

    Constraints are of the form p + q*y with the pair (p_lo,q_lo) bounded to
    [0, 1] and (extra_p, extra_q) bounded above by 1. Returns (ilo, ihi),
    empty encoded as (1, 0).
    """
    lo = -1.0e30
    hi = 1.0e30
    # 0 <= p + q y
    if q_lo > 0.0:
        v = -p_lo / q_lo
        if v > lo:
            lo = v
    elif q_lo < 0.0:
        v = -p_lo / q_lo
        if v < hi:
            hi = v
    elif p_lo < 0.0:
        return 1, 0
    # p + q y <= 1
    if q_hi > 0.0:
        v = (1.0 - p_hi) / q_hi
        if v < hi:
            hi = v
    elif q_hi < 0.0:
        v = (1.0 - p_hi) / q_hi
        if v > lo:
            lo = v
    elif p_hi > 1.0:
        return 1, 0
    # extra_p + extra_q y <= 1
    if extra_q > 0.0:
        v = (1.0 - extra_p) / extra_q
        if v < hi:
            hi = v
    elif extra_q < 0.0:
        v = (1.0 - extra_p) / extra_q
        if v > lo:
            lo = v
    elif extra_p > 1.0:
        return 1, 0
    ilo = int(np.ceil((lo - y0) / dy - 0.5))
    ihi = int(np.floor((hi - y0) / dy - 0.5))
    if ilo < 0:
        ilo = 0
    if ihi > ny - 1:
        ihi = ny - 1
    return ilo, ihi


@njit(cache=True)
def _region_words(xs, ny, y0, dy, px, py, cos_a, sin_a):
    n_cols = xs.size
    n_pose = px.size
    n_words = (ny + 63) // 64
    words = np.zeros((n_cols, n_words), dtype=np.uint64)
    tail = ny - 64 * (n_words - 1)
    for j in range(n_cols):
        acc = words[j]
        for w in range(n_words):
            acc[w] = _ONES
        if tail < 64:
            acc[n_words - 1] = _ONES >> np.uint64(64 - tail)
        x = xs[j]
        for k in range(n_pose):
            c = cos_a[k]
            s = sin_a[k]
            rel = x - px[k]
            a_coef = rel * c - py[k] * s  # xi  = a_coef + s*y
            b_coef = -rel * s - py[k] * c  # eta = b_coef + c*y
            lo1, hi1 = _interval_rows(b_coef, c, b_coef, c, a_coef, s, y0, dy, ny)
            lo2, hi2 = _interval_rows(a_coef, s, a_coef, s, b_coef, c, y0, dy, ny)
            alive = False
            for w in range(n_words):
                aw = acc[w]
                if aw == np.uint64(0):
                    continue
                m = _word_mask(w, lo1, hi1) | _word_mask(w, lo2, hi2)
                aw = aw & m
                acc[w] = aw
                if aw != np.uint64(0):
                    alive = True
            if not alive:
                break
    return words


def _words_to_mask(words, ny):
    bits = np.unpackbits(words.view(np.uint8), axis=1, bitorder="little")
    return bits[:, :ny].T.astype(bool)


def movement_region_mask(x, y, angle, x_window, resolution=4000):
    """Boolean (ny, nx) mask of points inside the corridor at every pose."""
    check_count("resolution", resolution, minimum=2)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    angle = np.asarray(angle, dtype=np.float64)
    x_lo, x_hi = float(x_window[0]), float(x_window[1])
    nx = ny = int(resolution)
    dx = (x_hi - x_lo) / nx
    dy = 1.0 / ny
    xs = x_lo + (np.arange(nx) + 0.5) * dx
    words = _region_words(xs, ny, 0.0, dy, x, y, np.cos(angle), np.sin(angle))
    return _words_to_mask(words, ny)


def largest_component_area(mask, pixel_area):
    """Area of the largest 4-connected component of a boolean mask."""
    labels, n = ndimage.label(mask)
    if n == 0:
        return 0.0
    counts = np.bincount(labels.ravel())
    counts[0] = 0
    return float(counts.max()) * pixel_area


def movement_area_oracle(x, y, angle, x_window, resolution=4000):
    """Largest-component area of the rasterized unswept region."""
    mask = movement_region_mask(x, y, angle, x_window, resolution)
    x_lo, x_hi = float(x_window[0]), float(x_window[1])
    pixel_area = (x_hi - x_lo) / resolution * (1.0 / resolution)
    return largest_component_area(mask, pixel_area)


def rotated_corridor_membership(x, y, center, angle):
    """Membership in the corridor rotated by ``angle`` about ``center``.

    Written directly from the defining half-plane inequalities (two strip
    intersections joined by a union); used as the oracle for the
    column-interval algebra.
    """
    c = np.cos(angle)
    s = np.sin(angle)
    u1, u2 = float(center[0]), float(center[1])
    r = np.asarray(x, dtype=np.float64) * c + np.asarray(y, dtype=np.float64) * s
    q = -np.asarray(x, dtype=np.float64) * s + np.asarray(y, dtype=np.float64) * c
    piece1 = (r >= u1) & (r <= u1 + 1.0) & (q <= u2 + 1.0)
    piece2 = (r <= u1 + 1.0) & (q >= u2) & (q <= u2 + 1.0)
    return piece1 | piece2


def butterfly_membership(x, y, beta1, beta2):
    """Membership in the union of the two rotated unit strips."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    r1 = x * np.cos(beta1) + y * np.sin(beta1)
    r2 = x * np.cos(beta2) + y * np.sin(beta2)
    piece1 = (r1 >= 0.0) & (r2 <= 1.0)
    piece2 = (r1 <= 1.0) & (r2 >= 0.0)
    return piece1 | piece2


def constrained_set_mask(alphas, centers, beta1, beta2, x_window,
                         resolution=4000, chunk=256):
    """Rasterize H intersected with every rotated corridor and the butterfly."""
    check_count("resolution", resolution, minimum=2)
    alphas = np.atleast_1d(np.asarray(alphas, dtype=np.float64))
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    x_lo, x_hi = float(x_window[0]), float(x_window[1])
    nx = ny = int(resolution)
    xs = x_lo + (np.arange(nx) + 0.5) * (x_hi - x_lo) / nx
    ys = (np.arange(ny) + 0.5) * (1.0 / ny)
    mask = np.empty((ny, nx), dtype=bool)
    for start in range(0, ny, chunk):
        stop = min(start + chunk, ny)
        yy = ys[start:stop, None]
        xx = xs[None, :]
        block = butterfly_membership(xx, yy, beta1, beta2)
        block = np.broadcast_to(block, (stop - start, nx)).copy()
        for alpha, center in zip(alphas, centers):
            block &= rotated_corridor_membership(xx, yy, center, alpha)
        mask[start:stop] = block
    return mask


def constrained_set_area_oracle(alphas, centers, beta1, beta2, x_window,
                                resolution=4000):
    """Largest-component area of the rasterized constraint set."""
    mask = constrained_set_mask(alphas, centers, beta1, beta2, x_window,
                                resolution)
    x_lo, x_hi = float(x_window[0]), float(x_window[1])
    pixel_area = (x_hi - x_lo) / resolution * (1.0 / resolution)
    return largest_component_area(mask, pixel_area)
