"""Differentiable area between chaotic, possibly self-intersecting curves.

A dense row of water columns spans the quadrature window. For the lower
obstacle set, water pours downward and each column records the highest
crossing of any curve; for the upper set it rises and records the lowest
crossing. The area is the midpoint-rule sum of the positive gaps between the
two profiles.

Crossing heights are linear interpolations of segment endpoints, hence
differentiable in the endpoint coordinates; which segment wins a column is a
discrete choice, so the gradient follows the winner (subgradient semantics at
ties, lowest curve index first). Columns whose falls only ever touch the
synthetic guide lines (y = 0, y = 1) carry no geometry and contribute zero
area.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, EmptyGeometry, ShapeMismatch
from .validation import check_count, check_positive


@dataclass(frozen=True)
class WaterfallConfig:
    n_sources: int = 10000
    source_y: float = 0.5
    vertical_eps: float = 1e-9

    def __post_init__(self):
        check_count("n_sources", self.n_sources, minimum=2)
        if not 0.0 < self.source_y < 1.0:
            raise ConfigError(f"source_y must be in (0, 1), got {self.source_y}")
        check_positive("vertical_eps", self.vertical_eps)


@dataclass
class Profile:
    """Stopping heights of the water columns."""

    x_coords: np.ndarray
    heights: ad.Tensor


@dataclass
class AreaResult:
    area: ad.Tensor
    lower: Profile
    upper: Profile


def source_columns(x_window, n_sources):
    """Column midpoints uniformly spanning the window."""
    x_lo, x_hi = float(x_window[0]), float(x_window[1])
    if not x_hi > x_lo:
        raise ConfigError(f"empty x_window {x_window!r}")
    dx = (x_hi - x_lo) / n_sources
    return x_lo + (np.arange(n_sources) + 0.5) * dx, dx


def _segment_table(curves):
    """Concatenate curve points and enumerate their segments.

    Returns (X, Y, i0, i1, curve_id, synthetic) where i0/i1 index segment
    endpoints in the concatenated tensors.
    """
    xs, ys = [], []
    i0_parts, i1_parts, curve_parts, synth_parts = [], [], [], []
    offset = 0
    for cid, curve in enumerate(curves):
        n = curve.n_points
        xs.append(curve.x)
        ys.append(curve.y)
        if n >= 2:
            base = offset + np.arange(n - 1)
            i0_parts.append(base)
            i1_parts.append(base + 1)
            curve_parts.append(np.full(n - 1, cid))
            synth_parts.append(np.full(n - 1, curve.synthetic, dtype=bool))
        offset += n
    X = ad.concatenate(xs)
    Y = ad.concatenate(ys)
    if i0_parts:
        i0 = np.concatenate(i0_parts)
        i1 = np.concatenate(i1_parts)
        curve_id = np.concatenate(curve_parts)
        synthetic = np.concatenate(synth_parts)
    else:
        i0 = i1 = curve_id = np.zeros(0, dtype=np.intp)
        synthetic = np.zeros(0, dtype=bool)
    return X, Y, i0, i1, curve_id, synthetic


def fall(curves, config, direction, x_window):
    """Profile of one fall over the window (direction "down" or "up").

    Down falls record the highest crossing per column, up falls the lowest;
    columns crossed by nothing default to the window floor (0 for down, 1 for
    up). Near-vertical segments contribute their extreme endpoint at whichever
    columns their x-extent covers.
    """
    if direction not in ("down", "up"):
        raise ConfigError(f"direction must be 'down' or 'up', got {direction!r}")
    if not curves:
        raise EmptyGeometry("fall needs at least one curve")
    xs, _ = source_columns(x_window, config.n_sources)
    n_cols = xs.size
    x_lo = float(x_window[0])
    dx = (float(x_window[1]) - x_lo) / n_cols

    X, Y, i0, i1, curve_id, _ = _segment_table(curves)
    floor = 0.0 if direction == "down" else 1.0
    if i0.size == 0:
        return Profile(xs, X.tape.tensor(np.full(n_cols, floor)))

    xv, yv = X.data, Y.data
    xa, xb = xv[i0], xv[i1]
    ya, yb = yv[i0], yv[i1]
    seg_lo = np.minimum(xa, xb)
    seg_hi = np.maximum(xa, xb)
    vertical = (seg_hi - seg_lo) < config.vertical_eps

    # columns whose midpoints land inside each segment's x-extent
    jlo = np.ceil((seg_lo - x_lo) / dx - 0.5).astype(np.int64)
    jhi = np.floor((seg_hi - x_lo) / dx - 0.5).astype(np.int64)
    np.clip(jlo, 0, n_cols - 1, out=jlo)
    np.clip(jhi, 0, n_cols - 1, out=jhi)
    counts = jhi - jlo + 1
    hit = (counts > 0) & (seg_hi >= x_lo) & (seg_lo <= float(x_window[1]))
    counts = np.where(hit, counts, 0)

    total = int(counts.sum())
    if total == 0:
        return Profile(xs, X.tape.tensor(np.full(n_cols, floor)))

    seg_ids = np.flatnonzero(counts > 0)
    reps = counts[seg_ids]
    cand_seg = np.repeat(seg_ids, reps)
    starts = np.repeat(np.cumsum(reps) - reps, reps)
    cand_col = (np.arange(total) - starts) + np.repeat(jlo[seg_ids], reps)

    # candidate crossing heights (values only; the winner is re-derived on tape)
    with np.errstate(divide="ignore", invalid="ignore"):
        span = xb[cand_seg] - xa[cand_seg]
        frac = (xs[cand_col] - xa[cand_seg]) / span
    if direction == "down":
        vert_frac = (yb[cand_seg] >= ya[cand_seg]).astype(np.float64)
    else:
        vert_frac = (yb[cand_seg] <= ya[cand_seg]).astype(np.float64)
    frac = np.where(vertical[cand_seg], vert_frac, frac)
    y_cand = ya[cand_seg] + (yb[cand_seg] - ya[cand_seg]) * frac

    key = y_cand if direction == "down" else -y_cand
    order = np.lexsort((-cand_seg, -curve_id[cand_seg], key, cand_col))
    col_sorted = cand_col[order]
    last = np.flatnonzero(np.diff(np.append(col_sorted, -1)) != 0)
    win_cols = col_sorted[last]
    win_seg = cand_seg[order[last]]
    win_frac_vert = frac[order[last]]

    has = np.zeros(n_cols, dtype=bool)
    has[win_cols] = True

    # per-column winner indices (dummy 0 where no candidate, masked out below)
    winner = np.zeros(n_cols, dtype=np.intp)
    winner[win_cols] = win_seg
    frac_const = np.zeros(n_cols)
    frac_const[win_cols] = win_frac_vert
    vert_w = np.zeros(n_cols, dtype=bool)
    vert_w[win_cols] = vertical[win_seg]

    ya_t = ad.take(Y, i0[winner])
    yb_t = ad.take(Y, i1[winner])
    xa_t = ad.take(X, i0[winner])
    xb_t = ad.take(X, i1[winner])
    span_t = xb_t - xa_t
    safe_span = ad.where(vert_w | ~has, 1.0, span_t)
    frac_t = ad.where(vert_w, frac_const, (xs - xa_t) / safe_span)
    crossing = ya_t + (yb_t - ya_t) * frac_t
    heights = ad.where(has, crossing, np.full(n_cols, floor))
    return Profile(xs, heights)


def area_between(lower, upper):
    """Midpoint-rule area between two profiles sharing the same columns."""
    if lower.x_coords.shape != upper.x_coords.shape or not np.array_equal(
        lower.x_coords, upper.x_coords
    ):
        raise ShapeMismatch("profiles use different source columns")
    dx = float(lower.x_coords[1] - lower.x_coords[0])
    return ad.total(ad.relu(upper.heights - lower.heights)) * dx


def compute_area(fringes, config=None):
    """Waterfall area of a fringe set, differentiable in every curve point.

    Columns outside the fringe set's live x-range (beyond a vertical wall of
    the corridor's first or last pose) hold no unswept geometry and contribute
    zero.
    """
    if config is None:
        config = WaterfallConfig()
    lower = fall(fringes.lower, config, "down", fringes.x_window)
    upper = fall(fringes.upper, config, "up", fringes.x_window)
    dx = float(lower.x_coords[1] - lower.x_coords[0])
    gaps = ad.relu(upper.heights - lower.heights)
    live = getattr(fringes, "x_live", None)
    if live is not None:
        inside = (lower.x_coords >= live[0]) & (lower.x_coords <= live[1])
        gaps = ad.where(inside, gaps, 0.0)
    area = ad.total(gaps) * dx
    return AreaResult(area, lower, upper)
