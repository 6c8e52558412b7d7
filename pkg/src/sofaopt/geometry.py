"""Corridor movements on a pseudo-time grid and their wall envelopes.

A movement is the trajectory (x(t), y(t)) of the corridor's inner corner plus
the rotation angle(t), for t in [0, 1], starting from the reference pose
x(0) = y(0) = angle(0) = 0. Each of the four corridor walls sweeps a family
of lines whose envelope bounds the unswept region; the unswept region is
"fringed" from below by the trajectory, the two inner-wall envelopes and the
line y = 0, and from above by the two outer-wall envelopes and the line y = 1.

Envelope points where the rotation rate vanishes are undefined (the formulas
divide by d(angle)/dt) and are masked out; masked gaps split an envelope into
separate polyline pieces rather than bridging across the gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import (
    ConfigError,
    DegenerateGeometry,
    EnvelopeUndefined,
    NumericalError,
    Unsupported,
)
from .validation import check_count, check_positive

DEFAULT_MASK_EPSILON = 1e-6
DEFAULT_MARGIN = 0.1

# A wall ray whose y-coefficient is below this is effectively vertical and
# cannot act as a column obstacle.
_WALL_COEF_EPS = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing pseudo-time samples covering [0, 1] exactly."""

    t: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        if t.ndim != 1 or t.size < 2:
            raise ConfigError("time grid needs at least two samples")
        if t[0] != 0.0 or t[-1] != 1.0:
            raise ConfigError("time grid must start at 0 and end at 1 exactly")
        if np.any(np.diff(t) <= 0.0):
            raise ConfigError("time grid must be strictly increasing")
        object.__setattr__(self, "t", t)

    @classmethod
    def uniform(cls, n_points=2000):
        check_count("n_points", n_points, minimum=2)
        return cls(np.linspace(0.0, 1.0, n_points))

    @property
    def n_points(self):
        return self.t.size


@dataclass
class MovementSample:
    """Movement values and their t-derivatives, all on one tape."""

    grid: TimeGrid
    x: ad.Tensor
    y: ad.Tensor
    angle: ad.Tensor
    dx: ad.Tensor
    dy: ad.Tensor
    dangle: ad.Tensor

    @property
    def tape(self):
        return self.x.tape

    @property
    def n_points(self):
        return self.grid.n_points

    def final_pose(self):
        """(x, y, angle) at t = 1 as scalar-shaped tensors."""
        last = [self.grid.n_points - 1]
        return (
            ad.take(self.x, last),
            ad.take(self.y, last),
            ad.take(self.angle, last),
        )


@dataclass
class Envelope:
    """One wall envelope as a masked polyline."""

    x: ad.Tensor
    y: ad.Tensor
    valid: np.ndarray


@dataclass
class EnvelopeSet:
    """The four wall envelopes; offsets relate outer to inner exactly."""

    inner_h: Envelope
    inner_v: Envelope
    outer_h: Envelope
    outer_v: Envelope
    mask_epsilon: float

    def curves(self):
        return {
            "inner_h": self.inner_h,
            "inner_v": self.inner_v,
            "outer_h": self.outer_h,
            "outer_v": self.outer_v,
        }


@dataclass
class Polyline:
    """Open polyline; synthetic marks window-spanning guide lines (y=0, y=1)."""

    x: ad.Tensor
    y: ad.Tensor
    synthetic: bool = False

    @property
    def n_points(self):
        return self.x.data.size


@dataclass
class FringeCurves:
    """Lower/upper obstacle curves plus the quadrature window.

    Besides the curves of the movement itself, both lists carry the boundary
    rays of the corridor's final pose: the unswept region can never extend
    past the last position of a wall, which matters while a movement has not
    yet completed its rotation. Near-vertical walls cannot act as column
    obstacles, so their effect is captured instead by ``x_live``, the x-range
    of columns not fully excluded by an outer wall of the first or last pose.
    """

    lower: list
    upper: list
    x_window: tuple
    x_live: tuple = None


class ClosureMovement:
    """Adapts three plain callables of t (plus optional slopes) to sampling."""

    def __init__(self, fx, fy, fangle, slopes=None):
        self._fns = (fx, fy, fangle)
        self._slopes = slopes

    def values(self, tape, t):
        out = []
        for fn in self._fns:
            vals = np.asarray(fn(t), dtype=np.float64)
            vals = np.broadcast_to(vals, t.shape).copy()
            out.append(tape.tensor(vals))
        return tuple(out)

    def slopes(self, tape, t):
        if self._slopes is None:
            raise Unsupported("closure movement has no exact slopes")
        out = []
        for fn in self._slopes:
            vals = np.asarray(fn(t), dtype=np.float64)
            vals = np.broadcast_to(vals, t.shape).copy()
            out.append(tape.tensor(vals))
        return tuple(out)


def _fd_indices(n):
    plus = np.arange(1, n + 1)
    plus[-1] = n - 1
    minus = np.arange(-1, n - 1)
    minus[0] = 0
    return plus, minus


def grid_derivative(tensor, t_values):
    """Central differences on the grid (one-sided at the endpoints)."""
    n = t_values.size
    plus, minus = _fd_indices(n)
    inv_dt = 1.0 / (t_values[plus] - t_values[minus])
    return (ad.take(tensor, plus) - ad.take(tensor, minus)) * inv_dt


def sample_movement(functions, grid, tape=None, derivative_backend="grid_fd"):
    """Sample movement values and derivatives onto a tape.

    ``functions`` is either a (fx, fy, fangle) triple of plain callables or an
    object exposing ``values(tape, t)`` and, for the ``exact_slope`` backend,
    ``slopes(tape, t)``. Derivatives from ``grid_fd`` are central differences
    of the sampled values and stay differentiable with respect to whatever
    produced them.
    """
    if tape is None:
        tape = ad.Tape()
    if isinstance(functions, (tuple, list)):
        functions = ClosureMovement(*functions)
    t = grid.t
    x, y, angle = functions.values(tape, t)
    for name, tensor in (("x", x), ("y", y), ("angle", angle)):
        bad = ~np.isfinite(tensor.data)
        if bad.any():
            raise NumericalError(
                f"movement {name} is non-finite at t={t[np.argmax(bad)]!r}"
            )
    if derivative_backend == "grid_fd":
        dx = grid_derivative(x, t)
        dy = grid_derivative(y, t)
        dangle = grid_derivative(angle, t)
    elif derivative_backend == "exact_slope":
        if not hasattr(functions, "slopes"):
            raise Unsupported("exact_slope backend needs slope support")
        dx, dy, dangle = functions.slopes(tape, t)
    else:
        raise ConfigError(f"unknown derivative backend {derivative_backend!r}")
    return MovementSample(grid, x, y, angle, dx, dy, dangle)


def hammersley_movement(tape, r, grid):
    """Semicircle-corner movement: angle = t*pi/2, corner on a half circle.

    With radius parameter r the unswept area is pi/2 + 2r - pi*r^2/2,
    maximized at r = 2/pi. Used as an analytic calibration fixture.
    """
    check_positive("r", r)
    if r > 1.0:
        raise ConfigError(f"r must be in (0, 1], got {r}")
    t = grid.t
    angle = t * (np.pi / 2.0)
    two_a = 2.0 * angle
    x = -r * (1.0 - np.cos(two_a))
    y = r * np.sin(two_a)
    dangle = np.full_like(t, np.pi / 2.0)
    dx = -r * np.pi * np.sin(two_a)
    dy = r * np.pi * np.cos(two_a)
    return MovementSample(
        grid,
        tape.tensor(x),
        tape.tensor(y),
        tape.tensor(angle),
        tape.tensor(dx),
        tape.tensor(dy),
        tape.tensor(dangle),
    )


def compute_envelopes(movement, mask_epsilon=DEFAULT_MASK_EPSILON):
    """Envelope points of the four wall-line families.

    Samples with |d(angle)/dt| below ``mask_epsilon`` are marked invalid; if
    every sample is invalid the movement is a pure translation and
    EnvelopeUndefined is raised.

    Each envelope point is the tangency point of the moving wall line, lying
    at offset q along the wall direction from the corner. The physical walls
    are half-lines (inner: offset <= 0 from the corner, outer: offset <= 1
    from the opposite strip corner), so samples whose tangency falls on the
    virtual extension of a wall are additionally masked per curve; those arcs
    are swept by no physical wall and must not act as obstacles.
    """
    check_positive("mask_epsilon", mask_epsilon)
    valid = np.abs(movement.dangle.data) >= mask_epsilon
    if not valid.any():
        raise EnvelopeUndefined("rotation rate vanishes at every sample")
    sin_a = ad.sin(movement.angle)
    cos_a = ad.cos(movement.angle)
    inv_rate = 1.0 / ad.where(valid, movement.dangle, 1.0)
    # tangency offsets along the wall direction, per wall orientation
    q_h = (movement.dx * sin_a - movement.dy * cos_a) * inv_rate
    q_v = (movement.dx * cos_a + movement.dy * sin_a) * inv_rate
    on_wall_h = q_h.data <= 0.0
    on_wall_v = q_v.data <= 0.0
    inner_h = Envelope(movement.x + cos_a * q_h, movement.y + sin_a * q_h,
                       valid & on_wall_h)
    inner_v = Envelope(movement.x - sin_a * q_v, movement.y + cos_a * q_v,
                       valid & on_wall_v)
    outer_h = Envelope(inner_h.x - sin_a, inner_h.y + cos_a,
                       valid & (q_h.data <= 1.0))
    outer_v = Envelope(inner_v.x + cos_a, inner_v.y + sin_a,
                       valid & (q_v.data <= 1.0))
    return EnvelopeSet(inner_h, inner_v, outer_h, outer_v, float(mask_epsilon))


def _valid_pieces(envelope):
    """Split an envelope into polylines over contiguous valid runs (len >= 2)."""
    mask = envelope.valid
    pieces = []
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    for start, stop in zip(edges[::2], edges[1::2]):
        if stop - start < 2:
            continue
        idx = np.arange(start, stop)
        pieces.append(Polyline(ad.take(envelope.x, idx), ad.take(envelope.y, idx)))
    return pieces


def _live_range(movement):
    """Columns not fully excluded by an outer wall of the first or last pose.

    At pose (px, py, a) the outer walls impose eta <= 1 and xi <= 1 with
    eta = -(x-px)sin(a) + (y-py)cos(a) and xi = (x-px)cos(a) + (y-py)sin(a).
    A column x is alive under a constraint iff some y in [0, 1] satisfies it,
    i.e. iff its minimum over y does; both minima are linear in x, so each
    wall contributes one half-line kill. For a full quarter-turn this reduces
    the range to [px(1) - 1, 1]. Only the extreme poses are used: their
    near-vertical walls are the ones invisible to the column obstacles, while
    masking on interior poses would zero out the exploratory movements early
    training passes through and starve the optimizer of gradient.
    """
    ends = np.array([0, movement.n_points - 1])
    px = movement.x.data[ends]
    py = movement.y.data[ends]
    a = movement.angle.data[ends]
    c, s = np.cos(a), np.sin(a)
    # (A, B) pairs such that a column is alive iff A*x <= B
    coef_a = np.concatenate([-s, c])
    coef_b = np.concatenate([
        1.0 - s * px + py * c - np.minimum(0.0, c),   # initially horizontal wall
        1.0 + c * px + py * s - np.minimum(0.0, s),   # initially vertical wall
    ])
    lo, hi = -np.inf, np.inf
    pos = coef_a > 1e-12
    neg = coef_a < -1e-12
    if pos.any():
        hi = float(np.min(coef_b[pos] / coef_a[pos]))
    if neg.any():
        lo = float(np.max(coef_b[neg] / coef_a[neg]))
    flat_unsat = ~pos & ~neg & (coef_b < 0.0)
    if flat_unsat.any() or not lo < hi:
        return (0.0, 0.0)  # some wall excludes every column
    return (lo, hi)


def _final_wall_rays(movement, length):
    """Boundary rays of the corridor at its final pose, split by fringe side.

    Outer walls bound the region globally (the region lies on the admissible
    side of every outer wall position); inner walls bound only the excluded
    corner wedge, so each contributes a ray that starts at the corner. A ray
    joins the upper or lower list according to the sign of the y-coefficient
    of its half-plane constraint; near-vertical rays are skipped.
    """
    x1, y1, a1 = movement.final_pose()
    c = ad.cos(a1)
    s = ad.sin(a1)
    c_val = float(c.data)
    s_val = float(s.data)
    ox = x1 + c - s
    oy = y1 + s + c

    def ray(px, py, qx, qy):
        return Polyline(ad.concatenate([px, qx]), ad.concatenate([py, qy]))

    lower, upper = [], []
    if abs(c_val) > _WALL_COEF_EPS:
        # wall initially horizontal: outer keeps the region below it (c > 0),
        # inner caps the excluded wedge from above
        outer = ray(ox, oy, ox - length * c, oy - length * s)
        inner = ray(x1, y1, x1 - length * c, y1 - length * s)
        (upper if c_val > 0.0 else lower).append(outer)
        (lower if c_val > 0.0 else upper).append(inner)
    if abs(s_val) > _WALL_COEF_EPS:
        outer = ray(ox, oy, ox + length * s, oy - length * c)
        inner = ray(x1, y1, x1 + length * s, y1 - length * c)
        (upper if s_val > 0.0 else lower).append(outer)
        (lower if s_val > 0.0 else upper).append(inner)
    return lower, upper


def assemble_fringes(movement, envelopes, margin=DEFAULT_MARGIN,
                     final_walls=True):
    """Collect the obstacle curves bounding the unswept region.

    The quadrature window spans all curve points, widened by ``margin`` on the
    left and extended at least to x = 1 on the right. The spanning lines
    y = 0 and y = 1 are synthetic guides marking the corridor-width strip.
    """
    check_positive("margin", margin, strict=False)
    xs = [movement.x.data]
    for env in envelopes.curves().values():
        if env.valid.any():
            xs.append(env.x.data[env.valid])
    all_x = np.concatenate(xs)
    x_lo = float(all_x.min()) - margin
    x_hi = max(1.0, float(all_x.max())) + margin
    window = (x_lo, x_hi)

    tape = movement.tape
    trajectory = Polyline(movement.x, movement.y)
    lower = [trajectory]
    lower += _valid_pieces(envelopes.inner_h)
    lower += _valid_pieces(envelopes.inner_v)
    upper = []
    upper += _valid_pieces(envelopes.outer_h)
    upper += _valid_pieces(envelopes.outer_v)

    if len(lower) + len(upper) == 1:  # lone trajectory: is it degenerate too?
        span = max(np.ptp(movement.x.data), np.ptp(movement.y.data))
        if span < 1e-12:
            raise DegenerateGeometry("no envelopes and a zero-length trajectory")

    if final_walls:
        ray_lower, ray_upper = _final_wall_rays(movement, x_hi - x_lo + 2.0)
        lower += ray_lower
        upper += ray_upper

    def spanning_line(level):
        return Polyline(
            tape.tensor(np.array([x_lo, x_hi])),
            tape.tensor(np.array([level, level])),
            synthetic=True,
        )

    lower.append(spanning_line(0.0))
    upper.append(spanning_line(1.0))
    return FringeCurves(lower, upper, window, x_live=_live_range(movement))
