"""End-to-end differentiable training of corridor movements.

Three unconstrained networks F parameterize the movement through
x(t) = -|F_x(t) - F_x(0)|, y(t) = +|F_y(t) - F_y(0)| and
angle(t) = +|F_angle(t) - F_angle(0)|, which bakes in the reference pose at
t = 0 and the sign constraints (the corner can only move left/up while the
corridor rotates counterclockwise). The loss is the negated unswept area plus
a hinge penalty that activates until the final rotation angle reaches
arcsin(84/85), the minimum rotation any maximal movement must perform.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import autodiff as ad
from . import nets
from .constants import GERVER_AREA, MIN_ROTATION
from .errors import ConfigError, EnvelopeUndefined, NumericalError
from .geometry import (
    DEFAULT_MARGIN,
    DEFAULT_MASK_EPSILON,
    MovementSample,
    TimeGrid,
    assemble_fringes,
    compute_envelopes,
    grid_derivative,
)
from .optim import AdamState, adam_step, lbfgs_refine
from .validation import check_count, check_positive
from .waterfall import WaterfallConfig, compute_area

# Initialization scales per parameterized function, found by sweeping the
# scale until ~95% of seeds cover the function's working range on [0, 1]
# (|x| up to ~1.5, y up to ~0.8, angle up to pi/2). See nets.coverage_fraction.
DEFAULT_SCALES = {"x": 6.0, "y": 5.0, "angle": 6.0}


@dataclass
class LossBreakdown:
    """Area, rotation penalty and their combination, all on one tape."""

    area: ad.Tensor
    penalty: ad.Tensor
    total: ad.Tensor


class ConstrainedMovementModel:
    """Movement functions realized by three networks behind the constraints."""

    def __init__(self, f_x, f_y, f_angle, grid, derivative_backend="grid_fd",
                 mask_epsilon=DEFAULT_MASK_EPSILON):
        if derivative_backend not in ("grid_fd", "exact_slope"):
            raise ConfigError(f"unknown backend {derivative_backend!r}")
        if derivative_backend == "exact_slope":
            for p in (f_x, f_y, f_angle):
                if p.activation != "relu":
                    raise ConfigError("exact_slope requires ReLU networks")
        self.f_x = f_x
        self.f_y = f_y
        self.f_angle = f_angle
        self.grid = grid
        self.derivative_backend = derivative_backend
        self.mask_epsilon = mask_epsilon

    def networks(self):
        return {"x": self.f_x, "y": self.f_y, "angle": self.f_angle}

    def parameter_arrays(self):
        out = []
        for p in (self.f_x, self.f_y, self.f_angle):
            out.extend(p.parameter_arrays())
        return out

    def copy(self):
        return ConstrainedMovementModel(
            self.f_x.copy(), self.f_y.copy(), self.f_angle.copy(), self.grid,
            self.derivative_backend, self.mask_epsilon,
        )

    def sample(self, tape):
        """MovementSample on ``tape``; gradients reach the raw weights.

        The t = 0 anchor reuses row 0 of the batched forward pass (the grid
        starts at 0), so the initial conditions hold bit-exactly.
        """
        t = self.grid.t
        bound = {}
        raw = {}
        for name, params in self.networks().items():
            w, b = nets.bind_params(tape, params)
            bound[name] = (w, b)
            raw[name] = nets.forward(tape, params, t, w, b)

        def constrained(name, sign):
            f = raw[name]
            gap = f - ad.take(f, [0])
            return sign * ad.absolute(gap), gap

        x, gap_x = constrained("x", -1.0)
        y, gap_y = constrained("y", 1.0)
        angle, gap_a = constrained("angle", 1.0)

        if self.derivative_backend == "grid_fd":
            dx = grid_derivative(x, t)
            dy = grid_derivative(y, t)
            dangle = grid_derivative(angle, t)
        else:
            slopes = {}
            for name, params in self.networks().items():
                w, b = bound[name]
                slopes[name] = nets.input_slope(tape, params, t, w, b)
            # d/dt of sign*|f - f(0)| with the 0-at-kink subgradient
            dx = slopes["x"] * (-np.sign(gap_x.data))
            dy = slopes["y"] * np.sign(gap_y.data)
            dangle = slopes["angle"] * np.sign(gap_a.data)
        self._grad_leaves = bound
        return MovementSample(self.grid, x, y, angle, dx, dy, dangle)

    def gradients(self):
        """Parameter gradients after a backward pass, in parameter order."""
        grads = []
        for name in ("x", "y", "angle"):
            w, b = self._grad_leaves[name]
            grads.extend(nets.collect_grads(w, b))
        return grads


def evaluate(model, n_sources=10000, margin=DEFAULT_MARGIN, tape=None):
    """Run the full differentiable pipeline for one model state.

    Returns (movement, area_result, loss). A movement that never rotates has
    no envelopes; it falls back to a zero area so the penalty still provides
    gradient (area_result is None in that case).
    """
    if tape is None:
        tape = ad.Tape()
    movement = model.sample(tape)
    angle_end = ad.take(movement.angle, [movement.n_points - 1])
    penalty = ad.relu(ad.reshape(MIN_ROTATION - angle_end, ()))
    try:
        envelopes = compute_envelopes(movement, model.mask_epsilon)
    except EnvelopeUndefined:
        area = tape.tensor(0.0)
        return movement, None, LossBreakdown(area, penalty, -area + penalty)
    fringes = assemble_fringes(movement, envelopes, margin)
    result = compute_area(fringes, WaterfallConfig(n_sources=n_sources))
    loss = -result.area + penalty
    return movement, result, LossBreakdown(result.area, penalty, loss)


class SofaAreaMaximizer(BaseEstimator):
    """Maximize the unswept corridor area over network-parameterized movements.

    Follows the scikit-learn estimator protocol: hyperparameters in the
    constructor, optimization in :meth:`fit` (the problem is self-contained,
    so ``X`` and ``y`` are ignored), learned state in trailing-underscore
    attributes. ``predict(t)`` evaluates the learned movement.

    Training runs full-batch Adam on -area + rotation penalty, halving the
    learning rate every ``lr_halving_every`` epochs. Runs whose area stays
    below ``vanish_threshold`` for ``vanish_patience`` consecutive epochs are
    flagged as vanished (a known failure mode at large learning rates).
    """

    def __init__(self, epochs=10000, lr=1e-4, hidden_layers=(256, 256),
                 activation="relu", seed=0, n_time=2000, n_sources=10000,
                 s_x=DEFAULT_SCALES["x"], s_y=DEFAULT_SCALES["y"],
                 s_angle=DEFAULT_SCALES["angle"], derivative_backend="grid_fd",
                 mask_epsilon=DEFAULT_MASK_EPSILON, margin=DEFAULT_MARGIN,
                 lr_halving_every=2000, vanish_threshold=0.5,
                 vanish_patience=500, refine=False, refine_max_iter=100,
                 verbose=0):
        self.epochs = epochs
        self.lr = lr
        self.hidden_layers = hidden_layers
        self.activation = activation
        self.seed = seed
        self.n_time = n_time
        self.n_sources = n_sources
        self.s_x = s_x
        self.s_y = s_y
        self.s_angle = s_angle
        self.derivative_backend = derivative_backend
        self.mask_epsilon = mask_epsilon
        self.margin = margin
        self.lr_halving_every = lr_halving_every
        self.vanish_threshold = vanish_threshold
        self.vanish_patience = vanish_patience
        self.refine = refine
        self.refine_max_iter = refine_max_iter
        self.verbose = verbose

    def _layer_sizes(self):
        return (1,) + tuple(int(h) for h in self.hidden_layers) + (1,)

    def _init_model(self):
        check_count("epochs", self.epochs)
        check_count("n_time", self.n_time, minimum=2)
        check_count("n_sources", self.n_sources, minimum=2)
        check_positive("lr", self.lr)
        sizes = self._layer_sizes()
        grid = TimeGrid.uniform(self.n_time)
        # one stream per network, split from the run seed
        root = np.random.SeedSequence(self.seed)
        seeds = [int(s.generate_state(1)[0]) for s in root.spawn(3)]
        scales = (self.s_x, self.s_y, self.s_angle)
        f_x, f_y, f_angle = (
            nets.init_params(sizes, self.activation, nets.InitConfig(s=s, seed=sd))
            for s, sd in zip(scales, seeds)
        )
        return ConstrainedMovementModel(
            f_x, f_y, f_angle, grid, self.derivative_backend, self.mask_epsilon
        ), seeds

    def fit(self, X=None, y=None):
        """Run the optimization; ignores X and y (problem is self-contained)."""
        model, net_seeds = self._init_model()
        self.net_seeds_ = net_seeds
        params = model.parameter_arrays()
        state = AdamState(lr=self.lr, halve_every=self.lr_halving_every)
        history = np.zeros((self.epochs, 4))
        best_area = -np.inf
        best_params = None
        best_epoch = -1
        low_streak = 0
        self.vanished_ = False
        self.status_ = "ok"
        degenerate_epochs = 0
        try:
            for epoch in range(self.epochs):
                tape = ad.Tape()
                movement, result, loss = evaluate(
                    model, self.n_sources, self.margin, tape
                )
                area_val = float(loss.area.data)
                penalty_val = float(loss.penalty.data)
                if result is None:
                    degenerate_epochs += 1
                if not np.isfinite(loss.total.data):
                    raise NumericalError(f"non-finite loss at epoch {epoch}")
                history[epoch] = (epoch, area_val, penalty_val, state.current_lr())
                # checkpoint the best state among rotation-complete epochs;
                # under-rotated transients can report window-limited areas
                if penalty_val == 0.0 and area_val > best_area:
                    best_area = area_val
                    best_params = [p.copy() for p in params]
                    best_epoch = epoch
                low_streak = low_streak + 1 if area_val < self.vanish_threshold else 0
                if low_streak >= self.vanish_patience:
                    self.vanished_ = True
                tape.backward(loss.total)
                adam_step(state, params, model.gradients())
                if self.verbose and epoch % max(1, self.epochs // 20) == 0:
                    print(f"epoch {epoch:5d}  area {area_val:.6f}  "
                          f"penalty {penalty_val:.4f}")
        except NumericalError:
            self.status_ = "numerical_error"
            self.history_ = history[: epoch + 1]
            raise
        self.history_ = history
        self.degenerate_epochs_ = degenerate_epochs
        # leave the model at its best state, not the last step; a run that
        # never satisfied the rotation constraint keeps its final state
        if best_params is not None:
            for p, b in zip(params, best_params):
                p[:] = b
        else:
            best_area = float(history[-1, 1])
            best_epoch = self.epochs - 1
        self.best_epoch_ = best_epoch
        if self.refine:
            best_area = self._refine(model, params, best_area)
        self.model_ = model
        self.area_ = best_area
        _, result, loss = evaluate(model, self.n_sources, self.margin)
        self.penalty_ = float(loss.penalty.data)
        self.final_angle_ = float(self.predict(np.array([1.0]))[0, 2])
        if self.vanished_:
            self.status_ = "vanished"
        return self

    def _refine(self, model, params, best_area):
        """L-BFGS fine-tuning from the best Adam state (optional)."""
        shapes = [p.shape for p in params]
        sizes = [p.size for p in params]

        def pack(arrs):
            return np.concatenate([a.ravel() for a in arrs])

        def unpack(vec):
            out = []
            k = 0
            for sh, sz in zip(shapes, sizes):
                out.append(vec[k:k + sz].reshape(sh))
                k += sz
            return out

        def value_and_grad(vec):
            for p, v in zip(params, unpack(vec)):
                p[:] = v
            tape = ad.Tape()
            _, _, loss = evaluate(model, self.n_sources, self.margin, tape)
            tape.backward(loss.total)
            return float(loss.total.data), pack(model.gradients())

        x0 = pack(params)
        x_best, f_best, info = lbfgs_refine(
            x0, value_and_grad, max_iter=self.refine_max_iter
        )
        self.refine_info_ = info
        refined = unpack(x_best)
        for p, v in zip(params, refined):
            p[:] = v
        _, result, loss = evaluate(model, self.n_sources, self.margin)
        area = float(loss.area.data)
        if area < best_area:  # refinement must never lose ground
            self.refine_info_["reverted"] = True
            return best_area
        return area

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("this SofaAreaMaximizer is not fitted yet")

    def predict(self, t):
        """Movement values at times ``t`` as an (n, 3) array [x, y, angle]."""
        self._check_fitted()
        t = np.asarray(t, dtype=np.float64).reshape(-1)
        tape = ad.Tape()
        cols = []
        for name, sign in (("x", -1.0), ("y", 1.0), ("angle", 1.0)):
            params = self.model_.networks()[name]
            f = nets.forward(tape, params, np.concatenate(([0.0], t)))
            vals = sign * np.abs(f.data[1:] - f.data[0])
            cols.append(vals)
        return np.stack(cols, axis=1)

    def score(self, X=None, y=None):
        """Best area found (larger is better)."""
        self._check_fitted()
        return self.area_

    def evaluate_best(self):
        """(movement, area_result, loss) for the fitted model."""
        self._check_fitted()
        return evaluate(self.model_, self.n_sources, self.margin)


def area_exceeds_gerver(area, slack=5e-3):
    """Sanity guard: computed areas must not materially exceed Gerver's area."""
    return area > GERVER_AREA + slack
