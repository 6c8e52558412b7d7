"""First-order optimizers: Adam with a halving schedule, and L-BFGS refinement."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .validation import check_count, check_positive


@dataclass
class AdamState:
    """Per-parameter moment accumulators plus the learning-rate schedule.

    The effective rate at step ``t`` (0-based) is lr * 0.5**(t // halve_every),
    i.e. the rate is halved every ``halve_every`` steps.
    """

    lr: float
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    halve_every: int = 2000
    step: int = 0
    m: list = field(default_factory=list, repr=False)
    v: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        check_positive("lr", self.lr)
        check_count("halve_every", self.halve_every)

    def current_lr(self):
        return self.lr * 0.5 ** (self.step // self.halve_every)


def adam_step(state, params, grads):
    """One in-place Adam update over a list of parameter arrays.

    Raises NumericalError on any non-finite gradient so a diverging run stops
    loudly instead of poisoning the moments.
    """
    if len(params) != len(grads):
        raise NumericalError("parameter/gradient list length mismatch")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    b1, b2 = state.betas
    lr = state.current_lr()
    t = state.step + 1
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if not np.all(np.isfinite(g)):
            raise NumericalError("non-finite gradient in adam_step")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    state.step = t
    return state


def _strong_wolfe(fn, x, f0, g0, direction, c1=1e-4, c2=0.9, max_evals=25):
    """Line search satisfying the strong Wolfe conditions (bracket + zoom)."""
    d = direction
    slope0 = float(g0 @ d)
    if slope0 >= 0.0:
        return None
    alpha_prev, f_prev, slope_prev = 0.0, f0, slope0
    alpha = 1.0
    best = None

    def phi(a):
        f, g = fn(x + a * d)
        return f, g, float(g @ d)

    def zoom(lo, f_lo, slope_lo, hi, f_hi):
        nonlocal best
        for _ in range(max_evals):
            a = 0.5 * (lo + hi)
            f, g, slope = phi(a)
            best = (a, f, g)
            if f > f0 + c1 * a * slope0 or f >= f_lo:
                hi, f_hi = a, f
            else:
                if abs(slope) <= -c2 * slope0:
                    return a, f, g
                if slope * (hi - lo) >= 0.0:
                    hi, f_hi = lo, f_lo
                lo, f_lo, slope_lo = a, f, slope
            if abs(hi - lo) < 1e-16:
                break
        return best

    for _ in range(max_evals):
        f, g, slope = phi(alpha)
        best = (alpha, f, g)
        if f > f0 + c1 * alpha * slope0 or (alpha_prev > 0.0 and f >= f_prev):
            return zoom(alpha_prev, f_prev, slope_prev, alpha, f)
        if abs(slope) <= -c2 * slope0:
            return alpha, f, g
        if slope >= 0.0:
            return zoom(alpha, f, slope, alpha_prev, f_prev)
        alpha_prev, f_prev, slope_prev = alpha, f, slope
        alpha *= 2.0
    return best


def lbfgs_refine(x0, value_and_grad, max_iter=100, history=10, tol=1e-12):
    """Minimize with the two-loop L-BFGS recursion and strong-Wolfe steps.

    ``value_and_grad`` maps a flat parameter vector to (f, grad). Returns
    (x_best, f_best, info) where info records iterations and the stop reason.
    The routine is defensive about non-smooth objectives: a failed line search
    terminates the refinement at the best point seen so far.
    """
    check_count("max_iter", max_iter)
    x = np.asarray(x0, dtype=np.float64).copy()
    f, g = value_and_grad(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise NumericalError("non-finite objective at the L-BFGS start point")
    s_hist, y_hist, rho_hist = [], [], []
    x_best, f_best = x.copy(), f
    info = {"iterations": 0, "stop": "max_iter"}
    for it in range(max_iter):
        info["iterations"] = it + 1
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            info["stop"] = "gradient"
            break
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * float(s @ q)
            alphas.append(a)
            q -= a * y
        if y_hist:
            gamma = float(s_hist[-1] @ y_hist[-1]) / float(y_hist[-1] @ y_hist[-1])
            q *= gamma
        for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            b = rho * float(y @ q)
            q += (a - b) * s
        direction = -q
        result = _strong_wolfe(value_and_grad, x, f, g, direction)
        if result is None:
            info["stop"] = "line_search"
            break
        alpha, f_new, g_new = result
        if not np.isfinite(f_new) or not np.all(np.isfinite(g_new)):
            info["stop"] = "non_finite"
            break
        s = alpha * direction
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-16:
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > history:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        x = x + s
        f, g = f_new, g_new
        if f < f_best:
            x_best, f_best = x.copy(), f
        if abs(float(s @ s)) < 1e-32:
            info["stop"] = "step_size"
            break
    return x_best, f_best, info
