"""Prediction of the future plant state x(sigma(t)).

Four strategies are provided:

* ``closed-loop``: re-integrate ``pdot = sigmadot * f(p, u)`` from the most
  recent delivered state every time a prediction is needed.  Most robust; a
  fresh delivery wipes out all accumulated mismatch.
* ``semi-closed-loop``: evaluate the prediction integral by trapezoidal
  quadrature over the stored (p, u) history, anchored at the delivered state.
* ``open-loop``: advance ``pdot = sigmadot * f(p, u)`` one step at a time,
  never re-anchoring.  Cheap but drifts for unstable plants.
* ``linear-closed-form``: matrix-exponential solution for linear plants.

The standalone functions re-run their full window per call (the reference
semantics); the ``*Predictor`` classes keep incremental state for the
simulation engine and produce the same Euler iterates because the integration
nodes are aligned to multiples of the engine step.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from .channel import ActuationDelay
from .exceptions import CoverageError, PredictorError
from .model import LinearSystem, SystemModel
from .signals import TimedSignal

__all__ = [
    "predict_closed_loop",
    "predict_semi_closed",
    "predict_open_loop_step",
    "predict_linear",
    "ClosedLoopPredictor",
    "OpenLoopPredictor",
    "SemiClosedPredictor",
    "LinearPredictor",
    "make_predictor",
    "PREDICTOR_METHODS",
]

PREDICTOR_METHODS = ("closed-loop", "semi-closed-loop", "open-loop", "linear-closed-form")

_DIVERGENCE_CAP = 1e12


def _window_nodes(s0: float, t: float, h: float) -> list[float]:
    """Integration nodes: s0, then multiples of h, ending exactly at t."""
    if t < s0:
        raise PredictorError(f"prediction target {t} precedes window start {s0}")
    nodes = [s0]
    m = math.ceil(s0 / h - 1e-9)
    s = m * h
    if s <= s0 + 1e-12 * (1.0 + abs(s0)):
        m += 1
        s = m * h
    while s < t - 1e-12 * (1.0 + abs(t)):
        nodes.append(s)
        m += 1
        s = m * h
    if t > nodes[-1] + 1e-12 * (1.0 + abs(t)):
        nodes.append(t)
    return nodes


def _u_at(u_history: TimedSignal, s: float) -> np.ndarray:
    try:
        return u_history.sample(s)
    except CoverageError as exc:
        raise PredictorError(f"u-history does not cover s={s}") from exc


def predict_closed_loop(
    t: float,
    anchor_time: float,
    anchor_state,
    u_history: TimedSignal,
    delay: ActuationDelay,
    model: SystemModel,
    h: float,
    sigma_dot: Optional[Callable[[float], float]] = None,
    scheme: str = "euler",
) -> np.ndarray:
    """Re-integration of the prediction flow from phi(anchor_time) to t.

    ``sigma_dot`` may supply a cached lookup; by default it is the centered
    finite difference of the numerically inverted sigma with spacing h.
    ``scheme`` selects explicit Euler (the reference integrator) or the
    explicit midpoint rule.
    """
    if scheme not in ("euler", "midpoint"):
        raise PredictorError(f"unknown integration scheme {scheme!r}")
    if sigma_dot is None:
        sigma_dot = lambda s: delay.sigma_dot(s, h)
    s0 = delay.phi(float(anchor_time))
    p = np.atleast_1d(np.asarray(anchor_state, dtype=float)).copy()
    nodes = _window_nodes(s0, float(t), h)
    for left, right in zip(nodes[:-1], nodes[1:]):
        dt = right - left
        if scheme == "euler":
            p = p + dt * sigma_dot(left) * model.f(p, _u_at(u_history, left))
        else:
            mid = left + 0.5 * dt
            half = p + 0.5 * dt * sigma_dot(left) * model.f(p, _u_at(u_history, left))
            p = p + dt * sigma_dot(mid) * model.f(half, _u_at(u_history, mid))
        if not np.all(np.isfinite(p)) or np.max(np.abs(p)) > _DIVERGENCE_CAP:
            raise PredictorError("prediction diverged")
    return p


def predict_semi_closed(
    t: float,
    anchor_time: float,
    anchor_state,
    u_history: TimedSignal,
    p_history: TimedSignal,
    delay: ActuationDelay,
    model: SystemModel,
    h: float,
    sigma_dot: Optional[Callable[[float], float]] = None,
) -> np.ndarray:
    """Trapezoidal evaluation of the prediction integral over stored history.

    The stored p-history must cover the window up to (at least) t - h; the
    final uncovered sliver is closed with a rectangle on the last stored
    integrand value.
    """
    if sigma_dot is None:
        sigma_dot = lambda s: delay.sigma_dot(s, h)
    s0 = delay.phi(float(anchor_time))
    anchor = np.atleast_1d(np.asarray(anchor_state, dtype=float))
    covered = min(float(t), p_history.last_time)
    if covered < s0:
        raise PredictorError("p-history does not reach the prediction window")
    nodes = _window_nodes(s0, covered, h)
    integral = np.zeros_like(anchor)
    g_prev = None
    for s in nodes:
        g = sigma_dot(s) * model.f(p_history.sample(s), _u_at(u_history, s))
        if g_prev is not None:
            integral = integral + 0.5 * (s - s_prev) * (g_prev + g)
        g_prev, s_prev = g, s
    if covered < t:
        integral = integral + (t - covered) * g_prev
    return anchor + integral


def predict_open_loop_step(
    p,
    s: float,
    u_history: TimedSignal,
    delay: ActuationDelay,
    model: SystemModel,
    h: float,
    sigma_dot: Optional[Callable[[float], float]] = None,
) -> np.ndarray:
    """One explicit-Euler step of the open-loop prediction flow."""
    if sigma_dot is None:
        sigma_dot = lambda v: delay.sigma_dot(v, h)
    p_next = np.atleast_1d(np.asarray(p, dtype=float)) + h * sigma_dot(s) * model.f(
        np.atleast_1d(p), _u_at(u_history, s)
    )
    if not np.all(np.isfinite(p_next)) or np.max(np.abs(p_next)) > _DIVERGENCE_CAP:
        raise PredictorError("open-loop prediction diverged")
    return p_next


def predict_linear(
    t: float,
    anchor_time: float,
    anchor_state,
    u_history: TimedSignal,
    delay: ActuationDelay,
    sys: LinearSystem,
    h: float,
) -> np.ndarray:
    """Matrix-exponential prediction for linear plants.

    p(t) = exp(A (sigma(t) - tau)) x(tau)
           + integral phi(tau)..t of sigmadot(s) exp(A (sigma(t) - sigma(s))) B u(s) ds

    evaluated by trapezoidal quadrature on the u grid (nodes aligned to
    multiples of h plus the window endpoints).
    """
    A, B = sys.A, sys.B
    tau = float(anchor_time)
    x_tau = np.asarray(anchor_state, dtype=float)
    s0 = delay.phi(tau)
    sig_t = delay.sigma(float(t))
    nodes = _window_nodes(s0, float(t), h)
    sig_nodes = [tau] + [delay.sigma(s) for s in nodes[1:]]
    p = expm(A * (sig_t - tau)) @ x_tau
    g_prev = None
    for s, sig_s in zip(nodes, sig_nodes):
        sdot = delay.sigma_dot(s, h)
        g = sdot * (expm(A * (sig_t - sig_s)) @ (B @ np.atleast_1d(_u_at(u_history, s))))
        if g_prev is not None:
            p = p + 0.5 * (s - s_prev) * (g_prev + g)
        g_prev, s_prev = g, s
    return p


# ---------------------------------------------------------------------------
# Incremental predictors for the simulation engine.
#
# All four share the interface: reanchor(anchor_time, anchor_state, t_now),
# advance(t) stepping from t to t + h, and the current value in .p.
# ---------------------------------------------------------------------------


class ClosedLoopPredictor:
    """Incremental closed-loop prediction by replaying the plant scheme.

    The prediction ODE is integrated in the untransformed (plant) time
    variable on the engine's own grid: the replayed iterates
    ``xhat_{k+1} = xhat_k + h f(xhat_k, u(phi(k h)))`` coincide with the
    plant's Euler iterates because the consumed u history is immutable.
    This is what makes the closed-loop method robust for unstable plants:
    prediction mismatch does not compound with the window length, unlike a
    re-integration on time-warped nodes.  The value at sigma(t) is closed
    with a partial Euler step.
    """

    def __init__(self, model, delay, u_history, h, sigma_fn):
        self.model = model
        self.delay = delay
        self.u_history = u_history
        self.h = h
        self.sigma_fn = sigma_fn
        self.p: Optional[np.ndarray] = None
        self.anchor_time: Optional[float] = None
        self._xhat: Optional[np.ndarray] = None  # replay state at node _k * h
        self._k: Optional[int] = None

    def _u_phi(self, s: float) -> np.ndarray:
        # snap phi(s) onto the stamp grid so a 1-ulp offset cannot pick up
        # a stale control value
        sp = self.delay.phi(s)
        k = round(sp / self.h)
        if abs(sp - k * self.h) < 1e-9 * (1.0 + abs(sp)):
            sp = k * self.h
        return _u_at(self.u_history, sp)

    def _extend(self, sig_target: float) -> None:
        h = self.h
        while (self._k + 1) * h <= sig_target + 1e-12 * (1.0 + abs(sig_target)):
            s = self._k * h
            self._xhat = self._xhat + h * self.model.f(self._xhat, self._u_phi(s))
            self._k += 1
            if not np.all(np.isfinite(self._xhat)) or np.max(np.abs(self._xhat)) > _DIVERGENCE_CAP:
                raise PredictorError("prediction diverged")
        frac = sig_target - self._k * h
        if frac > 1e-12:
            self.p = self._xhat + frac * self.model.f(
                self._xhat, self._u_phi(self._k * h)
            )
        else:
            self.p = self._xhat.copy()

    def reanchor(self, anchor_time: float, anchor_state, t_now: float) -> None:
        if self.anchor_time is not None and anchor_time < self.anchor_time:
            raise PredictorError("anchor time must be nondecreasing")
        self.anchor_time = float(anchor_time)
        x = np.atleast_1d(np.asarray(anchor_state, dtype=float)).copy()
        h = self.h
        k = round(anchor_time / h)
        if abs(anchor_time - k * h) < 1e-9 * (1.0 + abs(anchor_time)):
            self._k = int(k)
        else:
            # off-grid anchor: partial step onto the next node
            k = math.ceil(anchor_time / h - 1e-9)
            x = x + (k * h - anchor_time) * self.model.f(x, self._u_phi(anchor_time))
            self._k = int(k)
        self._xhat = x
        self._extend(self.sigma_fn(float(t_now)))

    def advance(self, t: float) -> None:
        """Move the prediction target from sigma(t) to sigma(t + h)."""
        self._extend(self.sigma_fn(t + self.h))


class OpenLoopPredictor:
    """sigma-form flow, one Euler step per engine step, never re-anchored."""

    def __init__(self, model, delay, u_history, h, sigma_dot):
        self.model = model
        self.delay = delay
        self.u_history = u_history
        self.h = h
        self.sigma_dot = sigma_dot
        self.p: Optional[np.ndarray] = None
        self.anchor_time: Optional[float] = None

    def reanchor(self, anchor_time, anchor_state, t_now):
        if self.anchor_time is not None:
            return  # later deliveries are deliberately ignored
        self.anchor_time = float(anchor_time)
        self.p = predict_closed_loop(
            t_now, anchor_time, anchor_state, self.u_history,
            self.delay, self.model, self.h, self.sigma_dot,
        )

    def advance(self, t: float) -> None:
        self.p = predict_open_loop_step(
            self.p, t, self.u_history, self.delay, self.model, self.h,
            self.sigma_dot,
        )


class SemiClosedPredictor:
    """Prediction integral accumulated by trapezoid over the stored history.

    Keeps a history of the integrand g(s) = sigmadot(s) f(p(s), u(s)); each
    step closes the new segment with a Heun-style predictor/corrector so the
    quadrature stays trapezoidal.
    """

    def __init__(self, model, delay, u_history, h, sigma_dot):
        self.model = model
        self.delay = delay
        self.u_history = u_history
        self.h = h
        self.sigma_dot = sigma_dot
        self.g_history = TimedSignal(mode="linear")
        self.p: Optional[np.ndarray] = None
        self.anchor_time: Optional[float] = None
        self._anchor_state: Optional[np.ndarray] = None
        self._t: Optional[float] = None
        self._integral: Optional[np.ndarray] = None

    def _g(self, s: float, p) -> np.ndarray:
        return self.sigma_dot(s) * self.model.f(np.atleast_1d(p), _u_at(self.u_history, s))

    def reanchor(self, anchor_time: float, anchor_state, t_now: float) -> None:
        self.anchor_time = float(anchor_time)
        self._anchor_state = np.atleast_1d(np.asarray(anchor_state, dtype=float)).copy()
        s0 = self.delay.phi(self.anchor_time)
        if len(self.g_history) == 0:
            # first anchoring: start the history at the window edge
            self.p = self._anchor_state.copy()
            self._integral = np.zeros_like(self.p)
            self.g_history.append(s0, self._g(s0, self.p))
            self._t = s0
            if t_now > s0:
                # catch up to t_now on aligned nodes
                for s in _window_nodes(s0, t_now, self.h)[1:]:
                    self._step_to(s)
            return
        if s0 < self.g_history.first_time - 1e-12:
            raise PredictorError("g-history does not reach the new anchor window")
        self._integral = self.g_history.integrate(s0, min(t_now, self.g_history.last_time))
        self.p = self._anchor_state + self._integral
        self._t = t_now

    def _step_to(self, s_next: float) -> None:
        dt = s_next - self._t
        # _t may drift one ulp past the last stored stamp after a reanchor
        g_left = self.g_history.sample(min(self._t, self.g_history.last_time))
        p_pred = self.p + dt * g_left  # Euler predictor
        g_right = self._g(s_next, p_pred)
        self._integral = self._integral + 0.5 * dt * (g_left + g_right)
        self.p = self._anchor_state + self._integral
        # store the corrected integrand value
        self.g_history.append(s_next, self._g(s_next, self.p))
        self._t = s_next
        if not np.all(np.isfinite(self.p)) or np.max(np.abs(self.p)) > _DIVERGENCE_CAP:
            raise PredictorError("prediction diverged")

    def advance(self, t: float) -> None:
        self._step_to(t + self.h)


class LinearPredictor:
    """Exact exponential stepping of the linear prediction.

    p(s + h) = exp(A dsig) p(s) + (integral 0..dsig exp(A r) dr) B u(s) with
    dsig = sigma(s + h) - sigma(s), which solves the prediction ODE exactly
    for piecewise-constant u.  Matrix exponentials are cached per distinct
    dsig (constant-delay channels need just one).
    """

    def __init__(self, sys: LinearSystem, delay, u_history, h, sigma_fn):
        self.sys = sys
        self.delay = delay
        self.u_history = u_history
        self.h = h
        self.sigma_fn = sigma_fn  # cached sigma lookup
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
        self.p: Optional[np.ndarray] = None
        self.anchor_time: Optional[float] = None

    def _step_mats(self, dsig: float) -> tuple[np.ndarray, np.ndarray]:
        key = round(dsig, 14)
        mats = self._cache.get(key)
        if mats is None:
            n = self.sys.n
            M = np.zeros((2 * n, 2 * n))
            M[:n, :n] = self.sys.A * dsig
            M[:n, n:] = np.eye(n) * dsig
            E = expm(M)
            mats = (E[:n, :n], E[:n, n:])
            if len(self._cache) < 4096:
                self._cache[key] = mats
        return mats

    def _integrate(self, p, s_from: float, s_to: float) -> np.ndarray:
        nodes = _window_nodes(s_from, s_to, self.h)
        for left, right in zip(nodes[:-1], nodes[1:]):
            E, Phi = self._step_mats(self.sigma_fn(right) - self.sigma_fn(left))
            p = E @ p + Phi @ (self.sys.B @ np.atleast_1d(_u_at(self.u_history, left)))
        return p

    def reanchor(self, anchor_time: float, anchor_state, t_now: float) -> None:
        self.anchor_time = float(anchor_time)
        p = np.asarray(anchor_state, dtype=float).copy()
        s0 = self.delay.phi(self.anchor_time)
        if t_now > s0:
            p = self._integrate(p, s0, t_now)
        self.p = p

    def advance(self, t: float) -> None:
        E, Phi = self._step_mats(self.sigma_fn(t + self.h) - self.sigma_fn(t))
        self.p = E @ self.p + Phi @ (self.sys.B @ np.atleast_1d(_u_at(self.u_history, t)))
        if not np.all(np.isfinite(self.p)) or np.max(np.abs(self.p)) > _DIVERGENCE_CAP:
            raise PredictorError("prediction diverged")


def make_predictor(method, model, delay, u_history, h, sigma_dot, sigma_fn, linear=None):
    if method == "closed-loop":
        return ClosedLoopPredictor(model, delay, u_history, h, sigma_fn)
    if method == "open-loop":
        return OpenLoopPredictor(model, delay, u_history, h, sigma_dot)
    if method == "semi-closed-loop":
        return SemiClosedPredictor(model, delay, u_history, h, sigma_dot)
    if method == "linear-closed-form":
        if linear is None:
            raise PredictorError("linear-closed-form needs a LinearSystem")
        return LinearPredictor(linear, delay, u_history, h, sigma_fn)
    raise PredictorError(f"unknown predictor method {method!r}")
