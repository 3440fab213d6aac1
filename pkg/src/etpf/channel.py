"""Actuation-delay and sensing-channel models.

The actuation channel is described by a strictly increasing map ``phi``: a
control generated at time t is applied to the plant at time ``sigma(t) =
phi^{-1}(t)``, so ``t - phi(t)`` is the delay experienced at plant time t.
The sensing channel delivers the state sampled at transmission time
``tau_ell`` to the controller after a (possibly random) delay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .exceptions import ChannelModelError, ConfigurationError

__all__ = [
    "ActuationDelay",
    "SensingSchedule",
    "sigma",
    "verify_delay_bounds",
    "latest_delivered_index",
    "DelayBoundsReport",
]


@dataclass(frozen=True)
class ActuationDelay:
    """Known actuation delay map with its bound data.

    ``M0`` bounds the delay ``t - phi(t)``; ``m2 <= dphi/dt <= M1``.  The
    reciprocals m0, m1, M2 bound the inverse map sigma.
    """

    phi: Callable[[float], float]
    M0: float
    M1: float
    m2: float
    name: str = "custom"

    def __post_init__(self):
        if self.M0 <= 0 or self.M1 <= 0 or self.m2 <= 0:
            raise ConfigurationError("delay bounds must be positive")
        if self.m2 > self.M1:
            raise ConfigurationError("m2 must not exceed M1")

    @property
    def m0(self) -> float:
        return 1.0 / self.M0

    @property
    def m1(self) -> float:
        return 1.0 / self.M1

    @property
    def M2(self) -> float:
        return 1.0 / self.m2

    # -- common channel shapes -------------------------------------------

    @staticmethod
    def constant(D: float) -> "ActuationDelay":
        if D <= 0:
            raise ConfigurationError("constant delay must be positive")
        return ActuationDelay(phi=lambda t: t - D, M0=D, M1=1.0, m2=1.0,
                              name="constant")

    @staticmethod
    def example1() -> "ActuationDelay":
        """Bump-shaped delay peaking at t = 5: delay = ((t-5)^2+2)/(2(t-5)^2+2)."""

        def phi(t: float) -> float:
            s2 = (t - 5.0) ** 2
            return t - (s2 + 2.0) / (2.0 * s2 + 2.0)

        wig = 3.0 * math.sqrt(3.0) / 16.0
        return ActuationDelay(phi=phi, M0=1.0, M1=1.0 + wig, m2=1.0 - wig,
                              name="example1")

    @staticmethod
    def sinusoidal(D: float, a: float) -> "ActuationDelay":
        """Delay D + a*sin(t); requires a < min(D, 1)."""
        if not 0 <= a < min(D, 1.0):
            raise ConfigurationError("need 0 <= a < min(D, 1) for a valid channel")
        return ActuationDelay(
            phi=lambda t: t - D - a * math.sin(t),
            M0=D + a,
            M1=1.0 + a,
            m2=1.0 - a,
            name="sinusoidal",
        )

    @staticmethod
    def from_table(times: Sequence[float], delays: Sequence[float]) -> "ActuationDelay":
        """Piecewise-linear delay profile from (t, delay) pairs."""
        t = np.asarray(times, dtype=float)
        d = np.asarray(delays, dtype=float)
        if t.ndim != 1 or t.shape != d.shape or len(t) < 2:
            raise ConfigurationError("table needs matching 1-d arrays, length >= 2")
        if np.any(np.diff(t) <= 0):
            raise ConfigurationError("table times must be strictly increasing")
        if np.any(d <= 0):
            raise ConfigurationError("table delays must be positive")
        slopes = np.diff(d) / np.diff(t)
        M1 = float(1.0 - slopes.min())
        m2 = float(1.0 - slopes.max())
        if m2 <= 0:
            raise ConfigurationError("delay table implies non-increasing phi")
        return ActuationDelay(
            phi=lambda s: s - float(np.interp(s, t, d)),
            M0=float(d.max()),
            M1=M1,
            m2=m2,
            name="custom-table",
        )

    # -- inverse map ------------------------------------------------------

    def sigma(self, t: float) -> float:
        """Solve ``phi(s) = t`` by bracketed root finding.

        The bracket ``[t, t + 2 M0]`` is guaranteed by the delay bounds; a
        violated bracket means the channel does not satisfy its declared
        bounds.
        """
        t = float(t)
        lo, hi = t, t + 2.0 * self.M0
        flo = self.phi(lo) - t
        fhi = self.phi(hi) - t
        if flo > 0 or fhi < 0:
            raise ChannelModelError(
                f"bracket [{lo}, {hi}] does not contain sigma({t}); "
                "declared delay bounds are violated"
            )
        if flo == 0.0:
            return lo
        s = brentq(lambda v: self.phi(v) - t, lo, hi, xtol=1e-14, rtol=1e-15)
        if abs(self.phi(s) - t) > 1e-12 * (1.0 + abs(t)):
            raise ChannelModelError(f"sigma({t}) did not converge")
        return float(s)

    def sigma_dot(self, t: float, h: float) -> float:
        """Centered finite difference of sigma with spacing ``h``."""
        lo = t - h
        if lo < self.phi(0.0):
            # one-sided at the left boundary of sigma's domain
            return (self.sigma(t + h) - self.sigma(t)) / h
        return (self.sigma(t + h) - self.sigma(lo)) / (2.0 * h)


def sigma(delay: ActuationDelay, t: float) -> float:
    return delay.sigma(t)


@dataclass
class DelayBoundsReport:
    passed: bool
    worst_delay_excess: float
    worst_phidot_low: float
    worst_phidot_high: float
    min_delay: float

    def __str__(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"delay bounds {status}: delay excess {self.worst_delay_excess:.3e}, "
            f"phidot margin low {self.worst_phidot_low:.3e} / "
            f"high {self.worst_phidot_high:.3e}, min delay {self.min_delay:.3e}"
        )


def verify_delay_bounds(delay: ActuationDelay, grid, rtol: float = 1e-6) -> DelayBoundsReport:
    """Finite-difference check of the declared (M0, M1, m2) on a time grid."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0):
        raise ConfigurationError("grid must be increasing with at least 2 points")
    phi_vals = np.array([delay.phi(float(t)) for t in grid])
    delays = grid - phi_vals
    phidot = np.gradient(phi_vals, grid)
    tol = rtol * (1.0 + delay.M0 + delay.M1)
    worst_delay = float(np.max(delays - delay.M0))
    worst_low = float(np.max(delay.m2 - phidot))
    worst_high = float(np.max(phidot - delay.M1))
    min_delay = float(np.min(delays))
    passed = (
        worst_delay <= tol
        and worst_low <= tol
        and worst_high <= tol
        and min_delay > 0.0
    )
    return DelayBoundsReport(passed, worst_delay, worst_low, worst_high, min_delay)


@dataclass(frozen=True)
class SensingSchedule:
    """Periodic state transmissions with per-transmission delivery delay.

    Delivery times are drawn eagerly at construction (seeded), so queries are
    pure.  Out-of-order deliveries are re-sequenced: the delivered-index query
    returns the freshest transmission among those already delivered.
    """

    transmit_times: np.ndarray
    delivery_times: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        tx = np.asarray(self.transmit_times, dtype=float)
        dv = np.asarray(self.delivery_times, dtype=float)
        if tx.shape != dv.shape or tx.ndim != 1 or len(tx) == 0:
            raise ConfigurationError("transmit/delivery arrays must match, nonempty")
        if np.any(np.diff(tx) < 0):
            raise ConfigurationError("transmit times must be nondecreasing")
        if tx[0] != 0.0:
            raise ConfigurationError("first transmission must be at time 0")
        if np.any(dv < tx) or not np.all(np.isfinite(dv)):
            raise ConfigurationError("delivery times must be finite and causal")
        object.__setattr__(self, "transmit_times", tx)
        object.__setattr__(self, "delivery_times", dv)
        # Delivery order after a stable sort by delivery time.
        order = np.argsort(dv, kind="stable")
        object.__setattr__(self, "_order", order)
        object.__setattr__(self, "_sorted_deliveries", dv[order])

    @staticmethod
    def periodic(
        delta_tau: float,
        horizon: float,
        d_psi: Optional[float] = None,
        mu_psi: Optional[float] = None,
        sigma_psi: Optional[float] = None,
        seed: Optional[int] = None,
    ) -> "SensingSchedule":
        """tau_ell = ell * delta_tau up to the horizon.

        Either a fixed delay ``d_psi`` or truncated Gaussian
        ``N(mu_psi, sigma_psi^2)`` (clipped at 0) per transmission.
        """
        if delta_tau <= 0:
            raise ConfigurationError("delta_tau must be positive")
        n = int(math.floor(horizon / delta_tau)) + 1
        tx = np.arange(n) * delta_tau
        if d_psi is not None:
            dly = np.full(n, float(d_psi))
        elif mu_psi is not None and sigma_psi is not None:
            rng = np.random.default_rng(seed)
            dly = np.maximum(rng.normal(mu_psi, sigma_psi, size=n), 0.0)
        else:
            raise ConfigurationError("either d_psi or (mu_psi, sigma_psi) required")
        if np.any(dly < 0):
            raise ConfigurationError("negative sensing delay")
        return SensingSchedule(tx, tx + dly, seed=seed)

    @property
    def first_delivery(self) -> float:
        return float(self._sorted_deliveries[0])

    def latest_delivered_index(self, t: float) -> Optional[int]:
        """Largest (by transmit time) index delivered by time t; None if nothing yet."""
        k = int(np.searchsorted(self._sorted_deliveries, t, side="right"))
        if k == 0:
            return None
        candidates = self._order[:k]
        return int(candidates[np.argmax(self.transmit_times[candidates])])


def latest_delivered_index(sched: SensingSchedule, t: float) -> Optional[int]:
    return sched.latest_delivered_index(t)
