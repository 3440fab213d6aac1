"""Append-only timestamped signal buffers.

These back the control history u, the prediction history p, and the
disturbance history w.  Two interpolation modes are supported:

* ``"constant"``: piecewise-constant with right-closed jumps, i.e. the value
  stored at ``t_k`` applies on ``[t_k, t_{k+1})``.  Queries past the last
  stamp hold the final value (a control stays active until replaced).
* ``"linear"``: piecewise-linear between stamps; queries outside the stored
  range are rejected.
"""

from __future__ import annotations

from bisect import bisect_right

import numpy as np

from .exceptions import CoverageError

__all__ = ["TimedSignal"]


class TimedSignal:
    """Strictly increasing time stamps with vector values."""

    def __init__(self, mode: str = "constant"):
        if mode not in ("constant", "linear"):
            raise ValueError(f"unknown interpolation mode {mode!r}")
        self.mode = mode
        self._times: list[float] = []
        self._values: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self._times)

    @property
    def times(self) -> list[float]:
        return list(self._times)

    @property
    def values(self) -> list[np.ndarray]:
        return list(self._values)

    @property
    def first_time(self) -> float:
        if not self._times:
            raise CoverageError("signal is empty")
        return self._times[0]

    @property
    def last_time(self) -> float:
        if not self._times:
            raise CoverageError("signal is empty")
        return self._times[-1]

    def append(self, t: float, value) -> None:
        t = float(t)
        if self._times and t <= self._times[-1]:
            raise ValueError(
                f"time stamps must be strictly increasing: {t} after {self._times[-1]}"
            )
        self._times.append(t)
        self._values.append(np.atleast_1d(np.asarray(value, dtype=float)).copy())

    def sample(self, t: float) -> np.ndarray:
        """Interpolated value at ``t`` according to the declared mode."""
        if not self._times:
            raise CoverageError("signal is empty")
        t = float(t)
        if t < self._times[0]:
            raise CoverageError(f"query at t={t} before first stamp {self._times[0]}")
        if self.mode == "constant":
            # Right-closed jump: at exactly t_k the new value applies.
            idx = bisect_right(self._times, t) - 1
            return self._values[idx]
        if t > self._times[-1]:
            raise CoverageError(f"query at t={t} past last stamp {self._times[-1]}")
        idx = bisect_right(self._times, t) - 1
        if idx == len(self._times) - 1:
            return self._values[idx]
        t0, t1 = self._times[idx], self._times[idx + 1]
        lam = (t - t0) / (t1 - t0)
        return (1.0 - lam) * self._values[idx] + lam * self._values[idx + 1]

    def weighted_sup(self, t: float, horizon_end: float, b: float) -> float:
        """Max of ``exp(b*(tau - t)) * |value(tau)|`` for tau in [t, horizon_end].

        The max runs over the stored stamps restricted to the window plus both
        window endpoints.  Empty windows yield 0.
        """
        if horizon_end < t:
            raise ValueError("window end precedes window start")
        if not self._times:
            return 0.0
        lo = max(t, self._times[0])
        if lo > horizon_end:
            return 0.0
        taus = [lo]
        i = bisect_right(self._times, lo)
        while i < len(self._times) and self._times[i] <= horizon_end:
            taus.append(self._times[i])
            i += 1
        if self.mode == "constant" or horizon_end <= self._times[-1]:
            if taus[-1] != horizon_end:
                taus.append(horizon_end)
        best = 0.0
        for tau in taus:
            val = float(np.exp(b * (tau - t)) * np.linalg.norm(self.sample(tau)))
            if val > best:
                best = val
        return best

    def integrate(self, a: float, b: float, transform=None) -> np.ndarray:
        """Integral of ``transform(value(.))`` over [a, b] on the stored grid.

        Piecewise-constant signals are integrated exactly (one rectangle per
        segment); linear signals use the composite trapezoidal rule on the
        stored stamps plus the interpolated endpoints.
        """
        if a > b:
            raise ValueError("integration bounds out of order")
        if not self._times or a < self._times[0]:
            raise CoverageError("integration window not covered by the signal")
        if self.mode == "linear" and b > self._times[-1]:
            raise CoverageError("integration window not covered by the signal")
        if transform is None:
            transform = lambda v: v
        if a == b:
            return np.zeros_like(np.atleast_1d(transform(self._values[0])))

        # Breakpoints: a, interior stamps, b.
        nodes = [a]
        i = bisect_right(self._times, a)
        while i < len(self._times) and self._times[i] < b:
            nodes.append(self._times[i])
            i += 1
        nodes.append(b)

        total = None
        for left, right in zip(nodes[:-1], nodes[1:]):
            dt = right - left
            if self.mode == "constant":
                seg = dt * np.atleast_1d(transform(self.sample(left)))
            else:
                fl = np.atleast_1d(transform(self.sample(left)))
                fr = np.atleast_1d(transform(self.sample(right)))
                seg = 0.5 * dt * (fl + fr)
            total = seg if total is None else total + seg
        return total

    def prune(self, before: float) -> None:
        """Drop samples strictly older than ``before``.

        The newest sample at or before the cutoff is kept so that constant-mode
        lookups inside the remaining window stay valid.
        """
        idx = bisect_right(self._times, before) - 1
        if idx > 0:
            del self._times[:idx]
            del self._values[:idx]
