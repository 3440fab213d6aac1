"""Fixed-step hybrid simulation loop.

One run couples the Euler-discretized plant, the actuation channel, the
sampled/delayed sensing channel, the incremental predictor, the event trigger,
and (optionally) the Lyapunov monitor.  Everything is deterministic given the
configuration, including seeds.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import ActuationDelay, SensingSchedule
from .exceptions import ConfigurationError, PredictorError
from .model import ISSCertificate, LinearSystem, SystemModel
from .monitor import MonitorConfig, compute_L, compute_V
from .predictor import make_predictor
from .signals import TimedSignal
from .trigger import EventLog, TriggerConfig, threshold

__all__ = ["SensingConfig", "SimConfig", "SimTrace", "run", "heatmap"]

_FMT = "%.17g"


@dataclass(frozen=True)
class SensingConfig:
    """Sensing channel: periodic transmissions or idealized continuous feedback."""

    mode: str = "periodic"  # "periodic" | "perfect"
    delta_tau: float = 1.0
    d_psi: Optional[float] = None
    mu_psi: Optional[float] = None
    sigma_psi: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.mode not in ("periodic", "perfect"):
            raise ConfigurationError(f"unknown sensing mode {self.mode!r}")
        if self.mode == "periodic":
            if self.delta_tau <= 0:
                raise ConfigurationError("delta_tau must be positive")
            if self.d_psi is None and (self.mu_psi is None or self.sigma_psi is None):
                raise ConfigurationError(
                    "periodic sensing needs d_psi or (mu_psi, sigma_psi)"
                )

    def schedule(self, horizon: float) -> Optional[SensingSchedule]:
        if self.mode == "perfect":
            return None
        return SensingSchedule.periodic(
            self.delta_tau,
            horizon,
            d_psi=self.d_psi,
            mu_psi=self.mu_psi,
            sigma_psi=self.sigma_psi,
            seed=self.seed,
        )


@dataclass(frozen=True)
class SimConfig:
    model: SystemModel
    delay: ActuationDelay
    sensing: SensingConfig
    trigger: TriggerConfig
    x0: np.ndarray
    h: float = 1e-2
    T: float = 25.0
    predictor_method: str = "closed-loop"
    cert: Optional[ISSCertificate] = None
    linear: Optional[LinearSystem] = None
    ctrl_delay: Optional[ActuationDelay] = None  # nominal channel model, if mismatched
    u_prehistory: float = 0.0  # constant control on [phi(0), 0]
    monitor: Optional[MonitorConfig] = None
    divergence_threshold: float = 1e9
    label: str = ""

    def __post_init__(self):
        if self.h <= 0 or self.T <= self.h:
            raise ConfigurationError("need 0 < h < T")
        object.__setattr__(
            self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)).copy()
        )
        if self.x0.shape != (self.model.state_dim,):
            raise ConfigurationError("x0 dimension does not match the model")

    @property
    def controller_delay(self) -> ActuationDelay:
        return self.ctrl_delay if self.ctrl_delay is not None else self.delay


@dataclass
class SimTrace:
    times: np.ndarray
    x: np.ndarray
    u: np.ndarray
    p: np.ndarray
    e_norm: np.ndarray
    threshold: np.ndarray
    V: np.ndarray
    L: np.ndarray
    event_flags: np.ndarray
    delivery_flags: np.ndarray
    events: EventLog
    deliveries: list  # (ell, tau_ell, delivery_time, grid_time)
    t0: float
    h: float
    diagnostics: dict = field(default_factory=dict)
    # back-extension of the prediction on [phi(0), 0), for the monitor
    pre_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    pre_p: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))

    @property
    def diverged(self) -> bool:
        return bool(self.diagnostics.get("diverged", False))

    @property
    def final_state_norm(self) -> float:
        return float(np.linalg.norm(self.x[-1]))

    def write_trace_csv(self, path) -> None:
        n = self.x.shape[1]
        m = self.u.shape[1]
        header = (
            ["t"]
            + [f"x_{i+1}" for i in range(n)]
            + [f"u_{j+1}" for j in range(m)]
            + [f"p_{i+1}" for i in range(n)]
            + ["e_norm", "threshold", "V", "L", "event_flag", "delivery_flag"]
        )
        cols = np.column_stack(
            [
                self.times,
                self.x,
                self.u,
                self.p,
                self.e_norm,
                self.threshold,
                self.V,
                self.L,
                self.event_flags,
                self.delivery_flags,
            ]
        )
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in cols:
                fh.write(",".join(_FMT % v for v in row) + "\n")

    def write_events_csv(self, path) -> None:
        header = ["k", "t_k", "dwell", "p_norm", "e_pre_reset"]
        m = self.u.shape[1]
        header += [f"u_{j+1}" for j in range(m)]
        pn = self.diagnostics.get("event_p_norms", [])
        en = self.diagnostics.get("event_e_pre", [])
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            prev_t = None
            for k, (t_k, u_k) in enumerate(
                zip(self.events.event_times, self.events.event_controls)
            ):
                dwell = t_k - prev_t if prev_t is not None else float("nan")
                prev_t = t_k
                vals = [k, t_k, dwell, pn[k] if k < len(pn) else float("nan"),
                        en[k] if k < len(en) else float("nan")]
                vals += list(np.atleast_1d(u_k))
                fh.write(",".join(_FMT % v for v in vals) + "\n")

    def summary(self) -> str:
        lines = [
            f"final |x(T)| = {self.final_state_norm:.6g}",
            f"events: {self.events.count}, min dwell = {self.events.min_dwell_observed:.6g}",
            f"t0 = {self.t0:.6g}",
            f"diverged: {self.diverged}",
            f"max |w| after t0: {self.diagnostics.get('w_max_after_t0', float('nan')):.3e}",
        ]
        rep = self.diagnostics.get("decay_report")
        if rep is not None:
            lines.append(str(rep))
        return "\n".join(lines)


def _build_sigma_tables(delay: ActuationDelay, h: float, m_lo: int, m_hi: int):
    """sigma and centered-difference sigmadot at grid nodes m*h, m in [m_lo, m_hi]."""
    ms = np.arange(m_lo - 1, m_hi + 2)
    sig = np.empty(len(ms))
    phi0 = delay.phi(0.0)
    for i, m in enumerate(ms):
        s = m * h
        sig[i] = delay.sigma(s) if s >= phi0 else math.nan
    sdot = np.full(len(ms), math.nan)
    for i in range(1, len(ms) - 1):
        if math.isfinite(sig[i - 1]) and math.isfinite(sig[i + 1]):
            sdot[i] = (sig[i + 1] - sig[i - 1]) / (2.0 * h)
        elif math.isfinite(sig[i]) and math.isfinite(sig[i + 1]):
            sdot[i] = (sig[i + 1] - sig[i]) / h

    def sigma_fn(s: float) -> float:
        m = s / h
        mr = round(m)
        if abs(m - mr) < 1e-9 and m_lo - 1 <= mr <= m_hi + 1:
            v = sig[int(mr) - (m_lo - 1)]
            if math.isfinite(v):
                return float(v)
        return delay.sigma(s)

    def sigma_dot_fn(s: float) -> float:
        m = s / h
        mr = round(m)
        if abs(m - mr) < 1e-9 and m_lo - 1 <= mr <= m_hi + 1:
            v = sdot[int(mr) - (m_lo - 1)]
            if math.isfinite(v):
                return float(v)
        return delay.sigma_dot(s, h)

    return sigma_fn, sigma_dot_fn


def run(cfg: SimConfig) -> SimTrace:
    """Simulate one run and return the full trace."""
    model = cfg.model
    h = cfg.h
    N = int(round(cfg.T / h))
    times = np.arange(N + 1) * h
    n, m = model.state_dim, model.input_dim

    true_delay = cfg.delay
    ctrl_delay = cfg.controller_delay
    phi0 = ctrl_delay.phi(0.0)
    if phi0 >= 0:
        raise ConfigurationError("the channel must have positive delay at t = 0")

    m_lo = int(math.ceil(phi0 / h - 1e-9))
    sigma_fn, sigma_dot_fn = _build_sigma_tables(ctrl_delay, h, m_lo, N)
    if true_delay is ctrl_delay:
        true_sigma_fn = sigma_fn
    else:
        true_sigma_fn, _ = _build_sigma_tables(true_delay, h, m_lo, N)

    # -- control history with its pre-history ----------------------------
    u_hist = TimedSignal(mode="constant")
    u_pre = np.full(m, float(cfg.u_prehistory))
    u_hist.append(phi0, u_pre)

    # -- sensing schedule -------------------------------------------------
    sched = cfg.sensing.schedule(cfg.T)
    deliveries = []  # (ell, tau, delivery_time, grid_index)
    if sched is None:
        t0_idx = 0
        t0 = 0.0
    else:
        snap_max = 0.0
        for ell, (tau, dv) in enumerate(
            zip(sched.transmit_times, sched.delivery_times)
        ):
            idx = int(math.ceil(dv / h - 1e-9))
            if idx > N:
                continue
            snap_max = max(snap_max, idx * h - dv)
            deliveries.append((ell, float(tau), float(dv), idx))
        if not deliveries:
            raise ConfigurationError("no sensing delivery inside the horizon")
        t0_idx = min(d[3] for d in deliveries)
        t0 = t0_idx * h
    by_index: dict[int, list] = {}
    for d in deliveries:
        by_index.setdefault(d[3], []).append(d)

    if t0_idx > 0:
        # u = 0 until the first state arrives
        u_hist.append(0.0, np.zeros(m))

    # -- predictor initialization and back-extension ----------------------
    predictor = make_predictor(
        cfg.predictor_method, model, ctrl_delay, u_hist, h,
        sigma_dot_fn, sigma_fn, linear=cfg.linear,
    )
    pre = [mm * h for mm in range(m_lo, 0)]
    if not pre or pre[0] > phi0 + 1e-12 * (1.0 + abs(phi0)):
        pre = [phi0] + pre
    pre_times = np.array(pre)
    pre_p = np.empty((len(pre_times), n))
    predictor.reanchor(0.0, cfg.x0, float(pre_times[0]))
    pre_p[0] = predictor.p
    for i in range(1, len(pre_times)):
        # first segment may be a partial step off the grid
        dt = pre_times[i] - pre_times[i - 1]
        if abs(dt - h) < 1e-12:
            predictor.advance(pre_times[i - 1])
        else:
            predictor.reanchor(0.0, cfg.x0, float(pre_times[i]))
        pre_p[i] = predictor.p
    # land on t = 0
    if len(pre_times):
        dt = 0.0 - pre_times[-1]
        if abs(dt - h) < 1e-12:
            predictor.advance(float(pre_times[-1]))
        else:
            predictor.reanchor(0.0, cfg.x0, 0.0)

    # -- allocate the trace ----------------------------------------------
    X = np.empty((N + 1, n))
    U = np.zeros((N + 1, m))
    P = np.full((N + 1, n), np.nan)
    E = np.zeros(N + 1)
    TH = np.full(N + 1, np.nan)
    V = np.full(N + 1, np.nan)
    Lv = np.full(N + 1, np.nan)
    ev_flags = np.zeros(N + 1)
    dv_flags = np.zeros(N + 1)

    X[0] = cfg.x0
    log = EventLog()
    event_p_norms: list[float] = []
    event_e_pre: list[float] = []
    p_last_event: Optional[np.ndarray] = None
    anchor_tau = 0.0
    w_max_after_t0 = 0.0
    diverged = False
    n_final = N

    def state_at(tq: float) -> np.ndarray:
        m_f = tq / h
        k_r = round(m_f)
        if abs(m_f - k_r) < 1e-9 * (1.0 + abs(m_f)):
            # snap to the grid so a 1-ulp overshoot cannot reach X rows
            # the loop has not written yet
            return X[min(int(k_r), N)].copy()
        k = min(int(m_f), N - 1)
        lam = (tq - k * h) / h
        return (1.0 - lam) * X[k] + lam * X[k + 1] if lam > 0 else X[k].copy()

    for step in range(N + 1):
        t = float(times[step])
        # deliveries due now: adopt the freshest transmitted state
        if sched is None:
            if step > 0:
                predictor.reanchor(t, X[step], t)
                anchor_tau = t
            dv_flags[step] = 1.0
        elif step in by_index:
            dv_flags[step] = 1.0
            best = max(by_index[step], key=lambda d: d[1])
            if best[1] >= anchor_tau or p_last_event is None:
                anchor_tau = best[1]
                predictor.reanchor(anchor_tau, state_at(anchor_tau), t)

        p_now = np.asarray(predictor.p, dtype=float)
        P[step] = p_now

        if step >= t0_idx:
            fired = False
            if p_last_event is None:
                fired = True
                e_pre = 0.0
            else:
                e = p_last_event - p_now
                e_n = float(np.linalg.norm(e))
                thr = threshold(cfg.trigger, p_now, cfg.cert)
                TH[step] = thr
                if e_n > 0.0 and e_n >= thr:
                    fired = True
                    e_pre = e_n
                else:
                    E[step] = e_n
            if fired:
                control = np.atleast_1d(np.asarray(model.K(p_now), dtype=float))
                log.record(t, control)
                event_p_norms.append(float(np.linalg.norm(p_now)))
                event_e_pre.append(e_pre)
                u_hist.append(t, control)
                p_last_event = p_now.copy()
                ev_flags[step] = 1.0
                E[step] = 0.0
                if math.isnan(TH[step]):
                    TH[step] = threshold(cfg.trigger, p_now, cfg.cert)
            # w-identity diagnostic: u(t) - K(p(t) + e(t)); p(t) + e(t) is
            # p(t_k) exactly, so use the stored value (adding e back would
            # lose low bits to cancellation at large |p|)
            w = u_hist.sample(t) - np.atleast_1d(
                np.asarray(model.K(p_last_event), dtype=float)
            )
            w_max_after_t0 = max(w_max_after_t0, float(np.linalg.norm(w)))

        U[step] = u_hist.sample(t)

        if step == N:
            break
        # plant Euler step with the delayed control; snap phi(t) onto the
        # stamp grid so a 1-ulp offset cannot pick up a stale control value
        s_phi = true_delay.phi(t)
        k_phi = round(s_phi / h)
        if abs(s_phi - k_phi * h) < 1e-9 * (1.0 + abs(s_phi)):
            s_phi = k_phi * h
        u_phi = u_hist.sample(s_phi)
        with np.errstate(over="ignore", invalid="ignore"):
            x_next = X[step] + h * model.f(X[step], u_phi)
        if not np.all(np.isfinite(x_next)) or np.linalg.norm(x_next) > cfg.divergence_threshold:
            diverged = True
            n_final = step
            X[step + 1 :] = X[step]
            break
        X[step + 1] = x_next
        try:
            predictor.advance(t)
        except PredictorError:
            diverged = True
            n_final = step
            X[step + 1 :] = X[step]
            break

    trace = SimTrace(
        times=times,
        x=X,
        u=U,
        p=P,
        e_norm=E,
        threshold=TH,
        V=V,
        L=Lv,
        event_flags=ev_flags,
        delivery_flags=dv_flags,
        events=log,
        deliveries=[(d[0], d[1], d[2], d[3] * h) for d in deliveries],
        t0=t0,
        h=h,
        pre_times=pre_times,
        pre_p=pre_p,
        diagnostics={
            "diverged": diverged,
            "final_step": n_final,
            "w_max_after_t0": w_max_after_t0,
            "event_p_norms": event_p_norms,
            "event_e_pre": event_e_pre,
        },
    )

    if cfg.monitor is not None and cfg.cert is not None and not diverged:
        _attach_monitor(trace, cfg, u_hist, true_sigma_fn, true_delay)
    return trace


def _attach_monitor(trace: SimTrace, cfg: SimConfig, u_hist, sigma_fn, delay) -> None:
    """Fill the V and L columns at the configured stride."""
    mon = cfg.monitor
    model = cfg.model
    t0 = trace.t0

    # disturbance history: nonzero only before t0
    w_hist = TimedSignal(mode="linear")
    for s, p in zip(trace.pre_times, trace.pre_p):
        w = u_hist.sample(float(s)) - np.atleast_1d(np.asarray(model.K(p), dtype=float))
        w_hist.append(float(s), w)
    k0 = int(round(t0 / trace.h))
    for step in range(0, k0):
        s = float(trace.times[step])
        w = u_hist.sample(s) - np.atleast_1d(
            np.asarray(model.K(trace.p[step]), dtype=float)
        )
        w_hist.append(s, w)
    zeros = np.zeros(model.input_dim)
    if len(w_hist) == 0 or w_hist.last_time < t0:
        w_hist.append(t0, zeros)
    end = float(trace.times[-1]) + 1.0
    w_hist.append(end, zeros)

    sigma_t0 = sigma_fn(t0)
    for step in range(0, len(trace.times), mon.stride):
        t = float(trace.times[step])
        sig_t = sigma_fn(t)
        if t >= sigma_t0:
            L = 0.0
        else:
            L = compute_L(mon, w_hist, t, sig_t, delay.phi,
                          n_nodes=max(2, int(round((sig_t - t) / trace.h)) + 1))
        trace.L[step] = L
        trace.V[step] = compute_V(mon, trace.x[step], L, cfg.cert)


def heatmap(
    base_cfg: SimConfig,
    delta_tau_grid,
    d_psi_grid,
    n_ic: int,
    seed: int,
    workers: Optional[int] = None,
    config_factory=None,
) -> np.ndarray:
    """Average |x(T)| per (delta_tau, d_psi) cell over seeded initial states.

    The same initial-condition draws are reused in every cell for paired
    comparison.  Diverged runs contribute the saturation value 1e9.
    """
    if n_ic < 1:
        raise ConfigurationError("n_ic must be at least 1")
    delta_tau_grid = [float(v) for v in delta_tau_grid]
    d_psi_grid = [float(v) for v in d_psi_grid]
    rng = np.random.default_rng(seed)
    ics = rng.standard_normal((n_ic, base_cfg.model.state_dim))

    if workers is None:
        workers = int(os.environ.get("ETPF_THREADS", "0")) or (os.cpu_count() or 1)

    cells = [(i, j, dt, dp) for i, dt in enumerate(delta_tau_grid)
             for j, dp in enumerate(d_psi_grid)]
    result = np.empty((len(delta_tau_grid), len(d_psi_grid)))

    if workers > 1:
        try:
            from concurrent.futures import ProcessPoolExecutor

            factory = config_factory
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futs = {
                    pool.submit(_heatmap_cell, base_cfg if factory is None else None,
                                factory, dt, dp, ics): (i, j)
                    for i, j, dt, dp in cells
                }
                for fut, (i, j) in futs.items():
                    result[i, j] = fut.result()
            return result
        except Exception:
            pass  # unpicklable config: fall back to the serial path

    for i, j, dt, dp in cells:
        result[i, j] = _heatmap_cell(
            base_cfg if config_factory is None else None, config_factory, dt, dp, ics
        )
    return result


def _heatmap_cell(base_cfg, config_factory, delta_tau, d_psi, ics) -> float:
    if base_cfg is None:
        base_cfg = config_factory()
    sensing = dataclasses.replace(
        base_cfg.sensing, mode="periodic", delta_tau=delta_tau,
        d_psi=d_psi if d_psi > 0 else 0.0, mu_psi=None, sigma_psi=None,
    )
    total = 0.0
    for x0 in ics:
        cfg = dataclasses.replace(base_cfg, sensing=sensing, x0=x0, monitor=None)
        try:
            tr = run(cfg)
            val = min(tr.final_state_norm, 1e9) if not tr.diverged else 1e9
        except PredictorError:
            val = 1e9
        total += val
    return total / len(ics)
