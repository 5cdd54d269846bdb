"""
Event-driven simulation of reset systems.

Between events the state follows ``exp(A t)`` exactly; events are the zeros
of ``C x(t)``. A zero where the state lies in ``M`` is a reset
(``x+ = A_R x``); a zero in ``F_R`` is a crossing without jump. All zeros
of ``C x(t)`` form the crossing instants.
"""
from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from .model import ResetSystem
from .numerics import Root, RootKind, RootOptions, first_zero

__all__ = [
    "SimOptions",
    "Status",
    "Event",
    "Segment",
    "Trajectory",
    "simulate",
    "reset_instants",
    "crossing_instants",
    "tau_of_state",
    "in_hemisphere",
    "first_entry_after_reset_set",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimOptions:
    """
    Simulation settings.

    Attributes
    ----------
    t_max : float
        Horizon.
    max_events : int
        Reset budget; exceeding it ends the run with ``EVENT_BUDGET_EXHAUSTED``.
    value_tol, deriv_tol, time_tol, sample_step
        Root location tolerances, see :class:`~resetsim.numerics.RootOptions`.
    output_sample_dt : float
        Grid step used when sampling trajectories as point sets.
    """

    t_max: float = 10.0
    max_events: int = 10000
    value_tol: float = 1e-9
    deriv_tol: float = 1e-7
    time_tol: float = 1e-13
    sample_step: float | None = None
    output_sample_dt: float = 1e-3

    def root_options(self, system: ResetSystem | None = None) -> RootOptions:
        return RootOptions(
            value_tol=self.value_tol,
            deriv_tol=self.deriv_tol,
            time_tol=self.time_tol,
            sample_step=self.sample_step,
            unobservable=None if system is None else system.unobservable,
        )

    def with_(self, **kw) -> "SimOptions":
        return replace(self, **kw)


class Status(str, enum.Enum):
    COMPLETED = "completed"
    DEADLOCK = "deadlock"
    EVENT_BUDGET_EXHAUSTED = "event_budget_exhausted"


@dataclass(frozen=True)
class Event:
    """
    Zero of the output at time ``t``.

    ``pre`` is the left limit of the state, ``post`` the state after the
    (possibly trivial) jump.
    """

    t: float
    pre: np.ndarray
    post: np.ndarray
    kind: RootKind
    is_reset: bool


@dataclass(frozen=True)
class Segment:
    """Flow piece ``x(t) = exp(A (t - t0)) x_start`` on ``[t0, t1]``."""

    t0: float
    t1: float
    x_start: np.ndarray


@dataclass
class Trajectory:
    """Result of :func:`simulate`."""

    system: ResetSystem
    x0: np.ndarray
    t_max: float
    segments: list[Segment]
    events: list[Event]
    status: Status
    detail: str = ""
    deadlock_time: float | None = None
    crossing_stop: float | None = None

    @property
    def resets(self) -> list[Event]:
        return [e for e in self.events if e.is_reset]

    @property
    def reset_times(self) -> np.ndarray:
        return np.array([e.t for e in self.events if e.is_reset])

    @property
    def crossing_times(self) -> np.ndarray:
        return np.array([e.t for e in self.events])

    @property
    def t_end(self) -> float:
        return self.segments[-1].t1 if self.segments else 0.0

    def state_at(self, t: float, left: bool = False) -> np.ndarray:
        """State at ``t`` (right-continuous unless ``left``)."""
        if not 0.0 <= t <= self.t_end:
            raise ValueError(f"t={t} outside [0, {self.t_end}]")
        starts = np.array([s.t0 for s in self.segments])
        side = "left" if left else "right"
        k = max(0, int(np.searchsorted(starts, t, side=side)) - 1)
        s = self.segments[k]
        return sla.expm(self.system.A * (t - s.t0)) @ s.x_start

    def sample(self, dt: float | None = None, T: float | None = None, opts: SimOptions | None = None):
        """
        Sample on a uniform grid plus both one-sided limits at every reset.

        Returns
        -------
        t : ndarray
        X : ndarray, shape (len(t), n)
        segment_id : ndarray of int
        is_post_jump : ndarray of bool
        """
        if dt is None:
            dt = (opts or SimOptions()).output_sample_dt
        T = self.t_end if T is None else min(T, self.t_end)
        A = self.system.A
        Phi = sla.expm(A * dt)
        rows_t, rows_x, rows_s, rows_p = [], [], [], []
        for k, seg in enumerate(self.segments):
            a, b = seg.t0, min(seg.t1, T)
            if a > T:
                break
            # grid points strictly inside the segment, plus its endpoints
            i0 = int(np.ceil(a / dt))
            grid = dt * np.arange(i0, int(np.floor(b / dt)) + 1)
            grid = grid[(grid > a) & (grid < b)]
            ts = np.concatenate([[a], grid, [b]]) if b > a else np.array([a])
            X = np.empty((ts.size, A.shape[0]))
            X[0] = seg.x_start
            if grid.size:
                x = sla.expm(A * (grid[0] - a)) @ seg.x_start
                X[1] = x
                for j in range(2, grid.size + 1):
                    x = Phi @ x
                    X[j] = x
            if b > a:
                X[-1] = sla.expm(A * (b - a)) @ seg.x_start
            post = np.zeros(ts.size, dtype=bool)
            post[0] = k > 0 and self._jump_at(a)
            rows_t.append(ts)
            rows_x.append(X)
            rows_s.append(np.full(ts.size, k))
            rows_p.append(post)
        t = np.concatenate(rows_t)
        X = np.vstack(rows_x)
        return t, X, np.concatenate(rows_s), np.concatenate(rows_p)

    def _jump_at(self, t: float) -> bool:
        return any(e.is_reset and e.t == t for e in self.events)

    def points(self, dt: float | None = None, T: float | None = None) -> np.ndarray:
        return self.sample(dt, T)[1]

    def write_csv(self, path, dt: float | None = None) -> None:
        """Write ``t, x_1..x_n, segment_id, is_post_jump`` with 17 significant digits."""
        t, X, seg, post = self.sample(dt)
        n = X.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"x_{i + 1}" for i in range(n)] + ["segment_id", "is_post_jump"])
            for i in range(t.size):
                w.writerow([f"{t[i]:.17g}"] + [f"{v:.17g}" for v in X[i]] + [int(seg[i]), int(post[i])])

    def write_instants_csv(self, path) -> None:
        """Write ``k, t_k, kind`` for all crossings (resets marked ``reset``)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "t_k", "kind"])
            for k, e in enumerate(self.events, start=1):
                kind = ("reset" if e.is_reset else "crossing") + f"/{e.kind.value}"
                w.writerow([k, f"{e.t:.17g}", kind])


def simulate(system: ResetSystem, x0, opts: SimOptions | None = None) -> Trajectory:
    """
    Simulate the reset system from ``x0`` over ``[0, opts.t_max]``.

    The run ends early with ``DEADLOCK`` when the state lies in ``F_RU`` but
    its orbit leaves ``F_R`` immediately (the next reset instant is an
    infimum that is not attained), and with ``EVENT_BUDGET_EXHAUSTED`` after
    ``max_events`` resets.
    """
    opts = SimOptions() if opts is None else opts
    sys = system
    x = np.asarray(x0, dtype=float).ravel().copy()
    if x.shape != (sys.n,):
        raise ValueError(f"x0 must have {sys.n} entries, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 contains non-finite entries")
    ropts = opts.root_options(sys)
    vt = opts.value_tol
    events: list[Event] = []
    segments: list[Segment] = []
    t = 0.0
    n_resets = 0
    status, detail, dl_time, stop = Status.COMPLETED, "", None, None

    if sys.in_H_C(x, vt):
        post = sys.reset(x) if sys.in_M(x, vt) else x.copy()
        if np.linalg.norm(post) <= vt * np.linalg.norm(x):
            post = np.zeros_like(post)
        kind = _kind_at(sys, x, opts)
        events.append(Event(0.0, x.copy(), post, kind, sys.in_M(x, vt)))
        n_resets += int(sys.in_M(x, vt))
        x = post

    while True:
        if n_resets >= opts.max_events:
            status = Status.EVENT_BUDGET_EXHAUSTED
            gaps = np.diff([e.t for e in events if e.is_reset][-20:])
            detail = f"{n_resets} resets before t={t:.6g}"
            if gaps.size > 3 and np.all(np.diff(gaps) < 0):
                detail += "; gaps are shrinking, possible Zeno behaviour"
            segments.append(Segment(t, t, x))
            break
        remaining = opts.t_max - t
        if sys.in_unobservable(x, vt):
            # output vanishes identically along the orbit
            if stop is None:
                stop = t
            if np.linalg.norm(x) > 0 and sys.leaves_F_R(x, vt):
                status = Status.DEADLOCK
                dl_time = t
                detail = "state in F_RU whose orbit leaves F_R: next reset instant not attained"
                segments.append(Segment(t, t, x))
                break
            segments.append(Segment(t, opts.t_max, x))
            break
        root = first_zero(sys.A, sys.C, x, remaining, ropts) if remaining > 0 else Root(None, RootKind.NONE)
        if root.t is None:
            segments.append(Segment(t, opts.t_max, x))
            break
        dt = root.t
        pre = sys.flow(x, dt)
        is_reset = sys.in_M(pre, vt)
        post = sys.reset(pre) if is_reset else pre
        if np.linalg.norm(post) <= vt * np.linalg.norm(pre):
            # jump to the origin up to rounding
            post = np.zeros_like(post)
        segments.append(Segment(t, t + dt, x))
        t = t + dt
        events.append(Event(t, pre, post, root.kind, bool(is_reset)))
        n_resets += int(is_reset)
        x = post

    return Trajectory(sys, np.asarray(x0, dtype=float).ravel(), opts.t_max, segments, events,
                      status, detail, dl_time, stop)


def _kind_at(sys: ResetSystem, x: np.ndarray, opts: SimOptions) -> RootKind:
    d = abs(float(sys.c @ sys.A @ x))
    scale = np.linalg.norm(sys.c) * max(np.linalg.norm(sys.A, 2), 1e-300) * np.linalg.norm(x)
    return RootKind.TANGENTIAL if d <= opts.deriv_tol * scale else RootKind.TRANSVERSAL


def reset_instants(system: ResetSystem, x0, opts: SimOptions | None = None):
    """
    Reset instants from ``x0`` up to ``opts.t_max``.

    Returns
    -------
    times : ndarray
    status : Status
    """
    tr = simulate(system, x0, opts)
    return tr.reset_times, tr.status


def crossing_instants(system: ResetSystem, x0, opts: SimOptions | None = None) -> np.ndarray:
    """
    Crossing instants of ``N(C)``, ending once the state after a crossing
    lies in ``M_RU`` (from then on the output vanishes identically).
    """
    tr = simulate(system, x0, opts)
    return tr.crossing_times


def in_hemisphere(x, tol: float = 0.0) -> bool:
    """
    Membership in the half sphere reached by the hyperspherical angles with
    the last angle in ``[0, pi)``: the last nonzero coordinate must be
    positive when it is one of the last two, any sign otherwise.
    """
    x = np.asarray(x, dtype=float)
    nz = np.flatnonzero(np.abs(x) > tol * max(np.linalg.norm(x), 1e-300))
    if nz.size == 0:
        return False
    j = nz[-1]
    n = x.size
    if j >= n - 2 and n >= 2:
        return bool(x[j] > 0)
    return True


def tau_of_state(system: ResetSystem, x, opts: SimOptions | None = None, horizon: float = 50.0) -> float:
    """
    Time to the next reset from an after-reset direction ``x``.

    ``x`` is normalized and, outside the half sphere, replaced by ``-x``
    (both give the same instant). Returns ``inf`` when no zero of the output
    occurs in ``(0, horizon]`` and ``nan`` when the output vanishes
    identically.
    """
    opts = SimOptions() if opts is None else opts
    x = np.asarray(x, dtype=float)
    nx = np.linalg.norm(x)
    if nx == 0:
        raise ValueError("x must be nonzero")
    x = x / nx
    if not in_hemisphere(x):
        x = -x
    ropts = opts.root_options(system)
    t = 0.0
    while True:
        r = first_zero(system.A, system.C, x, horizon - t, ropts)
        if r.kind is RootKind.IDENTICALLY_ZERO:
            return float("nan")
        if r.t is None:
            return float("inf")
        pre = system.flow(x, r.t)
        if system.in_M(pre, opts.value_tol):
            return t + r.t
        # crossing through F_R without reset: keep looking
        t += r.t
        x = pre / np.linalg.norm(pre)


def first_entry_after_reset_set(system: ResetSystem, x0, horizon: float, opts: SimOptions | None = None) -> float | None:
    """
    First ``t > 0`` with ``exp(A t) x0`` in ``M_R``.

    The reset coordinates must vanish together; the search minimizes their
    norm along a dense grid and polishes each candidate.
    """
    opts = SimOptions() if opts is None else opts
    sys = system
    x0 = np.asarray(x0, dtype=float)
    if sys.n_r == 1:
        # single reset coordinate: successive zeros of that coordinate
        e = np.zeros((1, sys.n))
        e[0, -1] = 1.0
        ropts = opts.root_options()
        t, x = 0.0, x0
        while t < horizon:
            r = first_zero(sys.A, e, x, horizon - t, ropts)
            if r.t is None:
                return None
            t += r.t
            x = sys.flow(x, r.t)
            if sys.in_M_R(x, 1e-6):
                return t
        return None

    h = opts.sample_step or min(0.01, 0.1 / max(1.0, np.max(np.abs(np.linalg.eigvals(sys.A)))))
    ts = np.arange(h, horizon + h / 2, h)
    Phi = sla.expm(sys.A * h)
    P = sys.I_minus_AR

    def f(t):
        x = sys.flow(x0, t)
        return np.linalg.norm(P @ x) / max(np.linalg.norm(x), 1e-300)

    x = x0.copy()
    vals = np.empty(ts.size)
    for i in range(ts.size):
        x = Phi @ x
        vals[i] = np.linalg.norm(P @ x) / max(np.linalg.norm(x), 1e-300)
    for i in range(1, ts.size - 1):
        if vals[i] <= vals[i - 1] and vals[i] <= vals[i + 1]:
            res = minimize_scalar(f, bounds=(ts[i - 1], ts[i + 1]), method="bounded",
                                  options={"xatol": opts.time_tol})
            t = float(res.x)
            if res.fun <= 1e-6 and sys.in_M_R(sys.flow(x0, t), 1e-6):
                return t
    return None
