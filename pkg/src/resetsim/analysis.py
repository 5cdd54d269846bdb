"""
Continuity analysis: Hausdorff distances between sampled trajectories,
perturbation probes, the tangential set and its backward reachable set,
polytope enclosures, and measurement-noise experiments.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import fsolve, linprog
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .model import ClosedLoop, CompensatorClass, Exosystem, ModelError, ResetSystem, assemble_closed_loop
from .numerics import NumericalError, Subspace, null_space
from .simulate import SimOptions, Status, Trajectory, simulate

__all__ = [
    "AnalysisError",
    "NotSupported",
    "hausdorff",
    "directed_hausdorff",
    "sphere_directions",
    "ProbeRow",
    "ProbeResult",
    "continuous_dependence_probe",
    "TangentialSet",
    "tangential_set",
    "relaxed_condition_51",
    "solve_tangential_initial_state",
    "ReachPolytopes",
    "backward_reach_polytopes",
    "check_D_membership",
    "backward_orbit",
    "sinusoid_noise",
    "extend_with_noise",
    "NoiseRow",
    "NoiseResult",
    "noise_sensitivity_experiment",
    "CrossingCheck",
    "crossing_regularity",
]

log = logging.getLogger(__name__)


class AnalysisError(NumericalError):
    """Raised when an analysis precondition fails."""


class NotSupported(AnalysisError):
    """Raised for inputs outside the supported scope of an analysis."""


# ---------------------------------------------------------------------------
# Hausdorff distance


def _as_points(P) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        P = P.reshape(1, -1)
    if P.ndim != 2 or P.shape[0] == 0:
        raise AnalysisError("point sets must be non-empty 2-D arrays")
    if not np.all(np.isfinite(P)):
        raise AnalysisError("point sets contain non-finite entries")
    return P


def directed_hausdorff(P, Q, method: str = "kdtree", chunk: int = 2048) -> float:
    """
    ``sup_{p in P} min_{q in Q} |p - q|``.

    ``method="brute"`` scans all pairs in chunks; ``method="kdtree"`` prunes
    with a k-d tree and returns the same value.
    """
    P, Q = _as_points(P), _as_points(Q)
    if P.shape[1] != Q.shape[1]:
        raise AnalysisError("point sets live in different dimensions")
    if method == "kdtree":
        # duplicates degrade the tree and do not change the distance
        d, _ = cKDTree(np.unique(Q, axis=0)).query(np.unique(P, axis=0), k=1)
        return float(np.max(d))
    if method != "brute":
        raise ValueError(f"unknown method {method!r}")
    best = 0.0
    qq = np.einsum("ij,ij->i", Q, Q)
    for i in range(0, P.shape[0], chunk):
        Pc = P[i : i + chunk]
        d2 = np.einsum("ij,ij->i", Pc, Pc)[:, None] + qq[None, :] - 2.0 * Pc @ Q.T
        # exact distance for the nearest candidate, avoiding cancellation
        j = np.argmin(d2, axis=1)
        dmin = np.linalg.norm(Pc - Q[j], axis=1)
        best = max(best, float(np.max(dmin)))
    return best


def hausdorff(P, Q, method: str = "kdtree") -> float:
    """Symmetric Hausdorff distance between two finite point sets."""
    return max(directed_hausdorff(P, Q, method), directed_hausdorff(Q, P, method))


# ---------------------------------------------------------------------------
# Continuous dependence probe


def sphere_directions(n: int, count: int) -> np.ndarray:
    """
    Deterministic, roughly uniform unit directions in R^n.

    Uses equally spaced angles for ``n = 2``, the generalized spiral for
    ``n = 3`` and a Halton sequence pushed through the normal quantile
    function otherwise.
    """
    if n < 1 or count < 1:
        raise ValueError("need n >= 1 and count >= 1")
    if n == 1:
        return np.array([[1.0], [-1.0]])[: max(count, 1)]
    if n == 2:
        a = 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(a), np.sin(a)])
    if n == 3:
        k = np.arange(1, count + 1)
        h = -1 + 2 * (k - 1) / max(count - 1, 1)
        theta = np.arccos(np.clip(h, -1, 1))
        phi = np.zeros(count)
        for i in range(1, count):
            if i == count - 1:
                phi[i] = 0.0
            else:
                phi[i] = (phi[i - 1] + 3.6 / np.sqrt(count * (1 - h[i] ** 2))) % (2 * np.pi)
        return np.column_stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    from scipy.special import ndtri

    u = qmc.Halton(d=n, scramble=False).random(count + 1)[1:]
    z = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


@dataclass
class ProbeRow:
    delta: float
    worst_dH: float
    direction: np.ndarray
    disc_bound: float


@dataclass
class ProbeResult:
    x0: np.ndarray
    T: float
    rows: list[ProbeRow]
    x0_in_M: bool

    @property
    def consistent_with_continuity(self) -> bool:
        """
        True when the worst distance shrinks with ``delta``, i.e. it is
        within a factor 10 of ``delta`` plus the sampling error at the
        smallest perturbation.
        """
        r = min(self.rows, key=lambda r: r.delta)
        return r.worst_dH <= 10.0 * r.delta + 2.0 * r.disc_bound

    def as_dict(self) -> dict:
        return {
            "x0": self.x0.tolist(),
            "T": self.T,
            "x0_in_M": self.x0_in_M,
            "consistent_with_continuity": self.consistent_with_continuity,
            "rows": [
                {
                    "delta": r.delta,
                    "worst_dH": r.worst_dH,
                    "direction": r.direction.tolist(),
                    "disc_bound": r.disc_bound,
                }
                for r in self.rows
            ],
        }


def _disc_bound(system: ResetSystem, X: np.ndarray, dt: float) -> float:
    return float(np.linalg.norm(system.A, 2) * np.max(np.linalg.norm(X, axis=1)) * dt)


def continuous_dependence_probe(
    system: ResetSystem,
    x0,
    T: float,
    deltas=(1e-2, 1e-3, 1e-4),
    n_dirs: int = 32,
    opts: SimOptions | None = None,
) -> ProbeResult:
    """
    Worst Hausdorff distance between the trajectory on ``[0, T]`` from ``x0``
    and those from ``x0 + delta d`` over deterministic unit directions ``d``.

    ``T`` must not coincide with a reset instant of the nominal trajectory.
    """
    opts = SimOptions() if opts is None else opts
    x0 = np.asarray(x0, dtype=float).ravel()
    opts = opts.with_(t_max=T)
    dt = opts.output_sample_dt
    nominal = simulate(system, x0, opts)
    tr = nominal.reset_times
    if tr.size and np.min(np.abs(tr - T)) <= max(opts.time_tol, 1e-12) and T > 0:
        raise AnalysisError("T coincides with a reset instant of the nominal trajectory")
    X0 = nominal.points(dt, T)
    dirs = sphere_directions(x0.size, n_dirs)
    rows = []
    for delta in deltas:
        worst, wdir, bound = -1.0, dirs[0], _disc_bound(system, X0, dt)
        for d in dirs:
            tr_p = simulate(system, x0 + delta * d, opts)
            Xp = tr_p.points(dt, T)
            dh = hausdorff(X0, Xp)
            if dh > worst:
                worst, wdir = dh, d
            bound = max(bound, _disc_bound(system, Xp, dt))
        rows.append(ProbeRow(float(delta), worst, np.asarray(wdir), bound))
    return ProbeResult(x0, float(T), rows, bool(system.in_M(x0)))


# ---------------------------------------------------------------------------
# Tangential set and backward reach


@dataclass
class TangentialSet:
    """
    States in ``N(C)`` where ``C A x = 0`` too, outside ``M_RU``.

    ``carrier`` is ``N([C; CA])``; the set is the carrier minus ``M_RU``.
    """

    carrier: Subspace
    M_RU: Subspace

    @property
    def empty(self) -> bool:
        return self.M_RU.contains_subspace(self.carrier, 1e3 * self.carrier.tol)

    def contains(self, x, tol: float | None = None) -> bool:
        x = np.asarray(x, dtype=float)
        if np.linalg.norm(x) == 0:
            return False
        return self.carrier.contains(x, tol) and not self.M_RU.contains(x, tol)


def tangential_set(system: ResetSystem) -> TangentialSet:
    C = system.C
    carrier = null_space(np.vstack([C, C @ system.A]) / max(1.0, np.linalg.norm(system.A, 2)), system.tol)
    return TangentialSet(carrier, system.F_RU)


def relaxed_condition_51(system: ResetSystem) -> bool:
    """True iff ``N(C) cap N(CA) = {0}``, i.e. every crossing is transversal."""
    return tangential_set(system).carrier.dim == 0


def solve_tangential_initial_state(system: ResetSystem, x0_guess, free_index: int, t_guess: float):
    """
    Adjust coordinate ``free_index`` of ``x0_guess`` and a time ``t`` so that
    ``C x(t) = 0`` and ``C A x(t) = 0`` with ``x(t) = exp(A t) x0``.

    Returns
    -------
    x0 : ndarray
    t : float
    x_t : ndarray
        The state at the tangential crossing.
    """
    A, c = system.A, system.c
    ca = c @ A
    base = np.asarray(x0_guess, dtype=float).copy()

    def F(p):
        x = base.copy()
        x[free_index] = p[0]
        xt = sla.expm(A * p[1]) @ x
        return [c @ xt, ca @ xt]

    sol, info, ier, msg = fsolve(F, [base[free_index], t_guess], full_output=True, xtol=1e-14)
    if ier != 1:
        raise AnalysisError(f"tangential solve did not converge: {msg}")
    x = base.copy()
    x[free_index] = sol[0]
    return x, float(sol[1]), sla.expm(A * sol[1]) @ x


@dataclass
class ReachPolytopes:
    """
    Polyhedral cones ``P = {x : n_i . x <= 0}`` and ``P_hat = {x : n_i . x >= 0}``
    enclosing the union of lines through the backward orbit of the tangential
    direction. ``normals`` are unit vectors.
    """

    normals: np.ndarray
    thetas: np.ndarray
    phis: np.ndarray
    axis: np.ndarray
    horizon: float
    tol: float = 1e-9

    @property
    def N(self) -> int:
        return self.normals.shape[0]

    def in_P(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.normals @ x <= self.tol * np.linalg.norm(x)))

    def in_P_hat(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.normals @ x >= -self.tol * np.linalg.norm(x)))

    def contains(self, x) -> bool:
        """Membership in ``P cup P_hat``."""
        return self.in_P(x) or self.in_P_hat(x)

    def halfspaces(self) -> dict:
        return {
            "P": [{"normal": n.tolist(), "offset": 0.0} for n in self.normals],
            "P_hat": [{"normal": (-n).tolist(), "offset": 0.0} for n in self.normals],
        }

    def disjoint_from(self, V: Subspace) -> bool:
        """
        True if neither cone meets the subspace ``V`` outside the origin.

        Solved as linear programs over the coordinates of ``V``.
        """
        if V.dim == 0:
            return True
        G = self.normals @ V.basis
        k = V.dim
        for sgn in (1.0, -1.0):
            A_ub = sgn * G
            b_ub = np.zeros(G.shape[0])
            for j in range(k):
                for s in (1.0, -1.0):
                    cvec = np.zeros(k)
                    cvec[j] = -s
                    res = linprog(cvec, A_ub=A_ub, b_ub=b_ub, bounds=[(-1, 1)] * k, method="highs")
                    if res.status == 0 and -res.fun > 1e-9:
                        return False
        return True


def _frame(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal pair completing ``v``; coordinate axes are kept when ``v`` is one."""
    k = np.flatnonzero(np.abs(v) > 1e-12)
    if k.size == 1:
        others = [i for i in range(3) if i != k[0]]
        return np.eye(3)[others[0]], np.eye(3)[others[1]]
    B = null_space(v.reshape(1, -1)).basis
    return B[:, 0], B[:, 1]


def _orbit_directions(A: np.ndarray, v: np.ndarray, horizon: float, dt: float) -> np.ndarray:
    Phi = sla.expm(-A * dt)
    m = int(np.ceil(horizon / dt))
    D = np.empty((m + 1, v.size))
    d = v / np.linalg.norm(v)
    D[0] = d
    for k in range(1, m + 1):
        d = Phi @ d
        d /= np.linalg.norm(d)
        D[k] = d
    return D


def backward_reach_polytopes(
    system: ResetSystem,
    N: int = 64,
    horizon: float | None = None,
    dt: float = 1e-3,
    margin: float = 1e-4,
    max_horizon: float = 640.0,
) -> ReachPolytopes:
    """
    Enclose ``B = union_{t >= 0} span(exp(-A t) v)`` for a one-dimensional
    tangential set ``span(v)`` in R^3 by two polyhedral cones.

    Normal ``i`` is ``sin(phi_i) u1 + cos(phi_i) u2 + cos(theta_i) v`` with
    ``phi_i = 2 pi i / N`` and ``theta_i`` the largest angle in
    ``[0, pi/2]`` (found by bisection) keeping ``n_i . exp(-A t) v`` strictly
    positive on the orbit. The horizon doubles until the orbit direction
    settles.

    Raises
    ------
    NotSupported
        Outside R^3 or when the tangential set is not a single line.
    AnalysisError
        When no admissible ``theta_i`` exists.
    """
    if system.n != 3:
        raise NotSupported(f"polytope enclosure is implemented for n = 3, got n = {system.n}")
    ts = tangential_set(system)
    if ts.empty:
        raise NotSupported("tangential set is empty; nothing to enclose")
    if ts.carrier.dim != 1:
        raise NotSupported(f"tangential carrier has dimension {ts.carrier.dim}, expected 1")
    v = ts.carrier.basis[:, 0].copy()
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    A = system.A
    H = 10.0 if horizon is None else float(horizon)
    while True:
        D = _orbit_directions(A, v, H, dt)
        settled = np.linalg.norm(D[-1] - D[len(D) // 2]) <= 1e-9
        if horizon is not None or settled or H >= max_horizon:
            break
        H *= 2
    if horizon is None and not settled:
        log.warning("orbit direction has not settled by t = %g", H)
    # the limit direction is kept in the admissible set as a proxy for t > H
    u1, u2 = _frame(v)
    a1, a2, b = D @ u1, D @ u2, D @ v
    phis = 2 * np.pi * np.arange(1, N + 1) / N
    normals, thetas = [], []
    for phi in phis:
        base = np.sin(phi) * a1 + np.cos(phi) * a2

        def ok(theta):
            n = np.sin(phi) * u1 + np.cos(phi) * u2 + np.cos(theta) * v
            return np.min(base + np.cos(theta) * b) >= margin * np.linalg.norm(n)

        if not ok(0.0):
            raise AnalysisError(f"no admissible halfspace at phi = {phi:.6g}")
        lo, hi = 0.0, np.pi / 2
        if ok(hi):
            lo = hi
        else:
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if ok(mid):
                    lo = mid
                else:
                    hi = mid
        n = np.sin(phi) * u1 + np.cos(phi) * u2 + np.cos(lo) * v
        normals.append(n / np.linalg.norm(n))
        thetas.append(lo)
    return ReachPolytopes(np.array(normals), np.array(thetas), phis, v, H)


def backward_orbit(system: ResetSystem, v, ts) -> np.ndarray:
    """Points ``exp(-A t) v`` for the given times."""
    return np.array([sla.expm(-system.A * t) @ np.asarray(v, dtype=float) for t in ts])


def check_D_membership(system: ResetSystem, x0, reach: ReachPolytopes | None = None) -> bool:
    """
    Sufficient test that ``x0`` belongs to the continuity domain.

    True when ``x0`` is not in ``M`` and either every crossing is transversal,
    the tangential set is empty, or ``x0`` lies outside a polytope enclosure
    of the backward reachable set that is disjoint from ``M_R``.
    """
    x0 = np.asarray(x0, dtype=float)
    if system.in_M(x0):
        return False
    ts = tangential_set(system)
    if ts.carrier.dim == 0 or ts.empty:
        return True
    if reach is None:
        raise AnalysisError("tangential set is non-empty; a polytope enclosure is required")
    if reach.contains(x0):
        return False
    M_R = system.F_R if system.output_ignores_reset_states else system.H_R
    return reach.disjoint_from(M_R)


# ---------------------------------------------------------------------------
# Measurement noise


def sinusoid_noise(freqs, magnitude: float = 0.0, direction=None) -> Exosystem:
    """
    Sum of sinusoids as an exosystem: one rotation block per frequency, the
    output picking the first state of each block. The initial state is
    ``magnitude`` times a unit direction (equal weights by default).
    """
    freqs = np.asarray(freqs, dtype=float).ravel()
    if freqs.size == 0 or np.any(freqs <= 0):
        raise ValueError("frequencies must be positive")
    blocks = [np.array([[0.0, w], [-w, 0.0]]) for w in freqs]
    A = sla.block_diag(*blocks)
    C = np.tile([1.0, 0.0], freqs.size).reshape(1, -1)
    n = 2 * freqs.size
    d = np.ones(n) if direction is None else np.asarray(direction, dtype=float).ravel()
    d = d / np.linalg.norm(d)
    return Exosystem(A, C, magnitude * d)


def extend_with_noise(cl: ClosedLoop, noise: Exosystem) -> ClosedLoop:
    """
    Closed loop with measurement noise ``n = C_n w_n`` entering the error as
    ``e = r - y - n``. The noise states sit between the exosystems and the
    plant so the resetting states stay last; ``blocks`` locates them.
    """
    if cl.noise is not None:
        raise ModelError("closed loop already carries a noise exosystem")
    return assemble_closed_loop(cl.plant, cl.compensator, cl.reference, cl.disturbance, noise, cl.system.tol)


def base_indices(ext: ClosedLoop) -> np.ndarray:
    """Indices of the noise-free states inside an extended state vector."""
    idx = np.arange(ext.n)
    noise = ext.blocks["n"]
    return np.concatenate([idx[: noise.start], idx[noise.stop :]])


@dataclass
class NoiseRow:
    magnitude: float
    d_H: float
    first_reset: float | None
    n_resets: int
    status: str


@dataclass
class NoiseResult:
    T: float
    nominal_first_reset: float | None
    rows: list[NoiseRow] = field(default_factory=list)

    @property
    def decreasing(self) -> bool:
        d = [r.d_H for r in sorted(self.rows, key=lambda r: -r.magnitude)]
        return all(b < a for a, b in zip(d, d[1:]))

    def as_dict(self) -> dict:
        return {
            "T": self.T,
            "nominal_first_reset": self.nominal_first_reset,
            "strictly_decreasing": self.decreasing,
            "rows": [r.__dict__ for r in self.rows],
        }


def noise_sensitivity_experiment(
    cl: ClosedLoop,
    x0,
    noise: Exosystem,
    magnitudes=(0.2, 0.1, 0.05, 0.025),
    T: float = 5.0,
    opts: SimOptions | None = None,
) -> NoiseResult:
    """
    Hausdorff distance on ``[0, T]`` between the noise-free trajectory and the
    noisy ones (projected on the noise-free states) for each noise magnitude.

    The compensator must be full or right reset and ``x0`` must lie in the
    continuity domain (tangential set empty or crossings transversal).
    """
    opts = (SimOptions() if opts is None else opts).with_(t_max=T)
    if cl.compensator_class not in (CompensatorClass.FULL, CompensatorClass.RIGHT):
        raise AnalysisError("noise experiment requires a full or right reset compensator")
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != cl.n:
        raise AnalysisError(f"x0 must have {cl.n} entries")
    if not check_D_membership(cl.system, x0, None if tangential_set(cl.system).empty else _reach_or_none(cl.system)):
        raise AnalysisError("x0 is not certified to lie in the continuity domain")
    ext = extend_with_noise(cl, noise)
    keep = base_indices(ext)
    nb = ext.blocks["n"]
    dt = opts.output_sample_dt
    # noise direction: the exosystem's own initial state, else equal weights
    n_hat = noise.w0 if np.any(noise.w0) else np.ones(noise.n)
    n_hat = n_hat / np.linalg.norm(n_hat)

    def run(mag):
        z0 = np.zeros(ext.n)
        z0[keep] = x0
        z0[nb] = mag * n_hat
        return simulate(ext.system, z0, opts)

    nominal = simulate(cl.system, x0, opts)
    X0 = nominal.points(dt, T)
    first0 = float(nominal.reset_times[0]) if nominal.reset_times.size else None
    result = NoiseResult(T, first0)
    for mag in magnitudes:
        tr = run(float(mag))
        Xz = tr.points(dt, T)[:, keep]
        rt = tr.reset_times
        result.rows.append(
            NoiseRow(float(mag), hausdorff(X0, Xz), float(rt[0]) if rt.size else None, int(rt.size), tr.status.value)
        )
    return result


def _reach_or_none(system: ResetSystem):
    try:
        return backward_reach_polytopes(system)
    except NotSupported:
        return None


# ---------------------------------------------------------------------------
# Crossing regularity


@dataclass
class CrossingCheck:
    t: float
    slope: float
    regular: bool


def crossing_regularity(traj: Trajectory, deriv_tol: float = 1e-7) -> list[CrossingCheck]:
    """
    Transversality of each crossing: ``|C A x(t_k)| > deriv_tol * |x(t_k)|``
    with ``x(t_k)`` the state reaching the crossing.
    """
    sys = traj.system
    ca = sys.c @ sys.A
    out = []
    for e in traj.events:
        slope = abs(float(ca @ e.pre))
        out.append(CrossingCheck(e.t, slope, slope > deriv_tol * np.linalg.norm(e.pre)))
    return out
