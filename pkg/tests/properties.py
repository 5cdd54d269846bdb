"""Property checks shared by the unit and acceptance suites."""
import numpy as np

from resetsim.analysis import hausdorff
from resetsim.simulate import SimOptions, Status, simulate
from resetsim.wellposed import Verdict, check_well_posed


def hausdorff_axiom_failures(P, Q, R, tol=1e-12) -> list[str]:
    out = []
    dPQ, dQP = hausdorff(P, Q), hausdorff(Q, P)
    if hausdorff(P, P) != 0.0:
        out.append("identity")
    if dPQ < 0:
        out.append("non-negativity")
    if dPQ != dQP:
        out.append("symmetry")
    if dPQ > hausdorff(P, R) + hausdorff(R, Q) + tol:
        out.append("triangle")
    return out


def disjointness_violations(system, rng, queries=1000) -> int:
    """
    Count states found in both ``M`` and ``M_R``. Half of the queries are
    jump images of random points of ``H_C`` (which lie in ``M_R``), half
    are random points of ``H_C`` itself.
    """
    H = system.H_C.basis
    bad = 0
    for k in range(queries):
        x = H @ rng.standard_normal(H.shape[1])
        y = system.reset(x) if k % 2 == 0 and system.in_M(x) else x
        if system.in_M(y) and system.in_M_R(y):
            bad += 1
    return bad


def trajectory_invariant_failures(system, x0, opts=None, scale=3.0) -> list[str]:
    """
    Jump map, reset-subsequence and positive-scaling invariants of one
    simulation.
    """
    opts = SimOptions(t_max=5.0, max_events=200) if opts is None else opts
    x0 = np.asarray(x0, dtype=float)
    tr = simulate(system, x0, opts)
    out = []
    for e in tr.resets:
        if not np.allclose(e.post, system.reset(e.pre), atol=1e-12 * max(1.0, np.linalg.norm(e.pre))):
            if np.linalg.norm(e.post) != 0.0:
                out.append(f"jump map at t={e.t}")
    cross = tr.crossing_times
    for t in tr.reset_times:
        if not np.any(cross == t):
            out.append(f"reset {t} is not a crossing")
    if np.any(np.diff(tr.reset_times) <= 0):
        out.append("reset instants not increasing")
    ts = simulate(system, scale * x0, opts)
    if ts.status is not tr.status or ts.reset_times.size != tr.reset_times.size:
        out.append("scaling changes the event pattern")
    elif not np.allclose(ts.reset_times, tr.reset_times, atol=1e-9):
        out.append("scaling moves reset instants")
    else:
        for t in np.linspace(0.0, tr.t_end, 7):
            if not np.allclose(ts.state_at(t), scale * tr.state_at(t), rtol=1e-8, atol=1e-10):
                out.append(f"scaling breaks x(t) at t={t}")
                break
    return out


def oracle_disagreement(system, rng, trials=5, t_max=5.0) -> str | None:
    """
    Compare the invariance verdict with simulation: an ill-posed system must
    deadlock from the direction that leaves ``F_RU``; a well-posed one must
    never deadlock, also from ``F_RU`` itself.
    """
    rep = check_well_posed(system)
    opts = SimOptions(t_max=t_max, max_events=500)
    F = system.F_RU
    if rep.verdict is Verdict.ILL_POSED:
        B = F.basis
        leak = [np.linalg.norm(system.A @ B[:, j] - F.project(system.A @ B[:, j])) for j in range(F.dim)]
        v = B[:, int(np.argmax(leak))]
        tr = simulate(system, v, opts)
        if tr.status is not Status.DEADLOCK:
            return f"ill-posed but no deadlock from {v}"
        return None
    starts = [rng.standard_normal(system.n) for _ in range(trials)]
    starts += [F.basis[:, j] for j in range(F.dim)]
    for x0 in starts:
        if simulate(system, x0, opts).status is Status.DEADLOCK:
            return f"well-posed but deadlock from {x0}"
    return None
