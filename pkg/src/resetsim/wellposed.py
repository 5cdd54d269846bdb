"""
Well-posedness of reset instants.

Three routes are provided:

* the invariance test, valid for any reset system: reset instants are
  well-posed iff ``F_RU = N([I - A_R; O])`` is A-invariant;
* the structural test for closed loops with full or right reset
  compensators, which are always well-posed;
* the cancellation count for left reset compensators in series form
  ``G1 -> R2``: well-posed iff ``n_rho >= s`` where ``s`` sums the
  pole/zero cancellations ``d_lambda = min(q + r, m)``.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .model import ClosedLoop, CompensatorClass, ModelError, ResetSystem, SeriesForm
from .numerics import (
    NumericalError,
    Subspace,
    algebraic_multiplicity,
    eigen_structure,
    is_invariant,
    null_space,
    span,
)

__all__ = [
    "Verdict",
    "Method",
    "WellPosednessReport",
    "CancellationEntry",
    "CancellationTable",
    "AppendixDiagnostics",
    "compute_F_RU",
    "check_well_posed",
    "check_structural",
    "cancellation_analysis",
    "appendix_diagnostics",
    "series_form",
    "is_controllable",
    "is_observable",
    "zero_multiplicity",
]

log = logging.getLogger(__name__)


class Verdict(str, enum.Enum):
    WELL_POSED = "WellPosed"
    ILL_POSED = "IllPosed"
    UNDETERMINED = "Undetermined"


class Method(str, enum.Enum):
    INVARIANCE = "Invariance"
    STRUCTURAL_FULL = "Structural(Full)"
    STRUCTURAL_RIGHT = "Structural(Right)"
    CANCELLATION = "Cancellation"


@dataclass
class CancellationEntry:
    """Cancellation count at one eigenvalue ``lam`` of the compensator."""

    lam: complex
    q: int
    r: int
    m: int

    @property
    def d(self) -> int:
        return min(self.q + self.r, self.m)

    def as_dict(self) -> dict:
        return {
            "lambda": [self.lam.real, self.lam.imag],
            "q": self.q,
            "r": self.r,
            "m": self.m,
            "d": self.d,
        }


@dataclass
class CancellationTable:
    entries: list[CancellationEntry]
    n_rho: int
    dim_unobservable: int

    @property
    def s(self) -> int:
        return sum(e.d for e in self.entries)

    @property
    def well_posed(self) -> bool:
        return self.n_rho >= self.s

    def entry(self, lam: complex, tol: float = 1e-6) -> CancellationEntry | None:
        for e in self.entries:
            if abs(e.lam - lam) <= tol:
                return e
        return None

    def as_dict(self) -> dict:
        return {
            "entries": [e.as_dict() for e in self.entries],
            "s": self.s,
            "n_rho": self.n_rho,
            "dim_unobservable": self.dim_unobservable,
        }


@dataclass
class WellPosednessReport:
    """
    Verdict on reset-instant well-posedness.

    On an invariance failure ``witness`` holds ``A v`` for the worst direction
    ``v`` in ``F_RU`` and ``residual`` its component outside ``F_RU``.
    """

    verdict: Verdict
    method: Method
    F_RU: Subspace | None = None
    witness: np.ndarray | None = None
    residual: np.ndarray | None = None
    table: CancellationTable | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def well_posed(self) -> bool:
        return self.verdict is Verdict.WELL_POSED

    def as_dict(self) -> dict:
        out = {"verdict": self.verdict.value, "method": self.method.value, "notes": list(self.notes)}
        if self.F_RU is not None:
            out["F_RU_dim"] = self.F_RU.dim
            out["F_RU_basis"] = self.F_RU.basis.tolist()
        if self.witness is not None:
            out["witness"] = np.real_if_close(self.witness).tolist()
            out["residual"] = np.real_if_close(self.residual).tolist()
        if self.table is not None:
            out["cancellation"] = self.table.as_dict()
        return out


def compute_F_RU(system: ResetSystem) -> Subspace:
    """``F_RU = N([I - A_R; O_base])``, the reset-free unobservable states."""
    return system.F_RU


def check_well_posed(system: ResetSystem) -> WellPosednessReport:
    """Invariance test: well-posed iff ``A F_RU`` is contained in ``F_RU``."""
    F = compute_F_RU(system)
    ok, w, res = is_invariant(system.A, F, system.tol)
    if ok:
        return WellPosednessReport(Verdict.WELL_POSED, Method.INVARIANCE, F)
    return WellPosednessReport(Verdict.ILL_POSED, Method.INVARIANCE, F, w, res)


def check_structural(cl: ClosedLoop) -> WellPosednessReport:
    """Full and right reset compensators give well-posed reset instants."""
    cls = cl.compensator_class
    if cls is CompensatorClass.FULL:
        return WellPosednessReport(Verdict.WELL_POSED, Method.STRUCTURAL_FULL, cl.system.F_RU)
    if cls is CompensatorClass.RIGHT:
        return WellPosednessReport(Verdict.WELL_POSED, Method.STRUCTURAL_RIGHT, cl.system.F_RU)
    return WellPosednessReport(
        Verdict.UNDETERMINED,
        Method.STRUCTURAL_FULL,
        notes=[f"compensator class is {cls.value}; the structural test does not apply"],
    )


def _pbh_rank_ok(A: np.ndarray, M: np.ndarray, tol: float, side: str) -> bool:
    n = A.shape[0]
    if n == 0:
        return True
    for e in eigen_structure(A, tol=tol):
        lam = e.value
        P = lam * np.eye(n) - A
        stack = np.hstack([P, M]) if side == "right" else np.vstack([P, M])
        s = np.linalg.svd(stack, compute_uv=False)
        scale = max(1.0, np.linalg.norm(A, 2), np.linalg.norm(M, 2))
        if np.sum(s > tol * scale * 10) < n:
            return False
    return True


def is_controllable(A, B, tol: float = 1e-9) -> bool:
    """PBH controllability test."""
    return _pbh_rank_ok(np.atleast_2d(A), np.asarray(B, dtype=float).reshape(np.shape(A)[0], -1), tol, "right")


def is_observable(A, C, tol: float = 1e-9) -> bool:
    """PBH observability test."""
    return _pbh_rank_ok(np.atleast_2d(A), np.asarray(C, dtype=float).reshape(-1, np.shape(A)[0]), tol, "below")


def zero_multiplicity(A, B, C, lam: complex, tol: float = 1e-9) -> int:
    """
    Multiplicity of ``lam`` as an invariant zero of ``(A, B, C)``.

    Uses the system pencil ``L(s) = [[sI - A, -B], [C, 0]] = L0 + (s - lam) L1``;
    the kernel dimension of the ``k``-block Toeplitz matrix built from ``L0``
    and ``L1`` equals ``sum_i min(k, kappa_i)`` over the partial
    multiplicities, so it saturates at the algebraic multiplicity.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, 1)
    C = np.asarray(C, dtype=float).reshape(1, n)
    dtype = complex if complex(lam).imag != 0 else float
    lam = complex(lam) if dtype is complex else complex(lam).real
    L0 = np.zeros((n + 1, n + 1), dtype=dtype)
    L0[:n, :n] = lam * np.eye(n) - A
    L0[:n, n:] = -B
    L0[n:, :n] = C
    L1 = np.zeros_like(L0)
    L1[:n, :n] = np.eye(n)
    # a singular pencil has no well-defined zero multiplicity
    s_probe = 0.5772156649 + 1.2345j
    Lp = L0 + (s_probe - lam) * L1
    sv = np.linalg.svd(Lp, compute_uv=False)
    if sv[-1] <= tol * sv[0]:
        raise NumericalError("system pencil is singular; the transfer function vanishes")
    m = n + 1
    prev = 0
    for k in range(1, n + 2):
        T = np.zeros((k * m, k * m), dtype=dtype)
        for i in range(k):
            T[i * m : (i + 1) * m, i * m : (i + 1) * m] = L0
            if i > 0:
                T[i * m : (i + 1) * m, (i - 1) * m : i * m] = L1
        d = null_space(T, tol).dim
        if d == prev:
            return d
        prev = d
    return prev


def series_form(cl: ClosedLoop, tol: float | None = None) -> SeriesForm:
    """
    Series decomposition ``G1 -> R2`` of a left reset compensator.

    Uses the recorded decomposition when present, otherwise factors the
    coupling block ``A_r21 = B_r2 C_r1`` (which must have rank one).
    """
    tol = cl.system.tol if tol is None else tol
    R = cl.compensator
    if R.series is not None:
        return R.series
    nb = R.n_bar
    scale = max(1.0, np.linalg.norm(R.A), np.linalg.norm(R.B), np.linalg.norm(R.C))
    if np.linalg.norm(R.A12) > tol * scale:
        raise ModelError("compensator is not left reset: A_r12 is nonzero")
    if np.linalg.norm(R.B[nb:]) > tol * scale or np.linalg.norm(R.C[:, :nb]) > tol * scale:
        raise ModelError("compensator is not in series form: B_r2 input or C_r1 output path present")
    U, s, Vh = np.linalg.svd(R.A21)
    if s.size == 0 or s[0] <= tol * scale or (s.size > 1 and s[1] > tol * s[0]):
        raise ModelError("coupling block A_r21 must have rank one for a series decomposition")
    B2 = U[:, :1] * s[0]
    C1 = Vh[:1]
    return SeriesForm(R.A11, R.B[:nb], C1, R.A22, B2, R.C[:, nb:])


def cancellation_analysis(cl: ClosedLoop, check_minimality: bool = True) -> CancellationTable:
    """
    Count unobservable modes created by pole/zero cancellations.

    For each eigenvalue ``lam`` of the compensator parts, ``q`` and ``r`` are
    its multiplicities as a pole of ``G1`` and ``R2`` and ``m`` its
    multiplicity as a zero of the generalized plant ``(A_bar, B_bar, C_bar)``;
    ``d = min(q + r, m)``. Only eigenvalues with ``d > 0`` are listed.

    Raises
    ------
    ModelError
        If the compensator is not left reset in series form, or a minimality
        precondition fails.
    """
    sys = cl.system
    tol = sys.tol
    if cl.compensator_class is not CompensatorClass.LEFT:
        raise ModelError(
            f"cancellation analysis needs a left reset compensator, got {cl.compensator_class.value}"
        )
    if abs(cl.compensator.D) > 0:
        raise ModelError("cancellation analysis assumes D_r = 0")
    sf = series_form(cl, tol)
    A_bar, B_bar, C_bar = cl.generalized_plant()
    if check_minimality:
        checks = [
            ("G1", is_controllable(sf.A1, sf.B1) and is_observable(sf.A1, sf.C1)),
            ("R2", is_controllable(sf.A2, sf.B2) and is_observable(sf.A2, sf.C2)),
            ("plant", is_controllable(cl.plant.A, cl.plant.B) and is_observable(cl.plant.A, cl.plant.C)),
            ("generalized plant observability", is_observable(A_bar, C_bar)),
        ]
        bad = [name for name, ok in checks if not ok]
        if bad:
            raise ModelError("minimality precondition fails for: " + ", ".join(bad))

    candidates = eigen_structure(sla.block_diag(sf.A1, sf.A2), tol=tol)
    entries = []
    for e in candidates:
        lam = e.value
        q = algebraic_multiplicity(sf.A1, lam, tol)
        r = algebraic_multiplicity(sf.A2, lam, tol)
        m = zero_multiplicity(A_bar, B_bar, C_bar, lam, tol)
        ent = CancellationEntry(lam, q, r, m)
        if ent.d > 0:
            entries.append(ent)
    table = CancellationTable(entries, cl.compensator.n_rho, sys.unobservable.dim)
    if table.s != table.dim_unobservable:
        log.warning(
            "cancellation count s=%d differs from dim N(O)=%d", table.s, table.dim_unobservable
        )
    return table


@dataclass
class AppendixDiagnostics:
    """
    Structural facts for left reset loops.

    Attributes
    ----------
    single_chain : bool
        Every unobservable mode has geometric multiplicity one.
    invariance_iff_trivial : bool
        ``F_RU`` is A-invariant exactly when it is ``{0}``.
    direct_sum : bool
        ``N(O)`` equals the direct sum of ``N((lam I - A)^d_lam)``.
    """

    single_chain: bool
    invariance_iff_trivial: bool
    direct_sum: bool
    unobservable_modes: list[complex] = field(default_factory=list)

    @property
    def all_true(self) -> bool:
        return self.single_chain and self.invariance_iff_trivial and self.direct_sum


def appendix_diagnostics(cl: ClosedLoop, table: CancellationTable | None = None) -> AppendixDiagnostics:
    """Check the three structural facts on a left reset closed loop."""
    sys = cl.system
    tol = sys.tol
    table = cancellation_analysis(cl) if table is None else table
    A, C = sys.A, sys.C
    n = sys.n
    scale = max(1.0, np.linalg.norm(A, 2))
    modes = []
    single = True
    for e in eigen_structure(A, tol=tol):
        P = np.vstack([e.value * np.eye(n) - A, C])
        if null_space(P / scale, tol).dim > 0:
            modes.append(e.value)
            if e.geometric != 1:
                single = False

    ok_inv, _, _ = is_invariant(A, sys.F_RU, tol)
    inv_iff = ok_inv == (sys.F_RU.dim == 0)

    vecs = []
    for ent in table.entries:
        lam = ent.lam
        M = (lam * np.eye(n) - A) / scale
        if lam.imag == 0:
            M = M.real
        Md = np.linalg.matrix_power(M, ent.d)
        K = null_space(Md, tol).basis
        vecs.append(K.real)
        if np.iscomplexobj(K):
            vecs.append(K.imag)
    U = sys.unobservable
    if vecs:
        S = span(np.hstack(vecs), tol)
    else:
        S = Subspace(np.zeros((n, 0)), tol)
    direct = S.equals(U, 1e3 * tol) and sum(
        null_space(
            np.linalg.matrix_power(((ent.lam * np.eye(n) - A) / scale), ent.d), tol
        ).dim
        for ent in table.entries
    ) == U.dim
    return AppendixDiagnostics(single, inv_iff, direct, modes)
