"""
Reset system data types and closed-loop assembly.

A reset system ``(A, C, n_r)`` flows as ``x' = A x`` and jumps ``x+ = A_R x``
when ``x`` hits the reset set ``M = N(C) minus F_R``, where ``A_R`` zeroes the
last ``n_r`` coordinates and ``F_R = N(C) cap N(I - A_R)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .numerics import (
    NumericalError,
    Subspace,
    as_matrix,
    as_row,
    default_tol,
    null_space,
    observability_matrix,
    unobservable_subspace,
)

__all__ = [
    "ModelError",
    "ResetSystem",
    "Plant",
    "Compensator",
    "Exosystem",
    "SeriesForm",
    "CompensatorClass",
    "ClosedLoop",
    "build_reset_system",
    "assemble_closed_loop",
    "classify_compensator",
]


class ModelError(NumericalError):
    """Raised for dimension mismatches or invalid model data."""


@dataclass(frozen=True, eq=False)
class ResetSystem:
    """
    Reset system ``(A, C, n_r)`` with scalar output.

    The resetting states are the last ``n_r`` coordinates.
    """

    A: np.ndarray
    C: np.ndarray
    n_r: int
    tol: float = field(default_factory=default_tol)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @cached_property
    def A_R(self) -> np.ndarray:
        d = np.ones(self.n)
        if self.n_r:
            d[-self.n_r :] = 0.0
        return np.diag(d)

    @cached_property
    def I_minus_AR(self) -> np.ndarray:
        return np.eye(self.n) - self.A_R

    @cached_property
    def c(self) -> np.ndarray:
        return self.C.ravel()

    @cached_property
    def H_C(self) -> Subspace:
        """Output null space ``N(C)``, the closure of ``M``."""
        return null_space(self.C, self.tol)

    @cached_property
    def H_R(self) -> Subspace:
        return null_space(self.I_minus_AR, self.tol)

    @cached_property
    def F_R(self) -> Subspace:
        return null_space(np.vstack([self.I_minus_AR, self.C]), self.tol)

    @cached_property
    def O_base(self) -> np.ndarray:
        return observability_matrix(self.A, self.C)

    @cached_property
    def unobservable(self) -> Subspace:
        """``N(O)``, the largest A-invariant subspace of ``N(C)``."""
        return unobservable_subspace(self.A, self.C, self.tol)

    @cached_property
    def F_RU(self) -> Subspace:
        """``F_R cap N(O)``, equal to ``N([I - A_R; O])``."""
        return self.H_R.intersect(self.unobservable)

    @cached_property
    def reset_set_empty(self) -> bool:
        """True when ``M`` is empty, i.e. ``N(C)`` is contained in ``H_R``."""
        return self.F_R.dim == self.H_C.dim

    @cached_property
    def output_ignores_reset_states(self) -> bool:
        """``C (I - A_R) = 0``; then ``M_R = F_R``."""
        return bool(np.linalg.norm(self.c @ self.I_minus_AR) <= self.tol * max(np.linalg.norm(self.c), 1.0))

    def _scale(self, x) -> float:
        return max(float(np.linalg.norm(x)), np.finfo(float).tiny)

    def in_H_C(self, x, tol: float | None = None) -> bool:
        tol = self.tol if tol is None else tol
        x = np.asarray(x, dtype=float)
        return abs(self.c @ x) <= tol * np.linalg.norm(self.c) * self._scale(x)

    def in_F_R(self, x, tol: float | None = None) -> bool:
        tol = self.tol if tol is None else tol
        x = np.asarray(x, dtype=float)
        return self.in_H_C(x, tol) and np.linalg.norm(self.I_minus_AR @ x) <= tol * self._scale(x)

    def in_M(self, x, tol: float | None = None) -> bool:
        """Membership in the reset set ``M = N(C) minus F_R``."""
        tol = self.tol if tol is None else tol
        x = np.asarray(x, dtype=float)
        return self.in_H_C(x, tol) and np.linalg.norm(self.I_minus_AR @ x) > tol * self._scale(x)

    def in_M_R(self, x, tol: float | None = None) -> bool:
        """
        Membership in the after-reset set ``M_R = A_R(M)``.

        ``x = A_R y`` with ``y in M`` means ``y = x + u`` with ``u`` nonzero in the
        reset coordinates and ``C y = 0``.
        """
        tol = self.tol if tol is None else tol
        x = np.asarray(x, dtype=float)
        if self.n_r == 0:
            return False
        if np.linalg.norm(self.I_minus_AR @ x) > tol * self._scale(x):
            return False
        c_r = self.c[self.n - self.n_r :]
        if np.linalg.norm(c_r) <= tol * max(np.linalg.norm(self.c), 1.0):
            return self.in_H_C(x, tol)
        if self.n_r >= 2:
            return True
        # single reset state: u = -C x / c_r must be nonzero
        return bool(np.linalg.norm(x) > 0 and not self.in_H_C(x, tol))

    def in_F_RU(self, x, tol: float | None = None) -> bool:
        tol = self.tol if tol is None else tol
        return self.F_RU.contains(x, tol)

    def in_unobservable(self, x, tol: float | None = None) -> bool:
        tol = self.tol if tol is None else tol
        return self.unobservable.contains(x, tol)

    def reset(self, x) -> np.ndarray:
        return self.A_R @ np.asarray(x, dtype=float)

    def flow(self, x, t: float) -> np.ndarray:
        return sla.expm(self.A * t) @ np.asarray(x, dtype=float)

    def leaves_F_R(self, x, tol: float | None = None) -> bool:
        """
        True if the orbit of ``x`` (taken in ``N(O)``) does not stay in ``F_R``.

        Checked through ``(I - A_R) A^k x`` for ``k < n``.
        """
        tol = self.tol if tol is None else tol
        x = np.asarray(x, dtype=float)
        nA = max(np.linalg.norm(self.A, 2), np.finfo(float).tiny)
        v = x / self._scale(x)
        for _ in range(self.n):
            if np.linalg.norm(self.I_minus_AR @ v) > tol:
                return True
            v = self.A @ v / nA
        return False

    def __repr__(self) -> str:
        return f"ResetSystem(n={self.n}, n_r={self.n_r})"


def build_reset_system(A, C, n_r: int, tol: float | None = None) -> ResetSystem:
    """
    Validate data and build a :class:`ResetSystem`.

    Raises
    ------
    ModelError
        On non-square ``A``, wrong ``C`` shape, non-finite entries or
        ``n_r`` outside ``[0, n]``.
    """
    tol = default_tol() if tol is None else tol
    try:
        A = as_matrix(A, "A", square=True)
        n = A.shape[0]
        C = as_row(C, n, "C")
    except NumericalError as exc:
        raise ModelError(str(exc)) from exc
    if n == 0:
        raise ModelError("A must be at least 1x1")
    if int(n_r) != n_r or not 0 <= int(n_r) <= n:
        raise ModelError(f"n_r must be an integer in [0, {n}], got {n_r}")
    if not np.any(C):
        raise ModelError("C must be nonzero")
    return ResetSystem(A.copy(), C.copy(), int(n_r), tol)


def _ss(A, B, C, D=None, name="", n_in=1):
    A = as_matrix(A, f"{name}.A", square=True) if np.size(A) else np.zeros((0, 0))
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, -1) if n else np.zeros((0, n_in))
    C = np.asarray(C, dtype=float).reshape(-1, n) if n else np.zeros((1, 0))
    for nm, M in (("B", B), ("C", C)):
        if not np.all(np.isfinite(M)):
            raise ModelError(f"{name}.{nm}: contains non-finite entries")
    if n and B.shape[1] != 1:
        raise ModelError(f"{name}.B: expected a single column, got shape {B.shape}")
    if C.shape[0] != 1:
        raise ModelError(f"{name}.C: expected a single row, got shape {C.shape}")
    D = float(np.asarray(0.0 if D is None else D, dtype=float).ravel()[0])
    return A, B, C, D


@dataclass(frozen=True, eq=False)
class Plant:
    """Strictly proper SISO plant ``x_p' = A_p x_p + B_p u``, ``y = C_p x_p``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A, B, C, _ = _ss(self.A, self.B, self.C, name="plant")
        if A.shape[0] == 0:
            raise ModelError("plant must have at least one state")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True, eq=False)
class SeriesForm:
    """Left-reset compensator as a base part ``G1`` followed by a reset part ``R2``."""

    A1: np.ndarray
    B1: np.ndarray
    C1: np.ndarray
    A2: np.ndarray
    B2: np.ndarray
    C2: np.ndarray

    def __post_init__(self):
        for nm in ("A1", "B1", "C1", "A2", "B2", "C2"):
            object.__setattr__(self, nm, np.atleast_2d(np.asarray(getattr(self, nm), dtype=float)))
        object.__setattr__(self, "B1", self.B1.reshape(-1, 1))
        object.__setattr__(self, "B2", self.B2.reshape(-1, 1))
        object.__setattr__(self, "C1", self.C1.reshape(1, -1))
        object.__setattr__(self, "C2", self.C2.reshape(1, -1))

    def realization(self):
        """``(A_r, B_r, C_r)`` with the non-reset states first."""
        n1, n2 = self.A1.shape[0], self.A2.shape[0]
        A = np.block([[self.A1, np.zeros((n1, n2))], [self.B2 @ self.C1, self.A2]])
        B = np.vstack([self.B1, np.zeros((n2, 1))])
        C = np.hstack([np.zeros((1, n1)), self.C2])
        return A, B, C


@dataclass(frozen=True, eq=False)
class Compensator:
    """
    SISO reset compensator ``(A_r, B_r, C_r, D_r)``; the last ``n_rho`` states reset.

    ``series`` optionally records a left-reset series decomposition.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float = 0.0
    n_rho: int = 1
    series: SeriesForm | None = None

    def __post_init__(self):
        A, B, C, D = _ss(self.A, self.B, self.C, self.D, name="compensator")
        n = A.shape[0]
        if n == 0:
            raise ModelError("compensator must have at least one state")
        if int(self.n_rho) != self.n_rho or not 1 <= int(self.n_rho) <= n:
            raise ModelError(f"compensator.n_rho must be in [1, {n}], got {self.n_rho}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "n_rho", int(self.n_rho))

    @classmethod
    def from_series(cls, series: SeriesForm, D: float = 0.0) -> "Compensator":
        A, B, C = series.realization()
        return cls(A, B, C, D, series.A2.shape[0], series)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def n_bar(self) -> int:
        """Number of non-reset states."""
        return self.n - self.n_rho

    @property
    def A11(self) -> np.ndarray:
        return self.A[: self.n_bar, : self.n_bar]

    @property
    def A12(self) -> np.ndarray:
        return self.A[: self.n_bar, self.n_bar :]

    @property
    def A21(self) -> np.ndarray:
        return self.A[self.n_bar :, : self.n_bar]

    @property
    def A22(self) -> np.ndarray:
        return self.A[self.n_bar :, self.n_bar :]


@dataclass(frozen=True, eq=False)
class Exosystem:
    """Autonomous signal generator ``w' = A w``, signal ``C w``, initial state ``w0``."""

    A: np.ndarray
    C: np.ndarray
    w0: np.ndarray | None = None

    def __post_init__(self):
        A = as_matrix(self.A, "exosystem.A", square=True)
        n = A.shape[0]
        C = as_row(self.C, n, "exosystem.C")
        w0 = np.zeros(n) if self.w0 is None else np.asarray(self.w0, dtype=float).ravel()
        if w0.shape != (n,):
            raise ModelError(f"exosystem.w0: expected {n} entries, got {w0.size}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "w0", w0)

    @property
    def n(self) -> int:
        return self.A.shape[0]


class CompensatorClass(str, enum.Enum):
    FULL = "full"
    RIGHT = "right"
    LEFT = "left"
    GENERAL = "general"


def classify_compensator(comp: Compensator, tol: float | None = None) -> CompensatorClass:
    """
    Full when every state resets, Right when ``A_r21 = 0``, Left when
    ``A_r12 = 0``. A compensator with both blocks zero is reported as Right.
    """
    tol = default_tol() if tol is None else tol
    if comp.n_rho == comp.n:
        return CompensatorClass.FULL
    scale = max(1.0, np.linalg.norm(comp.A))
    if np.linalg.norm(comp.A21) <= tol * scale:
        return CompensatorClass.RIGHT
    if np.linalg.norm(comp.A12) <= tol * scale:
        return CompensatorClass.LEFT
    return CompensatorClass.GENERAL


@dataclass(frozen=True, eq=False)
class ClosedLoop:
    """
    Closed-loop reset control system.

    The state is ordered ``(w1, w2, n, x_p, x_r)``: reference, disturbance and
    noise exosystem states (each possibly absent), plant, compensator.
    ``blocks`` maps those names to index slices.
    """

    system: ResetSystem
    plant: Plant
    compensator: Compensator
    reference: Exosystem | None
    disturbance: Exosystem | None
    noise: Exosystem | None
    blocks: dict
    compensator_class: CompensatorClass

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def n_exo(self) -> int:
        """Number of states preceding the plant."""
        return self.blocks["xp"].start

    def initial_state(self, xp0=None, xr0=None) -> np.ndarray:
        """Closed-loop initial state from the exosystem ``w0`` and optional plant/compensator states."""
        x = np.zeros(self.n)
        for name, exo in (("w1", self.reference), ("w2", self.disturbance), ("n", self.noise)):
            if exo is not None:
                x[self.blocks[name]] = exo.w0
        if xp0 is not None:
            x[self.blocks["xp"]] = xp0
        if xr0 is not None:
            x[self.blocks["xr"]] = xr0
        return x

    def generalized_plant(self):
        """
        ``(A_bar, B_bar, C_bar)`` on the states ``(w1, w2, [n,] x_p)`` as seen by the
        compensator: ``x_bar' = A_bar x_bar + B_bar v``, ``e = C_bar x_bar``.
        """
        m = self.n_exo + self.plant.n
        A = self.system.A
        B_bar = np.zeros((m, 1))
        B_bar[self.blocks["xp"], 0] = self.plant.B.ravel()
        C_bar = self.system.C[:, :m].copy()
        # remove the feedthrough loop v = D_r e closed inside A
        A_bar = A[:m, :m] - self.compensator.D * (B_bar @ C_bar)
        return A_bar, B_bar, C_bar


def assemble_closed_loop(
    plant: Plant,
    compensator: Compensator,
    reference: Exosystem | None = None,
    disturbance: Exosystem | None = None,
    noise: Exosystem | None = None,
    tol: float | None = None,
) -> ClosedLoop:
    """
    Interconnect plant, compensator and exosystems.

    The error is ``e = r - y - n`` with ``r = C1 w1``, ``y = C_p x_p`` and
    ``n = C_n w_n``; the plant input is ``u = v + d`` with ``d = C2 w2`` and
    ``v = C_r x_r + D_r e``. Absent exosystems contribute no states.
    """
    tol = default_tol() if tol is None else tol
    P, R = plant, compensator
    sizes = [
        ("w1", reference.n if reference is not None else 0),
        ("w2", disturbance.n if disturbance is not None else 0),
        ("n", noise.n if noise is not None else 0),
        ("xp", P.n),
        ("xr", R.n),
    ]
    blocks, k = {}, 0
    for name, size in sizes:
        blocks[name] = slice(k, k + size)
        k += size
    N = k
    A = np.zeros((N, N))
    C = np.zeros((1, N))
    xp, xr = blocks["xp"], blocks["xr"]
    Bp, Br = P.B, R.B
    # error row: e = C1 w1 - Cn n - Cp xp
    if reference is not None:
        A[blocks["w1"], blocks["w1"]] = reference.A
        C[:, blocks["w1"]] = reference.C
    if noise is not None:
        A[blocks["n"], blocks["n"]] = noise.A
        C[:, blocks["n"]] = -noise.C
    C[:, xp] = -P.C
    if disturbance is not None:
        A[blocks["w2"], blocks["w2"]] = disturbance.A
        A[xp, blocks["w2"]] = Bp @ disturbance.C
    # plant: xp' = Ap xp + Bp (Cr xr + Dr e + d)
    A[xp, :] += R.D * (Bp @ C)
    A[xp, xp] += P.A
    A[xp, xr] += Bp @ R.C
    # compensator: xr' = Ar xr + Br e
    A[xr, :] += Br @ C
    A[xr, xr] += R.A
    system = ResetSystem(A, C, R.n_rho, tol)
    return ClosedLoop(
        system, P, R, reference, disturbance, noise, blocks, classify_compensator(R, tol)
    )
