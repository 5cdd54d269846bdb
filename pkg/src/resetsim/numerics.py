"""
Numerical kernels: matrix exponential, rank-revealing null spaces,
observability, invariance tests, eigenstructure and root location for
Bohl functions ``g(t) = C exp(A t) x``.

All rank decisions are made by singular value thresholding relative to the
largest singular value, with a single tolerance that defaults to
``DEFAULT_TOL`` (overridable through the ``RESETSIM_TOL`` environment
variable).
"""
from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

__all__ = [
    "DEFAULT_TOL",
    "NumericalError",
    "Subspace",
    "EigenCluster",
    "RootKind",
    "Root",
    "RootOptions",
    "default_tol",
    "as_matrix",
    "as_row",
    "expm",
    "null_space",
    "span",
    "observability_matrix",
    "unobservable_subspace",
    "is_invariant",
    "eigen_structure",
    "algebraic_multiplicity",
    "default_sample_step",
    "first_zero",
]

DEFAULT_TOL = 1e-9


class NumericalError(ValueError):
    """Raised when an input is malformed or a numerical decision is ambiguous."""


def default_tol() -> float:
    """Rank tolerance, taken from ``RESETSIM_TOL`` when set."""
    env = os.environ.get("RESETSIM_TOL")
    if env:
        try:
            val = float(env)
        except ValueError as exc:
            raise NumericalError(f"RESETSIM_TOL is not a number: {env!r}") from exc
        if not (np.isfinite(val) and val > 0):
            raise NumericalError(f"RESETSIM_TOL must be positive, got {env!r}")
        return val
    return DEFAULT_TOL


def as_matrix(M, name: str = "matrix", square: bool = False) -> np.ndarray:
    """Convert ``M`` to a finite 2-D float array."""
    arr = np.asarray(M, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise NumericalError(f"{name}: expected a 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{name}: contains non-finite entries")
    if square and arr.shape[0] != arr.shape[1]:
        raise NumericalError(f"{name}: must be square, got shape {arr.shape}")
    return arr


def as_row(C, n: int | None = None, name: str = "C") -> np.ndarray:
    """Convert ``C`` to a 1 x n row vector."""
    arr = as_matrix(C, name)
    if arr.shape[0] != 1:
        if arr.shape[1] == 1:
            arr = arr.T
        else:
            raise NumericalError(f"{name}: expected a single row, got shape {arr.shape}")
    if n is not None and arr.shape[1] != n:
        raise NumericalError(f"{name}: expected {n} columns, got {arr.shape[1]}")
    return arr


def expm(A, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``exp(A t)`` (Pade scaling and squaring)."""
    A = as_matrix(A, "A", square=True)
    if not np.isfinite(t):
        raise NumericalError(f"t must be finite, got {t}")
    return sla.expm(A * t)


def _orth(V: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of the column span of ``V``."""
    if V.size == 0:
        return np.zeros((V.shape[0], 0), dtype=V.dtype)
    U, s, _ = np.linalg.svd(V, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((V.shape[0], 0), dtype=V.dtype)
    r = int(np.sum(s > tol * s[0]))
    return U[:, :r]


@dataclass(frozen=True, eq=False)
class Subspace:
    """
    Linear subspace of R^n (or C^n) held as an orthonormal basis.

    Parameters
    ----------
    basis : ndarray, shape (n, k)
        Orthonormal columns.
    tol : float
        Relative tolerance used for membership and rank decisions.
    """

    basis: np.ndarray
    tol: float = DEFAULT_TOL

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def is_zero(self) -> bool:
        return self.dim == 0

    def project(self, x) -> np.ndarray:
        x = np.asarray(x)
        B = self.basis
        return B @ (B.conj().T @ x)

    def distance(self, x) -> float:
        """Euclidean distance from ``x`` to the subspace."""
        x = np.asarray(x)
        return float(np.linalg.norm(x - self.project(x)))

    def contains(self, x, tol: float | None = None) -> bool:
        """Relative membership test ``dist(x, V) <= tol * |x|``."""
        tol = self.tol if tol is None else tol
        x = np.asarray(x)
        nx = float(np.linalg.norm(x))
        if nx == 0.0:
            return True
        return self.distance(x) <= tol * nx

    def contains_subspace(self, other: "Subspace", tol: float | None = None) -> bool:
        tol = self.tol if tol is None else tol
        if other.dim == 0:
            return True
        R = other.basis - self.project(other.basis)
        return float(np.linalg.norm(R, 2)) <= tol

    def equals(self, other: "Subspace", tol: float | None = None) -> bool:
        return (
            self.dim == other.dim
            and self.contains_subspace(other, tol)
            and other.contains_subspace(self, tol)
        )

    def intersect(self, other: "Subspace") -> "Subspace":
        """Intersection of two subspaces."""
        if self.dim == 0 or other.dim == 0:
            return Subspace(np.zeros((self.ambient_dim, 0)), self.tol)
        M = np.hstack([self.basis, -other.basis])
        K = null_space(M, self.tol).basis
        V = self.basis @ K[: self.dim]
        return Subspace(_orth(V, self.tol), self.tol)

    def sum(self, other: "Subspace") -> "Subspace":
        return Subspace(_orth(np.hstack([self.basis, other.basis]), self.tol), self.tol)

    def image(self, M) -> "Subspace":
        """Image ``M V`` of the subspace under a linear map."""
        M = np.asarray(M)
        return Subspace(_orth(M @ self.basis, self.tol), self.tol)

    def angle_to(self, x) -> float:
        """Angle in radians between vector ``x`` and the subspace."""
        x = np.asarray(x, dtype=float)
        nx = np.linalg.norm(x)
        if nx == 0 or self.dim == 0:
            return np.pi / 2
        c = np.linalg.norm(self.basis.conj().T @ x) / nx
        return float(np.arccos(min(1.0, c)))

    def largest_angle(self, other: "Subspace") -> float:
        """Largest principal angle between two subspaces of equal dimension."""
        if self.dim != other.dim:
            return np.pi / 2
        if self.dim == 0:
            return 0.0
        return float(np.max(sla.subspace_angles(self.basis, other.basis)))

    def __repr__(self) -> str:
        return f"Subspace(dim={self.dim}, ambient_dim={self.ambient_dim})"


def span(vectors, tol: float | None = None, n: int | None = None) -> Subspace:
    """Subspace spanned by the columns of ``vectors``."""
    tol = default_tol() if tol is None else tol
    V = np.asarray(vectors, dtype=complex if np.iscomplexobj(vectors) else float)
    if V.ndim == 1:
        V = V.reshape(-1, 1)
    if V.size == 0:
        if n is None:
            raise NumericalError("span of an empty set needs the ambient dimension")
        return Subspace(np.zeros((n, 0)), tol)
    return Subspace(_orth(V, tol), tol)


def null_space(M, tol: float | None = None) -> Subspace:
    """
    Right null space of ``M`` with rank decided at ``tol * sigma_max``.

    A zero matrix (or one with no rows) has the whole space as kernel.
    """
    tol = default_tol() if tol is None else tol
    M = np.asarray(M)
    if M.ndim != 2:
        raise NumericalError(f"null_space expects a 2-D array, got shape {M.shape}")
    n = M.shape[1]
    if not np.all(np.isfinite(M)):
        raise NumericalError("null_space: matrix contains non-finite entries")
    if M.shape[0] == 0 or not np.any(M):
        dtype = M.dtype if np.iscomplexobj(M) else float
        return Subspace(np.eye(n, dtype=dtype), tol)
    _, s, Vh = np.linalg.svd(M, full_matrices=True)
    r = int(np.sum(s > tol * s[0]))
    return Subspace(Vh[r:].conj().T, tol)


def observability_matrix(A, C) -> np.ndarray:
    """Stack ``[C; CA; ...; CA^(n-1)]``."""
    A = as_matrix(A, "A", square=True)
    C = as_matrix(C, "C")
    n = A.shape[0]
    if C.shape[1] != n:
        raise NumericalError(f"C has {C.shape[1]} columns, A is {n}x{n}")
    rows = [C]
    for _ in range(n - 1):
        rows.append(rows[-1] @ A)
    return np.vstack(rows)


def unobservable_subspace(A, C, tol: float | None = None) -> Subspace:
    """
    Largest A-invariant subspace inside ``N(C)``.

    Computed by the recursion ``V <- N(C) cap A^{-1} V`` on orthonormal bases,
    which avoids the powers of ``A`` in the observability matrix and stays
    reliable for larger state dimensions.
    """
    tol = default_tol() if tol is None else tol
    A = as_matrix(A, "A", square=True)
    C = as_matrix(C, "C")
    n = A.shape[0]
    nA = np.linalg.norm(A, 2)
    As = A / nA if nA > 0 else A
    Cs = C / max(np.linalg.norm(C, 2), np.finfo(float).tiny)
    V = null_space(Cs, tol)
    while V.dim > 0:
        P = np.eye(n) - V.basis @ V.basis.T
        W = null_space(np.vstack([Cs, P @ As]), tol)
        if W.dim >= V.dim:
            break
        V = W
    return V


def is_invariant(A, V: Subspace, tol: float | None = None):
    """
    Test ``A V subset V``.

    Returns
    -------
    ok : bool
    witness : ndarray or None
        On failure, the image ``A v`` of the worst basis direction ``v``.
    residual : ndarray or None
        Component of the witness orthogonal to ``V``.
    """
    tol = V.tol if tol is None else tol
    A = as_matrix(A, "A", square=True)
    if V.dim == 0:
        return True, None, None
    nA = max(np.linalg.norm(A, 2), np.finfo(float).tiny)
    AV = A @ V.basis
    R = AV - V.project(AV)
    # worst direction inside V, in the 2-norm sense
    U, s, Vh = np.linalg.svd(R, full_matrices=False)
    if s[0] <= tol * nA:
        return True, None, None
    v = V.basis @ Vh[0].conj()
    w = A @ v
    res = w - V.project(w)
    return False, w, res


@dataclass(frozen=True)
class EigenCluster:
    """Eigenvalue cluster with its multiplicities and Jordan chain spaces."""

    value: complex
    algebraic: int
    geometric: int
    chain_dims: tuple[int, ...]

    @property
    def is_real(self) -> bool:
        return self.value.imag == 0.0


def algebraic_multiplicity(A, lam: complex, tol: float | None = None) -> int:
    """``dim N((lam I - A)^n)`` with rank decided at ``tol``."""
    tol = default_tol() if tol is None else tol
    A = np.asarray(A)
    n = A.shape[0]
    if n == 0:
        return 0
    return _chain_dims(A, lam, n, tol)[-1]


def _chain_dims(A: np.ndarray, lam: complex, kmax: int, tol: float) -> list[int]:
    """Dimensions of ``N((lam I - A)^k)`` for ``k = 1..`` until saturation."""
    n = A.shape[0]
    scale = max(1.0, np.linalg.norm(A, 2), abs(lam))
    M = (lam * np.eye(n) - A) / scale
    if lam.imag == 0:
        M = M.real
    P = np.eye(n, dtype=M.dtype)
    dims: list[int] = []
    for _ in range(kmax):
        P = M @ P
        d = null_space(P, tol).dim
        if dims and d == dims[-1]:
            break
        dims.append(d)
    return dims


def eigen_structure(A, cluster_tol: float = 1e-7, tol: float | None = None) -> list[EigenCluster]:
    """
    Eigenvalue clusters with algebraic and geometric multiplicities.

    Eigenvalues of a defective matrix split by roughly ``eps^(1/k)``
    for a Jordan block of size ``k``; clusters are grown with that allowance
    and their mean (which is accurate) is then certified by the dimensions
    of ``N((lam I - A)^k)``.

    Raises
    ------
    NumericalError
        If the cluster sizes cannot be certified by the rank test.
    """
    tol = default_tol() if tol is None else tol
    A = as_matrix(A, "A", square=True)
    n = A.shape[0]
    if n == 0:
        return []
    ev = np.linalg.eigvals(A)
    scale = max(1.0, np.linalg.norm(A, 2))
    eps = np.finfo(float).eps

    # agglomerative single linkage; merging radius grows with cluster size
    clusters = [[complex(v)] for v in ev]
    merged = True
    while merged and len(clusters) > 1:
        merged = False
        best = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                m = len(clusters[i]) + len(clusters[j])
                radius = max(cluster_tol, 10.0 * eps ** (1.0 / m)) * scale
                d = min(abs(a - b) for a in clusters[i] for b in clusters[j])
                if d <= radius and (best is None or d < best[0]):
                    best = (d, i, j)
        if best is not None:
            _, i, j = best
            clusters[i] = clusters[i] + clusters[j]
            del clusters[j]
            merged = True

    out: list[EigenCluster] = []
    for c in clusters:
        lam = complex(np.mean(c))
        if abs(lam.imag) <= cluster_tol * scale:
            lam = complex(lam.real, 0.0)
        dims = _chain_dims(A, lam, len(c) + 1, tol)
        if dims[-1] != len(c):
            raise NumericalError(
                f"ambiguous eigenvalue cluster near {lam:.6g}: "
                f"{len(c)} computed eigenvalues, kernel dimension {dims[-1]}"
            )
        out.append(EigenCluster(lam, len(c), dims[0], tuple(dims)))
    out.sort(key=lambda e: (e.value.real, e.value.imag))
    # enforce exact conjugate pairing for real matrices
    for k, e in enumerate(out):
        if e.value.imag > 0:
            for j, f in enumerate(out):
                if f.value.imag < 0 and abs(f.value - e.value.conjugate()) <= 1e3 * cluster_tol * scale:
                    out[j] = EigenCluster(e.value.conjugate(), f.algebraic, f.geometric, f.chain_dims)
                    break
    return out


class RootKind(str, enum.Enum):
    """Classification of a zero of ``g(t) = C exp(A t) x``."""

    TRANSVERSAL = "transversal"
    TANGENTIAL = "tangential"
    NONE = "none"
    IDENTICALLY_ZERO = "identically_zero"


@dataclass(frozen=True)
class Root:
    t: float | None
    kind: RootKind


@dataclass(frozen=True)
class RootOptions:
    """
    Tolerances for root location.

    Attributes
    ----------
    value_tol : float
        ``|g| <= value_tol * |C| * |x(t)|`` counts as zero.
    deriv_tol : float
        ``|g'| <= deriv_tol * |C| * |A| * |x(t)|`` flags a tangential zero.
    time_tol : float
        Absolute bracketing tolerance of the bisection.
    sample_step : float or None
        Dense sampling step; ``None`` selects ``default_sample_step(A)``.
    """

    value_tol: float = 1e-9
    deriv_tol: float = 1e-7
    time_tol: float = 1e-13
    sample_step: float | None = None
    chunk: int = 64
    unobservable: Subspace | None = field(default=None, compare=False)


def default_sample_step(A) -> float:
    """``min(0.01, 0.1 / max(1, spectral radius))``."""
    rho = float(np.max(np.abs(np.linalg.eigvals(A)))) if np.size(A) else 0.0
    return min(0.01, 0.1 / max(1.0, rho))


class _Bohl:
    """Evaluator of ``g(t) = C exp(A t) x0`` and its time derivative."""

    def __init__(self, A: np.ndarray, C: np.ndarray, x0: np.ndarray):
        self.A = A
        self.c = C.ravel()
        self.ca = self.c @ A
        self.x0 = x0
        self.nc = float(np.linalg.norm(self.c))
        self.na = float(np.linalg.norm(A, 2))

    def state(self, t: float) -> np.ndarray:
        return sla.expm(self.A * t) @ self.x0

    def g(self, t: float) -> float:
        return float(self.c @ self.state(t))

    def dg(self, t: float) -> float:
        return float(self.ca @ self.state(t))


def _start_sign(A: np.ndarray, c: np.ndarray, x: np.ndarray, deriv_tol: float) -> float:
    """Sign of ``g`` just after a zero at the start, from the first non-negligible derivative."""
    n = A.shape[0]
    na = max(np.linalg.norm(A, 2), np.finfo(float).tiny)
    nx = np.linalg.norm(x)
    scale = np.linalg.norm(c) * nx
    v = x.copy()
    for k in range(1, n + 1):
        v = A @ v
        val = c @ v
        if abs(val) > deriv_tol * scale * na**k:
            return float(np.sign(val))
    return 0.0


def first_zero(A, C, x0, t_max: float, opts: RootOptions | None = None) -> Root:
    """
    First zero of ``g(t) = C exp(A t) x0`` in ``(0, t_max]``.

    A zero at ``t = 0`` itself is excluded. The search samples ``g`` densely,
    brackets sign changes and refines by bisection; local minima of ``|g|``
    are examined to catch even-order (tangential) zeros and pairs of close
    zeros between samples.

    Returns
    -------
    Root
        ``kind`` is ``IDENTICALLY_ZERO`` if ``x0`` lies in the unobservable
        subspace, ``NONE`` if there is no zero in the window.
    """
    opts = RootOptions() if opts is None else opts
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float).reshape(1, -1)
    x0 = np.asarray(x0, dtype=float).ravel()
    if not (np.isfinite(t_max) and t_max > 0):
        return Root(None, RootKind.NONE)
    if np.linalg.norm(x0) == 0.0:
        return Root(None, RootKind.IDENTICALLY_ZERO)
    U = opts.unobservable
    if U is None:
        U = unobservable_subspace(A, C, opts.value_tol)
    if U.contains(x0, opts.value_tol):
        return Root(None, RootKind.IDENTICALLY_ZERO)

    bohl = _Bohl(A, C, x0)
    h = opts.sample_step if opts.sample_step else default_sample_step(A)

    def small(g: float, x: np.ndarray) -> bool:
        return abs(g) <= opts.value_tol * bohl.nc * np.linalg.norm(x)

    def bisect(a: float, b: float) -> float:
        return brentq(bohl.g, a, b, xtol=opts.time_tol, rtol=4 * np.finfo(float).eps, maxiter=500)

    g0 = float(bohl.c @ x0)
    start_zero = small(g0, x0)
    prev_sign = _start_sign(A, bohl.c, x0, opts.deriv_tol) if start_zero else float(np.sign(g0))
    window = [(0.0, 0.0 if start_zero else g0)]
    for t, g, x in _samples(A, bohl.c, x0, h, t_max, opts.chunk):
        if small(g, x):
            return _settle_sample_zero(bohl, window[-1][0], t, min(t + h, t_max), opts)
        sign = float(np.sign(g))
        if prev_sign != 0 and sign != prev_sign:
            a = window[-1][0]
            if a == 0.0 and start_zero:
                a = _inner_point(bohl, 0.0, t, prev_sign)
            if a is not None:
                return _classify(bohl, bisect(a, t), opts)
        prev_sign = sign
        window.append((t, g))
        if len(window) > 3:
            del window[0]
        if len(window) == 3:
            (t1, g1), (t2, g2), (t3, g3) = window
            if not (t1 == 0.0 and start_zero) and abs(g2) < abs(g1) and abs(g2) <= abs(g3):
                r = _examine_minimum(bohl, t1, t3, opts, bisect)
                if r is not None:
                    return r
    return Root(None, RootKind.NONE)


def _samples(A, c, x0, h, t_max, chunk):
    """Yield ``(t, g(t), x(t))`` on the grid ``h, 2h, ...`` ending exactly at ``t_max``."""
    n = A.shape[0]
    m = max(1, int(chunk))
    Phi = sla.expm(A * h)
    pows = np.empty((m, n, n))
    pows[0] = Phi
    for k in range(1, m):
        pows[k] = Phi @ pows[k - 1]
    x_start, t_start = x0, 0.0
    while True:
        X = np.einsum("kij,j->ki", pows, x_start)
        G = X @ c
        for k in range(m):
            t = t_start + h * (k + 1)
            if t >= t_max:
                x = sla.expm(A * t_max) @ x0
                yield float(t_max), float(c @ x), x
                return
            yield t, float(G[k]), X[k]
        x_start, t_start = X[-1], t_start + h * m


def _classify(bohl: _Bohl, t: float, opts: RootOptions) -> Root:
    x = bohl.state(t)
    if abs(float(bohl.ca @ x)) <= opts.deriv_tol * bohl.nc * bohl.na * np.linalg.norm(x):
        return Root(t, RootKind.TANGENTIAL)
    return Root(t, RootKind.TRANSVERSAL)


def _settle_sample_zero(bohl: _Bohl, ta: float, t: float, tb: float, opts: RootOptions) -> Root:
    """Refine a zero that landed on a sample point."""
    r = _classify(bohl, t, opts)
    if r.kind is RootKind.TRANSVERSAL:
        # a couple of Newton steps polish the instant
        for _ in range(3):
            d = bohl.dg(t)
            step = bohl.g(t) / d
            if not np.isfinite(step) or abs(step) > (tb - ta):
                break
            t -= step
        return _classify(bohl, t, opts)
    te = _extremum(bohl, ta, tb, opts.time_tol) if tb > t else None
    if te is not None and te > 0:
        return _classify(bohl, te, opts)
    return r


def _inner_point(bohl: _Bohl, a: float, b: float, sign: float) -> float | None:
    """Point in ``(a, b)`` close to ``a`` where ``g`` has the given sign."""
    w = b - a
    for k in range(1, 60):
        t = a + w * 2.0**-k
        if np.sign(bohl.g(t)) == sign:
            return t
    return None


def _extremum(bohl: _Bohl, a: float, b: float, time_tol: float) -> float | None:
    """Critical point of ``g`` in ``[a, b]`` if ``g'`` changes sign there."""
    da, db = bohl.dg(a), bohl.dg(b)
    if da == 0.0:
        return a
    if db == 0.0:
        return b
    if np.sign(da) == np.sign(db):
        return None
    return brentq(bohl.dg, a, b, xtol=time_tol, rtol=4 * np.finfo(float).eps, maxiter=500)


def _examine_minimum(bohl, t1, t3, opts, bisect) -> Root | None:
    """Inspect a local minimum of ``|g|`` over ``[t1, t3]``."""
    te = _extremum(bohl, t1, t3, opts.time_tol)
    if te is None:
        return None
    ge = bohl.g(te)
    xe = bohl.state(te)
    if abs(ge) <= opts.value_tol * bohl.nc * np.linalg.norm(xe):
        return Root(te, RootKind.TANGENTIAL)
    if np.sign(ge) != np.sign(bohl.g(t1)):
        # two zeros between samples; the first one is bracketed by [t1, te]
        return _classify(bohl, bisect(t1, te), opts)
    return None
