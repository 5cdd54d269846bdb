import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from resetsim import numerics as nm
from resetsim.numerics import RootKind, RootOptions, first_zero, null_space, span


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_default_tol_env(monkeypatch):
    monkeypatch.setenv("RESETSIM_TOL", "1e-6")
    assert nm.default_tol() == 1e-6
    monkeypatch.setenv("RESETSIM_TOL", "nonsense")
    with pytest.raises(nm.NumericalError):
        nm.default_tol()
    monkeypatch.delenv("RESETSIM_TOL")
    assert nm.default_tol() == nm.DEFAULT_TOL


def test_expm_rotation():
    A = np.array([[0.0, -1.0], [1.0, 0.0]])
    E = nm.expm(A, math.pi / 2)
    assert np.allclose(E, [[0, -1], [1, 0]], atol=1e-15)


def test_subspace_basic_ops():
    V = span([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    W = span([0.0, 1.0, 1.0])
    assert V.dim == 2 and V.ambient_dim == 3
    assert V.contains([3.0, -2.0, 0.0]) and not V.contains([0.0, 0.0, 1.0])
    assert V.intersect(W).is_zero
    assert V.sum(W).dim == 3
    assert np.isclose(V.distance([1.0, 1.0, 2.0]), 2.0)
    assert np.isclose(W.angle_to([0.0, 1.0, 0.0]), math.pi / 4)
    X = span([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert X.intersect(V).equals(span([1.0, 1.0, 0.0]))


@settings(max_examples=60, deadline=None)
@given(arrays(float, (4, 6), elements=finite))
def test_null_space_is_annihilated(M):
    N = null_space(M)
    assert N.dim >= 2
    scale = max(1.0, np.linalg.norm(M))
    assert np.linalg.norm(M @ N.basis) <= 1e-8 * scale
    assert np.allclose(N.basis.T @ N.basis, np.eye(N.dim), atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(arrays(float, (5, 5), elements=finite), arrays(float, (5,), elements=finite))
def test_unobservable_matches_observability_matrix(A, c):
    U = nm.unobservable_subspace(A, c)
    # the kernel is unchanged by scaling A or c; normalizing keeps O well scaled
    na, nc = np.max(np.abs(A)), np.max(np.abs(c))
    O = nm.observability_matrix(A / na if na > 0 else A, c / nc if nc > 0 else c)
    # same kernel dimension as the rank oracle on the observability matrix
    s = np.linalg.svd(O, compute_uv=False)
    # compare only where the rank gap is clear of the library tolerance band
    assume(not (s[0] > 0 and np.any((s > 1e-13 * s[0]) & (s < 1e-3 * s[0]))))
    rank = int(np.sum(s > 1e-8 * max(s[0], 1e-300)))
    assert U.dim == 5 - rank
    assert nm.is_invariant(A, U, 1e-6)[0]


def test_unobservable_large_chain_is_stable():
    # a 43-state chain with one decoupled block: powers of A overflow the
    # observability matrix but the subspace iteration stays exact
    n = 43
    A = np.diag(np.full(n - 1, 2.0), -1) - 0.5 * np.eye(n)
    A[-3:, :] = 0.0
    A[-3:, -3:] = [[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, -1.0]]
    c = np.zeros(n)
    c[-4] = 1.0
    U = nm.unobservable_subspace(A, c)
    assert U.dim == 3
    assert U.equals(span(np.eye(n)[:, -3:]))


def test_is_invariant_witness():
    A = np.array([[-1.0, 0.0, 0.0], [0.0, -1.0, -1.0], [0.0, 1.0, -1.0]])
    ok, w, res = nm.is_invariant(A, span([0.0, 1.0, 0.0]))
    assert not ok
    assert nm.span(w).largest_angle(span([0.0, -1.0, 1.0])) < 1e-9
    ok2, _, _ = nm.is_invariant(A, span([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    assert ok2


def test_eigen_structure_jordan_and_conjugates():
    J = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
    (e,) = nm.eigen_structure(J)
    assert (e.algebraic, e.geometric, e.chain_dims) == (3, 1, (1, 2, 3))
    R = np.array([[0.0, 1.0], [-1.0, 0.0]])
    vals = sorted(complex(e.value).imag for e in nm.eigen_structure(R))
    assert np.allclose(vals, [-1.0, 1.0])
    assert nm.algebraic_multiplicity(J, 0.0) == 3
    assert nm.algebraic_multiplicity(J, 1.0) == 0
    D = np.diag([2.0, 2.0, 5.0])
    e2 = [e for e in nm.eigen_structure(D) if abs(e.value - 2) < 1e-9][0]
    assert (e2.algebraic, e2.geometric) == (2, 2)


# ---------------------------------------------------------------------------
# first_zero


ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])


def test_first_zero_transversal():
    r = first_zero(ROT, [1.0, 0.0], [0.0, 1.0], 10.0)
    assert r.kind is RootKind.TRANSVERSAL
    assert abs(r.t - math.pi) < 1e-12


def test_first_zero_none_within_horizon():
    r = first_zero(ROT, [1.0, 0.0], [0.0, 1.0], 3.0)
    assert r.t is None and r.kind is RootKind.NONE


def test_first_zero_tangential_double_root():
    # y = 1 - cos t has a double zero at 2 pi
    A = np.zeros((3, 3))
    A[1:, 1:] = ROT
    c = [1.0, -1.0, 0.0]
    r = first_zero(A, c, [1.0, 1.0, 0.0], 8.0)
    assert r.kind is RootKind.TANGENTIAL
    assert abs(r.t - 2 * math.pi) < 1e-6


def test_first_zero_identically_zero():
    A = np.diag([-1.0, -2.0])
    r = first_zero(A, [1.0, 0.0], [0.0, 1.0], 5.0, RootOptions(unobservable=nm.unobservable_subspace(A, [1.0, 0.0])))
    assert r.kind is RootKind.IDENTICALLY_ZERO


def test_first_zero_close_pair():
    # two zeros 2e-4 apart, well below the sampling step
    A = np.zeros((3, 3))
    A[1:, 1:] = ROT
    eps = 1e-4
    # y = sin t - cos eps: zeros at pi/2 -+ eps
    c = [-math.cos(eps), 1.0, 0.0]
    r = first_zero(A, c, [1.0, 0.0, 1.0], 4.0)
    assert r.t is not None and abs(r.t - (math.pi / 2 - eps)) < 1e-9


@settings(max_examples=80, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.0, 2 * math.pi - 1e-3))
def test_first_zero_matches_analytic_phase(w, phase):
    # y = sin(w t + phase): first positive zero at (k pi - phase) / w
    A = np.array([[0.0, w], [-w, 0.0]])
    x0 = [math.sin(phase), math.cos(phase)]
    r = first_zero(A, [1.0, 0.0], x0, 20.0 / w)
    k = math.floor(phase / math.pi) + 1
    t_exact = (k * math.pi - phase) / w
    if t_exact < 1e-9:
        return
    assert r.t is not None
    assert abs(r.t - t_exact) <= 1e-9 * max(1.0, t_exact)
