import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from properties import disjointness_violations
from resetsim.analysis import base_indices, extend_with_noise, sinusoid_noise
from resetsim.fixtures import DEFAULT_NOISE_FREQS, fixture_names
from resetsim.model import (
    Compensator,
    CompensatorClass,
    Exosystem,
    ModelError,
    Plant,
    SeriesForm,
    assemble_closed_loop,
    build_reset_system,
    classify_compensator,
)
from resetsim.numerics import NumericalError, span


def test_sets_second_order():
    s = build_reset_system([[0.0, -1.0], [1.0, 0.0]], [1.0, -1.0], 1)
    assert np.allclose(s.A_R, np.diag([1.0, 0.0]))
    assert s.H_C.equals(span([1.0, 1.0]))
    assert s.H_R.equals(span([1.0, 0.0]))
    assert s.F_R.is_zero
    assert s.in_M([2.0, 2.0]) and not s.in_M([0.0, 0.0]) and not s.in_M([1.0, 0.0])
    assert s.in_M_R([3.0, 0.0]) and not s.in_M_R([0.0, 0.0])
    assert np.allclose(s.reset([2.0, 2.0]), [2.0, 0.0])


def test_sets_third_order_with_fixed_points():
    A = [[-1.0, 0.0, 0.0], [0.0, -1.0, -1.0], [0.0, 1.0, -1.0]]
    s = build_reset_system(A, [1.0, 0.0, 0.0], 1)
    assert s.F_R.equals(span([0.0, 1.0, 0.0]))
    assert s.unobservable.equals(span([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    assert s.F_RU.equals(span([0.0, 1.0, 0.0]))
    assert not s.in_M([0.0, 1.0, 0.0])
    assert s.in_M([0.0, 1.0, 1.0])
    assert s.in_M_R([0.0, 5.0, 0.0])


@pytest.mark.parametrize(
    "A, C, n_r, field",
    [
        ([[1.0, 2.0]], [1.0, 0.0], 1, "A"),
        ([[0.0, 1.0], [1.0, 0.0]], [1.0, 0.0, 0.0], 1, "C"),
        ([[0.0, 1.0], [1.0, 0.0]], [1.0, 0.0], 3, "n_r"),
        ([[0.0, np.nan], [1.0, 0.0]], [1.0, 0.0], 1, "A"),
    ],
)
def test_build_reset_system_validation(A, C, n_r, field):
    with pytest.raises(ModelError, match=field):
        build_reset_system(A, C, n_r)


def test_zero_output_is_rejected():
    with pytest.raises(ModelError):
        build_reset_system([[0.0, 1.0], [1.0, 0.0]], [0.0, 0.0], 1)


def test_assembly_reference_sinusoid():
    ref = Exosystem([[0.0, 1.0], [-1.0, 0.0]], [1.0, 0.0], [0.0, 1.0])
    cl = assemble_closed_loop(Plant([[0.0]], [1.0], [1.0]), Compensator([[0.0]], [1.0], [1.0]), reference=ref)
    A = [[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 1], [1, 0, -1, 0]]
    assert np.allclose(cl.system.A, A)
    assert np.allclose(cl.system.C, [[1, 0, -1, 0]])
    assert cl.compensator_class is CompensatorClass.FULL
    assert np.allclose(cl.initial_state(), [0, 1, 0, 0])


def test_assembly_feedthrough_and_disturbance():
    P = Plant([[-1.0]], [1.0], [1.0])
    R = Compensator([[0.0]], [1.0], [1.0], D=2.0)
    d = Exosystem([[0.0]], [1.0], [1.0])
    cl = assemble_closed_loop(P, R, disturbance=d)
    # states (w2, xp, xr); e = -xp; xp' = -xp + (2 e + xr + w2)
    assert np.allclose(cl.system.A, [[0, 0, 0], [1, -3, 1], [0, -1, 0]])
    assert np.allclose(cl.system.C, [[0, -1, 0]])
    Ab, Bb, Cb = cl.generalized_plant()
    assert np.allclose(Ab, [[0, 0], [1, -1]]) and np.allclose(Bb.ravel(), [0, 1]) and np.allclose(Cb, [[0, -1]])


def test_classification():
    full = Compensator([[0.0]], [1.0], [1.0])
    right = Compensator([[0.0, 1.0], [0.0, 0.0]], [0.0, 1.0], [1.0, 0.0])
    left = Compensator.from_series(SeriesForm([[0.0]], [1.0], [1.0], [[-1.0]], [1.0], [1.0]))
    general = Compensator([[0.0, 1.0], [1.0, 0.0]], [0.0, 1.0], [1.0, 0.0])
    assert classify_compensator(full) is CompensatorClass.FULL
    assert classify_compensator(right) is CompensatorClass.RIGHT
    assert classify_compensator(left) is CompensatorClass.LEFT
    assert classify_compensator(general) is CompensatorClass.GENERAL


def test_compensator_validation():
    with pytest.raises(ModelError, match="n_rho"):
        Compensator([[0.0]], [1.0], [1.0], n_rho=2)
    with pytest.raises(NumericalError, match="plant.A"):
        Plant([[0.0, 1.0]], [1.0], [1.0])


@pytest.mark.parametrize("name", fixture_names())
def test_reset_and_after_reset_sets_disjoint(name, configs, rng):
    assert disjointness_violations(configs[name].system, rng, 1000) == 0


def _iv7_loop():
    return assemble_closed_loop(
        Plant([[0.0]], [1.0], [1.0]), Compensator([[0.0]], [1.0], [1.0], D=2.0), reference=Exosystem([[0.0]], [1.0], [1.0])
    )


@settings(max_examples=50, deadline=None)
@given(arrays(float, (3,), elements=st.floats(-5, 5)))
def test_noise_extension_restricts_to_base(x):
    # with zero noise state the extended loop reproduces C x and C A x
    cl = _iv7_loop()
    ext = extend_with_noise(cl, sinusoid_noise(DEFAULT_NOISE_FREQS))
    keep = base_indices(ext)
    z = np.zeros(ext.n)
    z[keep] = x
    assert np.allclose(ext.system.C @ z, cl.system.C @ x, atol=1e-12)
    assert np.allclose(ext.system.C @ ext.system.A @ z, cl.system.C @ cl.system.A @ x, atol=1e-9)
    assert np.allclose((ext.system.A @ z)[keep], cl.system.A @ x, atol=1e-9)
    assert ext.system.n_r == cl.system.n_r
    assert np.allclose(ext.system.A_R[np.ix_(keep, keep)], cl.system.A_R)


def test_noise_enters_error_with_minus_sign():
    cl = _iv7_loop()
    ext = extend_with_noise(cl, sinusoid_noise([300.0]))
    nb = ext.blocks["n"]
    z = np.zeros(ext.n)
    z[nb] = [1.0, 0.0]
    assert np.isclose((ext.system.C @ z)[0], -1.0)
