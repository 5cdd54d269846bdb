"""
Bundled example corpus.

Each fixture is a JSON-ready configuration document (see :mod:`resetsim.config`)
with a ``description`` and the ``expected`` values the test suite checks.
Transfer-function blocks are realized in controllable canonical form.
"""
from __future__ import annotations

import copy
import math

import numpy as np
from scipy.signal import tf2ss

__all__ = ["FIXTURES", "fixture_names", "get_fixture", "left_fixture_names", "DEFAULT_NOISE_FREQS"]

# 20 frequencies above 200 rad/s, geometrically spaced so that no common
# period re-aligns the phases within the simulated horizon
DEFAULT_NOISE_FREQS = [220.0 * 2.0 ** (k / 20.0) for k in range(20)]


def _ccf(num, den) -> dict:
    A, B, C, _ = tf2ss(num, den)
    return {"A": (A + 0.0).tolist(), "B": (B.ravel() + 0.0).tolist(), "C": (C.ravel() + 0.0).tolist()}


def _series(g1: dict, r2: dict, D: float = 0.0) -> dict:
    """Compensator document for ``G1 -> R2`` with the ``R2`` states resetting."""
    A1, B1, C1 = (np.atleast_2d(g1[k]) for k in "ABC")
    A2, B2, C2 = (np.atleast_2d(r2[k]) for k in "ABC")
    n1, n2 = A1.shape[0], A2.shape[0]
    A = np.block([[A1, np.zeros((n1, n2))], [B2.reshape(-1, 1) @ C1.reshape(1, -1), A2]])
    B = np.concatenate([B1.ravel(), np.zeros(n2)])
    C = np.concatenate([np.zeros(n1), C2.ravel()])
    return {
        "A_r": A.tolist(),
        "B_r": B.tolist(),
        "C_r": C.tolist(),
        "D_r": D,
        "n_rho": n2,
        "series": {"G1": g1, "R2": r2},
    }


def _plant(ss: dict) -> dict:
    return {"A_p": ss["A"], "B_p": ss["B"], "C_p": ss["C"]}


_SINE = {"A": [[0.0, 1.0], [-1.0, 0.0]], "C": [1.0, 0.0], "w0": [0.0, 1.0]}
_RAMP = {"A": [[0.0, 1.0], [0.0, 0.0]], "C": [1.0, 0.0], "w0": [0.0, 1.0]}
_STEP = {"A": [[0.0]], "C": [1.0], "w0": [1.0]}

_P1 = _ccf([1.0], [1.0, 1.0])
_P2 = _ccf([1.0, 1.0], [1.0, 4.0, 4.0])
_INT = _ccf([1.0], [1.0, 0.0])


def _table_row(k: int, plant: dict, comp: dict, exo: dict, verdict: str, cls: str, extra: dict, blocks: dict):
    exp = {"verdict": verdict, "compensator_class": cls}
    exp.update(extra)
    n = len(exo["A"]) + len(plant["A"]) + len(comp["A_r"])
    x0 = list(exo["w0"]) + [0.0] * (n - len(exo["w0"]))
    return {
        "name": f"table1-row{k}",
        "description": f"Reset control loop with {blocks['text']}.",
        "blocks": blocks["tf"],
        "structured": {"plant": _plant(plant), "compensator": comp, "exosystems": {"disturbance": exo}},
        "initial_state": x0,
        "expected": exp,
    }


def _entries(*rows):
    return [{"lambda": [float(np.real(l)), float(np.imag(l))], "q": q, "r": r, "m": m, "d": d} for l, q, r, m, d in rows]


def _table_rows() -> list[dict]:
    g_sine = {"A": [[0.0, 1.0], [-1.0, 0.0]], "B": [0.0, 1.0], "C": [1.0, 0.0]}
    ci = _INT
    rows = [
        _table_row(
            1, _P1, _series(g_sine, ci), _SINE, "IllPosed", "left",
            {"s": 2, "n_rho": 1, "entries": _entries((1j, 1, 0, 1, 1), (-1j, 1, 0, 1, 1)),
             "M_RU": [[0.0, 1.0, 0.0, -1.0, 0.0, 0.0]]},
            {"text": "a sinusoidal disturbance, first-order plant and a left reset compensator G1 = 1/(s^2+1) followed by a Clegg integrator",
             "tf": {"P": "1/(s+1)", "G1": "1/(s^2+1)", "R2": "1/s", "Sigma": "1/(s^2+1)"}},
        ),
        _table_row(
            2, _P1,
            {"A_r": [[0.0, -1.0, 1.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]], "B_r": [0.0, 0.0, 1.0],
             "C_r": [0.0, 1.0, 0.0], "D_r": 0.0, "n_rho": 1},
            _SINE, "WellPosed", "right",
            {"M_RU": [[0.0, -1.0, 0.0, 1.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0, 1.0, 0.0]]},
            {"text": "a sinusoidal disturbance, first-order plant and a right reset compensator (Clegg integrator followed by 1/(s^2+1))",
             "tf": {"P": "1/(s+1)", "R1": "1/s", "G2": "1/(s^2+1)", "Sigma": "1/(s^2+1)"}},
        ),
        _table_row(
            3, _P1, _series(ci, ci), _RAMP, "IllPosed", "left",
            {"s": 2, "n_rho": 1, "entries": _entries((0, 1, 1, 2, 2))},
            {"text": "a ramp disturbance, first-order plant, G1 = 1/s and a Clegg integrator",
             "tf": {"P": "1/(s+1)", "G1": "1/s", "R2": "1/s", "Sigma": "1/s^2"}},
        ),
        _table_row(
            4, _P1, _series(_ccf([1.0], [1.0, 2.0]), ci), _RAMP, "WellPosed", "left",
            {"s": 1, "n_rho": 1, "entries": _entries((0, 0, 1, 2, 1))},
            {"text": "a ramp disturbance, first-order plant, G1 = 1/(s+2) and a Clegg integrator",
             "tf": {"P": "1/(s+1)", "G1": "1/(s+2)", "R2": "1/s", "Sigma": "1/s^2"}},
        ),
        _table_row(
            5, _P1, _series(ci, _ccf([1.0], [1.0, 0.0, 0.0])), _RAMP, "WellPosed", "left",
            {"s": 2, "n_rho": 2, "entries": _entries((0, 1, 2, 2, 2))},
            {"text": "a ramp disturbance, first-order plant, G1 = 1/s and a double integrator resetting both states",
             "tf": {"P": "1/(s+1)", "G1": "1/s", "R2": "1/s^2", "Sigma": "1/s^2"}},
        ),
        _table_row(
            6, _P1,
            {"A_r": [[0.0, 1.0], [0.0, 0.0]], "B_r": [0.0, 1.0], "C_r": [1.0, 0.0], "D_r": 0.0, "n_rho": 1},
            _RAMP, "WellPosed", "right", {"M_RU": [[1.0, 0.0, 0.0, -1.0, 0.0]]},
            {"text": "a ramp disturbance, first-order plant and a right reset compensator (Clegg integrator followed by 1/s)",
             "tf": {"P": "1/(s+1)", "R1": "1/s", "G2": "1/s", "Sigma": "1/s^2"}},
        ),
        _table_row(
            7, _P2, _series(ci, _ccf([1.0], [1.0, 1.0])), _STEP, "IllPosed", "left",
            {"s": 2, "n_rho": 1, "entries": _entries((-1, 0, 1, 1, 1), (0, 1, 0, 1, 1))},
            {"text": "a step disturbance, plant (s+1)/(s+2)^2, G1 = 1/s and a first-order reset element 1/(s+1)",
             "tf": {"P": "(s+1)/(s+2)^2", "G1": "1/s", "R2": "1/(s+1)", "Sigma": "1/s"}},
        ),
        _table_row(
            8, _P2, _series(ci, _ccf([1.0], [1.0, 1.0, 0.0])), _STEP, "WellPosed", "left",
            {"s": 2, "n_rho": 2, "entries": _entries((-1, 0, 1, 1, 1), (0, 1, 1, 1, 1))},
            {"text": "a step disturbance, plant (s+1)/(s+2)^2, G1 = 1/s and a second-order reset element 1/(s(s+1))",
             "tf": {"P": "(s+1)/(s+2)^2", "G1": "1/s", "R2": "1/(s(s+1))", "Sigma": "1/s"}},
        ),
    ]
    return rows


# third-order loop of the tangential-crossing examples, written as plant + first-order reset element
_TANGENTIAL_LOOP = {
    "plant": {"A_p": [[0.0, -3.0], [1.0, -1.0]], "B_p": [1.0, 0.0], "C_p": [0.0, -1.0]},
    "compensator": {"A_r": [[-1.0]], "B_r": [-1.0], "C_r": [1.0], "D_r": 0.0, "n_rho": 1},
    "exosystems": {},
}
_TANGENTIAL_A = [[0.0, -3.0, 1.0], [1.0, -1.0, 0.0], [0.0, -1.0, -1.0]]


def _examples() -> list[dict]:
    pi = math.pi
    return [
        {
            "name": "example-III.1",
            "description": "Second-order rotation with output x1 - x2; periodic resets after the first one.",
            "raw": {"A": [[0.0, -1.0], [1.0, 0.0]], "C": [1.0, -1.0], "n_r": 1},
            "initial_state": [0.75, 0.25],
            "expected": {
                "verdict": "WellPosed",
                "method": "Invariance",
                "first_reset": pi / 4 - math.atan(1.0 / 3.0),
                "gap": pi / 4,
            },
        },
        {
            "name": "example-III.2",
            "description": "Third-order system whose reset-free unobservable states are not invariant; "
            "solutions from the x2 axis deadlock.",
            "raw": {"A": [[-1.0, 0.0, 0.0], [0.0, -1.0, -1.0], [0.0, 1.0, -1.0]], "C": [1.0, 0.0, 0.0], "n_r": 1},
            "initial_state": [0.0, 1.0, 0.0],
            "expected": {"verdict": "IllPosed", "method": "Invariance", "witness": [0.0, -1.0, 1.0], "status": "deadlock"},
        },
        {
            "name": "example-III.4",
            "description": "Fourth-order system with a two-dimensional after-reset plane; used for the "
            "first-reset map on the unit circle of that plane.",
            "raw": {
                "A": [[0.0, 0.0, -0.35, 3.0], [1.0, 0.0, -2.40, 1.0], [0.0, 1.0, -4.35, 0.0], [0.0, 0.0, -1.0, -1.0]],
                "C": [0.0, 0.0, 1.0, 0.0],
                "n_r": 1,
            },
            "initial_state": [1.0, 0.0, 0.0, 0.0],
            "expected": {"verdict": "WellPosed", "method": "Invariance", "tau_S_pi": 4.13, "tau_S_pi_left": 0.02},
        },
        {
            "name": "example-III.7",
            "description": "Integrator plant with a Clegg integrator tracking a unit sinusoidal reference.",
            "structured": {
                "plant": {"A_p": [[0.0]], "B_p": [1.0], "C_p": [1.0]},
                "compensator": {"A_r": [[0.0]], "B_r": [1.0], "C_r": [1.0], "D_r": 0.0, "n_rho": 1},
                "exosystems": {"reference": {"A": [[0.0, 1.0], [-1.0, 0.0]], "C": [1.0, 0.0], "w0": [0.0, 1.0]}},
            },
            "initial_state": [0.0, 1.0, 0.0, 0.0],
            "expected": {
                "verdict": "WellPosed",
                "method": "Structural(Full)",
                "A": [[0.0, 1.0, 0.0, 0.0], [-1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0], [1.0, 0.0, -1.0, 0.0]],
                "C": [1.0, 0.0, -1.0, 0.0],
            },
        },
        {
            "name": "example-III.8",
            "description": "Left reset loop with a sinusoidal disturbance whose modes are cancelled by G1; "
            "two cancellations against one reset state.",
            "structured": copy.deepcopy(_TABLE_ROW1_STRUCT),
            "initial_state": [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            "expected": {
                "verdict": "IllPosed",
                "method": "Cancellation",
                "s": 2,
                "n_rho": 1,
                "M_RU": [[0.0, 1.0, 0.0, -1.0, 0.0, 0.0]],
            },
        },
        {
            "name": "example-IV.1",
            "description": "Harmonic oscillator with a single reset; continuous dependence holds off the reset set "
            "and fails on it.",
            "raw": {"A": [[0.0, 1.0], [-1.0, 0.0]], "C": [1.0, 0.0], "n_r": 1},
            "initial_state": [1.0, 0.0],
            "expected": {"verdict": "WellPosed", "method": "Invariance", "first_reset": pi / 2},
        },
        {
            "name": "example-IV.2",
            "description": "Third-order loop with a tangential first crossing for x0 = (x01, 0.2, 1).",
            "raw": {"A": _TANGENTIAL_A, "C": [0.0, 1.0, 0.0], "n_r": 1},
            "initial_state": [-0.3794, 0.2, 1.0],
            "expected": {
                "verdict": "WellPosed",
                "x01": -0.3794,
                "t1": 0.7926,
                "pre_jump_state": [0.0, 0.0, 0.4258],
                "tangential_carrier": [[0.0, 0.0, 1.0]],
            },
        },
        {
            "name": "example-IV.6",
            "description": "The tangential-crossing loop as plant plus first-order reset element; the backward "
            "reach of the tangential set is enclosed by two polytopes.",
            "structured": copy.deepcopy(_TANGENTIAL_LOOP),
            "initial_state": [1.0, 0.0, 0.0],
            "expected": {"verdict": "WellPosed", "method": "Structural(Full)", "A": _TANGENTIAL_A, "C": [0.0, 1.0, 0.0],
                         "N": 64, "halfspaces": 128, "in_D": True},
        },
        {
            "name": "example-IV.7",
            "description": "Integrator plant with a P+CI compensator (K_P = 2, K_CI = 1) and a unit step reference, "
            "perturbed by high-frequency sinusoidal measurement noise.",
            "structured": {
                "plant": {"A_p": [[0.0]], "B_p": [1.0], "C_p": [1.0]},
                "compensator": {"A_r": [[0.0]], "B_r": [1.0], "C_r": [1.0], "D_r": 2.0, "n_rho": 1},
                "exosystems": {
                    "reference": {"A": [[0.0]], "C": [1.0], "w0": [1.0]},
                    "noise": {"sinusoids": DEFAULT_NOISE_FREQS},
                },
            },
            "initial_state": [1.0, 0.0, 0.0],
            "expected": {
                "verdict": "WellPosed",
                "method": "Structural(Full)",
                "A": [[0.0, 0.0, 0.0], [2.0, -2.0, 1.0], [1.0, -1.0, 0.0]],
                "C": [1.0, -1.0, 0.0],
                "nominal_first_reset": 1.0,
                "magnitudes": [0.2, 0.1, 0.05, 0.025],
            },
        },
        {
            "name": "example-IV.8",
            "description": "The tangential-crossing loop with high-frequency measurement noise, started in the "
            "certified continuity domain.",
            "structured": dict(
                copy.deepcopy(_TANGENTIAL_LOOP), exosystems={"noise": {"sinusoids": DEFAULT_NOISE_FREQS}}
            ),
            "initial_state": [1.0, 0.0, 0.0],
            "expected": {"verdict": "WellPosed", "method": "Structural(Full)", "in_D": True},
        },
    ]


_TABLE_ROWS = _table_rows()
_TABLE_ROW1_STRUCT = _TABLE_ROWS[0]["structured"]

FIXTURES: dict[str, dict] = {f["name"]: f for f in _examples() + _TABLE_ROWS}


def fixture_names() -> list[str]:
    return list(FIXTURES)


def get_fixture(name: str) -> dict:
    """Deep copy of a bundled configuration document."""
    try:
        return copy.deepcopy(FIXTURES[name])
    except KeyError:
        raise KeyError(f"unknown example {name!r}; available: {', '.join(FIXTURES)}") from None


def left_fixture_names() -> list[str]:
    return [k for k, v in FIXTURES.items() if v["expected"].get("compensator_class") == "left"
            or v["expected"].get("method") == "Cancellation"]
