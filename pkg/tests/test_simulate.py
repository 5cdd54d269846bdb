import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from properties import trajectory_invariant_failures
from resetsim.fixtures import fixture_names
from resetsim.model import build_reset_system
from resetsim.simulate import (
    SimOptions,
    Status,
    crossing_instants,
    first_entry_after_reset_set,
    in_hemisphere,
    reset_instants,
    simulate,
    tau_of_state,
)


def _rotation(w=1.0):
    return build_reset_system([[0.0, -w], [w, 0.0]], [1.0, -1.0], 1)


def _first_reset_oracle(x0, w):
    # x1 - x2 vanishes when tan(w t) = (x10 - x20) / (x10 + x20)
    th = math.atan2(x0[0] - x0[1], x0[0] + x0[1]) % math.pi
    return th / w


def test_rotation_reset_instants_closed_form():
    T, status = reset_instants(_rotation(), [0.75, 0.25], SimOptions(t_max=10.0))
    assert status is Status.COMPLETED
    assert abs(T[0] - (math.pi / 4 - math.atan(1.0 / 3.0))) < 1e-12
    assert np.max(np.abs(np.diff(T) - math.pi / 4)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.3, 3.0),
    st.floats(0.0, 2 * math.pi),
    st.floats(0.1, 10.0),
)
def test_rotation_reset_instants_match_oracle(w, ang, r):
    x0 = [r * math.cos(ang), r * math.sin(ang)]
    t1 = _first_reset_oracle(x0, w)
    assume(1e-6 < t1 < math.pi / w - 1e-6)
    T, _ = reset_instants(_rotation(w), x0, SimOptions(t_max=t1 + 3 * math.pi / (4 * w) + 1e-3))
    assert T.size == 4
    assert abs(T[0] - t1) <= 1e-10 * max(1.0, t1)
    assert np.allclose(np.diff(T), math.pi / (4 * w), atol=1e-10)


def test_origin_gives_single_segment():
    tr = simulate(_rotation(), [0.0, 0.0], SimOptions(t_max=5.0))
    assert len(tr.segments) == 1 and tr.reset_times.size == 0
    assert tr.status is Status.COMPLETED


def test_start_on_reset_set_resets_at_zero():
    tr = simulate(_rotation(), [1.0, 1.0], SimOptions(t_max=1.0))
    assert tr.reset_times[0] == 0.0
    assert np.allclose(tr.events[0].post, [1.0, 0.0])


def test_deadlock_from_fixed_point_direction():
    s = build_reset_system([[-1.0, 0.0, 0.0], [0.0, -1.0, -1.0], [0.0, 1.0, -1.0]], [1.0, 0.0, 0.0], 1)
    tr = simulate(s, [0.0, 1.0, 0.0])
    assert tr.status is Status.DEADLOCK
    assert tr.t_end == 0.0
    # the base orbit returns to the after-reset set at t = pi exactly
    assert abs(first_entry_after_reset_set(s, [0.0, 1.0, 0.0], 10.0) - math.pi) < 1e-9
    # off the fixed-point line the solution is well defined
    assert simulate(s, [1.0, 1.0, 0.0], SimOptions(t_max=3.0)).status is Status.COMPLETED


def test_event_budget():
    tr = simulate(_rotation(), [0.75, 0.25], SimOptions(t_max=100.0, max_events=5))
    assert tr.status is Status.EVENT_BUDGET_EXHAUSTED
    assert tr.reset_times.size == 5


def test_crossings_through_fixed_points_do_not_reset():
    # output is the reset state itself, so N(C) = F_R and M is empty
    s = build_reset_system([[0.0, 1.0], [-1.0, 0.0]], [0.0, 1.0], 1)
    tr = simulate(s, [0.0, 1.0], SimOptions(t_max=5.0))
    assert tr.reset_times.size == 0
    assert np.allclose(crossing_instants(s, [0.0, 1.0], SimOptions(t_max=5.0)), [math.pi / 2, 3 * math.pi / 2])


def test_left_and_right_limits():
    tr = simulate(_rotation(), [0.75, 0.25], SimOptions(t_max=1.0))
    t1 = tr.reset_times[0]
    pre, post = tr.state_at(t1, left=True), tr.state_at(t1)
    assert abs(pre[0] - pre[1]) < 1e-12
    assert np.allclose(post, [pre[0], 0.0])
    t, X, seg, is_post = tr.sample(0.01)
    k = np.flatnonzero(is_post)
    assert k.size == 1 and t[k[0]] == t1 and np.allclose(X[k[0]], post)
    assert t[k[0] - 1] == t1 and np.allclose(X[k[0] - 1], pre)


def test_csv_outputs(tmp_path):
    tr = simulate(_rotation(), [0.75, 0.25], SimOptions(t_max=2.0))
    tr.write_csv(tmp_path / "a.csv", 0.1)
    tr.write_instants_csv(tmp_path / "i.csv")
    raw = (tmp_path / "a.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "t,x_1,x_2,segment_id,is_post_jump"
    inst = (tmp_path / "i.csv").read_text().splitlines()
    assert inst[0] == "k,t_k,kind"
    assert float(inst[1].split(",")[1]) == tr.reset_times[0]
    # determinism
    tr2 = simulate(_rotation(), [0.75, 0.25], SimOptions(t_max=2.0))
    tr2.write_csv(tmp_path / "b.csv", 0.1)
    assert raw == (tmp_path / "b.csv").read_bytes()


def test_hemisphere():
    assert in_hemisphere([1.0, 0.0, 0.0, 0.0]) and in_hemisphere([-1.0, 0.0, 0.0, 0.0])
    assert in_hemisphere([0.3, 0.2, 0.0, 0.0]) and in_hemisphere([0.3, -0.2, 0.0, 0.0])
    assert in_hemisphere([0.0, 0.0, 0.3, -0.2]) is False and in_hemisphere([0.1, 0.0, -0.3, 0.0]) is False
    assert in_hemisphere([0.0, 0.0, -0.3, 0.2]) and not in_hemisphere([0.0, 0.0, 0.0, -1.0])
    assert not in_hemisphere([0.0, 0.0])


def test_tau_on_after_reset_circle(configs):
    s = configs["example-III.4"].system
    th = 2 * math.pi * np.arange(720) / 720
    tau = np.array([tau_of_state(s, [math.cos(a), math.sin(a), 0, 0]) for a in th[::8]])
    assert np.all(np.isfinite(tau)) and np.all(tau > 0)
    # antipodal directions share the reset instant
    for a in th[:360:45]:
        x = np.array([math.cos(a), math.sin(a), 0, 0])
        assert abs(tau_of_state(s, x) - tau_of_state(s, -x)) < 1e-9
    # value at pi from an independent 40-digit computation
    assert abs(tau_of_state(s, [-1.0, 0.0, 0.0, 0.0]) - 4.0843079878) < 1e-8
    assert tau_of_state(s, [math.cos(math.pi - 2 * math.pi / 720), math.sin(math.pi - 2 * math.pi / 720), 0, 0]) < 0.02


@pytest.mark.parametrize("name", fixture_names())
def test_solution_invariants(name, configs):
    cfg = configs[name]
    assert trajectory_invariant_failures(cfg.system, cfg.initial_state) == []


@pytest.mark.parametrize("name", ["example-III.1", "example-IV.1", "example-IV.2", "table1-row4"])
@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_solution_invariants_random_starts(name, configs, seed):
    s = configs[name].system
    x0 = np.random.default_rng(seed).standard_normal(s.n)
    assert trajectory_invariant_failures(s, x0, SimOptions(t_max=3.0, max_events=100)) == []
