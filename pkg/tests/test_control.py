import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import pad_state
from eip.control import (
    Phase,
    TerminalConfig,
    Trajectory,
    alpha_field,
    alpha_weight,
    chamfer_distance,
    check_terminal,
)


def chamfer_oracle(deformed, rest):
    """All-pairs reference: fsum means, coordinate-ordered squared distances, fsum totals."""
    def centered(points):
        pts = [list(map(float, p)) for p in np.atleast_2d(np.asarray(points, dtype=float).T).T]
        dim = len(pts[0])
        mean = [math.fsum(p[k] for p in pts) / len(pts) for k in range(dim)]
        return [[p[k] - mean[k] for k in range(dim)] for p in pts]

    a, b = centered(deformed), centered(rest)

    def sq(p, q):
        acc = 0.0
        for x, y in zip(p, q):
            acc += (x - y) * (x - y)
        return acc

    return math.fsum(min(sq(p, q) for q in b) for p in a) + math.fsum(min(sq(q, p) for p in a) for q in b)


point_sets = st.integers(1, 200).flatmap(
    lambda n: st.tuples(st.just(n), st.integers(1, 200), st.integers(0, 2**32 - 1))
)


def test_alpha_examples():
    assert alpha_weight(0, 4) == 1.0
    assert alpha_weight(3, 4) == 0.0
    assert alpha_weight(1, 4) == pytest.approx(2.0 / 3.0)
    np.testing.assert_allclose(alpha_field([0, 1, 2, 3]), [1, 2 / 3, 1 / 3, 0])


@pytest.mark.parametrize("layer,count", [(-1, 4), (4, 4), (0, 1)])
def test_alpha_out_of_range(layer, count):
    with pytest.raises(ValueError):
        alpha_weight(layer, count)


@given(st.integers(2, 50).flatmap(lambda c: st.tuples(st.integers(0, c - 1), st.just(c))))
def test_alpha_in_unit_interval(args):
    layer, count = args
    assert 0.0 <= alpha_weight(layer, count) <= 1.0


def test_chamfer_identical_sets():
    pts = np.random.default_rng(0).normal(size=(50, 3))
    assert chamfer_distance(pts, pts) == 0.0


def test_chamfer_translated_rest():
    pts = np.random.default_rng(1).normal(size=(50, 3))
    assert chamfer_distance(pts, pts + [3.0, -1.0, 0.25]) == pytest.approx(0.0, abs=1e-12)


def test_chamfer_one_dimensional_example():
    assert chamfer_distance([[0.0], [1.0]], [[0.0], [2.0]]) == 1.0
    assert chamfer_distance([0.0, 1.0], [0.0, 2.0]) == 1.0


def test_chamfer_empty_set():
    with pytest.raises(ValueError):
        chamfer_distance(np.zeros((0, 3)), np.zeros((3, 3)))


@settings(max_examples=40)
@given(point_sets)
def test_chamfer_equals_all_pairs_oracle(args):
    n, m, seed = args
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(n, 3)), rng.normal(size=(m, 3))
    assert chamfer_distance(a, b) == chamfer_oracle(a, b)


@settings(max_examples=40)
@given(point_sets, st.tuples(*[st.floats(-10, 10)] * 3))
def test_chamfer_translation_invariant(args, shift):
    n, m, seed = args
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(n, 3)), rng.normal(size=(m, 3))
    assert abs(chamfer_distance(a + shift, b) - chamfer_distance(a, b)) <= 1e-12 * max(1.0, chamfer_distance(a, b))


@settings(max_examples=40)
@given(point_sets)
def test_chamfer_symmetric_and_non_negative(args):
    n, m, seed = args
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(n, 3)), rng.normal(size=(m, 3))
    assert chamfer_distance(a, b) == chamfer_distance(b, a) >= 0.0


def test_tree_path_matches_brute_force():
    rng = np.random.default_rng(7)
    a = rng.uniform(size=(6000, 3))
    b = a + rng.normal(scale=1e-3, size=a.shape)
    assert chamfer_distance(a, b, method="tree") == chamfer_distance(a, b, method="brute")
    assert chamfer_distance(a, b) == chamfer_distance(a, b, method="tree")


def test_terminal_undeformed_continues():
    res = check_terminal(pad_state(), TerminalConfig())
    assert not res.stop and res.l == 0.0


def test_terminal_zero_threshold_stops_on_any_deformation():
    state = pad_state()
    state.x[0, 2] += 1e-6
    assert check_terminal(state, TerminalConfig(threshold=0.0)).stop


def test_terminal_config_validation():
    with pytest.raises(ValueError):
        TerminalConfig(threshold=-1.0)
    with pytest.raises(ValueError):
        TerminalConfig(interval=0)


def test_trajectory_grasp_schedule():
    traj = Trajectory.grasp((0, 0, -2), 0.1, max_press_steps=5, hold_steps=2, retract_steps=3)
    assert [p.name for p in traj.phases] == ["press", "hold", "retract"]
    seen = []
    while not traj.done:
        seen.append(tuple(traj.velocity()))
        traj.advance()
    assert seen == [(0.0, 0.0, -0.1)] * 5 + [(0.0, 0.0, 0.0)] * 2 + [(0.0, 0.0, 0.1)] * 3
    np.testing.assert_array_equal(traj.velocity(), 0.0)


def test_trajectory_early_phase_exit():
    traj = Trajectory([Phase(10, (0, 0, -1), until_terminal=True), Phase(2, (0, 0, 1))])
    traj.advance()
    traj.next_phase()
    assert traj.phase.v_r == (0.0, 0.0, 1.0)


def test_phase_needs_positive_duration():
    with pytest.raises(ValueError):
        Phase(0, (0, 0, 0))
