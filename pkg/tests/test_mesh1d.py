"""Mesh construction and motion-schedule tests.

Frozen values were derived by hand (geometric-progression sums) or cross-
checked against central finite differences of the schedule itself.
"""

import numpy as np
import pytest

from transportfem import (DegenerateMeshError, Mesh1D, log_concentrated_mesh,
                          mirrored, node_velocities_at, nodes_at,
                          static_motion, traveling_motion, uniform_mesh,
                          write_trajectory_csv)


def test_uniform_mesh_three_nodes():
    mesh = uniform_mesh(0.0, 1.0, 3)
    assert np.array_equal(mesh.nodes, [0.0, 0.5, 1.0])


def test_uniform_mesh_two_nodes():
    mesh = uniform_mesh(0.0, 1.0, 2)
    assert np.array_equal(mesh.nodes, [0.0, 1.0])


def test_uniform_mesh_twenty_elements():
    mesh = uniform_mesh(0.0, 1.0, 21)
    assert mesh.n_elements == 20
    assert np.allclose(mesh.spacings, 0.05, rtol=0, atol=1e-15)


@pytest.mark.parametrize("args", [(0.0, 1.0, 1), (1.0, 1.0, 3), (2.0, 1.0, 3)])
def test_uniform_mesh_invalid_arguments(args):
    with pytest.raises(ValueError):
        uniform_mesh(*args)


def test_mesh_validation():
    with pytest.raises(ValueError):
        Mesh1D(0.0, 1.0, [0.0, 0.5, 0.9])        # endpoint not b
    with pytest.raises(DegenerateMeshError):
        Mesh1D(0.0, 1.0, [0.0, 0.5, 0.5 + 1e-9, 1.0])
    with pytest.raises(DegenerateMeshError):
        Mesh1D(0.0, 1.0, [0.0, 0.6, 0.4, 1.0])   # not increasing


def test_log_mesh_hand_derived():
    # Two elements with length quotient 2 summing to 1: 2/3 and 1/3.
    mesh = log_concentrated_mesh(0.0, 1.0, 3, "right", 2.0)
    assert np.allclose(mesh.nodes, [0.0, 2.0 / 3.0, 1.0], rtol=0, atol=1e-15)


def test_log_mesh_ratio_attained():
    mesh = log_concentrated_mesh(0.0, 1.0, 21, "right", 40.0)
    gaps = mesh.spacings
    assert gaps.max() / gaps.min() == pytest.approx(40.0, rel=1e-12)
    assert gaps.argmin() == len(gaps) - 1          # smallest at the right
    # geometric progression: constant quotient
    quotients = gaps[1:] / gaps[:-1]
    assert np.allclose(quotients, quotients[0], rtol=1e-12)


def test_log_mesh_near_unit_ratio_approaches_uniform():
    mesh = log_concentrated_mesh(0.0, 1.0, 11, "right", 1.0 + 1e-9)
    assert np.allclose(mesh.nodes, np.linspace(0, 1, 11), atol=1e-9)


def test_log_mesh_left_is_mirror_of_right():
    right = log_concentrated_mesh(0.0, 1.0, 21, "right", 7.0)
    left = log_concentrated_mesh(0.0, 1.0, 21, "left", 7.0)
    assert np.allclose(left.nodes, mirrored(right).nodes, atol=1e-14)


def test_log_mesh_invalid_ratio():
    with pytest.raises(ValueError):
        log_concentrated_mesh(0.0, 1.0, 5, "right", 1.0)
    with pytest.raises(ValueError):
        log_concentrated_mesh(0.0, 1.0, 5, "middle", 2.0)


def test_static_motion_constant():
    mesh = log_concentrated_mesh(0.0, 1.0, 9, "right", 5.0)
    motion = static_motion(mesh)
    for t in (0.0, 0.5, 123.0):
        assert np.array_equal(nodes_at(motion, t), mesh.nodes)
        assert np.all(node_velocities_at(motion, t) == 0.0)


def test_traveling_uniform_stays_uniform():
    mesh = uniform_mesh(0.0, 1.0, 11)
    motion = traveling_motion(mesh, 1.0, 2.0)
    for t in (0.0, 0.7, 2.0):
        assert np.array_equal(nodes_at(motion, t), mesh.nodes)
        assert np.all(node_velocities_at(motion, t) == 0.0)


def _paper_motion():
    init = log_concentrated_mesh(0.0, 1.0, 21, "right", 40.0)
    return traveling_motion(init, 1.0, 2.0)


def test_traveling_endpoints_and_mirror():
    motion = _paper_motion()
    init = motion.initial
    assert np.array_equal(nodes_at(motion, 0.0), init.nodes)
    final = nodes_at(motion, motion.horizon)
    assert np.allclose(final, mirrored(init).nodes, rtol=0, atol=1e-14)
    # smallest element ends adjacent to the left side
    assert np.diff(final).argmin() == 0


def test_traveling_invariants_along_the_way():
    motion = _paper_motion()
    eps = motion.initial.eps_min
    for t in np.linspace(0.0, motion.horizon, 401):
        coords = nodes_at(motion, t)              # raises if degenerate
        assert coords[0] == 0.0 and coords[-1] == 1.0
        assert np.diff(coords).min() >= eps
        vel = node_velocities_at(motion, t)
        assert vel[0] == 0.0 and vel[-1] == 0.0


def test_traveling_velocity_matches_finite_difference():
    motion = _paper_motion()
    delta = 1e-5
    for t in (0.3, motion.horizon / 2.0, 0.83, 1.7):
        vel = node_velocities_at(motion, t)
        fd = (nodes_at(motion, t + delta) - nodes_at(motion, t - delta)) / (2 * delta)
        assert np.abs(vel - fd).max() <= 10.0 * delta ** 2


def test_traveling_peak_speed_equals_drift_speed():
    motion = _paper_motion()
    speeds = [np.abs(node_velocities_at(motion, t)).max()
              for t in np.linspace(0.0, motion.horizon, 2001)]
    assert max(speeds) == pytest.approx(1.0, abs=1e-12)


def test_traveling_gap_bounds():
    # Every element length stays between its initial and mirrored values.
    init = log_concentrated_mesh(0.0, 1.0, 15, "right", 25.0)
    motion = traveling_motion(init, 1.3, 1.5)
    g0 = init.spacings
    g1 = mirrored(init).spacings
    lo = np.minimum(g0, g1) - 1e-12
    hi = np.maximum(g0, g1) + 1e-12
    for t in np.linspace(0.0, 1.5, 301):
        gaps = np.diff(nodes_at(motion, t))
        assert np.all(gaps >= lo) and np.all(gaps <= hi)


def test_traveling_mirror_symmetry():
    init = log_concentrated_mesh(0.0, 1.0, 13, "right", 12.0)
    fwd = traveling_motion(init, 1.0, 2.0)
    bwd = traveling_motion(mirrored(init), 1.0, 2.0)
    for t in (0.0, 0.4, 1.1, 2.0):
        a = nodes_at(fwd, t)
        b = nodes_at(bwd, t)
        assert np.allclose(b, (1.0 - a)[::-1], atol=1e-13)


def test_traveling_too_slow_rejected():
    init = log_concentrated_mesh(0.0, 1.0, 21, "right", 40.0)
    with pytest.raises(ValueError):
        traveling_motion(init, 0.1, 2.0)


def test_motion_time_range_checked():
    motion = _paper_motion()
    with pytest.raises(ValueError):
        nodes_at(motion, -0.1)
    with pytest.raises(ValueError):
        nodes_at(motion, motion.horizon + 0.1)


def test_trajectory_csv(tmp_path):
    motion = _paper_motion()
    path = tmp_path / "traj.csv"
    times = np.linspace(0.0, 2.0, 5)
    write_trajectory_csv(motion, times, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].split(",")[:2] == ["t", "node_0"]
    assert len(lines) == 6
    assert len(lines[1].split(",")) == 22
