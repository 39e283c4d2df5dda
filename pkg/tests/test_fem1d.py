"""1D assembly tests against quadrature oracles and frozen hand values.

The scipy.integrate.quad oracles integrate each hat-function product over
its support independently of the assembly code under test.
"""

import numpy as np
import pytest
from scipy.integrate import quad

from transportfem import (Mesh1D, NonPositiveDensityError, assemble_convection,
                          assemble_energy, assemble_fixed, assemble_mass,
                          assemble_motion_coupling, assemble_moving, coenergy,
                          constant_density, density_from_callable, interpolate,
                          log_concentrated_mesh, mirrored, nodes_at,
                          project_initial, static_motion, traveling_motion,
                          uniform_mesh)


def random_mesh(rng, n_nodes):
    gaps = rng.uniform(0.2, 1.0, n_nodes - 1)
    nodes = np.concatenate(([0.0], np.cumsum(gaps)))
    nodes /= nodes[-1]
    nodes[-1] = 1.0
    return Mesh1D(0.0, 1.0, nodes)


def hat(nodes, i):
    """P1 hat function centered at node i, as a plain callable."""
    def phi(z):
        left = nodes[i - 1] if i > 0 else None
        right = nodes[i + 1] if i < len(nodes) - 1 else None
        if left is not None and left <= z <= nodes[i]:
            return (z - left) / (nodes[i] - left)
        if right is not None and nodes[i] <= z <= right:
            return (right - z) / (right - nodes[i])
        return 0.0
    return phi


def quad_mass_oracle(nodes, weight=lambda z: 1.0):
    n = len(nodes)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(max(i - 1, 0), min(i + 2, n)):
            fi, fj = hat(nodes, i), hat(nodes, j)
            val = 0.0
            for k in range(n - 1):
                val += quad(lambda z: weight(z) * fi(z) * fj(z),
                            nodes[k], nodes[k + 1], epsabs=1e-15)[0]
            out[i, j] = val
    return out


# ---------------------------------------------------------------------------
# mass matrix

def test_mass_three_nodes_frozen():
    E = assemble_mass(uniform_mesh(0, 1, 3))
    frozen = np.array([[1 / 6, 1 / 12, 0],
                       [1 / 12, 1 / 3, 1 / 12],
                       [0, 1 / 12, 1 / 6]])
    assert np.abs(E - frozen).max() < 1e-15


def test_mass_two_nodes_frozen():
    E = assemble_mass(uniform_mesh(0, 1, 2))
    assert np.abs(E - np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]])).max() < 1e-15


def test_mass_random_mesh_vs_quad_oracle():
    mesh = random_mesh(np.random.default_rng(7), 9)
    E = assemble_mass(mesh)
    assert np.abs(E - quad_mass_oracle(mesh.nodes)).max() < 1e-14


def test_mass_partition_of_unity():
    mesh = random_mesh(np.random.default_rng(3), 17)
    E = assemble_mass(mesh)
    gaps = mesh.spacings
    lumped = np.zeros(mesh.n_nodes)
    lumped[:-1] += gaps / 2
    lumped[1:] += gaps / 2
    assert np.allclose(E.sum(axis=1), lumped, atol=1e-15)
    assert E.sum() == pytest.approx(1.0, abs=1e-14)


# ---------------------------------------------------------------------------
# energy matrix

def test_energy_unit_density_equals_mass():
    mesh = random_mesh(np.random.default_rng(5), 12)
    E = assemble_mass(mesh)
    Q = assemble_energy(mesh, constant_density(1.0))
    assert np.abs(Q - E).max() < 1e-15


def test_energy_scaling():
    mesh = random_mesh(np.random.default_rng(6), 12)
    E = assemble_mass(mesh)
    Q = assemble_energy(mesh, constant_density(2.0))
    assert np.abs(Q - 2.0 * E).max() < 1e-15


def test_energy_affine_density_frozen_and_oracle():
    mesh = Mesh1D(0.0, 1.0, [0.0, 1.0])
    Q = assemble_energy(mesh, density_from_callable(lambda z: 1.0 + z))
    # int (1+z) phi_i phi_j over [0,1], worked by hand
    frozen = np.array([[5 / 12, 1 / 4], [1 / 4, 7 / 12]])
    assert np.abs(Q - frozen).max() < 1e-15
    oracle = quad_mass_oracle(mesh.nodes, weight=lambda z: 1.0 + z)
    assert np.abs(Q - oracle).max() < 1e-14


def test_energy_rejects_nonpositive_density():
    mesh = uniform_mesh(0, 1, 5)
    with pytest.raises(NonPositiveDensityError):
        assemble_energy(mesh, density_from_callable(lambda z: z - 0.5))


# ---------------------------------------------------------------------------
# convection matrix

def test_convection_two_nodes_frozen():
    D = assemble_convection(uniform_mesh(0, 1, 2))
    assert np.abs(D - np.array([[-0.5, -0.5], [0.5, 0.5]])).max() < 1e-15


def test_convection_telescopes_to_boundary():
    mesh = random_mesh(np.random.default_rng(11), 23)
    D = assemble_convection(mesh)
    sym = D + D.T
    expected = np.zeros_like(sym)
    expected[0, 0] = -1.0
    expected[-1, -1] = 1.0
    assert np.abs(sym - expected).max() < 1e-15


def test_convection_row_sums():
    mesh = random_mesh(np.random.default_rng(12), 14)
    D = assemble_convection(mesh)
    sums = D.sum(axis=1)
    expected = np.zeros(mesh.n_nodes)
    expected[0] = -1.0
    expected[-1] = 1.0
    assert np.allclose(sums, expected, atol=1e-15)


# ---------------------------------------------------------------------------
# fixed assembly

def test_fixed_boundary_vectors():
    mats = assemble_fixed(uniform_mesh(0, 1, 6), constant_density(1.0))
    assert mats.B[-1] == 1.0 and np.all(mats.B[:-1] == 0.0)
    assert mats.C[0] == 1.0 and np.all(mats.C[1:] == 0.0)


def test_fixed_scattering_identity_uniform():
    mats = assemble_fixed(uniform_mesh(0, 1, 3), constant_density(1.0))
    defect = mats.F + mats.F.T + np.outer(mats.B, mats.B) + np.outer(mats.C, mats.C)
    assert np.abs(defect).max() <= 1e-15


def test_fixed_scattering_identity_random_meshes():
    rng = np.random.default_rng(0)
    for _ in range(20):
        mesh = random_mesh(rng, int(rng.integers(2, 60)))
        mats = assemble_fixed(mesh, constant_density(float(rng.uniform(0.1, 10))))
        defect = mats.F + mats.F.T + np.outer(mats.B, mats.B) \
            + np.outer(mats.C, mats.C)
        assert np.abs(defect).max() <= 1e-12


def test_fixed_matches_construction():
    mesh = random_mesh(np.random.default_rng(9), 8)
    mats = assemble_fixed(mesh, constant_density(1.0))
    F_expected = -assemble_convection(mesh)
    F_expected[0, 0] -= 1.0
    assert np.abs(mats.F - F_expected).max() == 0.0


def test_mirror_permutes_matrices_and_swaps_ports():
    mesh = log_concentrated_mesh(0.0, 1.0, 9, "right", 6.0)
    dens = density_from_callable(lambda z: 1.0 + 0.5 * z)
    dens_m = density_from_callable(lambda z: 1.0 + 0.5 * (1.0 - z))
    mats = assemble_fixed(mesh, dens)
    mats_m = assemble_fixed(mirrored(mesh), dens_m)
    assert np.abs(mats_m.E - mats.E[::-1, ::-1]).max() < 1e-14
    assert np.abs(mats_m.Q - mats.Q[::-1, ::-1]).max() < 1e-14
    assert np.array_equal(mats_m.B, mats.C[::-1])
    assert np.array_equal(mats_m.C, mats.B[::-1])


# ---------------------------------------------------------------------------
# motion coupling

def test_motion_coupling_zero_velocities():
    mesh = uniform_mesh(0, 1, 7)
    G = assemble_motion_coupling(mesh, np.zeros(7))
    assert np.all(G == 0.0)


def test_motion_coupling_quad_oracle():
    nodes = np.array([0.0, 0.3, 0.6, 1.0])
    mesh = Mesh1D(0.0, 1.0, nodes)
    vel = np.array([0.0, 0.2, 0.2, 0.0])
    G = assemble_motion_coupling(mesh, vel)
    oracle = np.zeros((4, 4))
    for k in range(3):
        left, right = nodes[k], nodes[k + 1]
        h = right - left
        v_l, v_r = vel[k], vel[k + 1]
        lam = (lambda z: (right - z) / h, lambda z: (z - left) / h)
        dlam = (-1.0 / h, 1.0 / h)
        for li, gi in enumerate((k, k + 1)):
            for lj, gj in enumerate((k, k + 1)):
                oracle[gi, gj] += quad(
                    lambda z, li=li, lj=lj: -lam[li](z) * dlam[lj]
                    * (v_l * (right - z) / h + v_r * (z - left) / h),
                    left, right, epsabs=1e-15)[0]
    assert np.abs(G - oracle).max() < 1e-15


def test_motion_coupling_rigid_patch_block():
    # Equal node velocities across one interior element: that element's
    # contribution is -v times the transposed local convection block.
    nodes = np.array([0.0, 0.3, 0.6, 1.0])
    mesh = Mesh1D(0.0, 1.0, nodes)
    v = 0.2
    G = assemble_motion_coupling(mesh, np.array([0.0, v, v, 0.0]))
    # Side elements ramp from 0 to v; their closed-form corner entries at
    # the shared nodes are -v/3 (left element) and +v/3 (right element).
    side = np.array([[-v / 3.0, 0.0], [0.0, v / 3.0]])
    d_loc_t = np.array([[-0.5, 0.5], [-0.5, 0.5]])
    assert np.abs((G[1:3, 1:3] - side) - (-v) * d_loc_t).max() < 1e-15


def test_motion_coupling_symmetric_part_is_mass_rate():
    init = log_concentrated_mesh(0.0, 1.0, 13, "right", 10.0)
    motion = traveling_motion(init, 1.0, 2.0)
    delta = 1e-5
    for t in (0.35, 0.8, 1.2):
        mats = assemble_moving(motion, t, constant_density(1.0))
        e_hi = assemble_mass(Mesh1D(0, 1, __import__("transportfem").nodes_at(motion, t + delta)))
        e_lo = assemble_mass(Mesh1D(0, 1, __import__("transportfem").nodes_at(motion, t - delta)))
        fd = (e_hi - e_lo) / (2 * delta)
        assert np.abs((mats.G + mats.G.T) - fd).max() <= 10 * delta ** 2


def test_motion_coupling_requires_pinned_endpoints():
    mesh = uniform_mesh(0, 1, 4)
    with pytest.raises(ValueError):
        assemble_motion_coupling(mesh, np.array([0.1, 0.0, 0.0, 0.0]))


# ---------------------------------------------------------------------------
# moving assembly

def test_moving_static_equals_fixed():
    mesh = log_concentrated_mesh(0.0, 1.0, 11, "right", 8.0)
    dens = constant_density(2.0)
    fixed = assemble_fixed(mesh, dens)
    moving = assemble_moving(static_motion(mesh), 0.7, dens)
    for name in ("E", "F", "Q", "B", "C"):
        assert np.array_equal(getattr(fixed, name), getattr(moving, name))
    assert np.all(moving.G == 0.0)


def test_moving_identity_constant_density():
    init = log_concentrated_mesh(0.0, 1.0, 21, "right", 40.0)
    motion = traveling_motion(init, 1.0, 2.0)
    h0 = 1.0
    mats = assemble_moving(motion, 1.0, constant_density(h0))
    defect = mats.F + mats.F.T + mats.Edot / h0 \
        + np.outer(mats.B, mats.B) + np.outer(mats.C, mats.C)
    assert np.abs(defect).max() <= 1e-10


def test_moving_two_nodes_reduces_to_fixed():
    mesh = Mesh1D(0.0, 1.0, [0.0, 1.0])
    motion = traveling_motion(mesh, 1.0, 2.0)
    dens = constant_density(1.0)
    mats = assemble_moving(motion, 0.5, dens)
    fixed = assemble_fixed(mesh, dens)
    assert np.all(mats.G == 0.0)
    assert np.array_equal(mats.F, fixed.F)


# ---------------------------------------------------------------------------
# projection, co-energy, interpolation

def test_projection_reproduces_constants_and_linears():
    mesh = random_mesh(np.random.default_rng(2), 15)
    const = project_initial(mesh, lambda z: np.full_like(z, 4.2))
    assert np.abs(const - 4.2).max() < 1e-13
    lin = project_initial(mesh, lambda z: 3.0 * z - 1.0)
    assert np.abs(lin - (3.0 * mesh.nodes - 1.0)).max() < 1e-13


def test_projection_gaussian_vs_quad_oracle():
    mesh = uniform_mesh(0.0, 1.0, 21)
    pulse = lambda z: 2.0 * np.exp(-420.0 * (np.asarray(z, float) - 0.9) ** 2)
    xd = project_initial(mesh, pulse)
    nodes = mesh.nodes
    load = np.zeros(mesh.n_nodes)
    for i in range(mesh.n_nodes):
        if i > 0:
            left, right = nodes[i - 1], nodes[i]
            load[i] += quad(lambda z: (z - left) / (right - left) * pulse(z),
                            left, right, epsabs=1e-15, epsrel=1e-13)[0]
        if i < mesh.n_nodes - 1:
            left, right = nodes[i], nodes[i + 1]
            load[i] += quad(lambda z: (right - z) / (right - left) * pulse(z),
                            left, right, epsabs=1e-15, epsrel=1e-13)[0]
    oracle = np.linalg.solve(assemble_mass(mesh), load)
    assert np.abs(xd - oracle).max() <= 1e-10


def test_coenergy_traces():
    mesh = random_mesh(np.random.default_rng(4), 10)
    x = np.random.default_rng(1).standard_normal(10)
    mats = assemble_fixed(mesh, constant_density(1.0))
    e, y, u_tilde = coenergy(mats, x)
    assert np.abs(e - x).max() < 1e-13
    mats2 = assemble_fixed(mesh, constant_density(3.0))
    e2, y2, u2 = coenergy(mats2, x)
    assert np.abs(e2 - 3.0 * x).max() < 1e-12
    assert y2 == pytest.approx(3.0 * x[0], rel=1e-12)
    assert u2 == pytest.approx(3.0 * x[-1], rel=1e-12)
    e0, y0, u0 = coenergy(mats, np.zeros(10))
    assert np.all(e0 == 0.0) and y0 == 0.0 and u0 == 0.0


def test_interpolate_is_p1():
    mesh = uniform_mesh(0.0, 1.0, 5)
    values = mesh.nodes ** 2
    assert interpolate(mesh.nodes, values, mesh.nodes[2]) == values[2]
    mid = interpolate(mesh.nodes, values, 0.125)
    assert mid == pytest.approx(0.5 * (values[0] + values[1]))
