"""P1 assembly for the 1D boundary-controlled transport equation.

State and co-energy are expanded in hat functions Phi on a mesh; the
semi-discrete model is

    E xdot = F e + B u,      E e = Q x,      y = C . e,

with E the mass matrix, Q the density-weighted mass matrix, B and C the
boundary selection vectors at the right and left endpoint (the signal
travels right to left), and F built so the scattering identity

    F + F^T = -(B B^T + C C^T)

holds exactly at the matrix level.  On a moving mesh the basis gains a time
derivative; its coupling matrix G = int Phi (dPhi/dt)^T enters F(t) and
satisfies G + G^T = dE/dt, which extends the identity to

    F(t) + F(t)^T + (1/H0) dE/dt = -(B B^T + C C^T)

whenever the density is constant in space.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import solveh_banded

from .errors import NonPositiveDensityError
from .mesh1d import Mesh1D, MeshMotion, nodes_at, node_velocities_at


@dataclass(frozen=True)
class HamiltonianDensity:
    """Positive transport-velocity density H(zeta).

    ``fn`` must accept numpy arrays.  ``constant_value`` is set when the
    density is known to be uniform in space, which enables the exact
    moving-mesh structure results.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    constant_value: float | None = None

    def __call__(self, zeta) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(zeta, dtype=float)), dtype=float)

    @property
    def is_constant(self) -> bool:
        return self.constant_value is not None


def constant_density(h0: float) -> HamiltonianDensity:
    if h0 <= 0:
        raise NonPositiveDensityError(f"density must be positive, got {h0}")
    return HamiltonianDensity(lambda z: np.full_like(z, float(h0)), float(h0))


def density_from_callable(fn: Callable[[np.ndarray], np.ndarray]) -> HamiltonianDensity:
    return HamiltonianDensity(fn, None)


@dataclass(frozen=True)
class SystemMatrices1D:
    """Assembled 1D system at one instant.

    ``D`` is the convection product int Phi' Phi^T; the structure matrix is
    ``F = -C C^T - D`` on a fixed mesh and ``F = -C C^T - D - G Q^{-1} E``
    on a moving one.  ``G`` and ``Edot = G + G^T`` are None for fixed
    meshes.  ``nodes`` are the coordinates the matrices were assembled on.
    """

    E: np.ndarray
    F: np.ndarray
    Q: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    nodes: np.ndarray
    t: float = 0.0
    G: np.ndarray | None = None
    Edot: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.B.size


@lru_cache(maxsize=None)
def _gauss(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gauss-Legendre points/weights on [-1, 1], and hat values there."""
    x, w = np.polynomial.legendre.leggauss(n)
    lam = np.stack([(1.0 - x) / 2.0, (1.0 + x) / 2.0])   # (2 local hats, n pts)
    return x, w, lam


def _element_points(mesh_nodes: np.ndarray, n_gauss: int):
    """Mapped quadrature points (K, n) plus weights and hat values."""
    x, w, lam = _gauss(n_gauss)
    left = mesh_nodes[:-1]
    h = np.diff(mesh_nodes)
    pts = left[:, None] + np.outer(h, (x + 1.0) / 2.0)
    return pts, h, w, lam


def _scatter(local: np.ndarray, n: int) -> np.ndarray:
    """Accumulate (K, 2, 2) element blocks into an (n, n) tridiagonal matrix."""
    out = np.zeros((n, n))
    idx = np.arange(n - 1)
    for di in (0, 1):
        for dj in (0, 1):
            np.add.at(out, (idx + di, idx + dj), local[:, di, dj])
    return out


def assemble_mass(mesh: Mesh1D) -> np.ndarray:
    """E = int Phi Phi^T; tridiagonal SPD, exact by 2-point Gauss."""
    _, h, w, lam = _element_points(mesh.nodes, 2)
    block = np.einsum("iq,jq,q->ij", lam, lam, w) / 2.0
    local = h[:, None, None] * block
    return _scatter(local, mesh.n_nodes)


def assemble_energy(mesh: Mesh1D, density: HamiltonianDensity,
                    n_gauss: int = 3) -> np.ndarray:
    """Q = int Phi H(zeta) Phi^T with per-element Gauss sampling of H."""
    pts, h, w, lam = _element_points(mesh.nodes, n_gauss)
    hvals = density(pts)
    if np.any(hvals <= 0.0):
        worst = pts.ravel()[np.argmin(hvals)]
        raise NonPositiveDensityError(
            f"density non-positive at quadrature point zeta = {worst:g}")
    local = np.einsum("kq,iq,jq,q->kij", hvals, lam, lam, w) * (h / 2.0)[:, None, None]
    return _scatter(local, mesh.n_nodes)


def assemble_convection(mesh: Mesh1D) -> np.ndarray:
    """D = int Phi' Phi^T.

    Element blocks are [[-1/2, -1/2], [1/2, 1/2]] independent of element
    length, so D + D^T telescopes to the endpoint evaluations
    B B^T - C C^T.
    """
    _, h, w, lam = _element_points(mesh.nodes, 2)
    # dlam/dzeta = [-1/h, 1/h]; the h factors cancel against the jacobian.
    row = np.einsum("jq,q->j", lam, w) / 2.0          # int lam_j over reference
    block = np.array([[-row[0], -row[1]], [row[0], row[1]]])
    local = np.broadcast_to(block, (mesh.n_elements, 2, 2))
    return _scatter(local, mesh.n_nodes)


def _boundary_vectors(n: int) -> tuple[np.ndarray, np.ndarray]:
    b = np.zeros(n)
    c = np.zeros(n)
    b[-1] = 1.0
    c[0] = 1.0
    return b, c


def assemble_fixed(mesh: Mesh1D, density: HamiltonianDensity,
                   n_gauss: int = 3) -> SystemMatrices1D:
    """All matrices for a fixed mesh; input at b, output at a."""
    E = assemble_mass(mesh)
    Q = assemble_energy(mesh, density, n_gauss)
    D = assemble_convection(mesh)
    B, C = _boundary_vectors(mesh.n_nodes)
    F = -D.copy()
    F[0, 0] -= 1.0
    return SystemMatrices1D(E=E, F=F, Q=Q, B=B, C=C, D=D, nodes=mesh.nodes)


def assemble_motion_coupling(mesh: Mesh1D, velocities) -> np.ndarray:
    """G = int Phi (dPhi/dt)^T for given node velocities.

    At fixed zeta the hat functions obey dphi/dt = -(dphi/dzeta) w(zeta)
    where w linearly interpolates the node velocities over each element,
    so the integrand is quadratic and 2-point Gauss is exact.
    """
    vel = np.asarray(velocities, dtype=float)
    if vel.shape != mesh.nodes.shape:
        raise ValueError("velocities must match the node count")
    if vel[0] != 0.0 or vel[-1] != 0.0:
        raise ValueError("endpoint velocities must be exactly zero")
    _, h, w, lam = _element_points(mesh.nodes, 2)
    # int lam_i * w(zeta) over each element, divided by h (from dlam/dzeta).
    wq = vel[:-1, None] * lam[0] + vel[1:, None] * lam[1]      # (K, q)
    col = np.einsum("iq,kq,q->ki", lam, wq, w) / 2.0           # (K, 2)
    local = np.empty((mesh.n_elements, 2, 2))
    local[:, :, 0] = col        # dlam_0/dt = +w/h
    local[:, :, 1] = -col       # dlam_1/dt = -w/h
    return _scatter(local, mesh.n_nodes)


def tridiagonal_bands(matrix: np.ndarray) -> np.ndarray:
    """Lower two-band storage of a symmetric tridiagonal matrix."""
    n = matrix.shape[0]
    ab = np.zeros((2, n))
    ab[0] = np.diagonal(matrix)
    ab[1, :-1] = np.diagonal(matrix, -1)
    return ab


def solve_spd_tridiagonal(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a symmetric positive-definite tridiagonal system (banded)."""
    return solveh_banded(tridiagonal_bands(matrix), rhs, lower=True)


def assemble_moving(motion: MeshMotion, t: float, density: HamiltonianDensity,
                    n_gauss: int = 3) -> SystemMatrices1D:
    """Time-varying matrices on the moving mesh at time t.

    F(t) = -C C^T - D(t) - G(t) Q(t)^{-1} E(t); the last factor is applied
    through a banded factorization of Q, never an explicit inverse.  With
    zero velocities this reduces exactly to the fixed-mesh assembly.
    """
    coords = nodes_at(motion, t)
    vel = node_velocities_at(motion, t)
    mesh_t = Mesh1D(motion.initial.a, motion.initial.b, coords,
                    motion.initial.eps_min)
    E = assemble_mass(mesh_t)
    Q = assemble_energy(mesh_t, density, n_gauss)
    D = assemble_convection(mesh_t)
    G = assemble_motion_coupling(mesh_t, vel)
    B, C = _boundary_vectors(mesh_t.n_nodes)
    F = -D - G @ solve_spd_tridiagonal(Q, E)
    F[0, 0] -= 1.0
    return SystemMatrices1D(E=E, F=F, Q=Q, B=B, C=C, D=D,
                            nodes=mesh_t.nodes, t=float(t), G=G, Edot=G + G.T)


def project_initial(mesh: Mesh1D, x0: Callable[[np.ndarray], np.ndarray],
                    n_gauss: int = 5, panels: int = 8) -> np.ndarray:
    """L2 projection of x0 onto the hat basis: solve E xd0 = int Phi x0.

    The load integral uses composite Gauss quadrature: each element is cut
    into ``panels`` equal panels with an ``n_gauss``-point rule on each, so
    initial data much narrower than the mesh is still integrated to full
    accuracy.
    """
    if panels < 1:
        raise ValueError("panels must be at least 1")
    x, w, _ = _gauss(n_gauss)
    nodes = mesh.nodes
    h = np.diff(nodes)
    # Panel quadrature points and the hat values there, per element.
    starts = (np.arange(panels) / panels)[None, :, None]
    local = starts + (x[None, None, :] + 1.0) / (2.0 * panels)   # (1, P, q) in [0, 1]
    pts = nodes[:-1, None, None] + h[:, None, None] * local      # (K, P, q)
    vals = np.asarray(x0(pts), dtype=float)
    wq = w[None, None, :] * (h[:, None, None] / (2.0 * panels))
    lam_left = 1.0 - local
    load = np.zeros(mesh.n_nodes)
    idx = np.arange(mesh.n_elements)
    np.add.at(load, idx, (vals * wq * lam_left).sum(axis=(1, 2)))
    np.add.at(load, idx + 1, (vals * wq * local).sum(axis=(1, 2)))
    return solve_spd_tridiagonal(assemble_mass(mesh), load)


def coenergy(mats: SystemMatrices1D, x_d: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Co-energy e solving E e = Q x, with boundary traces (e, y, u_tilde).

    y = C . e is the output at the left endpoint; u_tilde = B . e is the
    reconstructed trace at the right endpoint, which coincides with the
    prescribed input only up to the trace-consistency defect.
    """
    e = solve_spd_tridiagonal(mats.E, mats.Q @ x_d)
    return e, float(mats.C @ e), float(mats.B @ e)


def interpolate(nodes: np.ndarray, values: np.ndarray, points) -> np.ndarray:
    """Evaluate the P1 interpolant with the given nodal values."""
    return np.interp(np.asarray(points, dtype=float), nodes, values)
