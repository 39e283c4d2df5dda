"""P1 assembly for the 2D transport equation on a structured triangulation.

The semi-discrete model on vertices of a triangulated rectangle is

    M xdot = F1 x                 (direct weak form)
    M xdot = F2 x + load(u)       (integrated by parts; input exposed)

with boundary mass matrices B_in, B_out assembled on the inflow/outflow
parts of the boundary weighted by the signed flux density c . n.  The
discrete counterparts of the continuous energy identities are

    F1 = F2 - B_in,      F1 + F1^T = -(Q_c + B_Gamma),

where Q_c is the divergence-weighted mass matrix and
B_Gamma = B_in + B_out.  Both hold entrywise (up to rounding) whenever the
quadrature integrates the products involving c exactly; the default rules
(three-point midedge in the interior, two-point Gauss on edges) do so for
any velocity field with affine components.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .csvout import write_csv
from .errors import DegenerateMeshError

# Midedge quadrature on the reference triangle: degree-2 exact.
_TRI_LAMBDA = np.array([
    [0.5, 0.5, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
])  # (3 points, 3 barycentric coords)

# Two-point Gauss on an edge, in the edge parameter s in [0, 1].
_EDGE_S = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


@dataclass(frozen=True)
class Mesh2D:
    """Triangulated planar domain with classified boundary edges.

    ``triangles`` are positively oriented vertex triples; ``boundary_edges``
    are vertex pairs with matching rows of outward unit normals in
    ``boundary_normals``.
    """

    vertices: np.ndarray        # (M, 2)
    triangles: np.ndarray       # (K, 3) int
    boundary_edges: np.ndarray  # (L, 2) int
    boundary_normals: np.ndarray  # (L, 2)
    eps_area: float | None = None

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float)
        tris = np.array(self.triangles, dtype=int)
        edges = np.array(self.boundary_edges, dtype=int)
        normals = np.array(self.boundary_normals, dtype=float)
        areas = _triangle_areas(verts, tris)
        eps = self.eps_area
        if eps is None:
            span = verts.max(axis=0) - verts.min(axis=0)
            eps = 1e-14 * span[0] * span[1]
        if areas.min() <= eps:
            raise DegenerateMeshError(
                f"triangle area {areas.min():.3e} at or below eps_area {eps:.3e}")
        norms = np.hypot(normals[:, 0], normals[:, 1])
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("boundary normals must have unit length")
        for arr in (verts, tris, edges, normals):
            arr.flags.writeable = False
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "boundary_edges", edges)
        object.__setattr__(self, "boundary_normals", normals)
        object.__setattr__(self, "eps_area", float(eps))

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def triangle_areas(self) -> np.ndarray:
        return _triangle_areas(self.vertices, self.triangles)

    @property
    def area(self) -> float:
        return float(self.triangle_areas.sum())


def _triangle_areas(verts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    p = verts[tris]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def rect_mesh(lx: float, ly: float, nx: int, ny: int) -> Mesh2D:
    """Structured triangulation of [0, lx] x [0, ly] with nx x ny cells.

    Each cell is split into two right triangles; boundary edges carry the
    outward normals (-1,0), (0,-1), (1,0), (0,1) on the left, bottom,
    right and top sides.
    """
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be at least 1")
    if lx <= 0 or ly <= 0:
        raise ValueError("side lengths must be positive")
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    xx, yy = np.meshgrid(xs, ys)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    edges = []
    normals = []
    for j in range(ny):                       # left and right sides
        edges.append((vid(0, j), vid(0, j + 1)))
        normals.append((-1.0, 0.0))
        edges.append((vid(nx, j), vid(nx, j + 1)))
        normals.append((1.0, 0.0))
    for i in range(nx):                       # bottom and top sides
        edges.append((vid(i, 0), vid(i + 1, 0)))
        normals.append((0.0, -1.0))
        edges.append((vid(i, ny), vid(i + 1, ny)))
        normals.append((0.0, 1.0))
    return Mesh2D(vertices, np.array(tris), np.array(edges), np.array(normals))


@dataclass(frozen=True)
class VelocityField2D:
    """Velocity field c(zeta1, zeta2) together with its analytic divergence.

    ``c`` maps an (n, 2) array of points to an (n, 2) array of velocities;
    ``div_c`` maps the points to an (n,) array.  ``constant`` holds the
    value when the field is uniform in space.
    """

    c: Callable[[np.ndarray], np.ndarray]
    div_c: Callable[[np.ndarray], np.ndarray]
    constant: tuple[float, float] | None = None

    def velocity(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.c(np.asarray(points, dtype=float)), dtype=float)

    def divergence(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.div_c(np.asarray(points, dtype=float)), dtype=float)


def constant_field(c1: float, c2: float) -> VelocityField2D:
    vec = np.array([float(c1), float(c2)])
    return VelocityField2D(
        c=lambda p: np.broadcast_to(vec, p.shape).copy(),
        div_c=lambda p: np.zeros(p.shape[:-1]),
        constant=(float(c1), float(c2)),
    )


def field_from_callables(c, div_c) -> VelocityField2D:
    return VelocityField2D(c, div_c, None)


@dataclass(frozen=True)
class BoundaryClassification:
    """Index sets partitioning the boundary edges by the sign of c . n."""

    inflow: np.ndarray
    outflow: np.ndarray
    characteristic: np.ndarray
    threshold: float


def classify_boundary(mesh: Mesh2D, field: VelocityField2D,
                      threshold: float | None = None) -> BoundaryClassification:
    """Split boundary edges into inflow (c.n < 0), outflow (c.n > 0) and
    characteristic (|c.n| below the threshold) sets, by midpoint sign."""
    mids = 0.5 * (mesh.vertices[mesh.boundary_edges[:, 0]]
                  + mesh.vertices[mesh.boundary_edges[:, 1]])
    cvals = field.velocity(mids)
    flux = np.einsum("ed,ed->e", cvals, mesh.boundary_normals)
    if threshold is None:
        scale = float(np.hypot(cvals[:, 0], cvals[:, 1]).max())
        threshold = 1e-12 * max(scale, 1.0)
    idx = np.arange(len(flux))
    return BoundaryClassification(
        inflow=idx[flux < -threshold],
        outflow=idx[flux > threshold],
        characteristic=idx[np.abs(flux) <= threshold],
        threshold=float(threshold),
    )


@dataclass(frozen=True)
class Matrices2D:
    """Assembled 2D matrices (CSR) plus the boundary classification.

    ``B_in`` and ``B_out`` carry the signed weight c . n, so B_in is
    negative semidefinite and B_out positive semidefinite;
    ``B_gamma = B_in + B_out`` is the full boundary flux matrix.
    """

    M: sp.csr_matrix
    F1: sp.csr_matrix
    F2: sp.csr_matrix
    Qc: sp.csr_matrix
    B_in: sp.csr_matrix
    B_out: sp.csr_matrix
    B_gamma: sp.csr_matrix
    mesh: Mesh2D
    field: VelocityField2D
    classification: BoundaryClassification

    @property
    def n(self) -> int:
        return self.mesh.n_vertices


def _gradients(mesh: Mesh2D) -> tuple[np.ndarray, np.ndarray]:
    """Per-triangle P1 gradients (K, 3, 2) and areas (K,)."""
    p = mesh.vertices[mesh.triangles]
    areas = mesh.triangle_areas
    grads = np.empty((len(areas), 3, 2))
    for i in range(3):
        opp1 = p[:, (i + 1) % 3]
        opp2 = p[:, (i + 2) % 3]
        grads[:, i, 0] = opp1[:, 1] - opp2[:, 1]
        grads[:, i, 1] = opp2[:, 0] - opp1[:, 0]
    grads /= (2.0 * areas)[:, None, None]
    return grads, areas


def _tri_quad_points(mesh: Mesh2D) -> np.ndarray:
    """Physical midedge quadrature points, shape (K, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    return np.einsum("qi,kid->kqd", _TRI_LAMBDA, p)


def _coo(mesh: Mesh2D, local: np.ndarray) -> sp.csr_matrix:
    """Scatter (K, 3, 3) triangle blocks into a global CSR matrix."""
    tris = mesh.triangles
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)),
                        shape=(mesh.n_vertices, mesh.n_vertices))
    return mat.tocsr()


def _edge_quadrature(mesh: Mesh2D, edge_idx: np.ndarray, field: VelocityField2D):
    """Gauss data on the selected edges: points, signed flux, lengths."""
    pa = mesh.vertices[mesh.boundary_edges[edge_idx, 0]]
    pb = mesh.vertices[mesh.boundary_edges[edge_idx, 1]]
    lengths = np.hypot(*(pb - pa).T)
    pts = pa[:, None, :] + _EDGE_S[None, :, None] * (pb - pa)[:, None, :]
    cvals = field.velocity(pts.reshape(-1, 2)).reshape(pts.shape)
    flux = np.einsum("eqd,ed->eq", cvals, mesh.boundary_normals[edge_idx])
    return pts, flux, lengths


def _edge_mass(mesh: Mesh2D, edge_idx: np.ndarray,
               field: VelocityField2D) -> sp.csr_matrix:
    """int Phi Phi^T (c . n) ds over the selected boundary edges."""
    n = mesh.n_vertices
    if len(edge_idx) == 0:
        return sp.csr_matrix((n, n))
    _, flux, lengths = _edge_quadrature(mesh, edge_idx, field)
    trace = np.stack([1.0 - _EDGE_S, _EDGE_S])            # (2 vertices, 2 pts)
    wq = 0.5 * lengths[:, None] * flux                    # (E, q): weight * c.n
    local = np.einsum("eq,iq,jq->eij", wq, trace, trace)  # (E, 2, 2)
    pairs = mesh.boundary_edges[edge_idx]
    rows = np.repeat(pairs, 2, axis=1).ravel()
    cols = np.tile(pairs, (1, 2)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_2d(mesh: Mesh2D, field: VelocityField2D) -> Matrices2D:
    """Assemble M, F1, F2, Q_c and the boundary flux matrices."""
    grads, areas = _gradients(mesh)
    pts = _tri_quad_points(mesh)
    wq = np.broadcast_to((areas / 3.0)[:, None], (len(areas), 3))
    cvals = field.velocity(pts.reshape(-1, 2)).reshape(pts.shape)
    dvals = field.divergence(pts.reshape(-1, 2)).reshape(pts.shape[:2])

    qc_loc = np.einsum("eq,iq,jq->eij", wq * dvals, _TRI_LAMBDA.T, _TRI_LAMBDA.T)
    # c . grad(phi) is constant per triangle in the gradient index.
    cdot = np.einsum("eqd,eid->eqi", cvals, grads)         # (K, q, i)
    adv = np.einsum("eq,eqi,jq->eij", wq, cdot,
                    _TRI_LAMBDA.T)                         # int (c.grad phi_i) phi_j
    M = assemble_mass_2d(mesh)
    Qc = _coo(mesh, qc_loc)
    advection = _coo(mesh, adv)
    f1 = -advection.T.tocsr() - Qc                         # -int phi_i div(c phi_j)

    cls = classify_boundary(mesh, field)
    b_in = _edge_mass(mesh, cls.inflow, field)
    b_out = _edge_mass(mesh, cls.outflow, field)
    f2 = advection - b_out
    return Matrices2D(M=M, F1=f1.tocsr(), F2=f2.tocsr(), Qc=Qc,
                      B_in=b_in, B_out=b_out, B_gamma=(b_in + b_out).tocsr(),
                      mesh=mesh, field=field, classification=cls)


def input_load_2d(mesh: Mesh2D, inflow_edges: np.ndarray, field: VelocityField2D,
                  u: Callable[[np.ndarray, float], np.ndarray], t: float) -> np.ndarray:
    """Load vector -int_{Gamma_i} Phi u (c . n) ds at time t.

    ``u`` maps an (n, 2) array of boundary points and the time to boundary
    data values.  Since c . n < 0 on the inflow set, the load is positive
    for positive data.
    """
    load = np.zeros(mesh.n_vertices)
    if len(inflow_edges) == 0:
        return load
    pts, flux, lengths = _edge_quadrature(mesh, inflow_edges, field)
    uvals = np.asarray(u(pts.reshape(-1, 2), t), dtype=float).reshape(flux.shape)
    trace = np.stack([1.0 - _EDGE_S, _EDGE_S])
    wq = 0.5 * lengths[:, None] * flux * uvals
    contrib = -np.einsum("eq,iq->ei", wq, trace)
    np.add.at(load, mesh.boundary_edges[inflow_edges, 0], contrib[:, 0])
    np.add.at(load, mesh.boundary_edges[inflow_edges, 1], contrib[:, 1])
    return load


def inflow_quadratic(mats: Matrices2D, x_d: np.ndarray) -> float:
    """int over Gamma_i of the squared trace weighted by |c . n|."""
    return float(-x_d @ (mats.B_in @ x_d))


def outflow_quadratic(mats: Matrices2D, x_d: np.ndarray) -> float:
    """int over Gamma_o of the squared trace weighted by c . n."""
    return float(x_d @ (mats.B_out @ x_d))


def assemble_mass_2d(mesh: Mesh2D) -> sp.csr_matrix:
    """M = int Phi Phi^T over the triangulation."""
    areas = mesh.triangle_areas
    wq = np.broadcast_to((areas / 3.0)[:, None], (len(areas), 3))
    m_loc = np.einsum("eq,iq,jq->eij", wq, _TRI_LAMBDA.T, _TRI_LAMBDA.T)
    return _coo(mesh, m_loc)


def project_initial_2d(mesh: Mesh2D, x0: Callable[[np.ndarray], np.ndarray],
                       mass: sp.csr_matrix | None = None) -> np.ndarray:
    """L2 projection of x0 onto the vertex basis: solve M xd0 = int Phi x0."""
    if mass is None:
        mass = assemble_mass_2d(mesh)
    pts = _tri_quad_points(mesh)
    vals = np.asarray(x0(pts.reshape(-1, 2)), dtype=float).reshape(pts.shape[:2])
    wq = (mesh.triangle_areas / 3.0)[:, None]
    contrib = np.einsum("eq,iq->ei", wq * vals, _TRI_LAMBDA.T)
    load = np.zeros(mesh.n_vertices)
    for i in range(3):
        np.add.at(load, mesh.triangles[:, i], contrib[:, i])
    return spsolve(mass.tocsc(), load)


def write_mesh_csv(mesh: Mesh2D, vertex_path, triangle_path) -> None:
    write_csv(vertex_path, ["vertex_id", "zeta1", "zeta2"],
              [[i, v[0], v[1]] for i, v in enumerate(mesh.vertices)])
    write_csv(triangle_path, ["triangle_id", "v0", "v1", "v2"],
              [[i, *t] for i, t in enumerate(mesh.triangles)])


def write_snapshot_csv(mesh: Mesh2D, values: np.ndarray, path) -> None:
    write_csv(path, ["vertex_id", "zeta1", "zeta2", "x"],
              [[i, v[0], v[1], values[i]] for i, v in enumerate(mesh.vertices)])
