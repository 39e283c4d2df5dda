"""Ordered 1D meshes and prescribed node-motion schedules.

A mesh is an immutable, strictly increasing array of node coordinates on
[a, b] with both endpoints pinned.  A motion schedule maps a time t to node
positions and velocities.  The traveling schedule migrates a graded mesh
into its mirror image, so the region of small elements crosses the domain
while the endpoints never move; trajectories are twice continuously
differentiable in time and the fastest node moves at a prescribed speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .csvout import write_csv
from .errors import DegenerateMeshError

DEFAULT_MIN_SPACING_FACTOR = 1e-6

STATIC = "static"
TRAVELING = "traveling-concentration"


@dataclass(frozen=True)
class Mesh1D:
    """Strictly increasing node coordinates on [a, b], endpoints pinned.

    ``eps_min`` is the smallest admissible element length; it defaults to
    ``1e-6 * (b - a)`` and guards against singular mass matrices.
    """

    a: float
    b: float
    nodes: np.ndarray
    eps_min: float | None = None

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("a mesh needs at least two nodes")
        if not self.b > self.a:
            raise ValueError(f"domain requires b > a, got [{self.a}, {self.b}]")
        eps = self.eps_min
        if eps is None:
            eps = DEFAULT_MIN_SPACING_FACTOR * (self.b - self.a)
        if eps <= 0:
            raise ValueError("eps_min must be positive")
        if nodes[0] != self.a or nodes[-1] != self.b:
            raise ValueError("first/last node must equal the domain endpoints exactly")
        gaps = np.diff(nodes)
        if gaps.min() < eps:
            raise DegenerateMeshError(
                f"minimum spacing {gaps.min():.3e} below eps_min {eps:.3e}")
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "eps_min", float(eps))

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def length(self) -> float:
        return self.b - self.a


def uniform_mesh(a: float, b: float, n_nodes: int,
                 eps_min: float | None = None) -> Mesh1D:
    """Equispaced mesh with ``n_nodes`` nodes (``n_nodes - 1`` elements)."""
    if n_nodes < 2:
        raise ValueError("n_nodes must be at least 2")
    if not b > a:
        raise ValueError("b must exceed a")
    return Mesh1D(a, b, np.linspace(a, b, n_nodes), eps_min)


def log_concentrated_mesh(a: float, b: float, n_nodes: int, side: str,
                          ratio: float, eps_min: float | None = None) -> Mesh1D:
    """Geometrically graded mesh with the smallest element at ``side``.

    Element lengths form a geometric progression whose largest/smallest
    quotient equals ``ratio``.  With a single element (``n_nodes == 2``)
    the grading is vacuous and the mesh is just [a, b].
    """
    if n_nodes < 2:
        raise ValueError("n_nodes must be at least 2")
    if ratio <= 1:
        raise ValueError("ratio must exceed 1")
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    n_el = n_nodes - 1
    if n_el == 1:
        return Mesh1D(a, b, np.array([a, b]), eps_min)
    # Relative spacings, largest first; decay per element so that
    # first/last = ratio.
    q = ratio ** (-1.0 / (n_el - 1))
    weights = q ** np.arange(n_el)
    weights /= weights.sum()
    if side == "left":
        weights = weights[::-1]
    nodes = a + (b - a) * np.concatenate(([0.0], np.cumsum(weights)))
    nodes[0] = a
    nodes[-1] = b
    return Mesh1D(a, b, nodes, eps_min)


def mirrored(mesh: Mesh1D) -> Mesh1D:
    """Mesh reflected through the domain midpoint (zeta -> a + b - zeta)."""
    nodes = mesh.a + mesh.b - mesh.nodes[::-1]
    nodes[0] = mesh.a
    nodes[-1] = mesh.b
    return Mesh1D(mesh.a, mesh.b, nodes, mesh.eps_min)


@dataclass(frozen=True)
class MeshMotion:
    """Prescribed node trajectories with pinned endpoints.

    ``kind`` is either ``"static"`` (nodes never move) or
    ``"traveling-concentration"``: every node travels toward its mirrored
    position at the drift ``speed`` and comes to rest there through a C^2
    blending corner of spatial half-width ``blend_width``, so the region of
    small elements crosses the domain at the transport speed.
    ``target_nodes`` are the positions from ``park_time`` on (the mirror
    image of the initial layout); they are reached before ``horizon``.
    """

    kind: str
    initial: Mesh1D
    speed: float
    horizon: float
    target_nodes: np.ndarray
    blend_width: float
    park_time: float
    travel_budget: np.ndarray   # per-node value D_i with clamp(D_i) = |displacement_i|

    @property
    def concentration_ratio(self) -> float:
        gaps = self.initial.spacings
        return float(gaps.max() / gaps.min())

    @property
    def max_displacement(self) -> float:
        return float(np.abs(self.target_nodes - self.initial.nodes).max())


def static_motion(mesh: Mesh1D, horizon: float = np.inf) -> MeshMotion:
    """Schedule under which the mesh never moves."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    target = mesh.nodes.copy()
    return MeshMotion(STATIC, mesh, 0.0, float(horizon), target, 0.0, 0.0,
                      np.zeros_like(target))


DEFAULT_BLEND_FRACTION = 0.2


def _clamp_value(z: np.ndarray, k: float) -> np.ndarray:
    """C^2 softened positive part: 0 below -k, identity above +k."""
    u = np.clip((np.asarray(z, dtype=float) + k) / (2.0 * k), 0.0, 1.0)
    blend = 2.0 * k * (u ** 3 - 0.5 * u ** 4)
    return np.where(z >= k, z, np.where(z <= -k, 0.0, blend))


def _clamp_slope(z: np.ndarray, k: float) -> np.ndarray:
    u = np.clip((np.asarray(z, dtype=float) + k) / (2.0 * k), 0.0, 1.0)
    return 3.0 * u ** 2 - 2.0 * u ** 3


def _clamp_inverse(d: np.ndarray, k: float) -> np.ndarray:
    """Solve _clamp_value(z, k) = d for z; identity above +k, bisection below."""
    d = np.asarray(d, dtype=float)
    lo = np.full_like(d, -k)
    hi = np.full_like(d, k)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        too_low = _clamp_value(mid, k) < d
        lo = np.where(too_low, mid, lo)
        hi = np.where(too_low, hi, mid)
    z = 0.5 * (lo + hi)
    return np.where(d >= k, d, z)


def traveling_motion(initial: Mesh1D, speed: float, horizon: float,
                     blend_width: float | None = None) -> MeshMotion:
    """Carry ``initial`` into its mirror image, tracking the transport.

    Node i approaches its mirrored position z_i* along

        z_i(t) = z_i* + u_i * clamp(D_i - speed * t),

    where u_i is the approach direction, ``clamp`` is a C^2 softened
    positive part that flattens over the final ``blend_width`` of travel,
    and the budget D_i is fixed by clamp(D_i) = |z_i* - z_i(0)| so the
    trajectory starts exactly at the initial layout.  Nodes with more than
    ``blend_width`` to travel cruise at exactly ``speed`` before easing to
    rest; endpoints have zero displacement and never move.  The slope of
    ``clamp`` is monotone, which makes every element length monotone in
    time between its initial and mirrored values, so the mesh can never
    degenerate.
    """
    if speed <= 0:
        raise ValueError("speed must be positive")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    target = mirrored(initial).nodes
    if blend_width is None:
        blend_width = DEFAULT_BLEND_FRACTION * initial.length
    if blend_width <= 0:
        raise ValueError("blend_width must be positive")
    mag = np.abs(target - initial.nodes)
    budget = _clamp_inverse(mag, blend_width)
    if mag.max() == 0.0:
        # Mirror of a symmetric (e.g. uniform) mesh is itself.
        return MeshMotion(TRAVELING, initial, float(speed), float(horizon),
                          target, float(blend_width), 0.0, budget)
    park = (float(budget.max()) + blend_width) / speed
    if park > horizon:
        raise ValueError(
            f"speed {speed:g} cannot park all nodes within horizon "
            f"{horizon:g} (needs {park:g})")
    return MeshMotion(TRAVELING, initial, float(speed), float(horizon),
                      target, float(blend_width), float(park), budget)


def _check_time(motion: MeshMotion, t: float) -> None:
    if t < 0.0 or t > motion.horizon:
        raise ValueError(f"time {t:g} outside the motion horizon [0, {motion.horizon:g}]")


def nodes_at(motion: MeshMotion, t: float) -> np.ndarray:
    """Node coordinates at time t (0 <= t <= horizon)."""
    _check_time(motion, t)
    init = motion.initial.nodes
    if motion.kind == STATIC or motion.max_displacement == 0.0 or t == 0.0:
        return init.copy()
    direction = np.sign(init - motion.target_nodes)
    offset = _clamp_value(motion.travel_budget - motion.speed * t,
                          motion.blend_width)
    nodes = motion.target_nodes + direction * offset
    nodes[0] = motion.initial.a
    nodes[-1] = motion.initial.b
    gaps = np.diff(nodes)
    if gaps.min() < motion.initial.eps_min:
        raise DegenerateMeshError(
            f"schedule produced spacing {gaps.min():.3e} at t = {t:g}")
    return nodes


def node_velocities_at(motion: MeshMotion, t: float) -> np.ndarray:
    """Node velocities at time t; the exact derivative of ``nodes_at``."""
    _check_time(motion, t)
    init = motion.initial.nodes
    if motion.kind == STATIC or motion.max_displacement == 0.0:
        return np.zeros_like(init)
    direction = np.sign(init - motion.target_nodes)
    slope = _clamp_slope(motion.travel_budget - motion.speed * t,
                         motion.blend_width)
    return -motion.speed * direction * slope


def write_trajectory_csv(motion: MeshMotion, times, path) -> None:
    """Node positions at the given times: header ``t,node_0,...,node_{N-1}``."""
    times = np.asarray(times, dtype=float)
    header = ["t"] + [f"node_{i}" for i in range(motion.initial.n_nodes)]
    rows = [[t, *nodes_at(motion, t)] for t in times]
    write_csv(path, header, rows)
