"""Reference surfaces with boundary: triangulated 2-complexes plus a volume form.

A :class:`Mesh` carries only combinatorics and the reference measure (per-triangle
areas and lumped vertex masses).  The flat layout used at construction time is
kept as ``layout`` so that the identity embedding and layout-coordinate fields
can be recovered; nothing downstream reads geometry of S from anywhere else.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Base class for invalid mesh data."""


class SchemaError(MeshError):
    pass


class ConnectivityError(MeshError):
    pass


class OrientationError(MeshError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    n_vertices: int
    triangles: np.ndarray
    boundary_loops: tuple
    ref_areas: np.ndarray
    vertex_mass: np.ndarray
    layout: np.ndarray | None = field(default=None)

    def __post_init__(self):
        tri = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        object.__setattr__(self, "triangles", tri)
        object.__setattr__(self, "ref_areas", np.asarray(self.ref_areas, dtype=float))
        object.__setattr__(self, "vertex_mass", np.asarray(self.vertex_mass, dtype=float))
        loops = tuple(np.asarray(loop, dtype=np.int64) for loop in self.boundary_loops)
        object.__setattr__(self, "boundary_loops", loops)
        if self.layout is not None:
            object.__setattr__(self, "layout", np.asarray(self.layout, dtype=float).reshape(-1, 2))
        for arr in (tri, self.ref_areas, self.vertex_mass):
            arr.setflags(write=False)

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        if self.n_vertices != other.n_vertices or len(self.boundary_loops) != len(other.boundary_loops):
            return False
        same_layout = (self.layout is None and other.layout is None) or (
            self.layout is not None and other.layout is not None
            and np.array_equal(self.layout, other.layout))
        return (np.array_equal(self.triangles, other.triangles)
                and np.array_equal(self.ref_areas, other.ref_areas)
                and np.array_equal(self.vertex_mass, other.vertex_mass)
                and all(np.array_equal(a, b) for a, b in zip(self.boundary_loops, other.boundary_loops))
                and same_layout)

    __hash__ = None

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def edges(self) -> np.ndarray:
        """Edges as sorted vertex pairs ``(i, j)`` with ``i < j``, lexicographic order."""
        tri = self.triangles
        raw = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        raw.sort(axis=1)
        edges = np.unique(raw, axis=0)
        edges.setflags(write=False)
        return edges

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_index(self) -> dict:
        return {(int(i), int(j)): k for k, (i, j) in enumerate(self.edges)}

    @cached_property
    def triangle_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Per triangle, the indices of its edges (a->b, b->c, c->a) and their signs
        relative to the canonical edge orientation."""
        idx = np.empty((self.n_triangles, 3), dtype=np.int64)
        sgn = np.empty((self.n_triangles, 3))
        lookup = self.edge_index
        for t, (a, b, c) in enumerate(self.triangles):
            for k, (i, j) in enumerate(((a, b), (b, c), (c, a))):
                key = (min(i, j), max(i, j))
                idx[t, k] = lookup[key]
                sgn[t, k] = 1.0 if i < j else -1.0
        return idx, sgn

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        if not self.boundary_loops:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate(self.boundary_loops))

    @cached_property
    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices] = False
        return np.flatnonzero(mask)

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """Directed boundary edges ``(i, j)`` following the loops (interior on the left)."""
        pairs = [np.column_stack([loop, np.roll(loop, -1)]) for loop in self.boundary_loops]
        return np.concatenate(pairs) if pairs else np.zeros((0, 2), dtype=np.int64)

    @cached_property
    def edge_mass(self) -> np.ndarray:
        """One third of the reference area of each incident triangle, per edge."""
        idx, _ = self.triangle_edges
        out = np.zeros(self.n_edges)
        np.add.at(out, idx.ravel(), np.repeat(self.ref_areas / 3.0, 3))
        return out

    def total_area(self) -> float:
        return float(self.ref_areas.sum())

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_triangles


def lumped_mass(n_vertices: int, triangles: np.ndarray, areas: np.ndarray) -> np.ndarray:
    mass = np.zeros(n_vertices)
    np.add.at(mass, np.asarray(triangles).ravel(), np.repeat(np.asarray(areas) / 3.0, 3))
    return mass


def signed_areas(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    a, b, c = p[triangles[:, 0]], p[triangles[:, 1]], p[triangles[:, 2]]
    u, v = b - a, c - a
    return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])


def _boundary_loops(n_vertices, triangles):
    """Directed boundary edges of a consistently oriented complex, chained into loops."""
    directed = {}
    for a, b, c in triangles:
        for i, j in ((a, b), (b, c), (c, a)):
            directed[(int(i), int(j))] = directed.get((int(i), int(j)), 0) + 1
    boundary = [(i, j) for (i, j) in directed if (j, i) not in directed]
    succ = {}
    for i, j in boundary:
        if i in succ:
            raise ConnectivityError(f"boundary vertex {i} is pinched (two outgoing boundary edges)")
        succ[i] = j
    loops, seen = [], set()
    for start in sorted(succ):
        if start in seen:
            continue
        loop, v = [], start
        while v not in seen:
            seen.add(v)
            loop.append(v)
            if v not in succ:
                raise ConnectivityError("open boundary chain")
            v = succ[v]
        if v != start:
            raise ConnectivityError("boundary chain does not close")
        loops.append(loop)
    return loops


def from_layout(points, triangles) -> Mesh:
    """Build a mesh from a planar layout: reference areas come from the layout."""
    points = np.asarray(points, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    areas = signed_areas(points, triangles)
    if np.any(areas <= 0):
        raise OrientationError("layout has clockwise or degenerate triangles")
    loops = _boundary_loops(len(points), triangles)
    mesh = Mesh(len(points), triangles, tuple(loops), areas,
                lumped_mass(len(points), triangles, areas), layout=points)
    validate(mesh)
    return mesh


def _ring(count, radius):
    theta = 2.0 * np.pi * np.arange(count) / count
    return radius * np.column_stack([np.cos(theta), np.sin(theta)])


def _zip_rings(inner, outer):
    """Triangulate the band between two concentric rings (index arrays), CCW."""
    na, nb = len(inner), len(outer)
    tris = []
    i = j = 0
    while i < na or j < nb:
        # advance along whichever ring has the smaller next angle; ties go outward
        if j < nb and (i >= na or (j + 1) * na <= (i + 1) * nb):
            tris.append((inner[i % na], outer[j], outer[(j + 1) % nb]))
            j += 1
        else:
            tris.append((inner[i], outer[j % nb], inner[(i + 1) % na]))
            i += 1
    return tris


def build_disk(n_radial: int, n_angular: int, radius: float = 1.0) -> Mesh:
    """Disk with a centre vertex and ``n_radial`` rings; ring k holds ``k * n_angular`` vertices."""
    if n_radial < 1 or n_angular < 3 or not radius > 0:
        raise ValueError("build_disk needs n_radial >= 1, n_angular >= 3, radius > 0")
    points = [np.zeros((1, 2))]
    rings, start = [], 1
    for k in range(1, n_radial + 1):
        count = k * n_angular
        points.append(_ring(count, radius * k / n_radial))
        rings.append(np.arange(start, start + count))
        start += count
    first = rings[0]
    tris = [(0, first[q], first[(q + 1) % len(first)]) for q in range(len(first))]
    for a, b in zip(rings[:-1], rings[1:]):
        tris.extend(_zip_rings(a, b))
    return from_layout(np.vstack(points), np.array(tris))


def build_square(n: int, side: float = 1.0) -> Mesh:
    """``n x n`` grid on ``[0, side]^2``, each cell cut along its lower-left/upper-right diagonal."""
    if n < 1 or not side > 0:
        raise ValueError("build_square needs n >= 1 and side > 0")
    h = side / n
    idx = lambda i, j: j * (n + 1) + i  # noqa: E731
    points = np.array([(i * h, j * h) for j in range(n + 1) for i in range(n + 1)])
    tris = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            tris.extend([(a, b, c), (a, c, d)])
    if n == 1:
        # keep the documented vertex order (0,0), (1,0), (1,1), (0,1)
        points = points[[0, 1, 3, 2]]
        tris = [(0, 1, 2), (0, 2, 3)]
    return from_layout(points, np.array(tris))


def build_annulus(n_radial: int, n_angular: int, r_in: float, r_out: float) -> Mesh:
    """Annulus with ``n_radial + 1`` rings.

    Ring k at radius r_k carries ``n_angular * max(1, round(n_radial * r_k / r_out))``
    vertices, so coarse meshes stay minimal and finer ones resolve the outer circle.
    """
    if n_radial < 1 or n_angular < 3 or not 0 < r_in < r_out:
        raise ValueError("build_annulus needs n_radial >= 1, n_angular >= 3, 0 < r_in < r_out")
    points, rings, start = [], [], 0
    for k in range(n_radial + 1):
        r = r_in + (r_out - r_in) * k / n_radial
        count = n_angular * max(1, round(n_radial * r / r_out))
        points.append(_ring(count, r))
        rings.append(np.arange(start, start + count))
        start += count
    tris = []
    for a, b in zip(rings[:-1], rings[1:]):
        tris.extend(_zip_rings(a, b))
    return from_layout(np.vstack(points), np.array(tris))


def validate(mesh: Mesh) -> None:
    """Raise a :class:`MeshError` subclass if the mesh breaks a structural invariant."""
    tri = mesh.triangles
    V = mesh.n_vertices
    if tri.size and (tri.min() < 0 or tri.max() >= V):
        raise ConnectivityError("triangle references a vertex index outside [0, V)")
    if np.any((tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2]) | (tri[:, 0] == tri[:, 2])):
        raise ConnectivityError("triangle with repeated vertex")
    if len(mesh.ref_areas) != len(tri) or np.any(mesh.ref_areas <= 0):
        raise SchemaError("ref_areas must be positive, one per triangle")
    if len(mesh.vertex_mass) != V:
        raise SchemaError("vertex_mass must have one entry per vertex")
    if not np.allclose(mesh.vertex_mass, lumped_mass(V, tri, mesh.ref_areas), rtol=1e-12, atol=1e-15):
        raise SchemaError("vertex_mass is not the lumped (1/3) mass of ref_areas")

    directed, undirected = {}, {}
    for a, b, c in tri:
        for i, j in ((a, b), (b, c), (c, a)):
            key = (int(i), int(j))
            directed[key] = directed.get(key, 0) + 1
            u = (min(key), max(key))
            undirected[u] = undirected.get(u, 0) + 1
    if any(n > 2 for n in undirected.values()):
        raise ConnectivityError("edge shared by more than two triangles")
    if any(n > 1 for n in directed.values()):
        raise OrientationError("inconsistent orientation: an edge is traversed twice the same way")

    used = np.zeros(V, dtype=bool)
    used[tri.ravel()] = True
    if not used.all():
        raise ConnectivityError("isolated vertex")
    # connectivity via union-find over triangle edges
    parent = list(range(V))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in undirected:
        parent[find(i)] = find(j)
    if len({find(v) for v in range(V)}) != 1:
        raise ConnectivityError("complex is not connected")

    expected = {(i, j) for (i, j) in directed if (j, i) not in directed}
    given = set()
    for loop in mesh.boundary_loops:
        if len(loop) < 3:
            raise ConnectivityError("boundary loop with fewer than 3 vertices")
        for i, j in zip(loop, np.roll(loop, -1)):
            given.add((int(i), int(j)))
    if given != expected:
        raise ConnectivityError("boundary_loops do not match the boundary edges of the complex")
    if sum(len(loop) for loop in mesh.boundary_loops) != len(expected):
        raise ConnectivityError("boundary loops overlap")


def mesh_to_dict(mesh: Mesh) -> dict:
    out = {
        "vertices": int(mesh.n_vertices),
        "triangles": mesh.triangles.tolist(),
        "ref_areas": [float(a) for a in mesh.ref_areas],
        "boundary_loops": [loop.tolist() for loop in mesh.boundary_loops],
        "vertex_mass": [float(m) for m in mesh.vertex_mass],
    }
    if mesh.layout is not None:
        out["layout"] = mesh.layout.tolist()
    return out


def mesh_from_dict(data: dict) -> Mesh:
    required = ("vertices", "triangles", "ref_areas", "boundary_loops", "vertex_mass")
    if not isinstance(data, dict) or any(k not in data for k in required):
        raise SchemaError(f"mesh JSON must be an object with keys {required}")
    try:
        V = int(data["vertices"])
        tri = np.asarray(data["triangles"], dtype=np.int64)
        if tri.size == 0 or tri.ndim != 2 or tri.shape[1] != 3:
            raise SchemaError("triangles must be a non-empty list of index triples")
        mesh = Mesh(V, tri, tuple(data["boundary_loops"]), data["ref_areas"],
                    data["vertex_mass"], layout=data.get("layout"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise SchemaError(str(exc)) from exc
    validate(mesh)
    return mesh


def save_mesh(mesh: Mesh, path) -> None:
    # json emits repr() floats, which round-trip exactly (17 significant digits)
    Path(path).write_text(json.dumps(mesh_to_dict(mesh)))


def load_mesh(path) -> Mesh:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    return mesh_from_dict(data)
