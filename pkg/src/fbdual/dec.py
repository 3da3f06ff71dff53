"""Discrete exterior calculus and P1 finite elements on meshes with boundary.

Cochains live on a :class:`~fbdual.mesh.Mesh`; edges are the canonical sorted
pairs of ``mesh.edges`` oriented from the smaller to the larger index.  Vector
fields on an embedded domain are per-vertex arrays of shape ``(V, 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh, signed_areas


class SolverError(RuntimeError):
    pass


class DegenerateTriangleError(ValueError):
    pass


class IncompatibleDataError(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteForm:
    degree: int
    values: np.ndarray

    def __post_init__(self):
        if self.degree not in (0, 1, 2):
            raise ValueError("degree must be 0, 1 or 2")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def to_dict(self) -> dict:
        return {"degree": self.degree, "values": [float(x) for x in self.values]}

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteForm":
        return cls(int(data["degree"]), np.asarray(data["values"], dtype=float))


@dataclass(frozen=True)
class LinearSolverConfig:
    method: str = "auto"  # "dense", "cg" or "auto" (dense below dense_limit unknowns)
    tol: float = 1e-10
    max_iter: int = 10_000
    dense_limit: int = 2000

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.method not in ("auto", "dense", "cg"):
            raise ValueError(f"unknown solver method {self.method!r}")


DEFAULT_SOLVER = LinearSolverConfig()


@dataclass(frozen=True, eq=False)
class EmbeddedDomain:
    mesh: Mesh
    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(self.mesh.n_vertices, 2)
        object.__setattr__(self, "positions", pos)

    @classmethod
    def identity(cls, mesh: Mesh) -> "EmbeddedDomain":
        if mesh.layout is None:
            raise ValueError("mesh has no layout")
        return cls(mesh, mesh.layout.copy())

    @property
    def areas(self) -> np.ndarray:
        return signed_areas(self.positions, self.mesh.triangles)

    def check(self) -> None:
        areas = self.areas
        bad = np.flatnonzero(areas <= 0)
        if bad.size:
            raise DegenerateTriangleError(f"triangle {int(bad[0])} is inverted or degenerate "
                                          f"(signed area {areas[bad[0]]:.3e})")

    @property
    def vertex_mass(self) -> np.ndarray:
        mass = np.zeros(self.mesh.n_vertices)
        np.add.at(mass, self.mesh.triangles.ravel(), np.repeat(self.areas / 3.0, 3))
        return mass


# ---------------------------------------------------------------------------
# cochains


def _cache(mesh: Mesh) -> dict:
    # Mesh is immutable, so derived operators can live on the instance
    return mesh.__dict__.setdefault("_operator_cache", {})


def _d0_cached(mesh: Mesh):
    c = _cache(mesh)
    if "d0" in c:
        return c["d0"]
    E, V = mesh.n_edges, mesh.n_vertices
    rows = np.repeat(np.arange(E), 2)
    cols = mesh.edges.ravel()
    vals = np.tile([-1.0, 1.0], E)
    c["d0"] = sp.csr_matrix((vals, (rows, cols)), shape=(E, V))
    return c["d0"]


def _d1_cached(mesh: Mesh):
    c = _cache(mesh)
    if "d1" not in c:
        idx, sgn = mesh.triangle_edges
        rows = np.repeat(np.arange(mesh.n_triangles), 3)
        c["d1"] = sp.csr_matrix((sgn.ravel(), (rows, idx.ravel())),
                                shape=(mesh.n_triangles, mesh.n_edges))
    return c["d1"]


def d0_matrix(mesh: Mesh) -> sp.csr_matrix:
    return _d0_cached(mesh)


def d1_matrix(mesh: Mesh) -> sp.csr_matrix:
    return _d1_cached(mesh)


def d0(mesh: Mesh, f: DiscreteForm) -> DiscreteForm:
    if f.degree != 0 or f.values.shape != (mesh.n_vertices,):
        raise ValueError("d0 expects a 0-form with one value per vertex")
    return DiscreteForm(1, d0_matrix(mesh) @ f.values)


def d1(mesh: Mesh, a: DiscreteForm) -> DiscreteForm:
    if a.degree != 1 or a.values.shape != (mesh.n_edges,):
        raise ValueError("d1 expects a 1-form with one value per edge")
    return DiscreteForm(2, d1_matrix(mesh) @ a.values)


def _admissible_basis(mesh: Mesh, mode: str) -> np.ndarray:
    if mode == "h-vanishing-on-boundary":
        return mesh.interior_vertices
    if mode == "h-free":
        # constants are in ker d0, so pinning vertex 0 loses nothing
        return np.arange(1, mesh.n_vertices)
    raise ValueError(f"unknown quotient mode {mode!r}")


def _quotient_matrix_cached(mesh: Mesh, mode: str) -> np.ndarray:
    c = _cache(mesh)
    if ("quotient", mode) in c:
        return c[("quotient", mode)]
    cols = _admissible_basis(mesh, mode)
    E = mesh.n_edges
    if cols.size == 0:
        c[("quotient", mode)] = np.eye(E)
        return c[("quotient", mode)]
    G = d0_matrix(mesh)[:, cols].toarray()
    w = mesh.edge_mass
    normal = G.T @ (w[:, None] * G)
    # P = I - G (G^T W G)^{-1} G^T W : W-orthogonal projector onto (range G)^perp_W
    P = np.eye(E) - G @ sla.solve(normal, G.T * w[None, :], assume_a="pos")
    P.setflags(write=False)
    c[("quotient", mode)] = P
    return P


def quotient_matrix(mesh: Mesh, mode: str) -> np.ndarray:
    """Dense edge-space projector realising :func:`quotient_project`."""
    return _quotient_matrix_cached(mesh, mode)


def quotient_project(mesh: Mesh, a: DiscreteForm, mode: str = "h-free") -> DiscreteForm:
    """Canonical representative of ``[a]`` modulo ``d0`` of the admissible functions.

    The representative is the edge-mass-orthogonal complement of
    ``d0(admissible)``: functions vanishing at boundary vertices for
    ``"h-vanishing-on-boundary"``, all functions for ``"h-free"``.
    """
    if a.degree != 1 or a.values.shape != (mesh.n_edges,):
        raise ValueError("quotient_project expects a 1-form")
    return DiscreteForm(1, quotient_matrix(mesh, mode) @ a.values)


# ---------------------------------------------------------------------------
# P1 finite elements on an embedded domain


def hat_gradients(domain: EmbeddedDomain) -> tuple[np.ndarray, np.ndarray]:
    """Per-triangle gradients of the three hat functions, shape ``(T, 3, 2)``, and areas."""
    p = domain.positions
    tri = domain.mesh.triangles
    areas = signed_areas(p, tri)
    if np.any(areas <= 0):
        bad = int(np.flatnonzero(areas <= 0)[0])
        raise DegenerateTriangleError(f"triangle {bad} is inverted or degenerate")
    a, b, c = p[tri[:, 0]], p[tri[:, 1]], p[tri[:, 2]]
    grads = np.empty((len(tri), 3, 2))
    for k, (u, v) in enumerate(((b, c), (c, a), (a, b))):
        e = v - u  # edge opposite vertex k, counterclockwise
        grads[:, k, 0] = -e[:, 1]
        grads[:, k, 1] = e[:, 0]
    grads /= (2.0 * areas)[:, None, None]
    return grads, areas


def stiffness_matrix(domain: EmbeddedDomain) -> sp.csr_matrix:
    grads, areas = hat_gradients(domain)
    local = np.einsum("tik,tjk->tij", grads, grads) * areas[:, None, None]
    tri = domain.mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    V = domain.mesh.n_vertices
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(V, V))


def weak_divergence_matrix(domain: EmbeddedDomain) -> sp.csr_matrix:
    """``B`` with ``(B u)_q = integral of u . grad(psi_q)`` for P1 fields ``u``.

    Unknowns are ordered ``[u_0x, u_0y, u_1x, ...]``.  ``B u = 0`` says ``u`` is
    weakly divergence free *and* has zero normal flux; restricting to rows of
    interior vertices drops the flux condition.
    """
    grads, areas = hat_gradients(domain)
    tri = domain.mesh.triangles
    rows, cols, vals = [], [], []
    for q in range(3):
        for s in range(3):
            for k in range(2):
                rows.append(tri[:, q])
                cols.append(2 * tri[:, s] + k)
                vals.append(grads[:, q, k] * areas / 3.0)
    V = domain.mesh.n_vertices
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(V, 2 * V))


def vertex_gradient(domain: EmbeddedDomain, f: np.ndarray) -> np.ndarray:
    """P1 gradient of a per-vertex scalar, mass-averaged from triangles to vertices."""
    B = weak_divergence_matrix(domain)
    return (B.T @ f).reshape(-1, 2) / domain.vertex_mass[:, None]


def vertex_jacobian(domain: EmbeddedDomain, u: np.ndarray) -> np.ndarray:
    """Mass-averaged per-vertex Jacobian ``Du`` (shape ``(V, 2, 2)``, ``[i, j] = d u_i / d x_j``)."""
    grads, areas = hat_gradients(domain)
    tri = domain.mesh.triangles
    per_tri = np.einsum("tsi,tsj->tij", u[tri], grads)
    out = np.zeros((domain.mesh.n_vertices, 2, 2))
    np.add.at(out, tri.ravel(), np.repeat(per_tri * (areas / 3.0)[:, None, None], 3, axis=0))
    return out / domain.vertex_mass[:, None, None]


def boundary_normals(domain: EmbeddedDomain) -> tuple[np.ndarray, np.ndarray]:
    """Outward unit normals and dual lengths (half the adjacent boundary edge lengths)
    at every vertex; zero for interior vertices."""
    V = domain.mesh.n_vertices
    normals = np.zeros((V, 2))
    dual = np.zeros(V)
    p = domain.positions
    for i, j in domain.mesh.boundary_edges:
        e = p[j] - p[i]
        length = np.hypot(*e)
        n = np.array([e[1], -e[0]])  # interior on the left, so outward is on the right
        normals[i] += 0.5 * n
        normals[j] += 0.5 * n
        dual[i] += 0.5 * length
        dual[j] += 0.5 * length
    norm = np.linalg.norm(normals, axis=1)
    mask = norm > 0
    normals[mask] /= norm[mask, None]
    return normals, dual


def _solve(A, b, cfg: LinearSolverConfig):
    n = A.shape[0]
    use_dense = cfg.method == "dense" or (cfg.method == "auto" and n < cfg.dense_limit)
    if use_dense:
        dense = A.toarray() if sp.issparse(A) else np.asarray(A)
        try:
            x = sla.solve(dense, b)
        except sla.LinAlgError as exc:
            raise SolverError(str(exc)) from exc
    else:
        x, info = spla.cg(sp.csr_matrix(A), b, rtol=cfg.tol, maxiter=cfg.max_iter)
        if info != 0:
            raise SolverError(f"conjugate gradient did not converge (info={info})")
    resid = np.linalg.norm(A @ x - b)
    scale = max(np.linalg.norm(b), 1.0)
    if not np.isfinite(resid) or resid > max(cfg.tol, 1e-12) * scale * 1e3:
        raise SolverError(f"linear solve residual {resid:.3e} too large")
    return x


def poisson_dirichlet(domain: EmbeddedDomain, rhs, bc, cfg: LinearSolverConfig = DEFAULT_SOLVER):
    """P1 solution of ``Laplace(u) = rhs`` with ``u = bc`` on boundary vertices.

    ``bc`` is indexed like ``domain.mesh.boundary_vertices``.  ``rhs`` is a
    per-vertex source integrated with the lumped mass.
    """
    mesh = domain.mesh
    rhs = np.asarray(rhs, dtype=float)
    bc = np.asarray(bc, dtype=float)
    bnd, inner = mesh.boundary_vertices, mesh.interior_vertices
    if rhs.shape != (mesh.n_vertices,) or bc.shape != bnd.shape:
        raise ValueError("rhs must be per-vertex and bc per boundary vertex")
    if not np.all(np.isfinite(rhs)):
        raise ValueError("rhs is not finite")
    K = stiffness_matrix(domain).tocsr()
    u = np.zeros(mesh.n_vertices)
    u[bnd] = bc
    if inner.size:
        b = -domain.vertex_mass[inner] * rhs[inner] - K[inner][:, bnd] @ bc
        u[inner] = _solve(K[inner][:, inner], b, cfg)
    return u


def boundary_load(domain: EmbeddedDomain, flux) -> np.ndarray:
    """Per-vertex lumped boundary integral of a per-boundary-vertex function."""
    _, dual = boundary_normals(domain)
    out = np.zeros(domain.mesh.n_vertices)
    bnd = domain.mesh.boundary_vertices
    out[bnd] = dual[bnd] * np.asarray(flux, dtype=float)
    return out


def _solve_zero_mean(A, b, weights, cfg):
    """Solve a symmetric system singular only on constants, with zero weighted mean."""
    n = A.shape[0]
    aug = sp.bmat([[sp.csr_matrix(A), sp.csr_matrix(weights[:, None])],
                   [sp.csr_matrix(weights[None, :]), None]], format="csr")
    x = _solve(aug, np.concatenate([b, [0.0]]), cfg)
    return x[:n]


def poisson_neumann(domain: EmbeddedDomain, rhs, flux, cfg: LinearSolverConfig = DEFAULT_SOLVER,
                    compat_tol: float = 1e-8):
    """P1 solution of ``Laplace(u) = rhs``, ``du/dn = flux``, with zero mass-weighted mean."""
    rhs = np.asarray(rhs, dtype=float)
    mass = domain.vertex_mass
    load = boundary_load(domain, flux)
    source = mass * rhs
    total = abs(source.sum()) + abs(load.sum())
    if abs(source.sum() - load.sum()) > compat_tol * max(total, 1.0):
        raise IncompatibleDataError(
            f"Neumann data incompatible: integral of rhs {source.sum():.6g} != boundary flux {load.sum():.6g}")
    K = stiffness_matrix(domain)
    return _solve_zero_mean(K, load - source, mass, cfg)


def helmholtz_project(domain: EmbeddedDomain, u, cfg: LinearSolverConfig = DEFAULT_SOLVER):
    """Split a per-vertex field into a weakly divergence-free tangent part and a gradient.

    ``u_par`` is the lumped-mass-orthogonal projection of ``u`` onto
    ``ker B`` (see :func:`weak_divergence_matrix`); ``grad_part`` is the
    mass-averaged P1 gradient of the potential ``p`` solving
    ``B M^-1 B^T p = B u`` with zero mean.  Returns ``(u_par, grad_part, p)``.
    """
    u = np.asarray(u, dtype=float).reshape(-1, 2)
    domain.check()
    B = weak_divergence_matrix(domain)
    mass = domain.vertex_mass
    minv = np.repeat(1.0 / mass, 2)
    L = B @ sp.diags(minv) @ B.T
    p = _solve_zero_mean(L, B @ u.ravel(), mass, cfg)
    grad = (minv * (B.T @ p)).reshape(-1, 2)
    return u - grad, grad, p


def mass_inner(domain: EmbeddedDomain, u, v) -> float:
    return float(np.sum(domain.vertex_mass[:, None] * np.asarray(u) * np.asarray(v)))
