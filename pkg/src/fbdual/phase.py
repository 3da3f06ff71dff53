"""The discrete phase space T*Emb_vol(S, R^2).

Configuration space ``Q`` is the set of vertex positions whose triangles keep
their reference areas.  A cotangent vector at ``phi`` is a per-vertex covector
field ``alpha`` paired with velocities through the reference lumped mass,
``<alpha, u> = sum_s m_s alpha_s . u_s``; covectors annihilating every
area-preserving velocity (``M^-1 A^T lambda``, a discrete gradient of a
per-triangle function extended by zero) are class-trivial.  The stored
representative is the mass-orthogonal one, ``A(phi) alpha = 0``.

Tangent vectors are flat arrays ``[dphi.ravel(), dalpha.ravel()]`` of length
``4V``.  At ``z = (phi, alpha)`` they satisfy ``A(phi) dphi = 0`` and
``A(phi) dalpha + A(alpha) dphi = 0`` (the second keeps the representative
canonical; areas are quadratic so ``A(.)`` is linear in its argument).

Infinitesimal generators are Hamiltonian vector fields of their momentum
pairings, solved exactly on that tangent space, so the momentum-map identity
``d<J, xi> = omega(xi_P, .)`` holds to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import dec
from .catalog import StreamField
from .mesh import Mesh, signed_areas

CONSTRAINT_TOL = 1e-8


class ConstraintError(ValueError):
    """An embedding or tangent vector violates the volume constraint."""


class RegimeError(ValueError):
    """A phase point is not in the everywhere-nonzero covector regime."""


# ---------------------------------------------------------------------------
# volume constraint


def area_gradient_matrix(mesh: Mesh, positions) -> np.ndarray:
    """Dense ``T x 2V`` matrix of ``d area_t / d x_s``; linear in ``positions``."""
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    tri = mesh.triangles
    T, V = len(tri), mesh.n_vertices
    A = np.zeros((T, 2 * V))
    rows = np.arange(T)
    for k in range(3):
        nxt, prv = p[tri[:, (k + 1) % 3]], p[tri[:, (k + 2) % 3]]
        A[rows, 2 * tri[:, k]] += 0.5 * (nxt[:, 1] - prv[:, 1])
        A[rows, 2 * tri[:, k] + 1] += 0.5 * (prv[:, 0] - nxt[:, 0])
    return A


def mass_vector(mesh: Mesh) -> np.ndarray:
    return np.repeat(mesh.vertex_mass, 2)


def canonical_covector(mesh: Mesh, positions, alpha) -> np.ndarray:
    """Mass-orthogonal representative of the class of ``alpha`` at ``positions``."""
    A = area_gradient_matrix(mesh, positions)
    minv = 1.0 / mass_vector(mesh)
    a = np.asarray(alpha, dtype=float).ravel()
    lam = sla.solve((A * minv) @ A.T, A @ a, assume_a="pos")
    return (a - minv * (A.T @ lam)).reshape(-1, 2)


def tangent_project(emb: "VolEmbedding", raw_dphi) -> np.ndarray:
    """Least-squares projection onto the null space of the area-derivative matrix."""
    A = area_gradient_matrix(emb.mesh, emb.positions)
    d = np.asarray(raw_dphi, dtype=float).ravel()
    lam = sla.lstsq(A @ A.T, A @ d)[0]
    return (d - A.T @ lam).reshape(-1, 2)


def restore_areas(mesh: Mesh, positions, tol=1e-14, max_iter=50) -> np.ndarray:
    """Gauss-Newton (minimum-norm steps) back onto ``area_t = ref_area_t``."""
    p = np.asarray(positions, dtype=float).copy().ravel()
    for _ in range(max_iter):
        r = signed_areas(p.reshape(-1, 2), mesh.triangles) - mesh.ref_areas
        if np.max(np.abs(r) / mesh.ref_areas) < tol:
            break
        A = area_gradient_matrix(mesh, p)
        p -= A.T @ sla.lstsq(A @ A.T, r)[0]
    return p.reshape(-1, 2)


@dataclass(frozen=True, eq=False)
class VolEmbedding:
    mesh: Mesh
    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(self.mesh.n_vertices, 2)
        object.__setattr__(self, "positions", pos)

    @classmethod
    def identity(cls, mesh: Mesh) -> "VolEmbedding":
        return cls(mesh, mesh.layout.copy())

    @property
    def domain(self) -> dec.EmbeddedDomain:
        return dec.EmbeddedDomain(self.mesh, self.positions)

    def area_defect(self) -> float:
        """Largest relative per-triangle area error."""
        areas = signed_areas(self.positions, self.mesh.triangles)
        return float(np.max(np.abs(areas - self.mesh.ref_areas) / self.mesh.ref_areas))

    def check(self, tol: float = CONSTRAINT_TOL) -> None:
        areas = signed_areas(self.positions, self.mesh.triangles)
        if np.any(areas <= 0):
            raise ConstraintError("embedding inverts a triangle")
        if self.area_defect() > tol:
            raise ConstraintError(f"volume constraint violated (relative defect {self.area_defect():.2e})")


@dataclass(frozen=True, eq=False)
class PhasePoint:
    emb: VolEmbedding
    alpha: np.ndarray

    @property
    def mesh(self) -> Mesh:
        return self.emb.mesh

    @property
    def positions(self) -> np.ndarray:
        return self.emb.positions

    @property
    def in_regime(self) -> bool:
        """True when the covector is everywhere non-zero."""
        norms = np.linalg.norm(self.alpha, axis=1)
        return bool(norms.min() > 1e-8 * max(norms.max(), 1e-300))

    def require_regime(self) -> None:
        if not self.in_regime:
            raise RegimeError("covector vanishes somewhere; point is outside the non-zero regime")

    def to_dict(self) -> dict:
        return {"positions": self.positions.tolist(), "alpha": self.alpha.tolist()}

    @classmethod
    def from_dict(cls, mesh: Mesh, data: dict) -> "PhasePoint":
        return new_phase_point(VolEmbedding(mesh, data["positions"]), data["alpha"])


@dataclass(frozen=True)
class PhaseTangent:
    dphi: np.ndarray
    dalpha: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([np.ravel(self.dphi), np.ravel(self.dalpha)])

    @classmethod
    def from_vector(cls, vec) -> "PhaseTangent":
        vec = np.asarray(vec, dtype=float)
        half = len(vec) // 2
        return cls(vec[:half].reshape(-1, 2), vec[half:].reshape(-1, 2))

    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


@dataclass(frozen=True, eq=False)
class AlgebraElementS:
    """Divergence-free field on S tangent to the boundary, held as edge fluxes.

    ``flux`` is a 1-chain on the dual mesh with ``d0^T flux = 0``: zero net
    flux out of every dual cell, including those at the boundary, which is
    the discrete form of ``div w = 0`` and ``w || dS``.
    """

    mesh: Mesh
    flux: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "flux", np.asarray(self.flux, dtype=float))

    def divergence_defect(self) -> float:
        return float(np.abs(dec.d0_matrix(self.mesh).T @ self.flux).max(initial=0.0))

    def vertex_field(self, positions=None) -> np.ndarray:
        """Per-vertex vectors ``(1/m_s) * 1/2 sum_e flux_e (x_j - x_i)``; at the layout this is
        the field ``w`` itself, at other positions its push-forward."""
        p = self.mesh.layout if positions is None else np.asarray(positions, dtype=float)
        return pullback_adjoint(self.mesh, p, self.flux) / self.mesh.vertex_mass[:, None]


def w_from_stream(mesh: Mesh, stream: StreamField) -> AlgebraElementS:
    """``flux = d1^T c`` with ``c`` the stream function at triangle centroids of the layout."""
    centroids = mesh.layout[mesh.triangles].mean(axis=1)
    c = stream.psi(centroids)
    return AlgebraElementS(mesh, dec.d1_matrix(mesh).T @ c)


def w_basis_full(mesh: Mesh) -> list[AlgebraElementS]:
    """Orthonormal basis of all admissible fluxes (``ker d0^T``)."""
    G = dec.d0_matrix(mesh).toarray()
    N = sla.null_space(G.T)
    return [AlgebraElementS(mesh, N[:, k]) for k in range(N.shape[1])]


def w_basis_streams(mesh: Mesh, streams) -> list[AlgebraElementS]:
    return [w_from_stream(mesh, s) for s in streams]


# ---------------------------------------------------------------------------
# pullback and pairings


def pullback_matrix(mesh: Mesh, positions) -> np.ndarray:
    """``E x 2V`` matrix of ``alpha -> phi^* alpha`` (edge-midpoint rule)."""
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    edges = mesh.edges
    e = p[edges[:, 1]] - p[edges[:, 0]]
    P = np.zeros((len(edges), 2 * mesh.n_vertices))
    rows = np.arange(len(edges))
    for end in (0, 1):
        for k in (0, 1):
            P[rows, 2 * edges[:, end] + k] += 0.5 * e[:, k]
    return P


def pullback(emb: VolEmbedding, alpha) -> dec.DiscreteForm:
    """On edge ``i -> j``: ``(alpha_i + alpha_j)/2 . (x_j - x_i)``."""
    a = np.asarray(alpha, dtype=float)
    if a.shape != (emb.mesh.n_vertices, 2):
        raise ValueError("alpha must hold one covector per vertex")
    edges = emb.mesh.edges
    x = emb.positions
    vals = 0.5 * np.sum((a[edges[:, 0]] + a[edges[:, 1]]) * (x[edges[:, 1]] - x[edges[:, 0]]), axis=1)
    return dec.DiscreteForm(1, vals)


def pullback_adjoint(mesh: Mesh, positions, edge_values) -> np.ndarray:
    """Transpose of the pullback: edge values to per-vertex vectors."""
    return (pullback_matrix(mesh, positions).T @ np.asarray(edge_values, dtype=float)).reshape(-1, 2)


def class_trivial(mesh: Mesh, positions, lam) -> np.ndarray:
    """The class-trivial covector ``M^-1 A^T lambda`` for a per-triangle ``lambda``."""
    A = area_gradient_matrix(mesh, positions)
    return ((A.T @ np.asarray(lam, dtype=float)) / mass_vector(mesh)).reshape(-1, 2)


# ---------------------------------------------------------------------------
# phase points and tangent spaces


def new_phase_point(emb: VolEmbedding, raw_alpha, tol: float = CONSTRAINT_TOL) -> PhasePoint:
    emb.check(tol)
    raw = np.asarray(raw_alpha, dtype=float).reshape(emb.mesh.n_vertices, 2)
    return PhasePoint(emb, canonical_covector(emb.mesh, emb.positions, raw))


def constraint_matrix(z: PhasePoint) -> np.ndarray:
    """``2T x 4V`` linearised constraints defining the tangent space at ``z``."""
    A = area_gradient_matrix(z.mesh, z.positions)
    Aa = area_gradient_matrix(z.mesh, z.alpha)
    Z = np.zeros_like(A)
    return np.block([[A, Z], [Aa, A]])


def tangent_basis(z: PhasePoint) -> np.ndarray:
    """Orthonormal basis (columns) of the tangent space at ``z``."""
    cache = z.__dict__.setdefault("_cache", {})
    if "basis" not in cache:
        C = constraint_matrix(z)
        u, s, vt = np.linalg.svd(C)
        rank = int(np.sum(s > 1e-12 * s[0]))
        cache["basis"] = vt[rank:].T.copy()
    return cache["basis"]


def symplectic_matrix(mesh: Mesh) -> np.ndarray:
    """``Omega`` with ``omega(t1, t2) = t1 @ Omega @ t2``."""
    m = np.diag(mass_vector(mesh))
    Z = np.zeros_like(m)
    return np.block([[Z, m], [-m, Z]])


def constraint_residual(z: PhasePoint, t) -> float:
    vec = t.vector if isinstance(t, PhaseTangent) else np.asarray(t, dtype=float)
    C = constraint_matrix(z)
    scale = np.linalg.norm(C, 2) * max(np.linalg.norm(vec), 1e-300)
    return float(np.linalg.norm(C @ vec) / scale)


def symplectic(z: PhasePoint, t1, t2, check: bool = True, tol: float = CONSTRAINT_TOL) -> float:
    """``sum_s m_s (t2.dalpha_s . t1.dphi_s - t1.dalpha_s . t2.dphi_s)``."""
    a = t1.vector if isinstance(t1, PhaseTangent) else np.asarray(t1, dtype=float)
    b = t2.vector if isinstance(t2, PhaseTangent) else np.asarray(t2, dtype=float)
    if check:
        # only the position parts matter for representative independence
        A = area_gradient_matrix(z.mesh, z.positions)
        half = len(a) // 2
        for vec in (a, b):
            n = np.linalg.norm(vec[:half])
            if n > 0 and np.linalg.norm(A @ vec[:half]) > tol * np.linalg.norm(A, 2) * n:
                raise ConstraintError("tangent vector violates the linearised volume constraint")
    m = mass_vector(z.mesh)
    half = len(a) // 2
    return float(np.sum(m * (b[half:] * a[:half] - a[half:] * b[:half])))


def hamiltonian_vector_field(z: PhasePoint, grad) -> np.ndarray:
    """Tangent vector ``X`` with ``omega(X, t) = grad . t`` for all tangent ``t``."""
    B = tangent_basis(z)
    cache = z.__dict__.setdefault("_cache", {})
    if "lu" not in cache:
        K = B.T @ symplectic_matrix(z.mesh) @ B
        cache["lu"] = sla.lu_factor(K)
    y = sla.lu_solve(cache["lu"], -(B.T @ np.asarray(grad, dtype=float)))
    return B @ y


def left_pairing_gradient(z: PhasePoint, field: StreamField) -> np.ndarray:
    """Gradient in ``(phi, alpha)`` of ``sum_s m_s alpha_s . v(phi_s)``."""
    m = z.mesh.vertex_mass[:, None]
    v = field.velocity(z.positions)
    Dv = field.jacobian(z.positions)
    g_phi = m * np.einsum("sij,si->sj", Dv, z.alpha)
    g_alpha = m * v
    return np.concatenate([g_phi.ravel(), g_alpha.ravel()])


def right_pairing_gradient(z: PhasePoint, w: AlgebraElementS) -> np.ndarray:
    """Gradient in ``(phi, alpha)`` of ``<phi^* alpha, flux>``."""
    mesh = z.mesh
    edges = mesh.edges
    abar = 0.5 * (z.alpha[edges[:, 0]] + z.alpha[edges[:, 1]]) * w.flux[:, None]
    g_phi = np.zeros((mesh.n_vertices, 2))
    np.add.at(g_phi, edges[:, 1], abar)
    np.add.at(g_phi, edges[:, 0], -abar)
    g_alpha = pullback_adjoint(mesh, z.positions, w.flux)
    return np.concatenate([g_phi.ravel(), g_alpha.ravel()])


def generator_left(z: PhasePoint, v) -> PhaseTangent:
    """Infinitesimal generator of the Diff_vol(R^2) action for a stream field (or list of them).

    For fields preserving every triangle area (affine ``v``) this is
    ``dphi = v(phi)``, ``dalpha = -Dv^T alpha`` made canonical; in general
    ``dphi`` is the mass-orthogonal projection of ``v(phi)`` onto ``T Q``.
    """
    fields = v if isinstance(v, (list, tuple)) else [v]
    grad = sum(left_pairing_gradient(z, f) for f in fields)
    return PhaseTangent.from_vector(hamiltonian_vector_field(z, grad))


def generator_right(z: PhasePoint, w: AlgebraElementS) -> PhaseTangent:
    """Infinitesimal generator of the relabelling action of ``w``.

    ``dphi`` is the projection onto ``T Q`` of ``w`` pushed forward by the
    embedding (:meth:`AlgebraElementS.vertex_field`); ``dalpha`` is the
    cotangent lift, the adjoint of the discrete derivative along ``w``.
    """
    return PhaseTangent.from_vector(hamiltonian_vector_field(z, right_pairing_gradient(z, w)))


def vertical_lift(z: PhasePoint, beta) -> PhaseTangent:
    b = np.asarray(beta, dtype=float).reshape(-1, 2)
    dalpha = canonical_covector(z.mesh, z.positions, b)
    return PhaseTangent(np.zeros_like(dalpha), dalpha)


def _shift(z: PhasePoint, vec, h) -> PhasePoint:
    t = PhaseTangent.from_vector(vec)
    return PhasePoint(VolEmbedding(z.mesh, z.positions + h * t.dphi), z.alpha + h * t.dalpha)


def flow_right(z: PhasePoint, w: AlgebraElementS, t: float, n_steps: int = 20,
               drift_tol: float = 1e-6) -> PhasePoint:
    """Classical Runge-Kutta integration of :func:`generator_right` for time ``t``."""
    if t == 0:
        return z
    h = t / n_steps
    cur = z
    for _ in range(n_steps):
        k1 = generator_right(cur, w).vector
        k2 = generator_right(_shift(cur, k1, h / 2), w).vector
        k3 = generator_right(_shift(cur, k2, h / 2), w).vector
        k4 = generator_right(_shift(cur, k3, h), w).vector
        cur = _shift(cur, (k1 + 2 * k2 + 2 * k3 + k4) / 6.0, h)
    drift = cur.emb.area_defect()
    if drift > drift_tol * max(abs(t), 1.0):
        raise ConstraintError(f"area drift {drift:.2e} along the flow exceeds {drift_tol:g}*t")
    return PhasePoint(cur.emb, canonical_covector(cur.mesh, cur.positions, cur.alpha))


# ---------------------------------------------------------------------------
# sampling


def random_phase_point(mesh: Mesh, seed: int, amplitude: float = 0.05,
                       alpha_base=(1.0, 0.5), alpha_wiggle: float = 0.3) -> PhasePoint:
    """Seeded phase point near the layout in the non-zero covector regime.

    Positions: the layout plus a smooth random displacement projected onto
    ``T Q``, scaled to ``amplitude`` times the shortest edge, then pulled back
    onto the constraint set.  Covector: a constant plus a smooth bounded wiggle.
    """
    rng = np.random.default_rng(seed)
    x = mesh.layout
    edges = mesh.edges
    hmin = np.linalg.norm(x[edges[:, 1]] - x[edges[:, 0]], axis=1).min()
    k = rng.normal(size=(3, 2, 2))
    raw = np.stack([np.sin(x @ k[0, :, 0] + k[1, 0, 0]) + rng.normal(size=len(x)) * 0.3,
                    np.cos(x @ k[0, :, 1] + k[1, 1, 1]) + rng.normal(size=len(x)) * 0.3], axis=1)
    base = VolEmbedding(mesh, x)
    d = tangent_project(base, raw)
    d *= amplitude * hmin / max(np.abs(d).max(), 1e-300)
    pos = restore_areas(mesh, x + d)
    emb = VolEmbedding(mesh, pos)
    emb.check()
    phase = rng.uniform(0, 2 * np.pi, size=4)
    wig = np.stack([np.sin(2.0 * pos[:, 0] + phase[0]) * np.cos(pos[:, 1] + phase[1]),
                    np.cos(pos[:, 0] + phase[2]) * np.sin(2.0 * pos[:, 1] + phase[3])], axis=1)
    z = new_phase_point(emb, np.asarray(alpha_base) + alpha_wiggle * wig)
    z.require_regime()
    return z
