"""Symplectic linear algebra at a phase point: generator spans, kernels,
symplectic orthogonals and the dual-pair checks built on them.

All subspaces live in the flat ``4V`` tangent coordinates of
:mod:`fbdual.phase` and are stored with Euclidean-orthonormal bases.  Ranks
are decided by singular values with cutoff ``RANK_RTOL * sigma_max``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import momentum, phase
from .catalog import Catalog, make_catalog
from .phase import PhasePoint

RANK_RTOL = 1e-9


@dataclass(frozen=True)
class Subspace:
    basis: np.ndarray  # (n, k), orthonormal columns

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def ambient(self) -> int:
        return self.basis.shape[0]

    def project(self, vec) -> np.ndarray:
        return self.basis @ (self.basis.T @ vec)


def orth(vectors, ambient: int, rtol: float = RANK_RTOL) -> Subspace:
    """Orthonormal basis of the column span, truncated at ``rtol * sigma_max``."""
    M = np.asarray(vectors, dtype=float).reshape(ambient, -1)
    if M.shape[1] == 0:
        return Subspace(np.zeros((ambient, 0)))
    u, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return Subspace(np.zeros((ambient, 0)))
    rank = int(np.sum(s > rtol * s[0]))
    return Subspace(u[:, :rank])


def _null(M, rtol: float = RANK_RTOL) -> np.ndarray:
    M = np.atleast_2d(M)
    n = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(M)
    if s.size == 0 or s[0] == 0:
        return np.eye(n)
    rank = int(np.sum(s > rtol * s[0]))
    return vt[rank:].T


def principal_angle(U: Subspace, V: Subspace) -> float:
    """Largest principal angle; pi/2 when dimensions differ."""
    if U.dim != V.dim:
        return float(np.pi / 2)
    if U.dim == 0:
        return 0.0
    return float(np.max(sla.subspace_angles(U.basis, V.basis)))


def containment_residual(outer: Subspace, inner: Subspace) -> float:
    """Largest distance of a unit vector of ``inner`` from ``outer``."""
    if inner.dim == 0:
        return 0.0
    if outer.dim == 0:
        return 1.0
    r = inner.basis - outer.basis @ (outer.basis.T @ inner.basis)
    return float(np.linalg.norm(r, 2))


def tangent_space(z: PhasePoint) -> Subspace:
    return Subspace(phase.tangent_basis(z))


def span_generators(z: PhasePoint, side: str, items) -> Subspace:
    """``side='left'``: catalog (or iterable of stream fields); ``side='right'``: w-basis."""
    n = 4 * z.mesh.n_vertices
    if side == "left":
        fields = items.fields if isinstance(items, Catalog) else tuple(items)
        vecs = [phase.generator_left(z, f).vector for f in fields]
    elif side == "right":
        vecs = [phase.generator_right(z, w).vector for w in items]
    else:
        raise ValueError("side must be 'left' or 'right'")
    return orth(np.array(vecs).T if vecs else np.zeros((n, 0)), n)


def kernel_subspace(z: PhasePoint, matrix) -> Subspace:
    """Kernel of a linear map restricted to the tangent space at ``z``."""
    B = phase.tangent_basis(z)
    M = np.asarray(matrix, dtype=float)
    if M.shape[0] == 0:
        return Subspace(B)
    N = _null(M @ B)
    return orth(B @ N, B.shape[0])


def symplectic_orthogonal(z: PhasePoint, U: Subspace) -> Subspace:
    B = phase.tangent_basis(z)
    if U.dim == 0:
        return Subspace(B)
    pairing = U.basis.T @ phase.symplectic_matrix(z.mesh) @ B
    return orth(B @ _null(pairing), B.shape[0])


def kernel_TJ_L(z: PhasePoint, catalog: Catalog) -> Subspace:
    return kernel_subspace(z, momentum.TJ_L(z, catalog))


def kernel_TJ_R(z: PhasePoint) -> Subspace:
    return kernel_subspace(z, momentum.TJ_R(z))


# ---------------------------------------------------------------------------
# reports


@dataclass
class DualPairReport:
    kind: str
    dims: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    passed: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def record(self, name: str, value: float, tol: float, pass_if: str = "le"):
        value = float(value)
        self.residuals[name] = value
        self.tolerances[name] = float(tol)
        self.passed[name] = bool(value <= tol) if pass_if == "le" else bool(value >= tol)

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def to_dict(self) -> dict:
        return {"kind": self.kind, "ok": self.ok, "dims": self.dims, "residuals": self.residuals,
                "tolerances": self.tolerances, "passed": self.passed, "extra": self.extra}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_row(self, label: str = "") -> dict:
        row = {"label": label, "kind": self.kind, "ok": int(self.ok)}
        row.update({f"dim_{k}": v for k, v in sorted(self.dims.items())})
        row.update({k: repr(v) for k, v in sorted(self.residuals.items())})
        return row


def write_csv(rows, stream=None) -> str:
    rows = list(rows)
    keys = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    buf = stream or io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue() if stream is None else ""


def _generator_vectors(z, catalog, w_basis):
    left = [phase.generator_left(z, f).vector for f in catalog.fields]
    right = [phase.generator_right(z, w).vector for w in w_basis]
    return left, right


def orthogonality_defect(z: PhasePoint, catalog: Catalog, w_basis) -> float:
    """``max |omega(v_P, w_P)| / (|v_P| |w_P|)`` over catalog fields and w-basis."""
    left, right = _generator_vectors(z, catalog, w_basis)
    Om = phase.symplectic_matrix(z.mesh)
    worst = 0.0
    for lv in left:
        nl = np.linalg.norm(lv)
        for rv in right:
            nr = np.linalg.norm(rv)
            if nl > 0 and nr > 0:
                worst = max(worst, abs(lv @ Om @ rv) / (nl * nr))
    return worst


def kernel_inclusion_defects(z: PhasePoint, catalog: Catalog, w_basis) -> tuple[float, float]:
    """Relative norms ``|TJ_L w_P| / (|TJ_L| |w_P|)`` and ``|TJ_R v_P| / (|TJ_R| |v_P|)``."""
    left, right = _generator_vectors(z, catalog, w_basis)
    TL, TR = momentum.TJ_L(z, catalog), momentum.TJ_R(z)
    nL = np.linalg.norm(TL, 2) if TL.size else 1.0
    nR = np.linalg.norm(TR, 2)
    dL = max((np.linalg.norm(TL @ r) / (nL * np.linalg.norm(r)) for r in right
              if np.linalg.norm(r) > 0 and TL.size), default=0.0)
    dR = max((np.linalg.norm(TR @ v) / (nR * np.linalg.norm(v)) for v in left
              if np.linalg.norm(v) > 0), default=0.0)
    return float(dL), float(dR)


def momentum_fd_defect(z: PhasePoint, catalog: Catalog, w_basis, n_tangents: int = 10,
                       step: float = 1e-6, seed: int = 0) -> float:
    """Relative error of central differences of the momentum pairings against
    ``omega(generator, t)`` along random tangent vectors."""
    rng = np.random.default_rng(seed)
    B = phase.tangent_basis(z)
    left, right = _generator_vectors(z, catalog, w_basis)
    Om = phase.symplectic_matrix(z.mesh)
    V = z.mesh.n_vertices
    fluxes = np.array([w.flux for w in w_basis]) if len(w_basis) else np.zeros((0, z.mesh.n_edges))
    worst = 0.0
    for _ in range(n_tangents):
        t = B @ rng.normal(size=B.shape[1])
        t /= np.linalg.norm(t)

        def at(h):
            return PhasePoint(phase.VolEmbedding(z.mesh, z.positions + h * t[:2 * V].reshape(-1, 2)),
                              z.alpha + h * t[2 * V:].reshape(-1, 2))

        zp, zm = at(step), at(-step)
        fd_l = (momentum.J_L(zp, catalog).pairings - momentum.J_L(zm, catalog).pairings) / (2 * step)
        fd_r = fluxes @ (momentum.J_R(zp).rep.values - momentum.J_R(zm).rep.values) / (2 * step)
        om_l = np.array([g @ Om @ t for g in left])
        om_r = np.array([g @ Om @ t for g in right])
        for fd, om in ((fd_l, om_l), (fd_r, om_r)):
            if om.size:
                scale = max(np.abs(om).max(), np.abs(fd).max(), 1e-300)
                worst = max(worst, np.abs(fd - om).max() / scale)
    return float(worst)


def check_weak_dual_pair(z: PhasePoint, catalog: Catalog, w_basis, tol: float = 1e-7,
                         fd_tol: float = 1e-6) -> DualPairReport:
    """Orthogonality of the two generator spans, kernel inclusions and the
    momentum-map identity.  Violations mark the report failed; they do not raise."""
    z.emb.check()
    report = DualPairReport("weak")
    hM = span_generators(z, "left", catalog)
    gM = span_generators(z, "right", w_basis)
    report.dims.update(tangent=tangent_space(z).dim, h_M=hM.dim, g_M=gM.dim)
    report.record("orthogonality", orthogonality_defect(z, catalog, w_basis), tol)
    dL, dR = kernel_inclusion_defects(z, catalog, w_basis)
    report.record("g_M_in_ker_TJ_L", dL, tol)
    report.record("h_M_in_ker_TJ_R", dR, tol)
    report.record("momentum_map_fd", momentum_fd_defect(z, catalog, w_basis, n_tangents=10), fd_tol)
    return report


def transitivity_defect(z: PhasePoint, catalog: Catalog, w_basis) -> tuple[int, float]:
    """``dim ker TJ_L - dim (g_M ∩ ker TJ_L)`` and the containment residual of g_M in ker TJ_L.

    When g_M lies in ker TJ_L the count is ``dim ker TJ_L - dim g_M``; it is
    zero exactly when the right generators fill the kernel (infinitesimal
    transitivity on J_L level sets).
    """
    z.require_regime()
    kL = kernel_TJ_L(z, catalog)
    gM = span_generators(z, "right", w_basis)
    TL = momentum.TJ_L(z, catalog)
    if gM.dim and TL.size:
        inter = orth(gM.basis @ _null(TL @ gM.basis), gM.ambient)
    else:
        inter = gM
    return kL.dim - inter.dim, containment_residual(kL, gM)


@dataclass
class WitnessReport:
    tj_r_norm: float
    witness_norm: float
    boundary_norm: float
    residuals: dict
    floor: float
    lift_constant: float
    tolerances: dict
    passed: dict
    boundary_match: float = 0.0
    exactness_misfit: float = 0.0

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def to_dict(self) -> dict:
        return {"kind": "witness", "ok": self.ok, "tj_r_norm": self.tj_r_norm,
                "boundary_match": self.boundary_match, "exactness_misfit": self.exactness_misfit,
                "witness_norm": self.witness_norm, "boundary_norm": self.boundary_norm,
                "residual_by_degree": {str(k): v for k, v in self.residuals.items()},
                "residual_floor": self.floor, "lift_constant": self.lift_constant,
                "tolerances": self.tolerances, "passed": self.passed}


def exact_covector(z: PhasePoint, h) -> tuple[np.ndarray, float]:
    """Least-squares canonical covector ``beta`` with ``phi^* beta = d0 h``; returns the misfit.

    ``beta`` is sought inside the canonical subspace ``A(phi) beta = 0`` so the
    vertical lift does not alter it.
    """
    from . import dec

    target = dec.d0_matrix(z.mesh) @ np.asarray(h, dtype=float)
    P = phase.pullback_matrix(z.mesh, z.positions)
    N = sla.null_space(phase.area_gradient_matrix(z.mesh, z.positions))
    beta = N @ sla.lstsq(P @ N, target)[0]
    return beta.reshape(-1, 2), float(np.linalg.norm(P @ beta - target))


def nontransitivity_witness(z: PhasePoint, h, catalog_family: str = "trig", degrees=range(1, 7),
                            tj_tol: float = 1e-9, ratio: float = 0.5,
                            small: float | None = None) -> WitnessReport:
    """Vertical lift of a covector whose pullback is ``d0 h`` and its distance from h_M.

    ``h`` must be non-constant on the boundary; otherwise the lift is
    class-trivial in the continuum and the witness is meaningless.
    """
    h = np.asarray(h, dtype=float)
    bnd = z.mesh.boundary_vertices
    if np.ptp(h[bnd]) <= 1e-12 * max(np.abs(h).max(), 1.0):
        raise ValueError("h must be non-constant on the boundary")
    beta, misfit = exact_covector(z, h)
    wit = phase.vertical_lift(z, beta).vector
    wnorm = float(np.linalg.norm(wit))
    tj = float(np.linalg.norm(momentum.TJ_R(z) @ wit))

    from . import dec

    bedges = np.array([z.mesh.edge_index[(min(i, j), max(i, j))] for i, j in z.mesh.boundary_edges])
    Pb = phase.pullback_matrix(z.mesh, z.positions)[bedges]
    boundary_norm = float(np.linalg.norm((dec.d0_matrix(z.mesh) @ h)[bedges]))

    residuals, lift_constant = {}, 0.0
    for deg in degrees:
        cat = make_catalog(catalog_family, deg)
        hM = span_generators(z, "left", cat)
        residuals[int(deg)] = float(np.linalg.norm(wit - hM.project(wit)))
    # boundary lift bound: the boundary pullback of dalpha is controlled by the size of v at the vertices
    cat = make_catalog(catalog_family, max(degrees))
    for f in cat.fields:
        eps_v = float(np.abs(f.velocity(z.positions)).max())
        b_v = float(np.linalg.norm(Pb @ phase.generator_left(z, f).dalpha.ravel()))
        if eps_v > 0 and (small is None or eps_v <= small):
            lift_constant = max(lift_constant, b_v / max(eps_v, 1e-300))
    floor = min(residuals.values()) if residuals else 0.0
    boundary_match = float(np.linalg.norm(Pb @ beta.ravel() - (dec.d0_matrix(z.mesh) @ h)[bedges]))
    tolerances = {"tj_r": tj_tol, "residual_ratio": ratio, "boundary_match": 1e-9}
    passed = {"tj_r": tj <= tj_tol,
              "residual_floor": floor >= ratio * wnorm,
              "boundary_norm_positive": boundary_norm > 0,
              "boundary_match": boundary_match <= 1e-9}
    return WitnessReport(tj, wnorm, boundary_norm, residuals, floor, lift_constant, tolerances, passed,
                         boundary_match, misfit)


def check_pi_R_dual_pair(z: PhasePoint, catalog: Catalog, w_basis, tol: float = 1e-6,
                         degrees=range(1, 7)) -> DualPairReport:
    """``(g_M)^omega = ker TJ_R`` plus the transitivity-defect trend over catalog degrees."""
    z.require_regime()
    report = DualPairReport("pi_R")
    gM = span_generators(z, "right", w_basis)
    g_omega = symplectic_orthogonal(z, gM)
    kR = kernel_TJ_R(z)
    report.dims.update(tangent=tangent_space(z).dim, g_M=gM.dim, g_M_omega=g_omega.dim, ker_TJ_R=kR.dim)
    report.record("g_M_omega_vs_ker_TJ_R", principal_angle(g_omega, kR), tol)
    trend = [transitivity_defect(z, make_catalog(catalog.family if catalog.family in ("poly", "trig")
                                                 else "trig", d), w_basis)[0] for d in degrees]
    report.extra["defect_by_degree"] = {str(d): int(v) for d, v in zip(degrees, trend)}
    monotone = all(b <= a for a, b in zip(trend, trend[1:]))
    report.record("defect_monotone_violation", 0.0 if monotone else 1.0, 0.0)
    hM = span_generators(z, "left", catalog)
    report.dims["h_M"] = hM.dim
    report.extra["h_M_omega_vs_g_M"] = principal_angle(symplectic_orthogonal(z, hM), gM)
    return report
