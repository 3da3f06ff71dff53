"""Free-boundary incompressible Euler flow with surface tension on a material mesh.

Vertices are material particles: ``FluidState.velocity[s]`` is the Eulerian
velocity evaluated at ``phi(s)``.  Because the mesh moves with the flow, the
time derivative of the stored velocity is already the material derivative,
so a step applies only the pressure force; an extra ``(v . grad) v`` term would
advect twice.  The pressure carries the Young-Laplace condition ``p = tau * kappa``
on the free boundary.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import dec
from .catalog import monomial
from .mesh import Mesh, load_mesh, signed_areas
from .momentum import RightMomentumValue
from .phase import AlgebraElementS, VolEmbedding, pullback

log = logging.getLogger(__name__)

GUARD_FRACTION = 0.2


class StepRejected(RuntimeError):
    """A step would move some vertex further than the stability guard allows."""


class InversionError(RuntimeError):
    """A step inverted a triangle."""


@dataclass(frozen=True, eq=False)
class FluidState:
    emb: VolEmbedding
    velocity: np.ndarray
    tau: float = 0.0
    time: float = 0.0
    pressure: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.velocity, dtype=float).reshape(self.emb.mesh.n_vertices, 2)
        object.__setattr__(self, "velocity", v)
        if self.tau < 0:
            raise ValueError("surface tension must be non-negative")

    @property
    def mesh(self) -> Mesh:
        return self.emb.mesh

    @property
    def domain(self) -> dec.EmbeddedDomain:
        return self.emb.domain

    def divergence_defect(self) -> float:
        """Largest weak divergence against interior test functions."""
        B = dec.weak_divergence_matrix(self.domain)
        inner = self.mesh.interior_vertices
        if inner.size == 0:
            return 0.0
        return float(np.abs(B[inner] @ self.velocity.ravel()).max())


@dataclass(frozen=True)
class Diagnostics:
    energy: float
    kinetic: float
    volume: float
    perimeter: float
    vorticity: np.ndarray
    jr_class: RightMomentumValue
    normal_speed: np.ndarray
    max_speed: float

    def to_dict(self) -> dict:
        return {"energy": self.energy, "kinetic": self.kinetic, "volume": self.volume,
                "perimeter": self.perimeter, "max_speed": self.max_speed,
                "vorticity": [float(x) for x in self.vorticity],
                "jr_class": self.jr_class.to_dict(),
                "normal_speed": [float(x) for x in self.normal_speed]}


# ---------------------------------------------------------------------------
# boundary geometry


def _loop_curvature(points: np.ndarray) -> np.ndarray:
    """Turning angle over half the adjacent edge lengths, for a loop traversed
    with the fluid on its left."""
    if len(points) < 3:
        raise ValueError("boundary loop needs at least 3 vertices")
    e_in = points - np.roll(points, 1, axis=0)
    e_out = np.roll(points, -1, axis=0) - points
    l_in = np.hypot(e_in[:, 0], e_in[:, 1])
    l_out = np.hypot(e_out[:, 0], e_out[:, 1])
    if min(l_in.min(), l_out.min()) <= 1e-14:
        bad = int(np.argmin(np.minimum(l_in, l_out)))
        raise dec.DegenerateTriangleError(f"zero-length boundary edge at loop position {bad}")
    cross = e_in[:, 0] * e_out[:, 1] - e_in[:, 1] * e_out[:, 0]
    dot = np.sum(e_in * e_out, axis=1)
    return np.arctan2(cross, dot) / (0.5 * (l_in + l_out))


def polygon_curvature(points) -> np.ndarray:
    """Curvature of a closed polygon, positive where it is convex, whatever its orientation."""
    p = np.asarray(points, dtype=float)
    x, y = p[:, 0], p[:, 1]
    signed = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    k = _loop_curvature(p)
    return k if signed >= 0 else -k


def curvature(domain: dec.EmbeddedDomain) -> np.ndarray:
    """Per-vertex boundary curvature, indexed like ``mesh.boundary_vertices``.

    The outer boundary of a convex body is positive; a circular hole is negative,
    as seen from the fluid.
    """
    mesh = domain.mesh
    kappa = np.zeros(mesh.n_vertices)
    for loop in mesh.boundary_loops:
        kappa[loop] = _loop_curvature(domain.positions[loop])
    return kappa[mesh.boundary_vertices]


def area_normals(domain: dec.EmbeddedDomain) -> np.ndarray:
    """``N_s = 1/2 sum |e| n_e`` over the boundary edges at ``s``; ``sum_s u_s . N_s``
    is exactly the rate of change of enclosed area under a P1 velocity ``u``."""
    N = np.zeros((domain.mesh.n_vertices, 2))
    p = domain.positions
    for i, j in domain.mesh.boundary_edges:
        e = p[j] - p[i]
        n = 0.5 * np.array([e[1], -e[0]])
        N[i] += n
        N[j] += n
    return N


def normal_speed(domain: dec.EmbeddedDomain, u) -> np.ndarray:
    """Boundary normal speed ``u . N_s / |dual_s|`` per boundary vertex."""
    u = np.asarray(u, dtype=float).reshape(-1, 2)
    _, dual = dec.boundary_normals(domain)
    bnd = domain.mesh.boundary_vertices
    N = area_normals(domain)
    return np.sum(u[bnd] * N[bnd], axis=1) / dual[bnd]


def perimeter(domain: dec.EmbeddedDomain) -> float:
    p = domain.positions
    e = domain.mesh.boundary_edges
    return float(np.sum(np.linalg.norm(p[e[:, 1]] - p[e[:, 0]], axis=1)))


# ---------------------------------------------------------------------------
# Neumann connection


def deformation_gradient(emb: VolEmbedding) -> np.ndarray:
    """Per-vertex ``(V, 2, 2)`` deformation gradient of layout -> positions,
    reference-mass averaged from triangles."""
    mesh = emb.mesh
    tri = mesh.triangles
    X, x = mesh.layout, emb.positions
    dX = np.stack([X[tri[:, 1]] - X[tri[:, 0]], X[tri[:, 2]] - X[tri[:, 0]]], axis=2)
    dx = np.stack([x[tri[:, 1]] - x[tri[:, 0]], x[tri[:, 2]] - x[tri[:, 0]]], axis=2)
    F_tri = dx @ np.linalg.inv(dX)
    ref = np.abs(signed_areas(X, tri))
    F = np.zeros((mesh.n_vertices, 2, 2))
    np.add.at(F, tri.ravel(), np.repeat(F_tri * (ref / 3.0)[:, None, None], 3, axis=0))
    weight = np.zeros(mesh.n_vertices)
    np.add.at(weight, tri.ravel(), np.repeat(ref / 3.0, 3))
    return F / weight[:, None, None]


@dataclass(frozen=True, eq=False)
class ConnectionSplit:
    """Vertical and horizontal parts of a tangent vector to the embedding space.

    ``w_vertex`` is the divergence-free part pulled back to the layout;
    ``w`` is its best edge-flux representative.
    """

    normal_speed: np.ndarray
    w_vertex: np.ndarray
    w: AlgebraElementS
    u_par: np.ndarray
    grad_part: np.ndarray
    potential: np.ndarray
    deformation: np.ndarray
    flux_fit_residual: float

    def reconstruct(self) -> np.ndarray:
        """``F w + grad_part``, the original tangent vector."""
        return np.einsum("sij,sj->si", self.deformation, self.w_vertex) + self.grad_part

    def to_dict(self) -> dict:
        def rows(a):
            return [[float(x) for x in r] for r in np.asarray(a)]
        return {"tangent_part": rows(self.u_par), "gradient_part": rows(self.grad_part),
                "potential": [float(x) for x in self.potential],
                "boundary_normal_speed": [float(x) for x in self.normal_speed],
                "w_layout": rows(self.w_vertex),
                "w_flux": [float(x) for x in self.w.flux],
                "w_flux_fit_residual": self.flux_fit_residual}


def _flux_fit(mesh: Mesh, w_vertex: np.ndarray) -> tuple[AlgebraElementS, float]:
    c = dec._cache(mesh)
    if "flux_null" not in c:
        import scipy.linalg as sla
        c["flux_null"] = sla.null_space(dec.d0_matrix(mesh).toarray().T)
    N = c["flux_null"]
    if N.shape[1] == 0:
        return AlgebraElementS(mesh, np.zeros(mesh.n_edges)), float(np.linalg.norm(w_vertex))
    from .phase import pullback_matrix
    G = (pullback_matrix(mesh, mesh.layout).T @ N) / np.repeat(mesh.vertex_mass, 2)[:, None]
    coef, *_ = np.linalg.lstsq(G, w_vertex.ravel(), rcond=None)
    resid = float(np.linalg.norm(G @ coef - w_vertex.ravel()))
    return AlgebraElementS(mesh, N @ coef), resid


def connection_split(emb: VolEmbedding, v_phi, cfg: dec.LinearSolverConfig = dec.DEFAULT_SOLVER
                     ) -> ConnectionSplit:
    u = np.asarray(v_phi, dtype=float).reshape(emb.mesh.n_vertices, 2)
    domain = emb.domain
    u_par, grad, p = dec.helmholtz_project(domain, u, cfg)
    F = deformation_gradient(emb)
    w_vertex = np.linalg.solve(F, u_par[..., None])[..., 0]
    w, resid = _flux_fit(emb.mesh, w_vertex)
    return ConnectionSplit(normal_speed(domain, u), w_vertex, w, u_par, grad, p, F, resid)


# ---------------------------------------------------------------------------
# time stepping


def project_divergence_free(domain: dec.EmbeddedDomain, v, cfg: dec.LinearSolverConfig = dec.DEFAULT_SOLVER
                            ) -> np.ndarray:
    """Mass-orthogonal projection onto fields weakly divergence free against interior
    test functions (pressure correction with zero Dirichlet data) and with zero net
    boundary flux, so that the enclosed area is stationary."""
    v = np.asarray(v, dtype=float).reshape(-1, 2)
    inner = domain.mesh.interior_vertices
    flux_row = sp.csr_matrix(area_normals(domain).reshape(1, -1))
    B = sp.vstack([dec.weak_divergence_matrix(domain)[inner], flux_row]).tocsr()
    minv = np.repeat(1.0 / domain.vertex_mass, 2)
    L = B @ sp.diags(minv) @ B.T
    q = dec._solve(L, B @ v.ravel(), cfg)
    return v - (minv * (B.T @ q)).reshape(-1, 2)


def pressure(state: FluidState, cfg: dec.LinearSolverConfig = dec.DEFAULT_SOLVER) -> np.ndarray:
    """``Laplace p = -tr(Dv Dv)`` with ``p = tau * kappa`` on the boundary."""
    domain = state.domain
    J = dec.vertex_jacobian(domain, state.velocity)
    rhs = -np.einsum("sij,sji->s", J, J)
    bc = state.tau * curvature(domain) if state.tau else np.zeros(state.mesh.boundary_vertices.size)
    return dec.poisson_dirichlet(domain, rhs, bc, cfg)


def _guard(mesh: Mesh, positions, disp) -> None:
    e = mesh.edges
    lengths = np.linalg.norm(positions[e[:, 1]] - positions[e[:, 0]], axis=1)
    shortest = np.full(mesh.n_vertices, np.inf)
    np.minimum.at(shortest, e[:, 0], lengths)
    np.minimum.at(shortest, e[:, 1], lengths)
    ratio = np.linalg.norm(disp, axis=1) / shortest
    worst = int(np.argmax(ratio))
    if ratio[worst] > GUARD_FRACTION:
        raise StepRejected(f"vertex {worst} would move {ratio[worst]:.3g} of its shortest incident edge "
                           f"(limit {GUARD_FRACTION}); reduce dt")


def correct_volume(domain: dec.EmbeddedDomain, target: float, n_iter: int = 5) -> np.ndarray:
    """Uniform normal displacement of the boundary restoring the enclosed area."""
    mesh = domain.mesh
    pos = domain.positions.copy()
    bnd = mesh.boundary_vertices
    for _ in range(n_iter):
        d = dec.EmbeddedDomain(mesh, pos)
        area = float(d.areas.sum())
        if abs(area - target) <= 1e-15 * target:
            break
        N = area_normals(d)
        rate = float(np.sum(np.linalg.norm(N[bnd], axis=1)))
        normals, _ = dec.boundary_normals(d)
        pos[bnd] += (target - area) / rate * normals[bnd]
    return pos


def step(state: FluidState, dt: float, volume_correction: bool = False, target_volume: float | None = None,
         cfg: dec.LinearSolverConfig = dec.DEFAULT_SOLVER) -> FluidState:
    """One explicit projection step; returns a new state."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    mesh = state.mesh
    domain = state.domain
    domain.check()
    p = pressure(state, cfg)
    v = state.velocity - dt * dec.vertex_gradient(domain, p)
    disp = dt * v
    _guard(mesh, domain.positions, disp)
    pos = domain.positions + disp
    areas = signed_areas(pos, mesh.triangles)
    if np.any(areas <= 0):
        bad = int(np.flatnonzero(areas <= 0)[0])
        raise InversionError(f"triangle {bad} inverted (signed area {areas[bad]:.3e})")
    if volume_correction:
        target = mesh.total_area() if target_volume is None else target_volume
        pos = correct_volume(dec.EmbeddedDomain(mesh, pos), target)
        log.debug("volume correction applied at t=%.6g", state.time + dt)
    new_domain = dec.EmbeddedDomain(mesh, pos)
    v = project_divergence_free(new_domain, v, cfg)
    return FluidState(VolEmbedding(mesh, pos), v, state.tau, state.time + dt, p)


def diagnostics(state: FluidState) -> Diagnostics:
    domain = state.domain
    v = state.velocity
    kinetic = 0.5 * float(np.sum(domain.vertex_mass * np.sum(v * v, axis=1)))
    per = perimeter(domain)
    flat = pullback(state.emb, v)
    vort = dec.d1(state.mesh, flat).values
    jr = RightMomentumValue(dec.quotient_project(state.mesh, flat, "h-free"))
    return Diagnostics(energy=kinetic + state.tau * per, kinetic=kinetic, volume=float(domain.areas.sum()),
                       perimeter=per, vorticity=vort, jr_class=jr,
                       normal_speed=normal_speed(domain, v),
                       max_speed=float(np.linalg.norm(v, axis=1).max()))


# ---------------------------------------------------------------------------
# runs


TRAJECTORY_COLUMNS = ("step", "time", "energy", "volume", "perimeter", "max_speed",
                      "jr_drift", "vorticity_drift", "pressure_at_centroid")


@dataclass(frozen=True)
class RunConfig:
    mesh: str | None = None
    tau: float = 0.0
    dt: float = 1e-3
    steps: int = 100
    volume_correction: bool = False
    initial_velocity: dict = field(default_factory=lambda: {"type": "zero"})

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {k: data[k] for k in ("mesh", "tau", "dt", "steps", "volume_correction", "initial_velocity")
                 if k in data}
        extra = set(data) - set(known)
        if extra:
            raise ValueError(f"unknown run config keys: {sorted(extra)}")
        cfg = cls(**known)
        if cfg.dt <= 0 or cfg.steps < 0 or cfg.tau < 0:
            raise ValueError("dt must be positive, steps and tau non-negative")
        return cfg

    def to_dict(self) -> dict:
        return {"mesh": self.mesh, "tau": self.tau, "dt": self.dt, "steps": self.steps,
                "volume_correction": self.volume_correction, "initial_velocity": self.initial_velocity}


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return RunConfig.from_dict(json.load(fh))


def initial_velocity(mesh: Mesh, positions, spec: dict) -> np.ndarray:
    """``zero``, ``rotation`` (``omega``) or ``stream`` (monomial ``a``, ``b``, ``scale``)."""
    kind = spec.get("type", "zero")
    x = np.asarray(positions, dtype=float)
    if kind == "zero":
        return np.zeros_like(x)
    if kind == "rotation":
        omega = float(spec.get("omega", 1.0))
        return omega * np.stack([-x[:, 1], x[:, 0]], axis=1)
    if kind == "stream":
        return monomial(int(spec["a"]), int(spec["b"]), float(spec.get("scale", 1.0))).velocity(x)
    raise ValueError(f"unknown initial velocity type {kind!r}")


def initial_state(mesh: Mesh, config: RunConfig, project: bool = True) -> FluidState:
    emb = VolEmbedding.identity(mesh)
    v = initial_velocity(mesh, emb.positions, config.initial_velocity)
    if project:
        v = project_divergence_free(emb.domain, v)
    return FluidState(emb, v, config.tau, 0.0)


def _centroid_vertex(domain: dec.EmbeddedDomain) -> int:
    areas = domain.areas
    c = (domain.positions[domain.mesh.triangles].mean(axis=1) * areas[:, None]).sum(axis=0) / areas.sum()
    return int(np.argmin(np.linalg.norm(domain.positions - c, axis=1)))


def run(state: FluidState, dt: float, steps: int, volume_correction: bool = False, callback=None):
    """Fold ``step`` over ``steps`` steps.  Returns ``(final_state, rows)`` where each row
    matches :data:`TRAJECTORY_COLUMNS`.  On failure the exception carries ``step_index``."""
    d0 = diagnostics(state)
    jr0 = d0.jr_class.rep.values
    jr_scale = max(np.linalg.norm(jr0), 1e-300)
    vort_scale = max(np.abs(d0.vorticity).max(), 1e-300)
    target = d0.volume
    rows = []
    for k in range(1, steps + 1):
        try:
            state = step(state, dt, volume_correction, target)
        except (StepRejected, InversionError, dec.SolverError) as exc:
            exc.step_index = k
            raise
        d = diagnostics(state)
        c = _centroid_vertex(state.domain)
        rows.append({"step": k, "time": state.time, "energy": d.energy, "volume": d.volume,
                     "perimeter": d.perimeter, "max_speed": d.max_speed,
                     "jr_drift": float(np.linalg.norm(d.jr_class.rep.values - jr0) / jr_scale)
                     if np.linalg.norm(jr0) > 0 else float(np.linalg.norm(d.jr_class.rep.values)),
                     "vorticity_drift": float(np.abs(d.vorticity - d0.vorticity).max() / vort_scale)
                     if np.abs(d0.vorticity).max() > 0 else float(np.abs(d.vorticity).max()),
                     "pressure_at_centroid": float(state.pressure[c])})
        if callback is not None:
            callback(k, state, d)
    return state, rows


def write_trajectory(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAJECTORY_COLUMNS)
        for r in rows:
            writer.writerow([r["step"]] + [f"{r[c]:.12e}" for c in TRAJECTORY_COLUMNS[1:]])


def simulate(config: RunConfig, mesh: Mesh | None = None, callback=None):
    """Load the mesh named in ``config`` (unless given), build the initial state and run."""
    if mesh is None:
        if config.mesh is None:
            raise ValueError("run config names no mesh")
        mesh = load_mesh(Path(config.mesh))
    state = initial_state(mesh, config)
    return run(state, config.dt, config.steps, config.volume_correction, callback)


def with_velocity(state: FluidState, velocity) -> FluidState:
    return replace(state, velocity=np.asarray(velocity, dtype=float))
