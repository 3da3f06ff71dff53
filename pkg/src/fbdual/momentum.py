"""Left and right momentum maps of the embedding phase space and their tangent maps.

``J_L`` is truncated to pairings against a finite stream catalog; ``J_R`` is the
class of the pulled-back covector modulo exact forms.  Tangent maps act on the
flat ``4V`` tangent coordinates of :mod:`fbdual.phase`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dec
from .catalog import Catalog
from .phase import PhasePoint, left_pairing_gradient, pullback, pullback_matrix


@dataclass(frozen=True)
class LeftMomentumValue:
    pairings: np.ndarray
    catalog_id: dict

    def to_dict(self) -> dict:
        return {"catalog": self.catalog_id, "pairings": [float(x) for x in self.pairings]}


@dataclass(frozen=True)
class RightMomentumValue:
    rep: dec.DiscreteForm

    def to_dict(self) -> dict:
        return self.rep.to_dict()


def J_L(z: PhasePoint, catalog: Catalog) -> LeftMomentumValue:
    m = z.mesh.vertex_mass
    vel = catalog.velocities(z.positions)
    pairings = np.einsum("s,fsk,sk->f", m, vel, z.alpha) if len(catalog) else np.zeros(0)
    return LeftMomentumValue(pairings, catalog.to_dict())


def J_R(z: PhasePoint) -> RightMomentumValue:
    return RightMomentumValue(dec.quotient_project(z.mesh, pullback(z.emb, z.alpha), "h-free"))


def TJ_L(z: PhasePoint, catalog: Catalog) -> np.ndarray:
    """``F x 4V``; row ``i`` is ``t -> sum_s m_s (dalpha_s . v_i + alpha_s . Dv_i dphi_s)``."""
    if not len(catalog):
        return np.zeros((0, 4 * z.mesh.n_vertices))
    return np.stack([left_pairing_gradient(z, f) for f in catalog.fields])


def pullback_position_derivative(z: PhasePoint) -> np.ndarray:
    """``E x 2V`` derivative of ``phi -> phi^* alpha`` at fixed ``alpha``."""
    mesh = z.mesh
    edges = mesh.edges
    abar = 0.5 * (z.alpha[edges[:, 0]] + z.alpha[edges[:, 1]])
    D = np.zeros((len(edges), 2 * mesh.n_vertices))
    rows = np.arange(len(edges))
    for k in (0, 1):
        D[rows, 2 * edges[:, 1] + k] += abar[:, k]
        D[rows, 2 * edges[:, 0] + k] -= abar[:, k]
    return D


def TJ_R(z: PhasePoint) -> np.ndarray:
    """``E x 4V``: the h-free quotient projector applied to the linearised pullback."""
    Q = dec.quotient_matrix(z.mesh, "h-free")
    lin = np.hstack([pullback_position_derivative(z), pullback_matrix(z.mesh, z.positions)])
    return Q @ lin


def to_row_major(matrix: np.ndarray) -> dict:
    """Dense row-major export used for debugging dumps."""
    a = np.asarray(matrix, dtype=float)
    return {"rows": int(a.shape[0]), "cols": int(a.shape[1]), "data": [float(x) for x in a.ravel()]}
