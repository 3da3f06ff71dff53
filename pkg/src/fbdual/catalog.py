"""Divergence-free vector fields on the plane from analytic stream functions.

Every field is ``v = (-d psi/dy, d psi/dx)``, so ``psi = (x^2 + y^2) / 2`` is the
counterclockwise rigid rotation.  Fields carry exact first derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _power(a):
    def f(t):
        t = np.asarray(t, dtype=float)
        v = t ** a
        d1 = a * t ** (a - 1) if a >= 1 else np.zeros_like(t)
        d2 = a * (a - 1) * t ** (a - 2) if a >= 2 else np.zeros_like(t)
        return v, d1, d2
    return f


def _trig(kind, k):
    w = np.pi * k

    def f(t):
        t = np.asarray(t, dtype=float)
        if kind == "sin":
            return np.sin(w * t), w * np.cos(w * t), -w * w * np.sin(w * t)
        return np.cos(w * t), -w * np.sin(w * t), -w * w * np.cos(w * t)
    return f


@dataclass(frozen=True)
class StreamField:
    """Separable stream function ``psi(x, y) = scale * fx(x) * fy(y)``."""

    label: str
    fx: object
    fy: object
    scale: float = 1.0

    def psi(self, points):
        p = np.asarray(points, dtype=float)
        return self.scale * self.fx(p[..., 0])[0] * self.fy(p[..., 1])[0]

    def velocity(self, points):
        p = np.asarray(points, dtype=float)
        X, dX, _ = self.fx(p[..., 0])
        Y, dY, _ = self.fy(p[..., 1])
        return self.scale * np.stack([-X * dY, dX * Y], axis=-1)

    def jacobian(self, points):
        """``J[..., i, j] = d v_i / d x_j``."""
        p = np.asarray(points, dtype=float)
        X, dX, ddX = self.fx(p[..., 0])
        Y, dY, ddY = self.fy(p[..., 1])
        psi_xy = dX * dY
        J = np.empty(p.shape[:-1] + (2, 2))
        J[..., 0, 0] = -psi_xy
        J[..., 0, 1] = -X * ddY
        J[..., 1, 0] = ddX * Y
        J[..., 1, 1] = psi_xy
        return self.scale * J

    def scaled(self, factor: float) -> "StreamField":
        return StreamField(f"{factor:g}*{self.label}", self.fx, self.fy, self.scale * factor)


def monomial(a: int, b: int, scale: float = 1.0) -> StreamField:
    return StreamField(f"x^{a} y^{b}", _power(a), _power(b), scale)


def trig_mode(kx: str, a: int, ky: str, b: int) -> StreamField:
    return StreamField(f"{kx}({a}pi x) {ky}({b}pi y)", _trig(kx, a), _trig(ky, b))


def rotation(omega: float = 1.0) -> list[StreamField]:
    """Rigid rotation ``omega * (-y, x)`` as a sum of two stream fields."""
    return [monomial(2, 0, 0.5 * omega), monomial(0, 2, 0.5 * omega)]


@dataclass(frozen=True)
class Catalog:
    family: str
    degree: int
    fields: tuple

    def __len__(self):
        return len(self.fields)

    def velocities(self, points) -> np.ndarray:
        """Shape ``(F, ...points, 2)``."""
        p = np.asarray(points, dtype=float)
        if not self.fields:
            return np.zeros((0,) + p.shape)
        return np.stack([f.velocity(p) for f in self.fields])

    def jacobians(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        if not self.fields:
            return np.zeros((0,) + p.shape + (2,))
        return np.stack([f.jacobian(p) for f in self.fields])

    def to_dict(self) -> dict:
        return {"family": self.family, "degree": self.degree}


def make_catalog(family: str = "trig", degree: int = 2) -> Catalog:
    """Stream catalogs, nested in ``degree``; degree 0 holds only the constant fields.

    ``poly``: ``psi = x^a y^b`` with ``1 <= a + b <= degree + 1`` (fields of
    polynomial degree <= ``degree``).  ``trig``: ``psi = x``, ``psi = y`` and
    ``f(a pi x) g(b pi y)`` for ``f, g`` in {sin, cos} with ``1 <= a + b <= degree``.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    fields = [monomial(1, 0), monomial(0, 1)]
    if family == "poly":
        for total in range(2, degree + 2):
            for a in range(total, -1, -1):
                fields.append(monomial(a, total - a))
    elif family == "trig":
        for total in range(1, degree + 1):
            for a in range(total, -1, -1):
                b = total - a
                for kx in ("sin", "cos"):
                    if a == 0 and kx == "sin":
                        continue
                    for ky in ("sin", "cos"):
                        if b == 0 and ky == "sin":
                            continue
                        fields.append(trig_mode(kx, a, ky, b))
    else:
        raise ValueError(f"unknown catalog family {family!r}")
    return Catalog(family, degree, tuple(fields))


def custom_catalog(fields, family: str = "custom") -> Catalog:
    return Catalog(family, -1, tuple(fields))
