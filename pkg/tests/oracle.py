"""Brute-force reference computations, written without the package internals.

Only the mesh connectivity, the layout and the phase point's raw arrays are
taken from the package.  Everything else (areas, masses, constraint
Jacobians, gradients of the pairing functions, tangent spaces, Hamiltonian
vector fields, kernels and symplectic orthogonals) is rebuilt here by other
means: explicit loops, complex-step differentiation and eigen-decompositions.
"""

from __future__ import annotations

import numpy as np

CS = 1e-30  # complex-step size


def tri_areas(points, triangles):
    out = []
    for a, b, c in triangles:
        (x0, y0), (x1, y1), (x2, y2) = points[a], points[b], points[c]
        out.append(0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)))
    return np.array(out)


def lumped_mass(layout, triangles):
    m = np.zeros(len(layout))
    for t, area in zip(triangles, tri_areas(layout, triangles)):
        for s in t:
            m[s] += area / 3.0
    return m


def edge_list(triangles):
    edges = set()
    for a, b, c in triangles:
        for i, j in ((a, b), (b, c), (c, a)):
            edges.add((min(i, j), max(i, j)))
    return sorted(edges)


def complex_step_jacobian(fun, x):
    """Jacobian of a real-analytic vector function by complex steps."""
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(fun(x.astype(complex)))
    J = np.zeros((f0.size, x.size))
    for k in range(x.size):
        xc = x.astype(complex)
        xc[k] += 1j * CS
        J[:, k] = np.imag(np.atleast_1d(fun(xc))) / CS
    return J


def null_space(M, rtol=1e-6):
    """Null space from the eigen-decomposition of ``M^T M``.

    Squaring the matrix limits the resolvable singular values to about
    ``sqrt(eps) * sigma_max``, hence the loose default cutoff.
    """
    M = np.atleast_2d(M)
    n = M.shape[1]
    if M.size == 0 or not np.any(M):
        return np.eye(n)
    w, V = np.linalg.eigh(M.T @ M)
    cut = (rtol * np.sqrt(max(w.max(), 0.0))) ** 2
    return V[:, w <= cut]


def col_space(M, rtol=1e-6):
    M = np.atleast_2d(M)
    if M.size == 0 or not np.any(M):
        return np.zeros((M.shape[0], 0))
    w, V = np.linalg.eigh(M @ M.T)
    return V[:, w > (rtol * np.sqrt(w.max())) ** 2]


def intersection_dim(U, W, tol=1e-8):
    """Number of principal angles below ``tol`` (cosines via a plain SVD)."""
    if U.shape[1] == 0 or W.shape[1] == 0:
        return 0
    s = np.linalg.svd(U.T @ W, compute_uv=False)
    return int(np.sum(s > np.cos(tol)))


# ---------------------------------------------------------------------------
# stream fields written out by hand


def trig_streams(degree):
    """``(kx, a, ky, b)`` tuples; ``("x",)`` and ``("y",)`` are the linear stream functions."""
    out = [("x",), ("y",)]
    for total in range(1, degree + 1):
        for a in range(total + 1):
            b = total - a
            for kx in ("sin", "cos"):
                for ky in ("sin", "cos"):
                    if (a == 0 and kx == "sin") or (b == 0 and ky == "sin"):
                        continue
                    out.append((kx, a, ky, b))
    return out


def _f(kind, k, t):
    w = np.pi * k
    if kind == "sin":
        return np.sin(w * t), w * np.cos(w * t)
    return np.cos(w * t), -w * np.sin(w * t)


def stream_velocity(spec, x, y):
    if spec == ("x",):
        return 0 * x, 0 * x + 1.0
    if spec == ("y",):
        return 0 * x - 1.0, 0 * x
    kx, a, ky, b = spec
    X, dX = _f(kx, a, x)
    Y, dY = _f(ky, b, y)
    return -X * dY, dX * Y


# ---------------------------------------------------------------------------
# phase space


class Oracle:
    """Reference linear algebra at ``(phi, alpha)`` on one mesh."""

    def __init__(self, layout, triangles, positions, alpha):
        self.layout = np.asarray(layout, dtype=float)
        self.tri = [tuple(int(s) for s in t) for t in triangles]
        self.V = len(self.layout)
        self.phi = np.asarray(positions, dtype=float)
        self.alpha = np.asarray(alpha, dtype=float)
        self.mass = lumped_mass(self.layout, self.tri)
        self.edges = edge_list(self.tri)
        self.z = np.concatenate([self.phi.ravel(), self.alpha.ravel()])

    # constraint map F(phi, alpha) = (areas(phi), d/deps areas(phi + eps alpha))
    def constraint(self, z):
        V = self.V
        phi = z[:2 * V].reshape(V, 2)
        alpha = z[2 * V:].reshape(V, 2)
        areas = tri_areas(phi, self.tri)
        # areas are quadratic, so the central difference with unit step is exact
        lin = 0.5 * (tri_areas(phi + alpha, self.tri) - tri_areas(phi - alpha, self.tri))
        return np.concatenate([areas, lin])

    def tangent(self):
        C = complex_step_jacobian(self.constraint, self.z)
        return null_space(C)

    def omega(self, t1, t2):
        V = self.V
        out = 0.0
        for s in range(V):
            for k in range(2):
                i, j = 2 * s + k, 2 * V + 2 * s + k
                out += self.mass[s] * (t1[i] * t2[j] - t2[i] * t1[j])
        return out

    def omega_matrix(self):
        n = 4 * self.V
        Om = np.zeros((n, n))
        E = np.eye(n)
        for a in range(n):
            for b in range(n):
                Om[a, b] = self.omega(E[a], E[b])
        return Om

    def hamiltonian(self, grad):
        """``X`` in the tangent space with ``omega(X, t) = grad . t`` for tangent ``t``."""
        T = self.tangent()
        Om = self.omega_matrix()
        K = T.T @ Om @ T
        y = np.linalg.solve(K.T, T.T @ grad)
        return T @ y

    # pairing functions
    def H_left(self, spec):
        V = self.V

        def H(z):
            phi = z[:2 * V].reshape(V, 2)
            alpha = z[2 * V:].reshape(V, 2)
            vx, vy = stream_velocity(spec, phi[:, 0], phi[:, 1])
            return np.sum(self.mass * (alpha[:, 0] * vx + alpha[:, 1] * vy))
        return H

    def pullback(self, z):
        V = self.V
        phi = z[:2 * V].reshape(V, 2)
        alpha = z[2 * V:].reshape(V, 2)
        return np.array([0.5 * np.dot(alpha[i] + alpha[j], phi[j] - phi[i]) for i, j in self.edges])

    def H_right(self, flux):
        return lambda z: np.dot(flux, self.pullback(z))

    def gradient(self, H):
        return complex_step_jacobian(H, self.z)[0]

    def h_M(self, degree):
        cols = [self.hamiltonian(self.gradient(self.H_left(s))) for s in trig_streams(degree)]
        return col_space(np.array(cols).T)

    def g_M(self, fluxes):
        cols = [self.hamiltonian(self.gradient(self.H_right(f))) for f in fluxes]
        return col_space(np.array(cols).T)

    def divergence_free_fluxes(self):
        """Edge fluxes with zero net outflow from every vertex."""
        D = np.zeros((self.V, len(self.edges)))
        for e, (i, j) in enumerate(self.edges):
            D[i, e] -= 1.0
            D[j, e] += 1.0
        return null_space(D).T

    def J_L(self, degree):
        return lambda z: np.array([self.H_left(s)(z) for s in trig_streams(degree)])

    def ker_TJ_L(self, degree):
        T = self.tangent()
        DJ = complex_step_jacobian(self.J_L(degree), self.z)
        return T @ null_space(DJ @ T)

    def ker_TJ_R(self):
        """Tangent vectors whose linearised pullback is exact: ``D pullback t = d0 h``."""
        T = self.tangent()
        Dp = complex_step_jacobian(self.pullback, self.z)
        G = np.zeros((len(self.edges), self.V))
        for e, (i, j) in enumerate(self.edges):
            G[e, i], G[e, j] = -1.0, 1.0
        N = null_space(np.hstack([Dp @ T, -G]))
        return col_space(T @ N[:T.shape[1]])

    def symplectic_orthogonal(self, U):
        T = self.tangent()
        Om = self.omega_matrix()
        if U.shape[1] == 0:
            return T
        return T @ null_space(U.T @ Om @ T)


def principal_angle(U, W):
    """Largest principal angle, ``pi/2`` on a dimension mismatch (plain SVD of ``U^T W``)."""
    if U.shape[1] != W.shape[1]:
        return np.pi / 2
    if U.shape[1] == 0:
        return 0.0
    Uq, _ = np.linalg.qr(U)
    Wq, _ = np.linalg.qr(W)
    s = np.linalg.svd(Uq.T @ Wq, compute_uv=False)
    s = np.clip(s, -1.0, 1.0)
    # arcsin of the sine form is accurate for small angles
    P = Wq - Uq @ (Uq.T @ Wq)
    return float(np.arcsin(min(1.0, np.linalg.norm(P, 2))))
