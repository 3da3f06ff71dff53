import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fbdual import dec, mesh as M
from fbdual.dec import DiscreteForm, EmbeddedDomain


def form0(values):
    return DiscreteForm(0, np.asarray(values, dtype=float))


def test_d0_constant_and_indicator():
    m = M.build_square(1)
    assert np.all(dec.d0(m, form0(np.full(4, 2.5))).values == 0)
    f = np.zeros(4)
    f[2] = 1.0
    out = dec.d0(m, form0(f)).values
    # edge (i, j), i < j, carries f_j - f_i
    expected = [float(j == 2) - float(i == 2) for i, j in m.edges]
    np.testing.assert_array_equal(out, expected)


def test_d1_of_triangle_loop():
    m = M.build_square(1)
    idx, sgn = m.triangle_edges
    a = np.zeros(m.n_edges)
    a[idx[0]] = sgn[0]  # unit circulation along each edge of triangle 0
    out = dec.d1(m, DiscreteForm(1, a)).values
    # three unit edges around triangle 0; the shared diagonal runs the other way in triangle 1
    np.testing.assert_allclose(out, [3.0, -1.0])
    assert np.all(dec.d1(m, DiscreteForm(1, np.zeros(m.n_edges))).values == 0)


def test_degree_mismatch():
    m = M.build_square(1)
    with pytest.raises(ValueError):
        dec.d0(m, DiscreteForm(1, np.zeros(m.n_edges)))
    with pytest.raises(ValueError):
        dec.d1(m, form0(np.zeros(4)))
    with pytest.raises(ValueError):
        DiscreteForm(3, np.zeros(2))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), shape=st.sampled_from(["square", "disk", "annulus"]))
def test_dd_zero(seed, shape):
    m = {"square": M.build_square(3), "disk": M.build_disk(2, 5),
         "annulus": M.build_annulus(1, 5, 0.5, 1.0)}[shape]
    f = np.random.default_rng(seed).normal(size=m.n_vertices)
    assert np.abs(dec.d1(m, dec.d0(m, form0(f))).values).max() < 1e-12


def test_form_json_round_trip():
    f = DiscreteForm(1, np.array([0.1, -2.0, 1e-17]))
    back = DiscreteForm.from_dict(f.to_dict())
    assert back.degree == 1 and np.array_equal(back.values, f.values)


# ---------------------------------------------------------------------------
# Poisson problems


def test_dirichlet_trivial_and_linear():
    m = M.build_disk(3, 7)
    D = EmbeddedDomain.identity(m)
    bnd = m.boundary_vertices
    u = dec.poisson_dirichlet(D, np.zeros(m.n_vertices), np.zeros(bnd.size))
    assert np.all(u == 0)
    u = dec.poisson_dirichlet(D, np.zeros(m.n_vertices), m.layout[bnd, 0])
    np.testing.assert_allclose(u, m.layout[:, 0], atol=1e-12)


def test_dirichlet_paraboloid_converges():
    errs = []
    for nr in (2, 4, 8):
        m = M.build_disk(nr, 16)
        D = EmbeddedDomain.identity(m)
        u = dec.poisson_dirichlet(D, np.full(m.n_vertices, -4.0), np.zeros(m.boundary_vertices.size))
        exact = 1 - np.sum(m.layout ** 2, axis=1)
        # boundary vertices sit on the unit circle, so exact is 0 there too
        errs.append(np.abs(u - exact).max())
    assert errs[1] < 0.05
    assert errs[2] < errs[1] < errs[0]


def test_dirichlet_degenerate_triangle():
    m = M.build_square(2)
    pos = m.layout.copy()
    pos[4] = pos[0]  # collapse the centre onto a corner
    with pytest.raises(dec.DegenerateTriangleError):
        dec.poisson_dirichlet(EmbeddedDomain(m, pos), np.zeros(m.n_vertices), np.zeros(8))


def test_neumann_zero_and_linear():
    m = M.build_disk(4, 12)
    D = EmbeddedDomain.identity(m)
    nb = m.boundary_vertices.size
    u = dec.poisson_neumann(D, np.zeros(m.n_vertices), np.zeros(nb))
    assert np.abs(u).max() < 1e-14
    c = np.array([0.6, -0.8])
    normals, _ = dec.boundary_normals(D)
    flux = normals[m.boundary_vertices] @ c
    u = dec.poisson_neumann(D, np.zeros(m.n_vertices), flux)
    mass = D.vertex_mass
    lin = m.layout @ c
    lin -= np.sum(mass * lin) / mass.sum()
    assert np.abs(u - lin).max() < 0.01
    assert abs(np.sum(mass * u)) < 1e-12


def test_neumann_incompatible():
    m = M.build_square(3)
    D = EmbeddedDomain.identity(m)
    with pytest.raises(dec.IncompatibleDataError):
        dec.poisson_neumann(D, np.ones(m.n_vertices), np.zeros(m.boundary_vertices.size))


def test_solver_config_paths_agree():
    m = M.build_disk(4, 10)
    D = EmbeddedDomain.identity(m)
    rhs = np.sin(m.layout[:, 0])
    bc = np.cos(m.layout[m.boundary_vertices, 1])
    dense = dec.poisson_dirichlet(D, rhs, bc, dec.LinearSolverConfig(method="dense"))
    cg = dec.poisson_dirichlet(D, rhs, bc, dec.LinearSolverConfig(method="cg", tol=1e-13))
    np.testing.assert_allclose(dense, cg, atol=1e-9)
    with pytest.raises(dec.SolverError):
        dec.poisson_dirichlet(D, rhs, bc, dec.LinearSolverConfig(method="cg", max_iter=1))
    with pytest.raises(ValueError):
        dec.LinearSolverConfig(method="magic")


# ---------------------------------------------------------------------------
# Helmholtz


@pytest.fixture(scope="module")
def disk():
    return EmbeddedDomain.identity(M.build_disk(4, 12))


def test_helmholtz_rotation_and_constant(disk):
    x = disk.positions
    rot = np.stack([-x[:, 1], x[:, 0]], axis=1)
    u_par, grad, _ = dec.helmholtz_project(disk, rot)
    assert np.abs(grad).max() < 1e-12
    np.testing.assert_allclose(u_par, rot, atol=1e-12)
    const = np.tile([1.0, 2.0], (len(x), 1))
    u_par, grad, _ = dec.helmholtz_project(disk, const)
    assert np.abs(u_par).max() < 1e-12
    np.testing.assert_allclose(grad, const, atol=1e-12)


def test_helmholtz_projector_properties(disk):
    rng = np.random.default_rng(3)
    u = rng.normal(size=disk.positions.shape)
    u_par, grad, _ = dec.helmholtz_project(disk, u)
    again, g2, _ = dec.helmholtz_project(disk, u_par)
    assert np.abs(again - u_par).max() < 1e-9
    assert np.abs(g2).max() < 1e-9
    assert abs(dec.mass_inner(disk, u_par, grad)) < 1e-9 * dec.mass_inner(disk, u, u)
    B = dec.weak_divergence_matrix(disk)
    assert np.abs(B @ u_par.ravel()).max() < 1e-12


def test_vertex_gradient_and_jacobian_exact_for_linear(disk):
    x = disk.positions
    f = 2 * x[:, 0] - 3 * x[:, 1] + 1
    np.testing.assert_allclose(dec.vertex_gradient(disk, f), np.tile([2.0, -3.0], (len(x), 1)), atol=1e-12)
    A = np.array([[1.0, 2.0], [-0.5, 3.0]])
    J = dec.vertex_jacobian(disk, x @ A.T)
    np.testing.assert_allclose(J, np.broadcast_to(A, J.shape), atol=1e-12)


def test_boundary_normals_unit_outward(disk):
    n, dual = dec.boundary_normals(disk)
    b = disk.mesh.boundary_vertices
    np.testing.assert_allclose(np.linalg.norm(n[b], axis=1), 1.0)
    # outward on the unit disk: aligned with the position vector
    assert np.all(np.sum(n[b] * disk.positions[b], axis=1) > 0.99)
    assert dual.sum() == pytest.approx(2 * 48 * np.sin(np.pi / 48))


# ---------------------------------------------------------------------------
# quotients


def test_quotient_examples():
    m = M.build_square(1)
    x = m.layout[:, 0]
    dx = dec.d0(m, form0(x))
    assert np.abs(dec.quotient_project(m, dx, "h-free").values).max() < 1e-14
    # no interior vertices: the vanishing-on-boundary quotient keeps d(x)
    rep = dec.quotient_project(m, dx, "h-vanishing-on-boundary").values
    np.testing.assert_allclose(rep, dx.values)
    m = M.build_square(3)
    h = np.zeros(m.n_vertices)
    h[m.interior_vertices] = np.arange(1, m.interior_vertices.size + 1)
    dh = dec.d0(m, form0(h))
    assert np.abs(dec.quotient_project(m, dh, "h-vanishing-on-boundary").values).max() < 1e-13
    with pytest.raises(ValueError):
        dec.quotient_project(m, dh, "bogus")
    with pytest.raises(ValueError):
        dec.quotient_project(m, form0(h))


def test_quotient_projector_is_edge_mass_orthogonal():
    m = M.build_disk(2, 5)
    W = np.diag(m.edge_mass)
    for mode in ("h-free", "h-vanishing-on-boundary"):
        Q = dec.quotient_matrix(m, mode)
        np.testing.assert_allclose(Q @ Q, Q, atol=1e-12)
        np.testing.assert_allclose(W @ Q, (W @ Q).T, atol=1e-12)
