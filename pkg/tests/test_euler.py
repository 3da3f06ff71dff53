import numpy as np
import pytest

from fbdual import dec, euler as E, mesh as M, phase as P


def ngon(n, radius=1.0, clockwise=False):
    t = 2 * np.pi * np.arange(n) / n
    if clockwise:
        t = -t
    return radius * np.stack([np.cos(t), np.sin(t)], axis=1)


def rotation(x, omega):
    return omega * np.stack([-x[:, 1], x[:, 0]], axis=1)


@pytest.fixture(scope="module")
def droplet_mesh():
    # 64 boundary vertices
    return M.build_disk(2, 32)


# ---------------------------------------------------------------------------
# curvature


def test_regular_polygon_curvature():
    for R in (1.0, 2.5):
        k = E.polygon_curvature(ngon(64, R))
        assert np.abs(k - 1 / R).max() <= 0.01 / R
    errs = [np.abs(E.polygon_curvature(ngon(n)) - 1).max() for n in (16, 32, 64)]
    # second order in 1/n
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_mirrored_polygon_unchanged():
    rng = np.random.default_rng(0)
    pts = ngon(11) * rng.uniform(0.8, 1.2, size=(11, 1))
    mirror = pts * np.array([-1.0, 1.0])
    np.testing.assert_allclose(E.polygon_curvature(mirror), E.polygon_curvature(pts), atol=1e-14)
    np.testing.assert_allclose(E.polygon_curvature(pts[::-1]), E.polygon_curvature(pts)[::-1], atol=1e-14)


def test_square_sides_and_corners():
    m = M.build_square(4)
    D = dec.EmbeddedDomain.identity(m)
    k = E.curvature(D)
    bnd = m.boundary_vertices
    x = m.layout[bnd]
    corner = np.all(np.isclose(x, 0) | np.isclose(x, 1), axis=1)
    assert np.all(k[~corner] == 0)
    # quarter turn over one edge length (half of two quarter edges)
    np.testing.assert_allclose(k[corner], (np.pi / 2) / 0.25)


def test_annulus_hole_is_negative(annulus_small):
    D = dec.EmbeddedDomain.identity(annulus_small)
    k = E.curvature(D)
    r = np.linalg.norm(annulus_small.layout[annulus_small.boundary_vertices], axis=1)
    assert np.all(k[r > 0.9] > 0) and np.all(k[r < 0.6] < 0)


def test_curvature_errors():
    pts = ngon(5)
    pts[2] = pts[1]
    with pytest.raises(dec.DegenerateTriangleError):
        E.polygon_curvature(pts)
    with pytest.raises(ValueError):
        E.polygon_curvature(ngon(2))


def test_area_normals_give_area_rate():
    m = M.build_disk(3, 7)
    D = dec.EmbeddedDomain.identity(m)
    u = np.random.default_rng(4).normal(size=(m.n_vertices, 2))
    h = 1e-6
    rate = (dec.EmbeddedDomain(m, m.layout + h * u).areas.sum()
            - dec.EmbeddedDomain(m, m.layout - h * u).areas.sum()) / (2 * h)
    assert np.sum(E.area_normals(D) * u) == pytest.approx(rate, rel=1e-8)
    assert E.perimeter(D) == pytest.approx(2 * 21 * np.sin(np.pi / 21))


# ---------------------------------------------------------------------------
# connection split


@pytest.fixture(scope="module")
def disk_emb():
    m = M.build_disk(4, 8)
    z = P.random_phase_point(m, 3)
    return z.emb


def test_connection_split_random_constrained(disk_emb):
    emb = disk_emb
    m = emb.mesh
    rng = np.random.default_rng(5)
    v = E.project_divergence_free(emb.domain, rng.normal(size=(m.n_vertices, 2)))
    # add a gradient with zero net flux so the split has both parts
    g = dec.vertex_gradient(emb.domain, emb.positions[:, 0] ** 2 - emb.positions[:, 1] ** 2)
    u = v + g
    s = E.connection_split(emb, u)
    assert np.abs(s.reconstruct() - u).max() <= 1e-6
    _, dual = dec.boundary_normals(emb.domain)
    bnd = m.boundary_vertices
    # the constrained part carries zero net boundary flux
    sv = E.connection_split(emb, v)
    assert abs(np.sum(sv.normal_speed * dual[bnd])) <= 1e-8
    d = s.to_dict()
    assert len(d["boundary_normal_speed"]) == bnd.size and len(d["w_flux"]) == m.n_edges


def test_connection_split_rotation_is_vertical():
    m = M.build_disk(4, 12)
    emb = P.VolEmbedding.identity(m)
    u = rotation(m.layout, 1.0)
    s = E.connection_split(emb, u)
    # a rigid rotation is tangent to the circle only up to chord error
    assert np.abs(s.normal_speed).max() < 1e-12
    assert np.abs(s.grad_part).max() < 1e-12
    np.testing.assert_allclose(s.w_vertex, u, atol=1e-12)


def test_connection_split_gradient_is_horizontal():
    m = M.build_disk(4, 12)
    emb = P.VolEmbedding.identity(m)
    x = m.layout
    # harmonic potential x^2 - y^2
    u = dec.vertex_gradient(emb.domain, x[:, 0] ** 2 - x[:, 1] ** 2)
    s = E.connection_split(emb, u)
    assert np.abs(s.w_vertex).max() < 0.05 * np.abs(u).max()
    assert np.abs(s.reconstruct() - u).max() < 1e-10


def test_deformation_gradient_linear_map():
    m = M.build_square(3)
    A = np.array([[2.0, 0.5], [0.0, 0.5]])
    emb = P.VolEmbedding(m, m.layout @ A.T)
    F = E.deformation_gradient(emb)
    np.testing.assert_allclose(F, np.broadcast_to(A, F.shape), atol=1e-13)


# ---------------------------------------------------------------------------
# stepping


def test_rest_without_tension_is_unchanged():
    m = M.build_disk(3, 8)
    s = E.FluidState(P.VolEmbedding.identity(m), np.zeros((m.n_vertices, 2)))
    for dt in (1e-3, 0.7):
        out = E.step(s, dt)
        assert np.array_equal(out.emb.positions, s.emb.positions)
        assert np.array_equal(out.velocity, s.velocity)
        assert out.time == dt


def test_droplet_young_laplace(droplet_mesh):
    tau, dt = 0.1, 1e-3
    s = E.FluidState(P.VolEmbedding.identity(droplet_mesh), np.zeros((droplet_mesh.n_vertices, 2)), tau)
    out = E.step(s, dt)
    inner = droplet_mesh.interior_vertices
    np.testing.assert_allclose(out.pressure[inner], tau, rtol=0.02)
    # boundary values are exactly tau * kappa
    np.testing.assert_array_equal(out.pressure[droplet_mesh.boundary_vertices],
                                  tau * E.curvature(s.domain))
    assert np.abs(out.velocity).max() <= 1e-3 * tau * dt


def test_rigid_rotation_stays_rigid():
    m = M.build_disk(4, 8)
    omega = 0.25
    emb = P.VolEmbedding.identity(m)
    s = E.FluidState(emb, E.project_divergence_free(emb.domain, rotation(m.layout, omega)))
    p0 = E.pressure(s)
    # centripetal pressure omega^2 (|x|^2 - 1) / 2 vanishing on the unit circle
    exact = 0.5 * omega ** 2 * (np.sum(m.layout ** 2, axis=1) - 1)
    assert np.abs(p0 - exact).max() < 0.05 * omega ** 2
    final, _ = E.run(s, 1e-3, 100)
    assert np.abs(final.velocity - rotation(final.emb.positions, omega)).max() <= 1e-3


def test_guard_and_validation():
    m = M.build_disk(2, 8)
    emb = P.VolEmbedding.identity(m)
    s = E.FluidState(emb, rotation(m.layout, 1.0))
    with pytest.raises(E.StepRejected):
        E.step(s, 1.0)
    with pytest.raises(ValueError):
        E.step(s, 0.0)
    with pytest.raises(ValueError):
        E.FluidState(emb, np.zeros((m.n_vertices, 2)), tau=-1.0)


def test_run_reports_step_index():
    m = M.build_disk(2, 8)
    s = E.FluidState(P.VolEmbedding.identity(m), rotation(m.layout, 1.0))
    with pytest.raises(E.StepRejected) as info:
        E.run(s, 0.5, 3)
    assert info.value.step_index == 1


def test_projection_properties(disk_emb):
    D = disk_emb.domain
    v = np.random.default_rng(7).normal(size=(disk_emb.mesh.n_vertices, 2))
    pv = E.project_divergence_free(D, v)
    np.testing.assert_allclose(E.project_divergence_free(D, pv), pv, atol=1e-12)
    assert abs(np.sum(E.area_normals(D) * pv)) < 1e-12
    s = E.FluidState(disk_emb, pv)
    assert s.divergence_defect() < 1e-12


def test_volume_correction_per_step():
    m = M.build_disk(4, 8)
    emb = P.VolEmbedding.identity(m)
    s = E.FluidState(emb, E.project_divergence_free(emb.domain, rotation(m.layout, 1.0)))
    target = float(emb.domain.areas.sum())
    for _ in range(5):
        s = E.step(s, 1e-2, volume_correction=True, target_volume=target)
        assert abs(s.domain.areas.sum() - target) <= 1e-10


# ---------------------------------------------------------------------------
# diagnostics


def test_diagnostics_at_rest(droplet_mesh):
    tau = 0.3
    s = E.FluidState(P.VolEmbedding.identity(droplet_mesh), np.zeros((droplet_mesh.n_vertices, 2)), tau)
    d = E.diagnostics(s)
    assert d.kinetic == 0
    assert d.energy == pytest.approx(2 * np.pi * tau, rel=0.01)
    assert d.energy == pytest.approx(tau * d.perimeter)


def test_diagnostics_rigid_rotation():
    m = M.build_disk(8, 8)
    omega = 1.5
    s = E.FluidState(P.VolEmbedding.identity(m), rotation(m.layout, omega))
    d = E.diagnostics(s)
    assert d.kinetic == pytest.approx(np.pi * omega ** 2 / 4, rel=0.02)
    areas = s.domain.areas
    np.testing.assert_allclose(d.vorticity, 2 * omega * areas, rtol=1e-10)
    assert d.volume == pytest.approx(areas.sum())
    assert set(d.to_dict()) >= {"energy", "volume", "vorticity", "jr_class", "normal_speed"}


# ---------------------------------------------------------------------------
# runs


def test_run_config_round_trip(tmp_path):
    cfg = E.RunConfig(mesh="m.json", tau=0.1, dt=1e-3, steps=5,
                      initial_velocity={"type": "rotation", "omega": 0.5})
    path = tmp_path / "c.json"
    import json
    path.write_text(json.dumps(cfg.to_dict()))
    assert E.load_config(path) == cfg
    with pytest.raises(ValueError):
        E.RunConfig.from_dict({"dt": 1e-3, "viscosity": 1.0})
    with pytest.raises(ValueError):
        E.RunConfig.from_dict({"dt": -1.0})
    with pytest.raises(ValueError):
        E.initial_velocity(M.build_square(1), np.zeros((4, 2)), {"type": "vortex"})


def test_simulate_and_trajectory(tmp_path):
    m = M.build_disk(2, 8)
    cfg = E.RunConfig(dt=1e-3, steps=4, initial_velocity={"type": "stream", "a": 2, "b": 0, "scale": 0.1})
    final, rows = E.simulate(cfg, mesh=m)
    assert len(rows) == 4 and final.time == pytest.approx(4e-3)
    path = tmp_path / "t.csv"
    E.write_trajectory(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == list(E.TRAJECTORY_COLUMNS)
    assert len(lines) == 5
    with pytest.raises(ValueError):
        E.simulate(E.RunConfig())
