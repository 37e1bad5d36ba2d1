"""Quadrature on simplices, element averages, and quality measures."""

import math

import numpy as np
import pytest

import festab as fs
from conftest import equilateral_lattice, jittered_mesh_2d, obtuse_pair


def monomial_average(d, powers):
    """Exact average of prod x_i^p_i over the unit simplex."""
    num = 1.0
    for p in powers:
        num *= math.factorial(p)
    return math.factorial(d) * num / math.factorial(sum(powers) + d)


def rule_average(pts, wts, powers):
    vals = np.prod(pts ** np.asarray(powers), axis=1)
    return float(wts @ vals)


def powers_up_to(d, degree):
    if d == 1:
        return [(p,) for p in range(degree + 1)]
    if d == 2:
        return [(a, b) for a in range(degree + 1)
                for b in range(degree + 1 - a)]
    return [(a, b, c) for a in range(degree + 1)
            for b in range(degree + 1 - a)
            for c in range(degree + 1 - a - b)]


# ---------------------------------------------------------------------------
# quadrature rules
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("d,order,degree", [
    (1, 1, 1), (1, 2, 3), (1, 4, 5),
    (2, 1, 1), (2, 2, 2), (2, 4, 4),
    (3, 1, 1), (3, 2, 2), (3, 4, 4),
])
def test_simplex_rule_exactness(d, order, degree):
    pts, wts = fs.simplex_rule(d, order)
    assert wts.sum() == pytest.approx(1.0, rel=1e-14)
    assert (pts >= -1e-15).all() and (pts.sum(axis=1) <= 1 + 1e-15).all()
    for powers in powers_up_to(d, degree):
        assert rule_average(pts, wts, powers) == pytest.approx(
            monomial_average(d, powers), rel=1e-12, abs=1e-14)


def test_simplex_rule_rejects_unknown_order():
    with pytest.raises(ValueError):
        fs.simplex_rule(2, 3)
    with pytest.raises(ValueError):
        fs.simplex_rule(4, 2)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_conical_product_rule_exactness(d, n):
    pts, wts = fs.conical_product_rule(d, n)
    assert len(wts) == n ** d
    assert wts.sum() == pytest.approx(1.0, rel=1e-13)
    for powers in powers_up_to(d, 2 * n - 1):
        assert rule_average(pts, wts, powers) == pytest.approx(
            monomial_average(d, powers), rel=1e-11, abs=1e-13)


# ---------------------------------------------------------------------------
# element averages
# ---------------------------------------------------------------------------

def test_average_tensor_linear_field_is_centroid_value():
    mesh = fs.gen_structured_2d(2, 2)
    f = fs.Analytic(lambda P: 1.0 + P[:, 0] + 0.5 * P[:, 1], dim=2)
    for k in (0, 3, 5):
        centroid = mesh.nodes[mesh.elements[k]].mean(axis=0)
        want = (1.0 + centroid[0] + 0.5 * centroid[1]) * np.eye(2)
        got = fs.average_tensor(f, mesh, k, quad_order=2)
        assert np.allclose(got, want, rtol=1e-13)


def test_average_tensor_matches_fine_quadrature():
    mesh = fs.gen_uniform_1d(4)
    f = fs.per1d(4.0)           # smooth on each element
    from scipy.integrate import quad
    xs = mesh.nodes[:, 0]
    for k in range(4):
        exact = quad(lambda x: 1.0 / (2.0 - math.sin(2 * math.pi * x / 4.0)),
                     xs[k], xs[k + 1])[0] / (xs[k + 1] - xs[k])
        coarse = fs.average_tensor(f, mesh, k, quad_order=1)[0, 0]
        fine = fs.average_tensor(f, mesh, k, quad_order=4)[0, 0]
        assert fine == pytest.approx(exact, rel=5e-7)
        assert abs(fine - exact) < abs(coarse - exact)


def test_element_averages_piecewise_uses_tags():
    mesh, field = fs.gen_groundwater_like()
    avg = fs.element_averages(field, mesh)
    tags = mesh.region_tags
    assert np.allclose(avg[tags == 0], np.eye(2))
    assert np.allclose(avg[tags == 1], 1e-6 * np.eye(2))


def test_element_averages_rejects_bad_order():
    mesh = fs.gen_uniform_1d(4)
    with pytest.raises(ValueError):
        fs.element_averages(fs.identity(1), mesh, quad_order=3)


# ---------------------------------------------------------------------------
# quality measures
# ---------------------------------------------------------------------------

def test_quality_identities_on_jittered_mesh():
    mesh = jittered_mesh_2d(np.random.default_rng(5))
    for metric in (fs.identity(2), fs.InverseOf(fs.aniso2d(30.0))):
        q = fs.mesh_quality_summary(mesh, metric)
        assert np.mean(1.0 / np.asarray(q.q_eq)) == pytest.approx(1.0,
                                                                  abs=1e-10)
        assert (np.asarray(q.q_ali) >= 1.0 - 1e-12).all()
        qm = np.asarray(q.q_ali) * np.asarray(q.q_eq) ** (2.0 / mesh.dim)
        assert np.allclose(qm, q.q_m, rtol=1e-10)
        assert q.max_q_eq >= 1.0
        assert q.max_q_m >= q.max_q_ali - 1e-12


def test_equilateral_lattice_is_metric_uniform():
    mesh = equilateral_lattice()
    q = fs.mesh_quality_summary(mesh, fs.identity(2))
    assert q.max_q_ali == pytest.approx(1.0, abs=1e-12)
    assert q.max_q_eq == pytest.approx(1.0, abs=1e-12)
    assert q.max_q_m == pytest.approx(1.0, abs=1e-12)


def test_uniform_grid_equidistributes_identity_metric():
    mesh = fs.gen_structured_2d(4, 4)
    q = fs.mesh_quality_summary(mesh, fs.identity(2))
    assert np.allclose(q.q_eq, 1.0, rtol=1e-12)   # equal areas
    assert q.h_global == pytest.approx((1.0 / 32) ** 0.5, rel=1e-12)


def test_quality_1d_adapted_mesh_is_uniform_in_inverse_metric():
    f = fs.per1d()
    mesh = fs.gen_equidistributed_1d(64, fs.adapted_weight(f))
    q = fs.mesh_quality_summary(mesh, fs.InverseOf(f))
    # per-cell metric volumes agree up to quadrature error
    assert q.max_q_eq < 1.02
    assert np.allclose(q.q_ali, 1.0, atol=1e-12)  # 1D alignment is trivial


def test_element_quality_matches_summary():
    mesh = jittered_mesh_2d(np.random.default_rng(11), 4, 4)
    metric = fs.InverseOf(fs.aniso2d(5.0))
    q = fs.mesh_quality_summary(mesh, metric)
    eq = fs.element_quality(mesh, 7, metric, q.h_global)
    assert eq.q_eq == pytest.approx(q.q_eq[7], rel=1e-12)
    assert eq.q_ali == pytest.approx(q.q_ali[7], rel=1e-12)
    assert eq.q_m == pytest.approx(q.q_m[7], rel=1e-12)


# ---------------------------------------------------------------------------
# inscribed diameter
# ---------------------------------------------------------------------------

def test_inscribed_diameter_equilateral_identity():
    ell = 0.7
    nodes = np.array([[0.0, 0.0], [ell, 0.0],
                      [0.5 * ell, ell * math.sqrt(3) / 2]])
    mesh = fs.SimplicialMesh(nodes, np.array([[0, 1, 2]]),
                             np.array([fs.DIRICHLET, fs.NEUMANN,
                                       fs.NEUMANN]))
    rho = fs.inscribed_diameter_metric(mesh, 0, np.eye(2))
    assert rho == pytest.approx(ell / math.sqrt(3), rel=1e-13)


def test_inscribed_diameter_1d_metric_scaling():
    mesh = fs.SimplicialMesh(np.array([[0.0], [0.25]]),
                             np.array([[0, 1]]), np.array([1, 2]))
    assert fs.inscribed_diameter_metric(mesh, 0, np.array([[16.0]])) == \
        pytest.approx(1.0, rel=1e-14)


def test_inscribed_diameter_3d_not_defined():
    mesh = fs.gen_structured_3d(2, 2, 2)
    with pytest.raises(ValueError):
        fs.inscribed_diameter_metric(mesh, 0, np.eye(3))


def test_alignment_bounded_by_inscribed_ratio():
    # q_ali <= (reference diameter)^2 * (h_metric / rho_metric)^2
    rng = np.random.default_rng(99)
    hhat2 = fs.reference_diameter(2) ** 2
    for _ in range(50):
        nodes = rng.uniform(0.0, 1.0, (3, 2))
        if abs(np.linalg.det(nodes[1:] - nodes[0])) < 1e-3:
            continue
        mesh = fs.SimplicialMesh(nodes, np.array([[0, 1, 2]]),
                                 np.array([1, 2, 2]))
        B = rng.uniform(-1.0, 1.0, (2, 2))
        metric_mat = B @ B.T + 0.05 * np.eye(2)
        metric = fs.Constant(metric_mat)
        q = fs.mesh_quality_summary(mesh, metric)
        rho = fs.inscribed_diameter_metric(mesh, 0, metric_mat)
        h_elem = q.element(0).h_elem
        assert q.q_ali[0] <= hhat2 * (h_elem / rho) ** 2 * (1.0 + 1e-10)


# ---------------------------------------------------------------------------
# nonobtuse test and CSV export
# ---------------------------------------------------------------------------

def test_nonobtuse_structured_grid():
    mesh = fs.gen_structured_2d(8, 8)
    A = fs.assemble_stiffness(mesh, fs.identity(2))
    assert fs.is_nonobtuse_wrt(mesh, fs.identity(2), A)


def test_nonobtuse_rejects_obtuse_pair():
    mesh = obtuse_pair()
    A = fs.assemble_stiffness(mesh, fs.identity(2))
    assert not fs.is_nonobtuse_wrt(mesh, fs.identity(2), A)


def test_export_quality_csv_deterministic(tmp_path):
    mesh = fs.gen_structured_2d(3, 3)
    q = fs.mesh_quality_summary(mesh, fs.identity(2))
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    fs.export_quality_csv(mesh, q, str(p1))
    fs.export_quality_csv(mesh, q, str(p2))
    assert p1.read_bytes() == p2.read_bytes()
    header = p1.read_text().splitlines()[0]
    assert header.split(",")[0] == "element"
