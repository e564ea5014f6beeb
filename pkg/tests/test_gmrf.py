"""Precision builders, mesh/SPDE assembly, and the sparse Cholesky wrapper."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from carcasswatch.gmrf import (
    GmrfDomainError,
    SparsePrecision,
    ar1_precision,
    block_diag,
    kron_group,
    rw1_precision,
)
from carcasswatch.linalg import CholeskyFactor, FactorizationError
from carcasswatch.spatial import (
    Mesh,
    MeshError,
    build_mesh,
    project_km,
    projection_matrix,
    spde_builder,
    spde_precision,
    unproject_km,
)


def ar1_covariance(n, rho, marginal_prec):
    # direct covariance oracle: Cov[i,j] = rho^|i-j| / marginal_prec
    idx = np.arange(n)
    return rho ** np.abs(idx[:, None] - idx[None, :]) / marginal_prec


# ---------------------------------------------------------------- AR(1)


def test_ar1_inverts_stationary_covariance():
    Q = ar1_precision(40, 0.9, marginal_prec=2.5).matrix.toarray()
    cov = ar1_covariance(40, 0.9, 2.5)
    assert np.max(np.abs(Q @ cov - np.eye(40))) < 1e-12


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=25),
    rho=st.floats(min_value=-0.99, max_value=0.99),
    prec=st.floats(min_value=0.05, max_value=20.0),
)
def test_ar1_covariance_identity_fuzz(n, rho, prec):
    Q = ar1_precision(n, rho, marginal_prec=prec).matrix.toarray()
    cov = ar1_covariance(n, rho, prec)
    assert np.max(np.abs(Q @ cov - np.eye(n))) < 1e-9


def test_ar1_domain_errors():
    with pytest.raises(GmrfDomainError):
        ar1_precision(0, 0.5)
    with pytest.raises(GmrfDomainError):
        ar1_precision(5, 1.0)
    with pytest.raises(GmrfDomainError):
        ar1_precision(5, -1.0)
    with pytest.raises(GmrfDomainError):
        ar1_precision(5, 0.5, marginal_prec=0.0)


def test_ar1_single_point():
    Q = ar1_precision(1, 0.7, marginal_prec=3.0)
    assert Q.matrix.shape == (1, 1)
    assert Q.matrix.toarray()[0, 0] == pytest.approx(3.0)
    assert Q.rank_deficiency == 0 and Q.constraints is None


# ---------------------------------------------------------------- RW(1)


def test_rw1_spectrum():
    """Eigenvalues of the path-graph Laplacian are 2 - 2 cos(pi k / n)."""
    n, prec = 26, 0.116
    Q = rw1_precision(n, prec=prec).matrix.toarray()
    got = np.sort(np.linalg.eigvalsh(Q))
    want = np.sort(prec * (2.0 - 2.0 * np.cos(np.pi * np.arange(n) / n)))
    assert np.max(np.abs(got - want)) < 1e-10


def test_rw1_null_space_and_constraint():
    Q = rw1_precision(12, prec=2.0)
    assert Q.rank_deficiency == 1
    assert np.allclose(Q.matrix @ np.ones(12), 0.0)
    assert Q.constraints.shape == (1, 12)
    assert np.allclose(Q.constraints, 1.0)


def test_rw1_constrained_matrix_is_spd():
    Q = rw1_precision(15, prec=0.5)
    fixed = Q.constrained_matrix(weight=1.0).toarray()
    assert np.linalg.eigvalsh(fixed).min() > 1e-8
    # the weight adds a rank-one block on the constraint direction
    free = Q.matrix.toarray()
    assert np.allclose(fixed - free, np.ones((15, 15)))


def test_rw1_domain_errors():
    with pytest.raises(GmrfDomainError):
        rw1_precision(1)
    with pytest.raises(GmrfDomainError):
        rw1_precision(10, prec=-1.0)


# ---------------------------------------------------------------- kron


def test_kron_group_matches_dense_oracle():
    inner = rw1_precision(6, prec=1.3)
    grouped = kron_group(inner, n_groups=4, group_rho=0.9)
    Qg = ar1_precision(4, 0.9, marginal_prec=1.0).matrix.toarray()
    want = np.kron(Qg, inner.matrix.toarray())
    assert np.max(np.abs(grouped.matrix.toarray() - want)) < 1e-12
    assert grouped.rank_deficiency == 4
    assert grouped.constraints.shape == (4, 24)


def test_kron_group_rho_zero_is_independent_blocks():
    inner = ar1_precision(5, 0.4, marginal_prec=2.0)
    grouped = kron_group(inner, n_groups=3, group_rho=0.0)
    want = sparse.block_diag([inner.matrix] * 3).toarray()
    assert np.max(np.abs(grouped.matrix.toarray() - want)) < 1e-12


def test_kron_group_preserves_marginals():
    # unit-variance group AR(1) keeps each group's within-field marginals
    inner = ar1_precision(8, 0.6, marginal_prec=1.7)
    grouped = kron_group(inner, n_groups=5, group_rho=0.85)
    cov = np.linalg.inv(grouped.matrix.toarray())
    inner_cov = np.linalg.inv(inner.matrix.toarray())
    for g in range(5):
        block = cov[g * 8 : (g + 1) * 8, g * 8 : (g + 1) * 8]
        assert np.max(np.abs(block - inner_cov)) < 1e-10


def test_kron_group_domain_error():
    with pytest.raises(GmrfDomainError):
        kron_group(ar1_precision(3, 0.1), n_groups=0, group_rho=0.5)


def test_block_diag_lifts_constraints():
    a = rw1_precision(4, prec=1.0)
    b = ar1_precision(3, 0.2)
    c = rw1_precision(5, prec=2.0)
    stacked = block_diag([a, b, c])
    assert stacked.dimension == 12
    assert stacked.rank_deficiency == 2
    assert stacked.constraints.shape == (2, 12)
    assert np.allclose(stacked.constraints[0, :4], 1.0)
    assert np.allclose(stacked.constraints[0, 4:], 0.0)
    assert np.allclose(stacked.constraints[1, 7:], 1.0)
    assert np.allclose(stacked.constraints[1, :7], 0.0)
    want = sparse.block_diag([a.matrix, b.matrix, c.matrix]).toarray()
    assert np.max(np.abs(stacked.matrix.toarray() - want)) == 0.0


# ---------------------------------------------------------------- mesh


def grid_sites(n_side=11, span_km=400.0, lat0=-30.0, lon0=-71.0):
    km_per_deg_lat = 111.19
    km_per_deg_lon = km_per_deg_lat * np.cos(np.radians(lat0))
    xs = np.linspace(0.0, span_km, n_side) / km_per_deg_lon + lon0
    ys = np.linspace(0.0, span_km, n_side) / km_per_deg_lat + lat0
    lon, lat = np.meshgrid(xs, ys)
    return np.column_stack([lon.ravel(), lat.ravel()])


@pytest.fixture(scope="module")
def grid_mesh():
    return build_mesh(grid_sites(), max_edge_km=45.0, extension_km=150.0)


def test_projection_round_trip():
    origin = (-71.0, -30.0)
    pts = np.array([[-70.5, -29.2], [-71.8, -31.1], [-71.0, -30.0]])
    back = unproject_km(project_km(pts, origin), origin)
    assert np.max(np.abs(back - pts)) < 1e-12


def test_mesh_keeps_sites_as_vertices(grid_mesh):
    sites_km = project_km(grid_sites(), grid_mesh.origin)
    assert grid_mesh.n_input_sites == len(sites_km)
    # every site appears among the leading vertices (up to dedup rounding)
    lead = grid_mesh.vertices[: grid_mesh.n_input_sites]
    d = np.abs(lead[None, :, :] - sites_km[:, None, :]).sum(axis=2)
    assert d.min(axis=1).max() < 1e-5


def test_mesh_rejects_degenerate_input():
    with pytest.raises(MeshError):
        build_mesh(np.array([[-71.0, -30.0], [-70.0, -30.0]]))
    line = np.column_stack([np.linspace(-71, -70, 6), np.full(6, -30.0)])
    with pytest.raises(MeshError):
        build_mesh(line)


def test_mesh_json_round_trip(grid_mesh):
    clone = Mesh.from_json(grid_mesh.to_json())
    assert np.max(np.abs(clone.vertices - np.round(grid_mesh.vertices, 6))) == 0.0
    assert clone.origin == grid_mesh.origin
    # vertex rounding to 1e-6 km perturbs barycentric weights below 1e-7
    A = projection_matrix(grid_mesh, grid_sites())
    B = projection_matrix(clone, grid_sites())
    assert np.max(np.abs((A - B).toarray())) < 1e-7


def test_projection_rows_are_barycentric(grid_mesh):
    sites = grid_sites()
    A = projection_matrix(grid_mesh, sites)
    assert A.shape == (len(sites), grid_mesh.n_vertices)
    assert np.allclose(np.asarray(A.sum(axis=1)).ravel(), 1.0)
    assert A.min() >= 0.0
    # linear functions are reproduced exactly by barycentric weights
    f = grid_mesh.vertices @ np.array([0.3, -1.7]) + 4.0
    want = project_km(sites, grid_mesh.origin) @ np.array([0.3, -1.7]) + 4.0
    assert np.max(np.abs(A @ f - want)) < 1e-8


def test_projection_at_vertices_is_identity_like(grid_mesh):
    # an observation sitting on a vertex puts all weight on that vertex
    target = unproject_km(grid_mesh.vertices[:5], grid_mesh.origin)
    A = projection_matrix(grid_mesh, target).toarray()
    for i in range(5):
        assert A[i, i] == pytest.approx(1.0, abs=1e-9)
        assert A[i].sum() == pytest.approx(1.0, abs=1e-12)


def test_projection_outside_hull_raises(grid_mesh):
    with pytest.raises(MeshError):
        projection_matrix(grid_mesh, np.array([[-40.0, -30.0]]))


# ---------------------------------------------------------------- SPDE


def test_spde_correlation_at_range(grid_mesh):
    """Matern nu=1: corr at the range distance is sqrt(8)K1(sqrt(8)) ~ 0.139."""
    _, Q = spde_precision(grid_mesh, range_km=100.0, sd=1.2)
    cov = np.linalg.inv(Q.matrix.toarray())
    center_km = grid_mesh.vertices[: grid_mesh.n_input_sites].mean(axis=0)
    c = int(np.argmin(np.linalg.norm(grid_mesh.vertices - center_km, axis=1)))
    assert np.sqrt(cov[c, c]) == pytest.approx(1.2, rel=0.10)
    d = np.linalg.norm(grid_mesh.vertices - grid_mesh.vertices[c], axis=1)
    shell = (d > 90.0) & (d < 110.0)
    assert shell.sum() >= 4
    corr = cov[c, shell] / np.sqrt(cov[c, c] * cov[shell, shell])
    assert float(corr.mean()) == pytest.approx(0.14, abs=0.05)


def test_spde_builder_matches_direct_assembly(grid_mesh):
    _, direct = spde_precision(grid_mesh, range_km=140.0, sd=0.8)
    built = spde_builder(grid_mesh)(140.0, 0.8)
    diff = (direct.matrix - built.matrix).toarray()
    assert np.max(np.abs(diff)) < 1e-12 * np.abs(direct.matrix.toarray()).max()


def test_spde_domain_errors(grid_mesh):
    build = spde_builder(grid_mesh)
    for bad in (0.0, -5.0, float("nan"), float("inf")):
        with pytest.raises(MeshError):
            spde_precision(grid_mesh, range_km=bad, sd=1.0)
        with pytest.raises(MeshError):
            build(100.0, bad)


def test_spde_sd_scales_variance(grid_mesh):
    _, Q1 = spde_precision(grid_mesh, range_km=100.0, sd=1.0)
    _, Q2 = spde_precision(grid_mesh, range_km=100.0, sd=3.0)
    # tau enters as tau^2, so tripling sd divides Q by 9
    diff = (Q1.matrix - 9.0 * Q2.matrix).toarray()
    assert np.max(np.abs(diff)) < 1e-12 * np.abs(Q1.matrix.toarray()).max()


# ---------------------------------------------------------------- linalg


@pytest.fixture(scope="module")
def random_spd():
    rng = np.random.default_rng(11)
    A = sparse.random(60, 60, density=0.1, random_state=np.random.RandomState(11))
    Q = (A @ A.T + 5.0 * sparse.identity(60)).tocsc()
    return Q


def test_cholesky_log_det_and_solve(random_spd):
    dense = random_spd.toarray()
    fac = CholeskyFactor(random_spd)
    assert fac.log_det() == pytest.approx(np.linalg.slogdet(dense)[1], abs=1e-8)
    rng = np.random.default_rng(3)
    b = rng.standard_normal(60)
    assert np.max(np.abs(fac.solve(b) - np.linalg.solve(dense, b))) < 1e-8
    B = rng.standard_normal((60, 4))
    assert np.max(np.abs(fac.solve(B) - np.linalg.solve(dense, B))) < 1e-8


def test_cholesky_inverse_diagonal(random_spd):
    fac = CholeskyFactor(random_spd)
    want = np.diag(np.linalg.inv(random_spd.toarray()))
    assert np.max(np.abs(fac.inverse_diagonal(chunk=7) - want)) < 1e-8


def test_cholesky_sample_statistics(random_spd):
    fac = CholeskyFactor(random_spd)
    draws = fac.sample(np.random.default_rng(5), size=20000)
    assert draws.shape == (20000, 60)
    cov_hat = np.cov(draws.T)
    cov = np.linalg.inv(random_spd.toarray())
    scale = np.sqrt(np.outer(np.diag(cov), np.diag(cov)))
    assert np.max(np.abs(cov_hat - cov) / scale) < 0.08
    again = fac.sample(np.random.default_rng(5), size=20000)
    assert np.array_equal(draws, again)


def test_cholesky_rejects_indefinite():
    Q = -sparse.identity(8, format="csc")
    with pytest.raises(FactorizationError):
        CholeskyFactor(Q)


def test_cholesky_jitter_rescues_semidefinite():
    # RW(1) is singular: the raw matrix needs escalating jitter, the
    # constrained form factorizes cleanly on the first try.
    Q = rw1_precision(30, prec=1.0)
    fac = CholeskyFactor(Q.constrained_matrix(weight=1.0))
    assert fac.jitter == 0.0
    raw = CholeskyFactor(Q.matrix)
    assert 0.0 < raw.jitter <= 1e-8
