"""Assembly against hand integrals, quadrature oracles and structure checks."""

import itertools

import numpy as np
import pytest
import scipy.integrate
import scipy.linalg
import scipy.sparse as sp

from igalump.assembly import (assemble_multipatch, assemble_single_patch,
                              assemble_trimmed, jacobi_rescale, load_vector,
                              read_triplets, write_triplets)
from igalump.geometry import (MultipatchTopology, Patch, classify_elements,
                              plate_quarter_hole, pullback_coeffs,
                              quarter_annulus, magnet, rotated_square_region,
                              unit_square)
from igalump.splines import KnotVector, SplineSpace, eval_basis, \
    make_open_uniform

ONE = lambda *xs: 1.0


def interval_patch(a=0.0, b=1.0):
    kv = KnotVector([0.0, 0.0, 1.0, 1.0], 1)
    return Patch(SplineSpace([kv]), np.array([[a], [b]], dtype=float))


def square_space(n, p, k=None, dirichlet=None):
    kv = make_open_uniform(n, p, p - 1 if k is None else k)
    return SplineSpace([kv, kv], dirichlet=dirichlet)


# ------------------------------------------------------------- hand integrals

def test_1d_linear_mass_and_stiffness():
    space = SplineSpace([KnotVector([0.0, 0.0, 1.0, 1.0], 1)])
    pair = assemble_single_patch(space, interval_patch(), ONE, ONE)
    np.testing.assert_allclose(pair.M.toarray(),
                               [[1 / 3, 1 / 6], [1 / 6, 1 / 3]], atol=1e-15)
    np.testing.assert_allclose(pair.K.toarray(),
                               [[1, -1], [-1, 1]], atol=1e-14)


def test_1d_dirichlet_elimination():
    kv = make_open_uniform(2, 1, 0)
    space = SplineSpace([kv], dirichlet=[(True, True)])
    pair = assemble_single_patch(space, interval_patch(), ONE, ONE)
    assert pair.M.shape == (1, 1)
    assert pair.M.toarray()[0, 0] == pytest.approx(1 / 3, abs=1e-15)
    assert pair.K.toarray()[0, 0] == pytest.approx(4.0, abs=1e-13)
    assert pair.full_index.tolist() == [1]


def test_mass_is_kronecker_on_identity_geometry():
    kvx = make_open_uniform(3, 2, 1)
    kvy = make_open_uniform(2, 3, 2)
    space = SplineSpace([kvx, kvy])
    pair = assemble_single_patch(space, unit_square(), ONE, ONE)
    mx = assemble_single_patch(SplineSpace([kvx]), interval_patch(), ONE, ONE)
    my = assemble_single_patch(SplineSpace([kvy]), interval_patch(), ONE, ONE)
    kron = np.kron(mx.M.toarray(), my.M.toarray())
    np.testing.assert_allclose(pair.M.toarray(), kron, atol=1e-13)
    # stiffness splits as K1 x M2 + M1 x K2
    kronK = (np.kron(mx.K.toarray(), my.M.toarray())
             + np.kron(mx.M.toarray(), my.K.toarray()))
    np.testing.assert_allclose(pair.K.toarray(), kronK, atol=1e-12)


def test_total_mass_is_domain_measure_identity():
    # default rule is exact on the polynomial patch
    pair = assemble_single_patch(square_space(4, 2), unit_square(), ONE, ONE)
    e = np.ones(pair.M.shape[0])
    assert e @ (pair.M @ e) == pytest.approx(1.0, rel=1e-13)


@pytest.mark.parametrize('patch,measure', [
    (quarter_annulus(), 3 * np.pi / 4),
    (plate_quarter_hole(), 16 - np.pi / 4),
    (magnet(), 3 * np.pi / 2 * 0.5),
])
def test_total_mass_is_domain_measure_rational(patch, measure):
    # rational integrand: raise the rule until quadrature error is noise
    kvs = [make_open_uniform(4, 2, 1) for _ in range(patch.ndim)]
    pair = assemble_single_patch(SplineSpace(kvs), patch, ONE, ONE, nquad=10)
    e = np.ones(pair.M.shape[0])
    assert e @ (pair.M @ e) == pytest.approx(measure, rel=1e-10)


def test_entry_against_adaptive_quadrature():
    # one mass entry on curved geometry, independently via dblquad
    patch = quarter_annulus()
    kv = make_open_uniform(2, 2, 1)
    space = SplineSpace([kv, kv])
    rho = lambda x, y: 1.0 + x * y
    pair = assemble_single_patch(space, patch, rho, ONE, nquad=12)

    def bval(i, x):
        f, table = eval_basis(kv, x)
        return table[0][i - f] if f <= i <= f + kv.p else 0.0

    def integrand(eta, xi):
        c, _ = pullback_coeffs(patch, rho, ONE, (xi, eta))
        return c * bval(1, xi) * bval(1, eta) * bval(1, xi) * bval(2, eta)

    want, err = scipy.integrate.dblquad(integrand, 0, 1, 0, 1,
                                        epsabs=1e-12, epsrel=1e-12)
    assert err < 1e-10
    i = space.linear_index((1, 1))
    j = space.linear_index((1, 2))
    assert pair.M.toarray()[i, j] == pytest.approx(want, rel=1e-9)


# ------------------------------------------------------------------ structure

def _structured_blocks_ok(A, dims):
    """S_n+ shape: symmetric at every level, diagonal blocks SPD."""
    if np.linalg.norm(A - A.T) > 1e-13 * max(np.linalg.norm(A), 1e-30):
        return False
    try:
        np.linalg.cholesky(A + 1e-14 * np.trace(A) * np.eye(len(A)))
    except np.linalg.LinAlgError:
        return False
    if len(dims) == 1:
        return True
    r = int(np.prod(dims[1:]))
    for i in range(dims[0]):
        blk = A[i * r:(i + 1) * r, i * r:(i + 1) * r]
        if not _structured_blocks_ok(blk, dims[1:]):
            return False
    return True


@pytest.mark.parametrize('n,p', [(10, 2), (6, 3)])
def test_mass_recursive_block_structure(n, p):
    space = square_space(n, p)
    pair = assemble_single_patch(space, unit_square(), ONE, ONE)
    M = pair.M.toarray()
    assert np.all(M >= -1e-16)
    assert _structured_blocks_ok(M, pair.M.dims)


def test_mass_level_bandedness():
    space = square_space(5, 2)
    pair = assemble_single_patch(space, plate_quarter_hole(),
                                 lambda x, y: 1.0 + 0.1 * x * x, ONE)
    M = pair.M.mat.tocoo()
    n2 = pair.M.dims[1]
    for r, c, v in zip(M.row, M.col, M.data):
        if v != 0.0:
            assert abs(r // n2 - c // n2) <= 2
            assert abs(r % n2 - c % n2) <= 2
    assert pair.M.measured_bandwidth() <= pair.M.scalar_bandwidth()


def test_mass_and_parametric_mass_share_sparsity():
    space = square_space(4, 2)
    curved = assemble_single_patch(space, quarter_annulus(), ONE, ONE)
    flat = assemble_single_patch(space, unit_square(), ONE, ONE)
    a = curved.M.mat.copy()
    b = flat.M.mat.copy()
    a.data = (np.abs(a.data) > 1e-14).astype(float)
    b.data = (np.abs(b.data) > 1e-14).astype(float)
    assert (a != b).nnz == 0


def test_symmetry():
    space = square_space(6, 3, dirichlet=[(True, False), (False, True)])
    pair = assemble_single_patch(space, plate_quarter_hole(),
                                 lambda x, y: 1.0 + 0.5 * np.abs(y), ONE)
    for A in (pair.M.toarray(), pair.K.toarray()):
        assert np.max(np.abs(A - A.T)) <= 1e-14 * np.max(np.abs(A))


def test_stiffness_spd_with_dirichlet():
    space = square_space(5, 2, dirichlet=[(True, True), (True, True)])
    pair = assemble_single_patch(space, quarter_annulus(), ONE, ONE)
    np.linalg.cholesky(pair.K.toarray())
    e = np.ones(pair.K.shape[0])
    # without constraints K annihilates constants; here the boundary rows
    # are gone so Ke is nonzero but K stays PSD-consistent
    w = np.linalg.eigvalsh(pair.K.toarray())
    assert w[0] > 0


def test_stiffness_kernel_without_dirichlet():
    space = square_space(4, 2)
    pair = assemble_single_patch(space, quarter_annulus(), ONE, ONE)
    e = np.ones(pair.K.shape[0])
    assert np.max(np.abs(pair.K @ e)) <= 1e-12


# ----------------------------------------------------------------- multipatch

def test_two_interval_patches():
    kv = KnotVector([0.0, 0.0, 1.0, 1.0], 1)
    spaces = [SplineSpace([kv]), SplineSpace([kv])]
    topo = MultipatchTopology(spaces, [(0, (0, 1), 1, (0, 0), ())])
    patches = [interval_patch(0, 1), interval_patch(1, 2)]
    glob, locs = assemble_multipatch(topo, patches, ONE, ONE)
    M = glob.M.toarray()
    assert M.shape == (3, 3)
    assert M[1, 1] == pytest.approx(2 / 3, abs=1e-15)
    e = np.ones(3)
    assert e @ (glob.M @ e) == pytest.approx(2.0, abs=1e-13)
    assert len(locs) == 2


def test_single_patch_topology_matches_direct():
    kv = make_open_uniform(3, 2, 1)
    space = SplineSpace([kv, kv])
    topo = MultipatchTopology([space], [])
    glob, locs = assemble_multipatch(topo, [quarter_annulus()], ONE, ONE)
    direct = assemble_single_patch(space, quarter_annulus(), ONE, ONE)
    np.testing.assert_allclose(glob.M.toarray(), direct.M.toarray(),
                               atol=1e-15)
    np.testing.assert_allclose(glob.K.toarray(), direct.K.toarray(),
                               atol=1e-15)


def test_two_patch_plate_measure_and_symmetry():
    from igalump.geometry import plate_quarter_hole_2patch
    patches, interfaces = plate_quarter_hole_2patch()
    kv = make_open_uniform(4, 2, 1)
    spaces = [SplineSpace([kv, kv]) for _ in patches]
    topo = MultipatchTopology(spaces, interfaces)
    glob, _ = assemble_multipatch(topo, patches, ONE, ONE, nquad=10)
    e = np.ones(topo.n_global)
    assert e @ (glob.M @ e) == pytest.approx(16 - np.pi / 4, rel=1e-9)
    A = glob.M.toarray()
    assert np.max(np.abs(A - A.T)) <= 1e-14 * np.max(np.abs(A))


# ------------------------------------------------------------------- trimming

def test_trimmed_all_inside_matches_untrimmed():
    space = square_space(4, 2)
    patch = unit_square()
    mask = classify_elements(space, patch, lambda x, y: np.ones_like(x))
    trimmed = assemble_trimmed(space, patch, mask, ONE, ONE)
    direct = assemble_single_patch(space, patch, ONE, ONE)
    np.testing.assert_allclose(trimmed.M.toarray(), direct.M.toarray(),
                               atol=1e-14)
    np.testing.assert_allclose(trimmed.K.toarray(), direct.K.toarray(),
                               atol=1e-14)
    assert np.array_equal(trimmed.embedding, np.arange(space.numdofs))


@pytest.mark.parametrize('p', [1, 2])
def test_half_plane_trim_matches_subrectangle(p):
    n = 4
    space = square_space(n, p)
    patch = unit_square()
    mask = classify_elements(space, patch, lambda x, y: 0.5 - x, subdepth=2)
    trimmed = assemble_trimmed(space, patch, mask, ONE, ONE)

    # same mesh on [0, 0.5] x [0, 1]
    kvx = make_open_uniform(n // 2, p, p - 1)
    kvy = make_open_uniform(n, p, p - 1)
    sub_space = SplineSpace([kvx, kvy])
    pts = np.array([(0.5 * i, j) for i in (0, 1) for j in (0, 1)], float)
    sub_patch = Patch(unit_square().space, pts)
    sub = assemble_single_patch(sub_space, sub_patch, ONE, ONE)

    # dofs whose x-function lives entirely left of the cut are identical
    # in both spaces
    kx = space.kvs[0]
    shared_x = [i for i in range(kx.numdofs) if kx.knots[i + p + 1] <= 0.5]
    assert shared_x == list(range(len(shared_x))) and shared_x
    ny = space.kvs[1].numdofs
    tri_multi = np.stack(np.unravel_index(trimmed.full_index, space.dims), 1)
    sel_t = [k for k, (ix, iy) in enumerate(tri_multi) if ix in shared_x]
    sel_s = [ix * ny + iy for ix in shared_x for iy in range(ny)]
    A = trimmed.M.toarray()[np.ix_(sel_t, sel_t)]
    B = sub.M.toarray()[np.ix_(sel_s, sel_s)]
    np.testing.assert_allclose(A, B, atol=1e-13)


def test_trimmed_rotated_square_system():
    space = square_space(8, 2)
    patch = unit_square()
    region = rotated_square_region(center=(0.5, 0.5), angle=0.3,
                                   half_side=0.31)
    mask = classify_elements(space, patch, region)
    pair = assemble_trimmed(space, patch, mask, ONE, ONE)
    n = pair.M.shape[0]
    assert n == int(mask.active.sum()) < space.numdofs
    M = pair.M.toarray()
    assert np.max(np.abs(M - M.T)) <= 1e-14 * np.max(np.abs(M))
    # mass of the trimmed region approximates the square's area
    e = np.ones(n)
    area = e @ (pair.M @ e)
    assert area == pytest.approx((2 * 0.31) ** 2, rel=0.02)
    w = np.linalg.eigvalsh(M)
    assert w[0] > 0


def test_trimmed_all_outside_raises():
    space = square_space(4, 2)
    patch = unit_square()
    mask = classify_elements(space, patch, lambda x, y: -np.ones_like(x))
    with pytest.raises(ValueError):
        assemble_trimmed(space, patch, mask, ONE, ONE)


# ------------------------------------------------------------ jacobi rescale

def test_jacobi_rescale_diagonal_to_identity():
    B = np.diag([4.0, 9.0, 16.0])
    A = np.eye(3)
    DAD, DBD, d = jacobi_rescale(A, B)
    np.testing.assert_allclose(DBD.toarray(), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(d, [0.5, 1 / 3, 0.25])


def test_jacobi_rescale_preserves_eigenvalues():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(6, 6))
    Y = rng.normal(size=(6, 6))
    A = X @ X.T
    B = Y @ Y.T + 6 * np.eye(6)
    DAD, DBD, _ = jacobi_rescale(A, B)
    w0 = scipy.linalg.eigh(A, B, eigvals_only=True)
    w1 = scipy.linalg.eigh(DAD.toarray(), DBD.toarray(), eigvals_only=True)
    np.testing.assert_allclose(w1, w0, rtol=1e-10, atol=1e-12)
    wa = scipy.linalg.eigh(B, B, eigvals_only=True)
    np.testing.assert_allclose(wa, np.ones(6), atol=1e-12)


def test_jacobi_rescale_rejects_nonpositive_diagonal():
    with pytest.raises(ValueError):
        jacobi_rescale(np.eye(2), np.diag([1.0, 0.0]))


# --------------------------------------------------------------- file format

def test_load_vector_of_one_is_mass_row_sum():
    space = square_space(3, 2)
    pair = assemble_single_patch(space, unit_square(), ONE, ONE)
    b = load_vector(space, unit_square(), ONE)
    np.testing.assert_allclose(b, pair.M @ np.ones(space.num_free),
                               atol=1e-14)


def test_load_vector_total_is_rational_measure():
    kv = make_open_uniform(2, 2, 1)
    space = SplineSpace([kv, kv])
    b = load_vector(space, quarter_annulus(), ONE, nquad=10)
    assert np.sum(b) == pytest.approx(3 * np.pi / 4, rel=1e-10)


def test_load_vector_respects_dirichlet():
    space = square_space(3, 2, dirichlet=((True, True), (True, True)))
    b = load_vector(space, unit_square(), lambda x, y: x + y)
    assert b.shape == (space.num_free,)
    full = load_vector(SplineSpace(space.kvs), unit_square(),
                       lambda x, y: x + y)
    np.testing.assert_allclose(
        b, full[space.free_to_full()], atol=1e-15)


def test_triplet_roundtrip(tmp_path):
    space = square_space(3, 2)
    pair = assemble_single_patch(space, quarter_annulus(), ONE, ONE)
    path = tmp_path / 'm.txt'
    write_triplets(path, pair.M)
    back = read_triplets(path)
    assert (back != pair.M.mat).nnz == 0
