"""Geometry maps, catalog shapes, trimming and the file format."""

import math

import numpy as np
import pytest

from igalump.geometry import (MultipatchTopology, Patch, classify_elements,
                              catalog, jacobian, knot_insert, magnet,
                              outer_faces, patch_grid, plate_quarter_hole,
                              plate_quarter_hole_2patch, pullback_coeffs,
                              quarter_annulus, read_geometry,
                              rotated_square_region, split_patch,
                              stretched_square, twisted_box, unit_cube,
                              unit_square, write_geometry)
from igalump.splines import SplineSpace, make_open_uniform


def affine_stretch():
    """F(x,y) = (2x, y)."""
    patch = unit_square()
    pts = patch.points.copy()
    pts[:, 0] *= 2.0
    return Patch(patch.space, pts)


# ------------------------------------------------------------------ jacobians

def test_identity_jacobian():
    J, det = jacobian(unit_square(), (0.3, 0.7))
    np.testing.assert_allclose(J, np.eye(2), atol=1e-14)
    assert det == pytest.approx(1.0, abs=1e-14)


def test_affine_stretch_det_constant():
    patch = affine_stretch()
    for xhat in [(0.1, 0.2), (0.5, 0.5), (0.9, 0.99)]:
        _, det = jacobian(patch, xhat)
        assert det == pytest.approx(2.0, abs=1e-13)


def test_quarter_annulus_det_vs_symbolic():
    # independent closed-form differentiation of the rational arc map:
    # F(xi, eta) = (1 + xi) * c(eta) with c the unit quarter circle
    import sympy as sp
    xi, eta = sp.symbols('xi eta')
    w = sp.sqrt(2) / 2
    N = [(1 - eta) ** 2, 2 * eta * (1 - eta), eta ** 2]
    ctrl = [(1, 0), (1, 1), (0, 1)]
    wts = [1, w, 1]
    den = sum(Ni * wi for Ni, wi in zip(N, wts))
    cx = sum(Ni * wi * c[0] for Ni, wi, c in zip(N, wts, ctrl)) / den
    cy = sum(Ni * wi * c[1] for Ni, wi, c in zip(N, wts, ctrl)) / den
    Fx, Fy = (1 + xi) * cx, (1 + xi) * cy
    detJ = sp.diff(Fx, xi) * sp.diff(Fy, eta) - sp.diff(Fx, eta) * sp.diff(Fy, xi)
    expected = float(detJ.subs({xi: sp.Rational(1, 2),
                                eta: sp.Rational(1, 2)}))
    assert expected > 0
    _, det = jacobian(quarter_annulus(), (0.5, 0.5))
    assert det == pytest.approx(expected, rel=1e-12)


def test_quarter_annulus_is_exact():
    patch = quarter_annulus(1.0, 2.0)
    for t in np.linspace(0, 1, 13):
        inner = patch.map_eval((0.0, t))
        outer = patch.map_eval((1.0, t))
        assert np.hypot(*inner) == pytest.approx(1.0, abs=1e-13)
        assert np.hypot(*outer) == pytest.approx(2.0, abs=1e-13)


# ------------------------------------------------------------------- pullback

def test_pullback_identity():
    c, G = pullback_coeffs(unit_square(), lambda x, y: 1.0, lambda x, y: 1.0,
                           (0.4, 0.6))
    assert c == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(G, np.eye(2), atol=1e-14)


def test_pullback_affine_stretch():
    c, G = pullback_coeffs(affine_stretch(), lambda x, y: 1.0,
                           lambda x, y: 1.0, (0.25, 0.5))
    assert c == pytest.approx(2.0, abs=1e-13)
    np.testing.assert_allclose(G, np.diag([0.5, 2.0]), atol=1e-13)


def test_pullback_nonseparable_density_at_origin():
    rho = lambda x, y: abs(math.sin(x * y)) + x + y + 1.0
    c, _ = pullback_coeffs(unit_square(), rho, lambda x, y: 1.0, (0.0, 0.0))
    assert c == pytest.approx(1.0, abs=1e-14)


def test_pullback_symmetry_and_spd():
    rng = np.random.default_rng(7)
    for patch in (stretched_square(), quarter_annulus(), plate_quarter_hole()):
        for _ in range(5):
            xhat = rng.uniform(0.05, 0.95, size=2)
            _, G = pullback_coeffs(patch, lambda x, y: 1.0,
                                   lambda x, y: 1.0, xhat)
            assert np.linalg.norm(G - G.T) <= 1e-13 * np.linalg.norm(G)
            assert G[0, 0] > 0 and np.linalg.det(G) > 0


# ------------------------------------------------------------- plate geometry

def test_plate_boundary_curves():
    patch = plate_quarter_hole()
    for t in np.linspace(0, 1, 17):
        hole = patch.map_eval((t, 0.0))
        assert np.hypot(*hole) == pytest.approx(1.0, abs=1e-12)
        edge0 = patch.map_eval((0.0, t))     # along y = 0
        assert edge0[1] == pytest.approx(0.0, abs=1e-13)
        edge1 = patch.map_eval((1.0, t))     # along x = 0
        assert edge1[0] == pytest.approx(0.0, abs=1e-13)
        outer = patch.map_eval((t, 1.0))
        if t <= 0.5:
            assert outer[0] == pytest.approx(-4.0, abs=1e-12)
        else:
            assert outer[1] == pytest.approx(4.0, abs=1e-12)


def test_plate_jacobian_positive_inside():
    patch = plate_quarter_hole()
    xs = np.linspace(0.02, 0.98, 15)
    _, _, det = patch.grid_eval([xs, xs])
    assert np.all(det > 0)
    # degenerates at the repeated outer corner
    _, near = jacobian(patch, (0.5, 0.999))
    _, mid = jacobian(patch, (0.5, 0.5))
    assert near < 0.05 * mid


def test_plate_split_preserves_map():
    whole = plate_quarter_hole()
    (a, b), interfaces = plate_quarter_hole_2patch()
    for (xi, eta) in [(0.1, 0.3), (0.45, 0.8), (0.9, 0.2), (0.5, 0.5)]:
        np.testing.assert_allclose(a.map_eval((xi, eta)),
                                   whole.map_eval((0.5 * xi, eta)),
                                   atol=1e-12)
        np.testing.assert_allclose(b.map_eval((xi, eta)),
                                   whole.map_eval((0.5 + 0.5 * xi, eta)),
                                   atol=1e-12)
    # interface curves coincide and the interiors stay regular
    for t in np.linspace(0, 1, 9):
        np.testing.assert_allclose(a.map_eval((1.0, t)),
                                   b.map_eval((0.0, t)), atol=1e-12)
    xs = np.linspace(0.05, 0.95, 9)
    for patch in (a, b):
        _, _, det = patch.grid_eval([xs, xs])
        assert np.all(det > 0)


def test_knot_insert_preserves_curve():
    patch = quarter_annulus()
    kv = patch.space.kvs[0]
    H = patch.homogeneous().reshape(2, -1)
    kv2, H2 = knot_insert(kv, H, 0.37)
    assert kv2.numdofs == 3
    space2 = SplineSpace([kv2, patch.space.kvs[1]])
    flat = H2.reshape(-1, 3)
    patch2 = Patch(space2, flat[:, :2] / flat[:, 2:], flat[:, 2])
    for xhat in [(0.1, 0.4), (0.37, 0.9), (0.8, 0.0)]:
        np.testing.assert_allclose(patch2.map_eval(xhat),
                                   patch.map_eval(xhat), atol=1e-13)


# ----------------------------------------------------------- catalog sanity

@pytest.mark.parametrize('name', ['unit_square', 'unit_cube',
                                  'stretched_square', 'plate_hole', 'magnet'])
def test_catalog_positive_jacobians(name):
    patches, _ = catalog(name)
    rng = np.random.default_rng(3)
    for patch in patches:
        for _ in range(8):
            xhat = rng.uniform(0.05, 0.95, size=patch.ndim)
            _, det = jacobian(patch, xhat)
            assert det > 0


def test_magnet_is_half_annulus():
    patch = magnet(1.0, 2.0, 0.5)
    for t in np.linspace(0, 1, 9):
        p = patch.map_eval((0.0, t, 0.0))
        assert np.hypot(p[0], p[1]) == pytest.approx(1.0, abs=1e-12)
        assert p[2] == pytest.approx(0.0, abs=1e-14)
        q = patch.map_eval((1.0, t, 1.0))
        assert np.hypot(q[0], q[1]) == pytest.approx(2.0, abs=1e-12)
        assert q[2] == pytest.approx(0.5, abs=1e-14)
    assert patch.map_eval((0.0, 1.0, 0.0))[0] == pytest.approx(-1.0, abs=1e-13)


def test_twisted_box_stacks_conformingly():
    patches, interfaces = twisted_box()
    assert len(patches) == 3 and len(interfaces) == 2
    top = patches[0].map_eval((0.3, 0.7, 1.0))
    bottom = patches[1].map_eval((0.3, 0.7, 0.0))
    np.testing.assert_allclose(top, bottom, atol=1e-13)


# ------------------------------------------------------------------- trimming

def _square_space(n, p):
    kv = make_open_uniform(n, p, p - 1)
    return SplineSpace([kv, kv])


def test_classify_whole_and_empty():
    space = _square_space(4, 2)
    patch = unit_square()
    mask = classify_elements(space, patch, lambda x, y: np.ones_like(x))
    assert np.all(mask.element_class == 1)
    assert np.all(mask.active)
    mask = classify_elements(space, patch, lambda x, y: -np.ones_like(x))
    assert np.all(mask.element_class == -1)
    assert not np.any(mask.active)


def test_classify_half_plane_on_knot_line():
    space = _square_space(4, 1)
    patch = unit_square()
    mask = classify_elements(space, patch, lambda x, y: 0.5 - x, subdepth=2)
    assert np.all(mask.element_class[:2, :] == 1)
    assert np.all(mask.element_class[2:, :] == -1)
    assert not np.any(mask.element_class == 0)


def test_degenerate_rotated_square_keeps_all_dofs():
    space = _square_space(6, 2)
    patch = unit_square()
    mask = classify_elements(space, patch, rotated_square_region())
    assert int(mask.active.sum()) == space.numdofs


def test_rotated_square_cuts():
    space = _square_space(10, 2)
    patch = unit_square()
    region = rotated_square_region(center=(0.52, 0.49), angle=0.4,
                                   half_side=0.25)
    mask = classify_elements(space, patch, region)
    assert np.any(mask.element_class == 0)
    assert np.any(mask.element_class == -1)
    assert 0 < int(mask.active.sum()) < space.numdofs


# ------------------------------------------------------------------ topology

def test_two_patch_share_counts():
    patches, interfaces = patch_grid(2, 1)
    kv = make_open_uniform(3, 2, 1)
    spaces = [SplineSpace([kv, kv]) for _ in patches]
    topo = MultipatchTopology(spaces, interfaces)
    n = kv.numdofs
    assert topo.n_global == 2 * n * n - n
    # all-ones local vectors accumulate to the share count
    acc = np.zeros(topo.n_global)
    for m in topo.l2g:
        acc[m] += 1.0
    assert np.array_equal(acc, topo.share_count)
    assert int((acc == 2).sum()) == n


def test_reversed_orientation_matches_flipped_patch():
    # patch 1 covers [1,2]x[0,1] with its y axis reversed; gluing needs the
    # reversal flag for dof positions to coincide
    kv = make_open_uniform(2, 2, 1)
    spaces = [SplineSpace([kv, kv]), SplineSpace([kv, kv])]
    left = unit_square()
    pts = np.array([(1, 1), (1, 0), (2, 1), (2, 0)], dtype=float)
    right = Patch(left.space, pts)
    interfaces = [(0, (0, 1), 1, (0, 0), (1,))]
    topo = MultipatchTopology(spaces, interfaces)
    n = kv.numdofs
    assert topo.n_global == 2 * n * n - n
    # sanity: the physical interface edges agree pointwise under the flip
    for t in np.linspace(0, 1, 7):
        np.testing.assert_allclose(left.map_eval((1.0, t)),
                                   right.map_eval((0.0, 1.0 - t)), atol=1e-14)


def test_nonconforming_interface_rejected():
    kv1 = make_open_uniform(3, 2, 1)
    kv2 = make_open_uniform(4, 2, 1)
    spaces = [SplineSpace([kv1, kv1]), SplineSpace([kv2, kv2])]
    _, interfaces = patch_grid(2, 1)
    with pytest.raises(ValueError):
        MultipatchTopology(spaces, interfaces)


def test_outer_faces():
    patches, interfaces = patch_grid(2, 1)
    faces = outer_faces(patches, interfaces)
    assert (0, 0, 1) not in faces and (1, 0, 0) not in faces
    assert len(faces) == 6


def test_interior_split_boxes():
    patches, interfaces = patch_grid(2, 1)
    kv = make_open_uniform(4, 2, 1)
    spaces = [SplineSpace([kv, kv], dirichlet=[(True, True), (True, True)])
              for _ in patches]
    # interface faces must stay free of Dirichlet flags
    spaces[0] = SplineSpace([kv, kv], dirichlet=[(True, False), (True, True)])
    spaces[1] = SplineSpace([kv, kv], dirichlet=[(False, True), (True, True)])
    topo = MultipatchTopology(spaces, interfaces)
    boxes, iface = topo.interior_split()
    n = kv.numdofs
    assert len(iface) == n - 2
    sizes = [len(g) for g, _ in boxes]
    assert sum(sizes) + len(iface) == topo.n_global
    for gids, dims in boxes:
        assert len(gids) == int(np.prod(dims))
        assert len(np.intersect1d(gids, iface)) == 0


# ---------------------------------------------------------------- file format

def test_geometry_roundtrip(tmp_path):
    patches, interfaces = plate_quarter_hole_2patch()
    dirichlet = [(0, 1, 0), (1, 1, 0)]
    path = tmp_path / 'geo.txt'
    write_geometry(path, patches, interfaces, dirichlet)
    rp, ri, rd = read_geometry(path)
    assert ri == interfaces
    assert rd == dirichlet
    assert len(rp) == 2
    for old, new in zip(patches, rp):
        assert np.array_equal(old.points, new.points)
        assert np.array_equal(old.weights, new.weights)
        for kold, knew in zip(old.space.kvs, new.space.kvs):
            assert kold == knew


def test_geometry_roundtrip_polynomial(tmp_path):
    path = tmp_path / 'geo.txt'
    write_geometry(path, [unit_cube()])
    rp, ri, rd = read_geometry(path)
    assert ri == [] and rd == []
    assert rp[0].weights is None
    assert np.array_equal(rp[0].points, unit_cube().points)


def test_read_rejects_other_files(tmp_path):
    path = tmp_path / 'bogus.txt'
    path.write_text('hello world\n')
    with pytest.raises(ValueError):
        read_geometry(path)
