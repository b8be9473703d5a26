"""Patch geometry maps and multipatch topology.

A Patch is a tensor-product B-spline or NURBS map from the parametric unit
cube to physical space. This module provides Jacobians, the pullback
coefficients used in assembly, a catalog of built-in geometries, knot
insertion and patch splitting, trim-region classification, conforming
multipatch topologies, and a plain-text geometry file format.
"""

import math

import numpy as np

from .splines import KnotVector, SplineSpace, eval_basis, make_open_uniform

__all__ = [
    'Patch', 'MultipatchTopology', 'TrimMask', 'jacobian', 'pullback_coeffs',
    'classify_elements', 'knot_insert', 'split_patch', 'unit_square',
    'unit_cube', 'stretched_square', 'quarter_annulus', 'plate_quarter_hole',
    'plate_quarter_hole_2patch', 'magnet', 'twisted_box', 'patch_grid',
    'rotated_square_region', 'catalog', 'write_geometry', 'read_geometry',
]


class Patch:
    """A mapped tensor-product patch.

    Attributes:
        space: SplineSpace of the geometry map (no Dirichlet flags).
        points: (numdofs, d) control points, lexicographic (first direction
            slowest).
        weights: (numdofs,) positive weights, or None for polynomial maps.
    """

    def __init__(self, space, points, weights=None):
        points = np.asarray(points, dtype=float)
        d = space.ndim
        assert points.shape == (space.numdofs, d), points.shape
        if weights is not None:
            weights = np.asarray(weights, dtype=float)
            assert weights.shape == (space.numdofs,)
            assert np.all(weights > 0), 'weights must be positive'
        self.space = space
        self.points = points
        self.weights = weights

    @property
    def ndim(self):
        return self.space.ndim

    def homogeneous(self):
        """Control net in homogeneous coordinates, shape dims + (d+1,)."""
        w = self.weights if self.weights is not None \
            else np.ones(self.space.numdofs)
        H = np.concatenate([self.points * w[:, None], w[:, None]], axis=1)
        return H.reshape(self.space.dims + (self.ndim + 1,))

    def map_eval(self, xhat):
        """Physical image of the parametric point xhat."""
        T = self._hom_eval(xhat, deriv=False)
        return T[:-1] / T[-1]

    def _hom_eval(self, xhat, deriv):
        d = self.ndim
        H = self.homogeneous()
        vals, ders, firsts = [], [], []
        for l in range(d):
            first, table = eval_basis(self.space.kvs[l], xhat[l],
                                      1 if deriv else 0)
            firsts.append(first)
            vals.append(table[0])
            if deriv:
                ders.append(table[1])
        p = self.space.degrees
        sub = H[tuple(slice(f, f + p[l] + 1) for l, f in enumerate(firsts))]
        T = sub
        for l in range(d):
            T = np.tensordot(vals[l], T, axes=(0, 0))
        if not deriv:
            return T
        grads = []
        for l in range(d):
            G = sub
            for m in range(d):
                row = ders[m] if m == l else vals[m]
                G = np.tensordot(row, G, axes=(0, 0))
            grads.append(G)
        return T, grads

    def grid_eval(self, pts_per_dir):
        """Map, Jacobians and determinants on a tensor grid of points.

        Args:
            pts_per_dir: list of d 1D arrays of parametric coordinates.

        Returns:
            (F, J, detJ): F has shape grid+(d,), J grid+(d,d), detJ grid.
        """
        d = self.ndim
        H = self.homogeneous()
        V, D = [], []
        for l, pts in enumerate(pts_per_dir):
            kv = self.space.kvs[l]
            n = kv.numdofs
            Vl = np.zeros((len(pts), n))
            Dl = np.zeros((len(pts), n))
            for a, x in enumerate(pts):
                first, table = eval_basis(kv, x, 1)
                Vl[a, first:first + kv.p + 1] = table[0]
                Dl[a, first:first + kv.p + 1] = table[1]
            V.append(Vl)
            D.append(Dl)
        T = _tensor_apply(H, V)
        grads = []
        for l in range(d):
            mats = [D[m] if m == l else V[m] for m in range(d)]
            grads.append(_tensor_apply(H, mats))
        w = T[..., -1]
        F = T[..., :-1] / w[..., None]
        J = np.empty(w.shape + (d, d))
        for l in range(d):
            Al = grads[l][..., :-1]
            wl = grads[l][..., -1]
            J[..., :, l] = (Al - F * wl[..., None]) / w[..., None]
        detJ = np.linalg.det(J)
        return F, J, detJ

    def __repr__(self):
        kind = 'NURBS' if self.weights is not None else 'B-spline'
        return 'Patch(%s, p=%s, dims=%s)' % (kind, self.space.degrees,
                                             self.space.dims)


def _tensor_apply(H, mats):
    # contract dims axes of H (dims + (d+1,)) with per-direction matrices
    T = H
    for l, M in enumerate(mats):
        T = np.moveaxis(np.tensordot(M, T, axes=(1, l)), 0, l)
    return T


def jacobian(patch, xhat):
    """Jacobian matrix (columns are parametric derivatives) and determinant."""
    T, grads = patch._hom_eval(np.asarray(xhat, dtype=float), deriv=True)
    w = T[-1]
    F = T[:-1] / w
    d = patch.ndim
    J = np.empty((d, d))
    for l in range(d):
        J[:, l] = (grads[l][:-1] - F * grads[l][-1]) / w
    return J, float(np.linalg.det(J))


def pullback_coeffs(patch, rho, kappa, xhat):
    """Mass and stiffness pullback data at one parametric point.

    Returns (c, G) with c = rho(F)|detJ| and G = kappa(F)|detJ|(J^T J)^-1.

    Raises:
        ValueError: if the Jacobian is (numerically) singular.
    """
    xhat = np.asarray(xhat, dtype=float)
    J, detJ = jacobian(patch, xhat)
    if abs(detJ) < 1e-14:
        raise ValueError('singular jacobian at %s (det=%g)' % (xhat, detJ))
    x = patch.map_eval(xhat)
    c = rho(*x) * abs(detJ)
    G = kappa(*x) * abs(detJ) * np.linalg.inv(J.T @ J)
    return c, G


# ------------------------------------------------------------- knot insertion

def knot_insert(kv, coeffs, value):
    """Insert one knot into a univariate (homogeneous) coefficient array.

    Boehm's algorithm. coeffs has shape (numdofs, m); one new row appears.

    Returns:
        (new KnotVector, new coeffs).
    """
    U = kv.knots
    p = kv.p
    lo, hi = kv.domain
    assert lo < value < hi
    span = kv.find_span(value)
    new = np.zeros((coeffs.shape[0] + 1, coeffs.shape[1]))
    new[:span - p + 1] = coeffs[:span - p + 1]
    new[span + 1:] = coeffs[span:]
    for i in range(span - p + 1, span + 1):
        a = (value - U[i]) / (U[i + p] - U[i])
        new[i] = (1 - a) * coeffs[i - 1] + a * coeffs[i]
    knots = np.insert(U, span + 1, value)
    return KnotVector(knots, p), new


def split_patch(patch, direction, value):
    """Split a patch in two at a parametric value along one direction.

    Knots are inserted until the value has full multiplicity p, then the
    control net is cut and each half reparametrized to [0,1].
    """
    d = patch.ndim
    p = patch.space.degrees[direction]
    H = patch.homogeneous()
    H = np.moveaxis(H, direction, 0)
    lead = H.shape[0]
    rest = H.reshape(lead, -1)
    kv = patch.space.kvs[direction]
    mult = int(np.sum(np.isclose(kv.knots, value)))
    for _ in range(p - mult):
        kv, rest = knot_insert(kv, rest, value)
    cut = int(np.searchsorted(kv.knots, value, side='left')) - 1
    # function `cut` is the C0 hat shared by both halves
    halves = []
    pieces = [(kv.knots[:cut + p + 2], rest[:cut + 1]),
              (kv.knots[cut:], rest[cut:])]
    for knots, C in pieces:
        knots = knots.copy()
        knots[0:p + 1] = knots[p]
        knots[-p - 1:] = knots[-p - 1]
        lo, hi = knots[p], knots[-p - 1]
        knots = (knots - lo) / (hi - lo)
        nkv = KnotVector(knots, p)
        kvs = list(patch.space.kvs)
        kvs[direction] = nkv
        shape = (C.shape[0],) + H.shape[1:]
        Hnew = np.moveaxis(C.reshape(shape), 0, direction)
        flat = Hnew.reshape(-1, d + 1)
        w = flat[:, -1]
        halves.append(Patch(SplineSpace(kvs), flat[:, :-1] / w[:, None], w))
    return halves[0], halves[1]


# ------------------------------------------------------------------ trimming

class TrimMask:
    """Element classification and dof activity for a trimmed patch.

    Attributes:
        region: the implicit function used (positive inside).
        element_class: int array over the element grid; 1 inside, 0 cut,
            -1 outside.
        active: bool array over the full tensor dof set (space.dims).
    """

    def __init__(self, region, element_class, active):
        self.region = region
        self.element_class = element_class
        self.active = active

    @property
    def any_inside(self):
        return bool(np.any(self.element_class >= 0))


def classify_elements(space, patch, region, subdepth=3):
    """Classify the elements of a discretization mesh against a trim region.

    An element is cut when the region takes both strict signs on a uniform
    corner lattice with 2**subdepth cells per direction, inside when some
    node is strictly positive and none negative, outside otherwise. Zeros on
    a lattice node are compatible with either side, so a boundary lying on a
    knot line never produces cut elements. A dof stays active when its
    support contains at least one non-outside element.
    """
    d = space.ndim
    spans = [space.kvs[l].span_bounds() for l in range(d)]
    nel = tuple(len(s[0]) for s in spans)
    m = 2 ** subdepth + 1
    element_class = np.empty(nel, dtype=int)
    for el in np.ndindex(*nel):
        pts = []
        for l in range(d):
            lo, hi = spans[l][0][el[l]], spans[l][1][el[l]]
            pts.append(np.linspace(lo, hi, m))
        F, _, _ = patch.grid_eval(pts)
        signs = region(*np.moveaxis(F, -1, 0))
        has_pos, has_neg = np.any(signs > 0), np.any(signs < 0)
        if has_pos and has_neg:
            element_class[el] = 0
        elif has_pos:
            element_class[el] = 1
        else:
            element_class[el] = -1
    active = np.zeros(space.dims, dtype=bool)
    for dof in np.ndindex(*space.dims):
        sup = [space.kvs[l].support_elements(dof[l]) for l in range(d)]
        grid = np.ix_(*sup)
        if np.any(element_class[grid] >= 0):
            active[dof] = True
    return TrimMask(region, element_class, active)


def rotated_square_region(center=(0.5, 0.5), angle=0.0, half_side=0.5):
    """Implicit function of a rotated square; positive inside."""
    cx, cy = center
    c, s = math.cos(angle), math.sin(angle)

    def region(x, y):
        u = c * (x - cx) + s * (y - cy)
        v = -s * (x - cx) + c * (y - cy)
        return half_side - np.maximum(np.abs(u), np.abs(v))
    return region


# ------------------------------------------------------------------- catalog

def _linear_kv():
    return KnotVector([0.0, 0.0, 1.0, 1.0], 1)


def unit_square():
    space = SplineSpace([_linear_kv(), _linear_kv()])
    pts = [(0, 0), (0, 1), (1, 0), (1, 1)]
    return Patch(space, np.array(pts, dtype=float))


def unit_cube():
    space = SplineSpace([_linear_kv()] * 3)
    pts = [(i, j, k) for i in (0, 1) for j in (0, 1) for k in (0, 1)]
    return Patch(space, np.array(pts, dtype=float))


def stretched_square():
    """Convex bilinear quadrilateral, asymmetric on purpose."""
    space = SplineSpace([_linear_kv(), _linear_kv()])
    pts = [(0, 0), (0, 1), (2, 0), (3, 2)]
    return Patch(space, np.array(pts, dtype=float))


def quarter_annulus(rin=1.0, rout=2.0):
    """Exact quarter annulus; first direction radial, second angular."""
    kv_ang = KnotVector([0, 0, 0, 1, 1, 1], 2)
    kv_rad = _linear_kv()
    space = SplineSpace([kv_rad, kv_ang])
    arc = np.array([(1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
    pts = np.array([r * a for r in (rin, rout) for a in arc])
    w = math.sqrt(0.5)
    weights = np.array([1, w, 1, 1, w, 1], dtype=float)
    return Patch(space, pts, weights)


def plate_quarter_hole():
    """Quarter of the [-4,0]x[0,4] plate with a unit circular hole.

    Single NURBS patch; the hole boundary is exact. The outer corner control
    point is repeated, so the map degenerates there.
    """
    kv_ang = KnotVector([0, 0, 0, 0.5, 1, 1, 1], 2)
    kv_rad = KnotVector([0, 0, 0, 1, 1, 1], 2)
    space = SplineSpace([kv_ang, kv_rad])
    s2 = math.sqrt(2.0)
    rows = [
        [(-1.0, 0.0), (-2.5, 0.0), (-4.0, 0.0)],
        [(-1.0, s2 - 1.0), (-2.5, 0.75), (-4.0, 4.0)],
        [(1.0 - s2, 1.0), (-0.75, 2.5), (-4.0, 4.0)],
        [(0.0, 1.0), (0.0, 2.5), (0.0, 4.0)],
    ]
    pts = np.array([xy for row in rows for xy in row], dtype=float)
    wa = (1.0 + 1.0 / s2) / 2.0
    weights = np.array([w for w in (1.0, wa, wa, 1.0) for _ in range(3)])
    return Patch(space, pts, weights)


def plate_quarter_hole_2patch():
    """The plate split along the 45-degree radial line.

    Returns (patches, interfaces) gluing the angular end of the first half
    to the angular start of the second. Splitting keeps the map exact, so
    the degenerate outer corner sits at a patch corner of each half.
    """
    a, b = split_patch(plate_quarter_hole(), 0, 0.5)
    interfaces = [(0, (0, 1), 1, (0, 0), (0,))]
    return [a, b], interfaces


def magnet(rin=1.0, rout=2.0, thickness=0.5):
    """Horseshoe magnet: half annulus swept in the third direction.

    Directions are (radial, angular, thickness); the semicircle is a single
    C1 rational quadratic with an interior knot.
    """
    kv_ang = KnotVector([0, 0, 0, 0.5, 1, 1, 1], 2)
    space = SplineSpace([_linear_kv(), kv_ang, _linear_kv()])
    arc = np.array([(1.0, 0.0), (1.0, 1.0), (-1.0, 1.0), (-1.0, 0.0)])
    pts = []
    for r in (rin, rout):
        for a in arc:
            for z in (0.0, thickness):
                pts.append((r * a[0], r * a[1], z))
    weights = np.array([w for _ in range(2)
                        for w in (1.0, 0.5, 0.5, 1.0) for _ in range(2)])
    return Patch(space, np.array(pts), weights)


def twisted_box(total_angle=math.pi / 4.0, npatches=3):
    """Stack of trilinear boxes whose square section twists with height."""
    patches = []
    angles = np.linspace(0.0, total_angle, npatches + 1)
    zs = np.linspace(0.0, 1.0, npatches + 1)
    for r in range(npatches):
        pts = []
        for sx in (-0.5, 0.5):
            for sy in (-0.5, 0.5):
                for (theta, z) in ((angles[r], zs[r]),
                                   (angles[r + 1], zs[r + 1])):
                    c, s = math.cos(theta), math.sin(theta)
                    pts.append((c * sx - s * sy, s * sx + c * sy, z))
        space = SplineSpace([_linear_kv()] * 3)
        patches.append(Patch(space, np.array(pts)))
    interfaces = [(r, (2, 1), r + 1, (2, 0), (0, 0, 0))
                  for r in range(npatches - 1)]
    return patches, interfaces


def patch_grid(nx, ny):
    """nx-by-ny grid of unit-square patches with conforming interfaces."""
    patches = []
    for i in range(nx):
        for j in range(ny):
            space = SplineSpace([_linear_kv(), _linear_kv()])
            pts = [(i, j), (i, j + 1), (i + 1, j), (i + 1, j + 1)]
            patches.append(Patch(space, np.array(pts, dtype=float)))
    interfaces = []
    def pid(i, j):
        return i * ny + j
    for i in range(nx):
        for j in range(ny):
            if i + 1 < nx:
                interfaces.append((pid(i, j), (0, 1), pid(i + 1, j), (0, 0),
                                   (0,)))
            if j + 1 < ny:
                interfaces.append((pid(i, j), (1, 1), pid(i, j + 1), (1, 0),
                                   (0,)))
    return patches, interfaces


def catalog(name, **params):
    """Look up a geometry by id. Multipatch entries return (patches, interfaces);
    single-patch entries return ([patch], [])."""
    single = {
        'unit_square': unit_square,
        'unit_cube': unit_cube,
        'stretched_square': stretched_square,
        'quarter_annulus': quarter_annulus,
        'plate_hole': plate_quarter_hole,
        'magnet': magnet,
    }
    multi = {
        'plate_hole_2patch': plate_quarter_hole_2patch,
        'twisted_box': twisted_box,
        'grid_4x4': lambda: patch_grid(4, 4),
        'grid_1x16': lambda: patch_grid(1, 16),
    }
    if name in single:
        return [single[name](**params)], []
    if name in multi:
        return multi[name](**params)
    raise KeyError('unknown geometry id %r' % name)


def outer_faces(patches, interfaces):
    """Faces not glued to any interface: (patch, direction, side) triples."""
    glued = set()
    for (a, fa, b, fb, _o) in interfaces:
        glued.add((a, fa[0], fa[1]))
        glued.add((b, fb[0], fb[1]))
    out = []
    for ip, patch in enumerate(patches):
        for l in range(patch.ndim):
            for side in (0, 1):
                if (ip, l, side) not in glued:
                    out.append((ip, l, side))
    return out


# -------------------------------------------------------- multipatch topology

def _face_layer(dims, face):
    """Full-tensor indices of the dof layer on a face, shaped as the face grid.

    face = (direction, side). The returned array is indexed by the tangential
    multi-index (remaining directions in increasing order).
    """
    direction, side = face
    idx = []
    for l, n in enumerate(dims):
        if l == direction:
            idx.append([n - 1] if side else [0])
        else:
            idx.append(range(n))
    grids = np.meshgrid(*idx, indexing='ij')
    lin = np.ravel_multi_index([g.ravel() for g in grids], dims)
    shape = tuple(n for l, n in enumerate(dims) if l != direction)
    return lin.reshape(shape if shape else (1,))


def _orient_layer(layer, orientation):
    """Reorder patch-b face dofs to match patch a's tangential ordering.

    2D orientation: (reverse,). 3D: (swap, flip0, flip1) applied as
    transpose-then-flip of the 2D face grid. 1D faces are single dofs and
    take the empty orientation.
    """
    if len(orientation) == 0:
        return layer
    if layer.ndim == 1:
        (rev,) = orientation
        return layer[::-1] if rev else layer
    swap, f0, f1 = orientation
    out = layer.T if swap else layer
    if f0:
        out = out[::-1, :]
    if f1:
        out = out[:, ::-1]
    return out


class MultipatchTopology:
    """Conforming multipatch glue: local-to-global dof maps.

    Args:
        spaces: per-patch discretization SplineSpace (Dirichlet flags set on
            outer boundary faces only).
        interfaces: list of (a, face_a, b, face_b, orientation).

    Attributes:
        l2g: per patch, int array over local free dofs giving global ids.
        n_global: number of global dofs.
    """

    def __init__(self, spaces, interfaces):
        self.spaces = list(spaces)
        self.interfaces = list(interfaces)
        offsets = np.cumsum([0] + [sp.num_free for sp in self.spaces])
        total = offsets[-1]
        parent = np.arange(total)

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for (a, face_a, b, face_b, orientation) in self.interfaces:
            sa, sb = self.spaces[a], self.spaces[b]
            la = _face_layer(sa.dims, face_a)
            lb = _orient_layer(_face_layer(sb.dims, face_b), orientation)
            if la.shape != lb.shape:
                raise ValueError('nonconforming interface between patches '
                                 '%d and %d: %s vs %s'
                                 % (a, b, la.shape, lb.shape))
            fa, fb = sa.full_to_free(), sb.full_to_free()
            for ia, ib in zip(la.ravel(), lb.ravel()):
                qa, qb = fa[ia], fb[ib]
                if (qa < 0) != (qb < 0):
                    raise ValueError('interface dof constrained on one side '
                                     'only (patches %d/%d)' % (a, b))
                if qa < 0:
                    continue
                ra, rb = find(offsets[a] + qa), find(offsets[b] + qb)
                if ra != rb:
                    parent[rb] = ra
        roots = np.array([find(i) for i in range(total)])
        uniq, inv = np.unique(roots, return_inverse=True)
        # renumber so global ids follow first appearance order
        first_pos = np.full(len(uniq), total, dtype=np.int64)
        for i, g in enumerate(inv):
            first_pos[g] = min(first_pos[g], i)
        rank = np.argsort(np.argsort(first_pos))
        gids = rank[inv]
        self.n_global = len(uniq)
        self.l2g = [gids[offsets[r]:offsets[r + 1]]
                    for r in range(len(self.spaces))]
        counts = np.zeros(self.n_global, dtype=int)
        for m in self.l2g:
            counts[m] += 1
        self.share_count = counts

    @property
    def npatches(self):
        return len(self.spaces)

    def interface_globals(self):
        """Global ids shared by at least two patches."""
        return np.nonzero(self.share_count > 1)[0]

    def interior_split(self):
        """Per-patch interior boxes for block-structured solves.

        Returns a list of (global_ids, dims) and the array of interface
        global ids. Interior dofs of a patch are its free dofs excluding any
        glued face layer; they form a tensor box listed lexicographically.
        """
        glued = [set() for _ in self.spaces]
        for (a, fa, b, fb, _o) in self.interfaces:
            glued[a].add(fa)
            glued[b].add(fb)
        out = []
        for r, sp in enumerate(self.spaces):
            ranges = []
            for l in range(sp.ndim):
                free = sp.free_indices_1d(l)
                lo, hi = 0, len(free)
                if (l, 0) in glued[r] and free[0] == 0:
                    lo += 1
                if (l, 1) in glued[r] and free[-1] == sp.dims[l] - 1:
                    hi -= 1
                ranges.append(np.arange(lo, hi))
            grids = np.meshgrid(*ranges, indexing='ij')
            local_free = np.ravel_multi_index(
                [g.ravel() for g in grids], sp.free_dims)
            gids = self.l2g[r][local_free]
            out.append((gids, tuple(len(rg) for rg in ranges)))
        return out, self.interface_globals()


# ------------------------------------------------------------ file format

def write_geometry(path, patches, interfaces=(), dirichlet=()):
    """Write patches and topology as structured text, lossless for floats.

    dirichlet: iterable of (patch, direction, side) outer faces.
    """
    lines = ['igalump-geometry 1']
    lines.append('npatches %d' % len(patches))
    for ip, patch in enumerate(patches):
        d = patch.ndim
        lines.append('patch %d' % ip)
        lines.append('degrees %s' % ' '.join(
            str(p) for p in patch.space.degrees))
        for l in range(d):
            kv = patch.space.kvs[l]
            lines.append('knots %d %d %s' % (
                l, len(kv.knots),
                ' '.join('%.17g' % t for t in kv.knots)))
        lines.append('points %d %d' % (patch.space.numdofs, d))
        for row in patch.points:
            lines.append(' '.join('%.17g' % x for x in row))
        if patch.weights is not None:
            lines.append('weights %d' % patch.space.numdofs)
            for w in patch.weights:
                lines.append('%.17g' % w)
    lines.append('topology %d' % len(interfaces))
    for (a, fa, b, fb, orientation) in interfaces:
        lines.append('interface %d %d %d %d %d %d %s' % (
            a, fa[0], fa[1], b, fb[0], fb[1],
            ' '.join(str(int(o)) for o in orientation)))
    for (p, direction, side) in dirichlet:
        lines.append('dirichlet %d %d %d' % (p, direction, side))
    with open(path, 'w') as f:
        f.write('\n'.join(lines) + '\n')


def read_geometry(path):
    """Inverse of write_geometry.

    Returns (patches, interfaces, dirichlet).
    """
    with open(path) as f:
        toks = [line.split() for line in f if line.strip()]
    pos = 0

    def take():
        nonlocal pos
        t = toks[pos]
        pos += 1
        return t

    head = take()
    if head[0] != 'igalump-geometry':
        raise ValueError('%s: not a geometry file' % path)
    npatches = int(take()[1])
    patches = []
    for _ in range(npatches):
        t = take()
        assert t[0] == 'patch'
        degrees = [int(x) for x in take()[1:]]
        d = len(degrees)
        kvs = [None] * d
        for _ in range(d):
            t = take()
            assert t[0] == 'knots'
            l, cnt = int(t[1]), int(t[2])
            kvs[l] = KnotVector([float(x) for x in t[3:3 + cnt]], degrees[l])
        t = take()
        assert t[0] == 'points'
        npts = int(t[1])
        pts = np.array([[float(x) for x in take()] for _ in range(npts)])
        weights = None
        if pos < len(toks) and toks[pos][0] == 'weights':
            take()
            weights = np.array([float(take()[0]) for _ in range(npts)])
        patches.append(Patch(SplineSpace(kvs), pts, weights))
    interfaces = []
    dirichlet = []
    if pos < len(toks):
        t = take()
        assert t[0] == 'topology'
        for _ in range(int(t[1])):
            t = take()
            assert t[0] == 'interface'
            vals = [int(x) for x in t[1:]]
            interfaces.append((vals[0], (vals[1], vals[2]), vals[3],
                               (vals[4], vals[5]), tuple(vals[6:])))
        while pos < len(toks):
            t = take()
            assert t[0] == 'dirichlet'
            dirichlet.append((int(t[1]), int(t[2]), int(t[3])))
    return patches, interfaces, dirichlet
