"""Gauss-quadrature assembly of mass and stiffness matrices.

Matrices are built over the free (Dirichlet-eliminated) dofs of a tensor
spline space, with entries

    M_ij = int c Bi Bj,    K_ij = int (grad Bi)^T G (grad Bj)

in the parametric domain, where c and G carry density, diffusivity and the
geometry pullback. Quadrature is Gauss-Legendre with p+1 points per
direction per element, exact for the polynomial case.
"""

import itertools
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .geometry import TrimMask
from .lumping import HierBandedMatrix, _as_csr
from .splines import eval_basis


@dataclass
class AssembledPair:
    """Stiffness and mass over the system dofs, plus the dof bookkeeping.

    full_index maps system dof -> flat index in the space's full tensor
    grid. For trimmed systems, embedding maps system dof -> flat index in
    the free tensor grid of background_dims; both are None when the system
    covers the whole free grid or has no single tensor structure.
    """
    K: HierBandedMatrix
    M: HierBandedMatrix
    space: object = None
    full_index: np.ndarray = None
    embedding: np.ndarray = None
    background_dims: tuple = None


def gauss_rule(npoints):
    x, w = np.polynomial.legendre.leggauss(npoints)
    return 0.5 * (x + 1.0), 0.5 * w


def _quad_grid(space, nquad=None):
    """Per direction: quadrature points, weights, and basis tables.

    Returns lists indexed by direction with points (nel*nq,), weights
    (nel*nq,), values and derivatives (numdofs, nel*nq) and the first
    active dof per element. nquad overrides the default p+1 points, for
    rational geometries where the default rule is not exact.
    """
    pts, wts, vals, ders, firsts, nqs = [], [], [], [], [], []
    for kv in space.kvs:
        nq = nquad or (kv.p + 1)
        xg, wg = gauss_rule(nq)
        lo, hi = kv.span_bounds()
        x = (lo[:, None] + (hi - lo)[:, None] * xg[None, :]).ravel()
        w = ((hi - lo)[:, None] * wg[None, :]).ravel()
        V = np.zeros((kv.numdofs, len(x)))
        D = np.zeros_like(V)
        first = np.zeros(kv.numspans, dtype=int)
        for g, xq in enumerate(x):
            f, table = eval_basis(kv, xq, deriv_order=1)
            V[f:f + kv.p + 1, g] = table[0]
            D[f:f + kv.p + 1, g] = table[1]
            if g % nq == 0:
                first[g // nq] = f
        pts.append(x)
        wts.append(w)
        vals.append(V)
        ders.append(D)
        firsts.append(first)
        nqs.append(nq)
    return pts, wts, vals, ders, firsts, tuple(nqs)


def _pullback_grids(patch, pts, rho, kappa):
    """Evaluate c = rho |detJ| and G = kappa |detJ| (J^T J)^-1 on a grid."""
    F, J, det = patch.grid_eval(pts)
    if np.min(np.abs(det)) < 1e-14:
        raise ValueError('singular jacobian on the quadrature grid')
    coords = np.moveaxis(F, -1, 0)
    adet = np.abs(det)
    c = np.asarray(rho(*coords), dtype=float) * adet
    Ginv = np.linalg.inv(np.swapaxes(J, -1, -2) @ J)
    kap = np.asarray(kappa(*coords), dtype=float)
    G = kap[..., None, None] * adet[..., None, None] * Ginv
    return c, G


def _kron_rows(factors):
    return reduce(np.kron, factors)


def _element_tables(space, vals, ders, firsts, el, nqs):
    """Local value and gradient tables for one element.

    Bv has shape (nloc, nq) with nloc = prod(p+1) local functions; Bg[l]
    carries the parametric derivative in direction l.
    """
    d = space.ndim
    Vs, Ds = [], []
    for l in range(d):
        kv = space.kvs[l]
        sl = slice(el[l] * nqs[l], (el[l] + 1) * nqs[l])
        f = firsts[l][el[l]]
        Vs.append(vals[l][f:f + kv.p + 1, sl])
        Ds.append(ders[l][f:f + kv.p + 1, sl])
    Bv = _kron_rows(Vs)
    Bg = [_kron_rows([Ds[l] if m == l else Vs[l] for l in range(d)])
          for m in range(d)]
    return Bv, Bg


def _element_dofs(space, firsts, el):
    d = space.ndim
    idx = np.array([0])
    for l in range(d):
        f = firsts[l][el[l]]
        stride = int(np.prod(space.dims[l + 1:], dtype=int))
        idx = (idx[:, None]
               + (f + np.arange(space.kvs[l].p + 1)) * stride).ravel()
    return idx


def _local_matrices(Bv, Bg, wq, c, G, d):
    Mloc = (Bv * (wq * c)) @ Bv.T
    Kloc = np.zeros_like(Mloc)
    for l in range(d):
        for m in range(d):
            Kloc += (Bg[l] * (wq * G[..., l, m])) @ Bg[m].T
    return Mloc, Kloc


class _Accumulator:
    """COO triplet accumulator over free dofs, dropping constrained ones."""

    def __init__(self, full_to_free, n):
        self.f2f = full_to_free
        self.n = n
        self.rows, self.cols, self.mv, self.kv = [], [], [], []

    def add(self, dofs, Mloc, Kloc):
        free = self.f2f[dofs]
        keep = free >= 0
        if not np.all(keep):
            Mloc = Mloc[np.ix_(keep, keep)]
            Kloc = Kloc[np.ix_(keep, keep)]
            free = free[keep]
        r = np.repeat(free, len(free))
        self.rows.append(r)
        self.cols.append(np.tile(free, len(free)))
        self.mv.append(Mloc.ravel())
        self.kv.append(Kloc.ravel())

    def matrices(self):
        rows = np.concatenate(self.rows)
        cols = np.concatenate(self.cols)
        shape = (self.n, self.n)
        M = sp.coo_matrix((np.concatenate(self.mv), (rows, cols)),
                          shape=shape).tocsr()
        K = sp.coo_matrix((np.concatenate(self.kv), (rows, cols)),
                          shape=shape).tocsr()
        M.sum_duplicates()
        K.sum_duplicates()
        return M, K


def _finish_pair(space, M, K):
    bw = tuple(min(kv.p, n - 1) for kv, n in zip(space.kvs, space.free_dims))
    return AssembledPair(
        K=HierBandedMatrix(K, space.free_dims, bw),
        M=HierBandedMatrix(M, space.free_dims, bw),
        space=space,
        full_index=space.free_to_full())


def assemble_single_patch(space, patch, rho, kappa, nquad=None):
    """Mass and stiffness of one patch, canonical element order."""
    d = space.ndim
    pts, wts, vals, ders, firsts, nq = _quad_grid(space, nquad)
    c, G = _pullback_grids(patch, pts, rho, kappa)
    acc = _Accumulator(space.full_to_free(), space.num_free)
    nel = tuple(kv.numspans for kv in space.kvs)
    for el in itertools.product(*[range(m) for m in nel]):
        Bv, Bg = _element_tables(space, vals, ders, firsts, el, nq)
        sl = tuple(slice(el[l] * nq[l], (el[l] + 1) * nq[l])
                   for l in range(d))
        wq = _kron_rows([wts[l][sl[l]] for l in range(d)])
        Mloc, Kloc = _local_matrices(Bv, Bg, wq, c[sl].ravel(),
                                     G[sl].reshape(-1, d, d), d)
        acc.add(_element_dofs(space, firsts, el), Mloc, Kloc)
    M, K = acc.matrices()
    return _finish_pair(space, M, K)


def assemble_multipatch(topology, patches, rho, kappa, nquad=None):
    """Global pair over the glued dof numbering, plus the per-patch pairs.

    The local matrices are retained: patchwise lumping and local stiffness
    scaling both need them.
    """
    local_pairs = []
    for space, patch in zip(topology.spaces, patches):
        local_pairs.append(
            assemble_single_patch(space, patch, rho, kappa, nquad))

    def scatter(pick):
        rows, cols, vals = [], [], []
        for pair, l2g in zip(local_pairs, topology.l2g):
            coo = pick(pair).mat.tocoo()
            rows.append(l2g[coo.row])
            cols.append(l2g[coo.col])
            vals.append(coo.data)
        shape = (topology.n_global, topology.n_global)
        out = sp.coo_matrix((np.concatenate(vals),
                             (np.concatenate(rows), np.concatenate(cols))),
                            shape=shape).tocsr()
        out.sum_duplicates()
        return out

    glob = AssembledPair(K=HierBandedMatrix(scatter(lambda p: p.K)),
                         M=HierBandedMatrix(scatter(lambda p: p.M)))
    return glob, local_pairs


def assemble_trimmed(space, patch, mask, rho, kappa, subdepth=3, nquad=None):
    """Assemble over the active dofs of a trimmed patch.

    Inside elements use the standard rule. Cut elements are subdivided into
    2^subdepth subcells per direction and a subcell is integrated (with the
    same Gauss rule) iff its center lies inside the region. Outside
    elements and inactive dofs are dropped. A dof can pass the element-level
    activity test yet miss every retained subcell; such dofs have an exactly
    zero mass row and are pruned from the system, keeping the mass diagonal
    strictly positive.
    """
    if not isinstance(mask, TrimMask):
        raise TypeError('mask must be a TrimMask')
    if not np.any(mask.element_class >= 0):
        raise ValueError('trim region excludes every element')
    d = space.ndim
    pts, wts, vals, ders, firsts, nq = _quad_grid(space, nquad)
    c, G = _pullback_grids(patch, pts, rho, kappa)

    active_free = np.asarray(mask.active).ravel()[space.free_to_full()]
    embedding = np.flatnonzero(active_free)
    n_sys = len(embedding)
    sys_of_free = np.full(space.num_free, -1, dtype=int)
    sys_of_free[embedding] = np.arange(n_sys)
    f2f = space.full_to_free()
    full_to_sys = np.where(f2f >= 0, sys_of_free[np.maximum(f2f, 0)], -1)

    acc = _Accumulator(full_to_sys, n_sys)
    nel = tuple(kv.numspans for kv in space.kvs)
    nsub = 2 ** subdepth
    for el in itertools.product(*[range(m) for m in nel]):
        cls = mask.element_class[el]
        if cls < 0:
            continue
        dofs = _element_dofs(space, firsts, el)
        if cls > 0:
            Bv, Bg = _element_tables(space, vals, ders, firsts, el, nq)
            sl = tuple(slice(el[l] * nq[l], (el[l] + 1) * nq[l])
                       for l in range(d))
            wq = _kron_rows([wts[l][sl[l]] for l in range(d)])
            Mloc, Kloc = _local_matrices(Bv, Bg, wq, c[sl].ravel(),
                                         G[sl].reshape(-1, d, d), d)
            acc.add(dofs, Mloc, Kloc)
        else:
            Mloc, Kloc = _cut_element(space, patch, mask.region, rho, kappa,
                                      el, nsub, nq)
            acc.add(dofs, Mloc, Kloc)
    M, K = acc.matrices()
    diag = M.diagonal()
    keep = diag > 1e-12 * np.max(diag)
    if not np.all(keep):
        sel = np.flatnonzero(keep)
        M = M[np.ix_(sel, sel)].tocsr()
        K = K[np.ix_(sel, sel)].tocsr()
        embedding = embedding[sel]
    return AssembledPair(
        K=HierBandedMatrix(K), M=HierBandedMatrix(M), space=space,
        full_index=space.free_to_full()[embedding],
        embedding=embedding, background_dims=space.free_dims)


def _cut_element(space, patch, region, rho, kappa, el, nsub, nq):
    """Subcell quadrature of one cut element, center-inside retention."""
    d = space.ndim
    bounds = []
    for l in range(d):
        lo, hi = space.kvs[l].span_bounds()
        bounds.append((lo[el[l]], hi[el[l]]))
    nloc = int(np.prod([kv.p + 1 for kv in space.kvs]))
    Mloc = np.zeros((nloc, nloc))
    Kloc = np.zeros((nloc, nloc))
    for sub in itertools.product(*[range(nsub)] * d):
        sub_pts, sub_wts, center = [], [], []
        for l in range(d):
            lo, hi = bounds[l]
            h = (hi - lo) / nsub
            a = lo + sub[l] * h
            xg, wg = gauss_rule(nq[l])
            sub_pts.append(a + h * xg)
            sub_wts.append(h * wg)
            center.append(a + 0.5 * h)
        if region(*patch.map_eval(center)) <= 0:
            continue
        cg, Gg = _pullback_grids(patch, sub_pts, rho, kappa)
        Vs, Ds = [], []
        for l in range(d):
            kv = space.kvs[l]
            # subcell points stay inside the element, so the active window
            # is the element's own
            V = np.zeros((kv.p + 1, len(sub_pts[l])))
            D = np.zeros_like(V)
            for g, xq in enumerate(sub_pts[l]):
                _, table = eval_basis(kv, xq, deriv_order=1)
                V[:, g] = table[0]
                D[:, g] = table[1]
            Vs.append(V)
            Ds.append(D)
        Bv = _kron_rows(Vs)
        Bg = [_kron_rows([Ds[l] if m == l else Vs[l] for l in range(d)])
              for m in range(d)]
        wq = _kron_rows(sub_wts)
        dM, dK = _local_matrices(Bv, Bg, wq, cg.ravel(),
                                 Gg.reshape(-1, d, d), d)
        Mloc += dM
        Kloc += dK
    return Mloc, Kloc


def load_vector(space, patch, g, nquad=None):
    """L2 load vector of the scalar field g over the free dofs.

    Entry q is the integral of g against the q-th free basis function on
    the physical patch. Same quadrature rule as the matrix assembly.
    """
    from .geometry import _tensor_apply
    pts, wts, vals, _ders, _firsts, _nqs = _quad_grid(space, nquad)
    F, _J, detJ = patch.grid_eval(pts)
    coords = np.moveaxis(F, -1, 0)
    density = np.asarray(g(*coords), dtype=float) * np.abs(detJ)
    density = density * reduce(np.multiply.outer, wts)
    full = _tensor_apply(density, vals).ravel()
    return full[space.free_to_full()]


def jacobi_rescale(A, B):
    """Symmetric diagonal rescaling making diag(B) unit.

    Returns (DAD, DBD, d) with d the diagonal scaling vector; generalized
    eigenvalues are unchanged.
    """
    Ac, Bc = _as_csr(A), _as_csr(B)
    diag = Bc.diagonal()
    if np.any(diag <= 0):
        raise ValueError('nonpositive diagonal entry')
    d = 1.0 / np.sqrt(diag)
    D = sp.diags(d)
    return (D @ Ac @ D).tocsr(), (D @ Bc @ D).tocsr(), d


def write_triplets(path, matrix):
    """Plain-text sparse export: one `row col value` line per entry."""
    coo = _as_csr(matrix).tocoo()
    with open(path, 'w') as f:
        f.write('%d %d %d\n' % (coo.shape[0], coo.shape[1], coo.nnz))
        for r, c, v in zip(coo.row, coo.col, coo.data):
            f.write('%d %d %.17g\n' % (r, c, v))


def read_triplets(path):
    with open(path) as f:
        header = f.readline().split()
        nr, nc, nnz = (int(t) for t in header)
        rows = np.empty(nnz, dtype=int)
        cols = np.empty(nnz, dtype=int)
        vals = np.empty(nnz)
        for k in range(nnz):
            r, c, v = f.readline().split()
            rows[k], cols[k], vals[k] = int(r), int(c), float(v)
    return sp.coo_matrix((vals, (rows, cols)), shape=(nr, nc)).tocsr()
