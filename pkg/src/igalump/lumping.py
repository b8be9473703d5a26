"""Lumping operators on hierarchically banded matrices.

The matrices produced by tensor-product discretizations are d-level banded:
indexing dofs lexicographically by their multi-index, the matrix splits into
an n_1 x n_1 grid of blocks of size r_1 = n_2 * ... * n_d, each block again
splits, and interactions vanish beyond a per-level bandwidth. All operators
here work on sparse triplets with index arithmetic derived from (dims,
bandwidths); nothing is densified.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


def _as_csr(B):
    if isinstance(B, HierBandedMatrix):
        return B.mat
    if sp.issparse(B):
        return B.tocsr()
    return sp.csr_matrix(np.asarray(B, dtype=float))


@dataclass
class HierBandedMatrix:
    """Symmetric sparse matrix tagged with its tensor block structure.

    dims is the multi-index shape (n_1, ..., n_d), slowest direction first;
    bandwidths gives the interaction radius per level. dims=None marks a
    matrix without usable structure (multipatch globals).
    """
    mat: sp.csr_matrix
    dims: tuple = None
    bandwidths: tuple = None

    def __post_init__(self):
        self.mat = _as_csr(self.mat)
        if self.dims is not None:
            self.dims = tuple(int(n) for n in self.dims)
            if int(np.prod(self.dims)) != self.mat.shape[0]:
                raise ValueError('dims do not match matrix size')
            self.bandwidths = tuple(int(b) for b in self.bandwidths)

    @property
    def shape(self):
        return self.mat.shape

    @property
    def strides(self):
        """Block sizes r_k below each level; the last one is 1."""
        return tuple(int(np.prod(self.dims[k + 1:], dtype=int))
                     for k in range(len(self.dims)))

    def scalar_bandwidth(self):
        """Predicted bandwidth sum(b_k * r_k) of the flat matrix."""
        return int(sum(b * r for b, r in zip(self.bandwidths, self.strides)))

    def measured_bandwidth(self):
        coo = self.mat.tocoo()
        live = coo.data != 0.0
        if not np.any(live):
            return 0
        return int(np.max(np.abs(coo.row[live] - coo.col[live])))

    def toarray(self):
        return self.mat.toarray()

    def diagonal(self):
        return self.mat.diagonal()

    def __matmul__(self, x):
        return self.mat @ x

    def _structured(self):
        if self.dims is None:
            raise ValueError('matrix carries no dims vector')


def lump_rowsum(B):
    """Diagonal of absolute row sums.

    For matrices with nonnegative entries (masses) the absolute values
    change nothing and this is the classical row-sum lumped matrix.
    """
    A = _as_csr(B)
    d = np.asarray(np.abs(A).sum(axis=1)).ravel()
    out = sp.diags(d).tocsr()
    if isinstance(B, HierBandedMatrix) and B.dims is not None:
        return HierBandedMatrix(out, B.dims, (0,) * len(B.dims))
    return out


def _rebuild(B, rows, cols, vals, bandwidths):
    n = B.mat.shape[0]
    out = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    out.sum_duplicates()
    return HierBandedMatrix(out, B.dims, bandwidths)


def block_lump(B):
    """Sum the top-level blocks of each block row onto the diagonal.

    Plain sums, no absolute values: for matrices with positive semidefinite
    blocks the diagonal block sums stay positive definite.
    """
    B._structured()
    r1 = B.strides[0]
    coo = B.mat.tocoo()
    cols = (coo.row // r1) * r1 + coo.col % r1
    return _rebuild(B, coo.row, cols, coo.data, (0,) + B.bandwidths[1:])


def block_lumped_family(B, i):
    """Keep block diagonals up to distance i-1, block-lump the rest.

    i=1 reproduces block_lump, i=n_1 returns the input unchanged, and the
    family decreases monotonically in the Loewner order as i grows.
    """
    B._structured()
    n1 = B.dims[0]
    if not 1 <= i <= n1:
        raise ValueError('band index out of range')
    r1 = B.strides[0]
    coo = B.mat.tocoo()
    bi, bj = coo.row // r1, coo.col // r1
    keep = np.abs(bi - bj) < i
    cols = np.where(keep, coo.col, bi * r1 + coo.col % r1)
    return _rebuild(B, coo.row, cols, coo.data,
                    (min(i - 1, B.bandwidths[0]),) + B.bandwidths[1:])


def hierarchical_lump(B, k):
    """Apply block lumping recursively down k levels.

    Level 1 equals block_lump; level d collapses to plain row sums, which
    for nonnegative matrices coincide with lump_rowsum.
    """
    B._structured()
    d = len(B.dims)
    if not 1 <= k <= d:
        raise ValueError('level out of range')
    strides = B.strides
    coo = B.mat.tocoo()
    rows, cols = coo.row, coo.col
    for level in range(k):
        s = strides[level]
        cols = (rows // s) * s + cols % s
    return _rebuild(B, rows, cols, coo.data, (0,) * k + B.bandwidths[k:])


def multipatch_lump(local_mats, maps, n_global, i=None, level=None):
    """Assemble per-patch lumped matrices into the global dof numbering.

    Each local matrix is lumped on its own tensor structure, then scattered
    through its local-to-global map and summed. Exactly one of i (block
    lumped family) or level (hierarchical) must be given.
    """
    if (i is None) == (level is None):
        raise ValueError('pass exactly one of i or level')
    rows, cols, vals = [], [], []
    for B, l2g in zip(local_mats, maps):
        if B.shape[0] != len(l2g):
            raise ValueError('map does not match local matrix')
        P = (block_lumped_family(B, i) if i is not None
             else hierarchical_lump(B, level))
        coo = P.mat.tocoo()
        l2g = np.asarray(l2g)
        rows.append(l2g[coo.row])
        cols.append(l2g[coo.col])
        vals.append(coo.data)
    out = sp.coo_matrix((np.concatenate(vals),
                         (np.concatenate(rows), np.concatenate(cols))),
                        shape=(n_global, n_global)).tocsr()
    out.sum_duplicates()
    return out


def pad_lump_trim(M_trimmed, embedding, dims, bandwidths, i=None, level=None):
    """Lump a trimmed matrix through its untrimmed tensor embedding.

    The active-dof matrix is viewed as the restriction of a padded matrix
    over the full tensor grid (padded rows and columns exactly zero), the
    block index arithmetic runs on full indices, and entries landing on a
    padded row or column are discarded again. The result is a principal
    submatrix of the lumped padded matrix, so definiteness is inherited.
    """
    if (i is None) == (level is None):
        raise ValueError('pass exactly one of i or level')
    A = _as_csr(M_trimmed).tocoo()
    embedding = np.asarray(embedding)
    n_full = int(np.prod(dims))
    if len(np.unique(embedding)) != len(embedding):
        raise ValueError('embedding is not injective')
    inverse = np.full(n_full, -1, dtype=int)
    inverse[embedding] = np.arange(len(embedding))

    rows = embedding[A.row]
    cols = embedding[A.col]
    strides = [int(np.prod(dims[k + 1:], dtype=int))
               for k in range(len(dims))]
    if i is not None:
        if not 1 <= i <= dims[0]:
            raise ValueError('band index out of range')
        r1 = strides[0]
        bi, bj = rows // r1, cols // r1
        cols = np.where(np.abs(bi - bj) < i, cols, bi * r1 + cols % r1)
    else:
        if not 1 <= level <= len(dims):
            raise ValueError('level out of range')
        for l in range(level):
            s = strides[l]
            cols = (rows // s) * s + cols % s
    keep = inverse[cols] >= 0
    n = len(embedding)
    out = sp.coo_matrix((A.data[keep],
                         (inverse[rows[keep]], inverse[cols[keep]])),
                        shape=(n, n)).tocsr()
    out.sum_duplicates()
    return out


def random_structured_spd(dims, bandwidths, rng, nsamples=None, shift=1e-3,
                          nonneg=False):
    """Random SPD matrix with the structure the lumping theory assumes.

    Sums rank-one tensor-window contributions outer(w, w) with
    w = v_1 x ... x v_d, mimicking element assembly. Nonnegative factors on
    all but the last direction keep every block down the hierarchy positive
    semidefinite while allowing mixed-sign entries; a small diagonal shift
    makes the total positive definite. With nonneg=True the last factor is
    nonnegative too, which full-depth hierarchical lumping needs (at the
    deepest level the blocks are scalars, and a scalar is semidefinite only
    when it is nonnegative).
    """
    dims = tuple(int(n) for n in dims)
    bandwidths = tuple(int(b) for b in bandwidths)
    n = int(np.prod(dims))
    if nsamples is None:
        nsamples = 3 * n
    A = np.zeros((n, n))
    d = len(dims)
    for _ in range(nsamples):
        idx = np.array([0])
        w = np.array([1.0])
        for l in range(d):
            width = min(bandwidths[l] + 1, dims[l])
            t = rng.integers(0, dims[l] - width + 1)
            mixed = l == d - 1 and not nonneg
            v = rng.normal(size=width) if mixed else rng.random(width)
            stride = int(np.prod(dims[l + 1:], dtype=int))
            idx = (idx[:, None] + (t + np.arange(width)) * stride).ravel()
            w = np.outer(w, v).ravel()
        A[np.ix_(idx, idx)] += np.outer(w, w)
    A += shift * np.trace(A) / n * np.eye(n)
    return HierBandedMatrix(sp.csr_matrix(A), dims, bandwidths)
