"""Direct solvers for the structured matrices: banded Cholesky, the
Schur-complement saddle solve for multipatch systems, Woodbury application
of low-rank mass updates, and the dense generalized eigensolver used as a
reference oracle throughout the test suite.

Factorizations are immutable once constructed; solve() may be called from
several threads on distinct right-hand sides.
"""

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .lumping import HierBandedMatrix, _as_csr


def hier_bandwidth(b, n):
    """Scalar bandwidth sum(b_k * r_k) of a d-level banded matrix.

    r_k is the stride prod(n_j for j > k); the deepest stride is 1.
    """
    b = [int(x) for x in b]
    n = [int(x) for x in n]
    if len(b) != len(n):
        raise ValueError('bandwidths and dims differ in length')
    total = 0
    stride = 1
    for bk, nk in zip(reversed(b), reversed(n)):
        total += bk * stride
        stride *= nk
    return total


class FactorizedOperator:
    """A factorized SPD matrix exposing solve(rhs).

    payload holds whatever the factorization produced (banded Cholesky
    factors, Schur pieces); it is kept for inspection but solve() is the
    interface.
    """

    def __init__(self, n, apply_solve, payload=None):
        self.n = int(n)
        self._apply = apply_solve
        self.payload = payload

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise ValueError('right-hand side has length %d, expected %d'
                             % (rhs.shape[0], self.n))
        return self._apply(rhs)


def _banded_storage(A, bandwidth):
    """Upper banded storage ab[u + i - j, j] = A[i, j] for scipy."""
    A = _as_csr(A).tocoo()
    n = A.shape[0]
    u = int(bandwidth)
    off = np.abs(A.row - A.col)
    if np.any((off > u) & (A.data != 0.0)):
        raise ValueError('matrix has entries outside the declared band')
    u = min(u, n - 1)
    ab = np.zeros((u + 1, n))
    keep = A.row <= A.col
    ab[u + A.row[keep] - A.col[keep], A.col[keep]] = A.data[keep]
    return ab


def banded_cholesky(A, bandwidth):
    """Cholesky factorization of a banded SPD matrix.

    The factor inherits the bandwidth, so storage and solve cost stay
    O(bandwidth * n). Raises if A is not positive definite or has nonzeros
    outside the declared band.
    """
    ab = _banded_storage(A, bandwidth)
    try:
        cb = sla.cholesky_banded(ab, lower=False)
    except np.linalg.LinAlgError:
        raise ValueError('matrix is not positive definite')

    def apply_solve(rhs):
        return sla.cho_solve_banded((cb, False), rhs)

    op = FactorizedOperator(ab.shape[1], apply_solve, payload=cb)
    op.bandwidth = int(bandwidth)
    return op


def _measured_bandwidth(A):
    coo = A.tocoo()
    if coo.nnz == 0:
        return 0
    return int(np.max(np.abs(coo.row - coo.col)))


def schur_saddle_factor(P, split):
    """Factor a multipatch lumped matrix through its saddle structure.

    Ordering the dofs as (patch interiors, interface layer) exposes the
    block form [[D, C], [C^T, X]] with D block diagonal over patches. Each
    interior block is factored banded, the Schur complement
    S = X - C^T D^{-1} C is formed explicitly and factored dense.

    Args:
        P: global lumped matrix (csr or HierBandedMatrix).
        split: (interior_boxes, interface_ids) as returned by
            MultipatchTopology.interior_split(); each box is (global_ids,
            box_dims).

    solve runs the forward elimination g~ = g - C^T D^{-1} f followed by
    back substitution. Raises on an indefinite Schur complement.
    """
    A = _as_csr(P)
    n = A.shape[0]
    boxes, iface = split
    iface = np.asarray(iface, dtype=int)
    idx_int = (np.concatenate([np.asarray(g, dtype=int) for g, _ in boxes])
               if boxes else np.empty(0, dtype=int))
    stacked = np.concatenate([idx_int, iface])
    if len(stacked) != n or len(np.unique(stacked)) != n:
        raise ValueError('split does not partition the dof set')

    factors = []
    pos = 0
    slices = []
    for gids, _dims in boxes:
        gids = np.asarray(gids, dtype=int)
        D_r = A[np.ix_(gids, gids)]
        factors.append(banded_cholesky(D_r, _measured_bandwidth(D_r)))
        slices.append(slice(pos, pos + len(gids)))
        pos += len(gids)

    def d_solve(f):
        out = np.empty_like(f)
        for op, sl in zip(factors, slices):
            out[sl] = op.solve(f[sl])
        return out

    nG = len(iface)
    C = A[np.ix_(idx_int, iface)].toarray() if nG else np.zeros((pos, 0))
    X = A[np.ix_(iface, iface)].toarray()
    DinvC = d_solve(C) if nG else C
    S = X - C.T @ DinvC
    if nG:
        try:
            S_factor = sla.cho_factor(0.5 * (S + S.T))
        except np.linalg.LinAlgError:
            raise ValueError('schur complement is not positive definite')

    def apply_solve(rhs):
        f = rhs[idx_int]
        g = rhs[iface]
        dinv_f = d_solve(f)
        out = np.empty_like(rhs)
        if nG:
            y = sla.cho_solve(S_factor, g - C.T @ dinv_f)
            out[iface] = y
            out[idx_int] = dinv_f - DinvC @ y
        else:
            out[idx_int] = dinv_f
        return out

    return FactorizedOperator(n, apply_solve,
                              payload=(factors, C, S, idx_int, iface))


def woodbury_solve(base, U2, gD2, rhs):
    """Apply the inverse of B + (B U2) g(D2) (B U2)^T without forming it.

    base is a FactorizedOperator for B and U2 holds B-orthonormal
    eigenvectors, which collapses the capacitance matrix to the diagonal
    g(D2)^{-1} + I. Cost: one base solve plus O(r n).
    """
    gD2 = np.asarray(gD2, dtype=float)
    if gD2.size == 0:
        return base.solve(rhs)
    if np.any(gD2 == 0.0):
        raise ValueError('singular diagonal entry in g(D2)')
    U2 = np.asarray(U2, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    weight = 1.0 / (1.0 / gD2 + 1.0)
    coeff = U2.T @ rhs
    coeff *= weight if coeff.ndim == 1 else weight[:, None]
    return base.solve(rhs) - U2 @ coeff


def dense_generalized_eig(A, B):
    """Dense reference solve of A u = lambda B u.

    Reduces to standard form through a Cholesky factorization of B and
    back-transforms, so the returned eigenvectors are B-orthonormal and the
    eigenvalues ascend. Intended as an oracle; refuses n > 4000.
    """
    A = _to_dense(A)
    B = _to_dense(B)
    n = A.shape[0]
    if n > 4000:
        raise ValueError('problem of size %d too large for the dense oracle'
                         % n)
    try:
        w, V = sla.eigh(A, B)
    except np.linalg.LinAlgError:
        raise ValueError('mass-side matrix is not positive definite')
    return w, V


def _to_dense(A):
    if isinstance(A, HierBandedMatrix):
        return A.toarray()
    if sp.issparse(A):
        return A.toarray()
    return np.asarray(A, dtype=float)
