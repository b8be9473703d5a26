"""Largest eigenpairs of (K, M) pencils and spectral outlier deflation.

The eigensolver is a generalized Lanczos iteration working in the inner
product of the SPD mass side: one stiffness apply and one mass solve per
step, full reorthogonalization against the stored basis, thick restart
keeping the leading Ritz vectors. Deflation then shaves the top r
eigenvalues down to lambda_cut by a rank-r update of either the stiffness
or the mass, leaving eigenvectors and all other eigenvalues untouched.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .linalg import FactorizedOperator, woodbury_solve


@dataclass
class LanczosConfig:
    """Solver knobs. m defaults to 2k; tol is a relative residual."""
    k: int
    m: int = None
    tol: float = 1e-3
    max_restarts: int = 200
    full_reorth: bool = True

    def __post_init__(self):
        self.k = int(self.k)
        if self.m is None:
            self.m = 2 * self.k
        self.m = int(self.m)
        if not self.m >= self.k >= 1:
            raise ValueError('need m >= k >= 1')
        if self.tol <= 0:
            raise ValueError('tolerance must be positive')


@dataclass
class LanczosResult:
    values: np.ndarray      # Ritz values, descending
    vectors: np.ndarray     # B-orthonormal columns matching values
    residuals: np.ndarray   # relative residuals |Au - lam Bu| / (lam |Bu|)
    converged: np.ndarray   # per-pair flags
    n_iter: int             # recurrence steps over all restarts
    n_matvec: int           # stiffness applies (one mass solve each)
    n_restarts: int


def _as_apply(op):
    if callable(op) and not hasattr(op, 'solve'):
        return op
    if isinstance(op, FactorizedOperator):
        return op.solve
    return lambda x: op @ x


def lanczos(n, A_apply, B_solve, B_apply, config, seed=0):
    """Largest k eigenpairs of A u = lambda B u, B positive definite.

    The three operator arguments may be callables, matrices, or a
    FactorizedOperator for the solve. The starting vector is drawn from a
    generator seeded with `seed`, so iteration counts are reproducible.
    Returns a LanczosResult; pairs that failed to reach config.tol within
    config.max_restarts come back flagged unconverged instead of raising.
    """
    A_apply = _as_apply(A_apply)
    B_solve = _as_apply(B_solve)
    B_apply = _as_apply(B_apply)
    rng = np.random.default_rng(seed)
    n = int(n)
    k = min(config.k, n)
    m = min(max(config.m, k + 1), n)

    V = np.empty((n, m))
    AV = np.empty((n, m))
    BV = np.empty((n, m))
    have_A = np.zeros(m, dtype=bool)
    n_iter = 0
    n_matvec = 0
    b_scale = None  # B-norm^2 of a typical random vector, set on first append

    def reorthogonalize(w, cnt):
        for _ in range(2):
            w = w - V[:, :cnt] @ (BV[:, :cnt].T @ w)
        return w

    def breakdown(norm2):
        return not norm2 > 1e-24 * b_scale

    def appended(w, cnt):
        """B-normalize w against the current basis; fresh vector on breakdown."""
        nonlocal b_scale
        while True:
            w = reorthogonalize(w, cnt)
            bw = B_apply(w)
            norm2 = w @ bw
            if b_scale is None:
                b_scale = norm2
            if not breakdown(norm2):
                break
            w = rng.normal(size=n)
        s = 1.0 / math.sqrt(norm2)
        V[:, cnt] = w * s
        BV[:, cnt] = bw * s
        have_A[cnt] = False
        return cnt + 1

    def ensure_A(j):
        nonlocal n_matvec
        if not have_A[j]:
            AV[:, j] = A_apply(V[:, j])
            have_A[j] = True
            n_matvec += 1
        return AV[:, j]

    cnt = appended(rng.normal(size=n), 0)
    restarts = 0
    while True:
        prev_beta = None
        while cnt < m:
            j = cnt - 1
            u = ensure_A(j)
            w = B_solve(u)
            alpha = V[:, j] @ u
            w = w - alpha * V[:, j]
            if prev_beta is not None:
                w = w - prev_beta * V[:, j - 1]
            w2 = reorthogonalize(w, cnt)
            bw = B_apply(w2)
            norm2 = w2 @ bw
            n_iter += 1
            if not breakdown(norm2):
                s = 1.0 / math.sqrt(norm2)
                V[:, cnt] = w2 * s
                BV[:, cnt] = bw * s
                have_A[cnt] = False
                prev_beta = math.sqrt(max(norm2, 0.0))
                cnt += 1
            else:
                cnt = appended(rng.normal(size=n), cnt)
                prev_beta = None

        for j in range(cnt):
            ensure_A(j)
        H = V[:, :cnt].T @ AV[:, :cnt]
        H = 0.5 * (H + H.T)
        theta, S = sla.eigh(H)
        order = np.argsort(theta)[::-1][:k]
        Y = V[:, :cnt] @ S[:, order]
        AY = AV[:, :cnt] @ S[:, order]
        BY = BV[:, :cnt] @ S[:, order]
        lam = theta[order]
        res = np.empty(k)
        for j in range(k):
            denom = max(abs(lam[j]), np.finfo(float).tiny) \
                * np.linalg.norm(BY[:, j])
            res[j] = np.linalg.norm(AY[:, j] - lam[j] * BY[:, j]) / denom
        conv = res <= config.tol

        if np.all(conv) or restarts >= config.max_restarts or cnt >= n:
            return LanczosResult(lam, Y, res, conv, n_iter, n_matvec,
                                 restarts)

        # thick restart: keep the leading Ritz vectors, expand from the last
        V[:, :k] = Y
        AV[:, :k] = AY
        BV[:, :k] = BY
        have_A[:k] = True
        cnt = k
        restarts += 1


@dataclass
class ScaledPencil:
    """Pencil (A, B) with its top r eigenvalues deflated to lam_cut.

    U2 holds the B-orthonormal eigenvectors of the deflated eigenvalues
    (ascending, matching D2) and V = B U2. Depending on mode the rank-r
    perturbation V f(D2) V^T lands on the stiffness (f = lam_cut - lambda)
    or V g(D2) V^T on the mass (g = lambda/lam_cut - 1); the other function
    is zero. Neither scaled matrix is ever formed: applies and solves go
    through the low-rank terms.
    """
    A: object
    B: object
    U2: np.ndarray
    V: np.ndarray
    D2: np.ndarray
    lam_cut: float
    mode: str

    def __post_init__(self):
        if self.mode not in ('scale-stiffness', 'scale-mass'):
            raise ValueError('unknown mode %r' % (self.mode,))
        self.D2 = np.asarray(self.D2, dtype=float)
        if self.r:
            gram = self.U2.T @ self.V
            if np.max(np.abs(gram - np.eye(self.r))) > 1e-8:
                raise ValueError('eigenvectors are not B-orthonormal')

    @property
    def r(self):
        return self.D2.shape[0]

    @property
    def fD2(self):
        if self.mode == 'scale-stiffness':
            return self.lam_cut - self.D2
        return np.zeros(self.r)

    @property
    def gD2(self):
        if self.mode == 'scale-mass':
            return self.D2 / self.lam_cut - 1.0
        return np.zeros(self.r)

    def stiffness_apply(self, x):
        y = self.A @ x
        if self.r and self.mode == 'scale-stiffness':
            y = y + self.V @ (self.fD2 * (self.V.T @ x))
        return y

    def mass_apply(self, x):
        y = self.B @ x
        if self.r and self.mode == 'scale-mass':
            y = y + self.V @ (self.gD2 * (self.V.T @ x))
        return y

    def dense_pair(self):
        """Explicit (A_bar, B_bar); oracle use only."""
        A = _to_dense_local(self.A).copy()
        B = _to_dense_local(self.B).copy()
        if self.r:
            A += self.V @ np.diag(self.fD2) @ self.V.T
            B += self.V @ np.diag(self.gD2) @ self.V.T
        return A, B


def _to_dense_local(M):
    if hasattr(M, 'toarray'):
        return M.toarray()
    return np.asarray(M, dtype=float)


def deflate(A, B, r, mode, eigendata):
    """Build the ScaledPencil truncating the top r eigenvalues of (A, B).

    eigendata supplies the top r+1 eigenpairs, either a LanczosResult or a
    (values descending, vectors) tuple; the extra pair fixes
    lam_cut = lambda_{n-r} so eigenvalue numbering survives. Rejects
    unconverged data and ranks beyond n/4.
    """
    r = int(r)
    if isinstance(eigendata, LanczosResult):
        if not np.all(eigendata.converged[:r + 1]):
            raise ValueError('eigendata contains unconverged pairs')
        values, vectors = eigendata.values, eigendata.vectors
    else:
        values, vectors = eigendata
    values = np.asarray(values, dtype=float)
    n = A.shape[0]
    if r >= max(n, 1):
        raise ValueError('deflation rank %d exceeds problem size' % r)
    if r > math.ceil(n / 4):
        raise ValueError('deflation rank %d too large for n=%d' % (r, n))
    if len(values) < r + 1:
        raise ValueError('need the top r+1 eigenpairs')
    lam_cut = float(values[r]) if r else float(values[0])
    if mode == 'scale-mass' and lam_cut <= 0:
        raise ValueError('cutoff eigenvalue must be positive')
    U2 = np.asarray(vectors[:, :r][:, ::-1], dtype=float)
    D2 = values[:r][::-1]
    V = B @ U2 if r else np.zeros((n, 0))
    return ScaledPencil(A, B, U2, np.asarray(V, dtype=float), D2,
                        lam_cut, mode)


def scaled_mass_solve(pencil, base, rhs):
    """Solve with the scaled mass through the Woodbury identity.

    base factorizes the unscaled mass B. Directions whose g(D2) entry is
    zero are unperturbed and drop out of the correction.
    """
    if pencil.mode != 'scale-mass':
        raise ValueError('pencil does not scale the mass')
    g = pencil.gD2
    live = g != 0.0
    if not np.any(live):
        return base.solve(rhs)
    return woodbury_solve(base, pencil.U2[:, live], g[live], rhs)


def local_stiffness_scale(K_r, P_r, rank, tol=1e-3, seed=0,
                          max_restarts=200):
    """Deflate one patch pencil by perturbing its stiffness.

    Runs the eigensolver on (K_r, P_r) for the top rank+1 pairs and returns
    the scale-stiffness ScaledPencil, whose perturbation is negative
    semidefinite so the scaled stiffness never exceeds the original in the
    Loewner order. Solver failures surface as the unconverged-data error.
    """
    from .linalg import banded_cholesky, _measured_bandwidth
    from .lumping import _as_csr
    P_csr = _as_csr(P_r)
    base = banded_cholesky(P_csr, _measured_bandwidth(P_csr))
    cfg = LanczosConfig(k=rank + 1, tol=tol, max_restarts=max_restarts)
    result = lanczos(P_csr.shape[0], K_r, base, P_csr, cfg, seed=seed)
    return deflate(K_r, P_csr, rank, 'scale-stiffness', result)


def critical_timestep(lam_max):
    """Largest stable central-difference step 2/sqrt(lam_max)."""
    if lam_max <= 0:
        raise ValueError('largest eigenvalue must be positive')
    return 2.0 / math.sqrt(lam_max)


def cfl_gain(lam_n, lam_cut):
    """Step-size ratio sqrt(lam_n / lam_cut) won by deflating down to lam_cut."""
    if lam_cut <= 0 or lam_n <= 0:
        raise ValueError('eigenvalues must be positive')
    if lam_n < lam_cut:
        raise ValueError('cutoff exceeds the largest eigenvalue')
    return math.sqrt(lam_n / lam_cut)


def split_zero_modes(values, rel_threshold=1e-8):
    """Separate near-kernel eigenvalues from the physical spectrum.

    Returns (kept ascending, number dropped); the threshold is relative to
    the largest eigenvalue.
    """
    w = np.sort(np.asarray(values, dtype=float))
    if w.size == 0:
        return w, 0
    thr = rel_threshold * w[-1]
    keep = w > thr
    return w[keep], int(np.sum(~keep))


def write_spectrum_csv(path, spectra):
    """Write labeled spectra as CSV rows (k, lambda, label)."""
    with open(path, 'w') as f:
        f.write('k,lambda,label\n')
        for label, values in spectra:
            for k, lam in enumerate(np.asarray(values, dtype=float), 1):
                f.write('%d,%.17g,%s\n' % (k, lam, label))


def read_spectrum_csv(path):
    """Inverse of write_spectrum_csv; returns list of (label, values)."""
    out = {}
    order = []
    with open(path) as f:
        header = f.readline()
        if header.strip() != 'k,lambda,label':
            raise ValueError('not a spectrum file: %s' % path)
        for line in f:
            _k, lam, label = line.strip().split(',', 2)
            if label not in out:
                out[label] = []
                order.append(label)
            out[label].append(float(lam))
    return [(label, np.array(out[label])) for label in order]
