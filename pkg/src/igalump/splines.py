"""Univariate and tensor-product B-spline spaces.

Knot vectors, basis evaluation by the Cox-de Boor recursion, dimension
bookkeeping for tensor-product spaces with per-face Dirichlet constraints,
and the approximation constant for smooth spline projection.
"""

import math

import numpy as np

__all__ = [
    'KnotVector', 'SplineSpace', 'make_open_uniform', 'eval_basis',
    'approximation_constant',
]


class KnotVector:
    """A nondecreasing knot sequence together with a polynomial degree.

    The knot vector is assumed open: the first and last p+1 knots are
    repeated. Interior knots may have multiplicity between 1 and p.

    Attributes:
        knots: 1D numpy array of knots, nondecreasing.
        p: polynomial degree (nonnegative int).
    """

    def __init__(self, knots, p):
        knots = np.ascontiguousarray(knots, dtype=float)
        assert knots.ndim == 1
        assert p >= 0
        assert len(knots) >= 2 * (p + 1)
        assert np.all(np.diff(knots) >= 0.0), 'knots must be nondecreasing'
        assert knots[0] == knots[p] and knots[-1] == knots[-p - 1], \
            'knot vector must be open'
        self.knots = knots
        self.p = p

    @property
    def numdofs(self):
        """Dimension of the spline space spanned over this knot vector."""
        return len(self.knots) - self.p - 1

    @property
    def domain(self):
        return (self.knots[self.p], self.knots[-self.p - 1])

    @property
    def breakpoints(self):
        """Unique knots (element boundaries)."""
        return np.unique(self.knots)

    @property
    def numspans(self):
        return len(self.breakpoints) - 1

    def span_bounds(self):
        """(lo, hi) arrays of the nonempty knot spans."""
        bp = self.breakpoints
        return bp[:-1], bp[1:]

    def find_span(self, x):
        """Index i into knots with knots[i] <= x < knots[i+1].

        Ties at interior knots resolve to the right-closed span; at the
        right end of the domain the last nonempty span is returned.
        """
        k = self.knots
        p = self.p
        n = self.numdofs
        if x >= k[n]:
            # right end: last nonempty span
            i = n - 1
            while k[i] == k[i + 1]:
                i -= 1
            return i
        if x <= k[p]:
            i = p
            while k[i] == k[i + 1]:
                i += 1
            return i
        return int(np.searchsorted(k, x, side='right') - 1)

    def support_elements(self, i):
        """Indices of the nonempty spans where basis function i is nonzero."""
        lo, hi = self.knots[i], self.knots[i + self.p + 1]
        slo, shi = self.span_bounds()
        return np.nonzero((shi > lo) & (slo < hi))[0]

    def __eq__(self, other):
        return (isinstance(other, KnotVector) and self.p == other.p
                and len(self.knots) == len(other.knots)
                and np.array_equal(self.knots, other.knots))

    def __repr__(self):
        return 'KnotVector(p=%d, %d dofs)' % (self.p, self.numdofs)


def make_open_uniform(elements, p, k):
    """Open uniform knot vector on [0,1] with smoothness C^k at interior knots.

    Interior knots get multiplicity p-k, so the space dimension is
    elements*(p-k) + k + 1.

    Args:
        elements: number of nonempty knot spans (>= 1).
        p: polynomial degree (>= 1).
        k: interior smoothness, 0 <= k <= p-1.

    Raises:
        ValueError: if the degree/smoothness combination is invalid.
    """
    if p < 1 or k < 0 or k >= p:
        raise ValueError('invalid degree: need p >= 1 and 0 <= k <= p-1, '
                         'got p=%d, k=%d' % (p, k))
    if elements < 1:
        raise ValueError('need at least one element')
    mult = p - k
    interior = np.repeat(np.linspace(0.0, 1.0, elements + 1)[1:-1], mult)
    knots = np.concatenate([np.zeros(p + 1), interior, np.ones(p + 1)])
    return KnotVector(knots, p)


def eval_basis(kv, x, deriv_order=0):
    """Evaluate the p+1 basis functions that may be nonzero at x.

    Cox-de Boor triangular recursion; derivatives by the standard
    difference formula applied to the lower-degree table.

    Args:
        kv: KnotVector.
        x: evaluation point inside the knot range.
        deriv_order: highest derivative to return.

    Returns:
        (first, ders) where first is the index of the first active basis
        function and ders has shape (deriv_order+1, p+1); row q holds the
        q-th derivatives of functions first..first+p at x.

    Raises:
        ValueError: if x lies outside the knot range.
    """
    lo, hi = kv.domain
    if x < lo or x > hi:
        raise ValueError('point %r outside knot range [%r, %r]' % (x, lo, hi))
    p = kv.p
    U = kv.knots
    span = kv.find_span(x)
    # ndu[j][r]: degree-j basis values, plus the knot differences needed
    # for the derivative formula (NURBS-book style all-derivatives table)
    ndu = np.zeros((p + 1, p + 1))
    left = np.zeros(p + 1)
    right = np.zeros(p + 1)
    ndu[0, 0] = 1.0
    for j in range(1, p + 1):
        left[j] = x - U[span + 1 - j]
        right[j] = U[span + j] - x
        saved = 0.0
        for r in range(j):
            denom = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / denom
            ndu[j, r] = denom      # store knot difference
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved
    nd = deriv_order
    ders = np.zeros((nd + 1, p + 1))
    ders[0, :] = ndu[:, p]
    if nd >= 1:
        _fill_derivatives(kv, x, span, ders, nd)
    return span - p, ders


def _fill_derivatives(kv, x, span, ders, nd):
    # q-th derivative via repeated application of
    # B'_{i,p} = p * (B_{i,p-1}/(U[i+p]-U[i]) - B_{i+1,p-1}/(U[i+p+1]-U[i+1]))
    p = kv.p
    U = kv.knots
    for q in range(1, nd + 1):
        if q > p:
            ders[q, :] = 0.0
            continue
        # values of the degree-(p-q) functions active at x, from a fresh
        # low-degree recursion (simple and robust at the small q used here)
        lowvals = _basis_lower_degree(U, p, span, x, p - q)
        # climb back up q times with the derivative formula
        vals = lowvals
        for deg in range(p - q + 1, p + 1):
            fac = deg
            new = np.zeros(len(vals) + 1)
            # function indices at this stage: span-deg .. span
            for idx in range(len(vals) + 1):
                i = span - deg + idx
                acc = 0.0
                if idx > 0:
                    d = U[i + deg] - U[i]
                    if d > 0:
                        acc += vals[idx - 1] / d
                if idx < len(vals):
                    d = U[i + deg + 1] - U[i + 1]
                    if d > 0:
                        acc -= vals[idx] / d
                new[idx] = fac * acc
            vals = new
        ders[q, :] = vals


def _basis_lower_degree(U, p, span, x, deg):
    """Values of the degree-`deg` basis functions span-deg..span at x."""
    if deg == 0:
        return np.array([1.0])
    left = np.zeros(deg + 1)
    right = np.zeros(deg + 1)
    N = np.zeros(deg + 1)
    N[0] = 1.0
    for j in range(1, deg + 1):
        left[j] = x - U[span + 1 - j]
        right[j] = U[span + j] - x
        saved = 0.0
        for r in range(j):
            temp = N[r] / (right[r + 1] + left[j - r])
            N[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        N[j] = saved
    return N


class SplineSpace:
    """Tensor product of univariate spline spaces with Dirichlet bookkeeping.

    Attributes:
        kvs: tuple of KnotVector, one per parametric direction.
        dirichlet: tuple of (left, right) bool pairs per direction; a True
            entry drops the single basis function supported on that face.
    """

    def __init__(self, kvs, dirichlet=None):
        self.kvs = tuple(kvs)
        d = len(self.kvs)
        if dirichlet is None:
            dirichlet = ((False, False),) * d
        assert len(dirichlet) == d
        self.dirichlet = tuple((bool(a), bool(b)) for (a, b) in dirichlet)

    @property
    def ndim(self):
        return len(self.kvs)

    @property
    def dims(self):
        """Unconstrained dimensions per direction."""
        return tuple(kv.numdofs for kv in self.kvs)

    @property
    def degrees(self):
        return tuple(kv.p for kv in self.kvs)

    def free_indices_1d(self, direction):
        """Indices of unconstrained basis functions along one direction."""
        n = self.kvs[direction].numdofs
        left, right = self.dirichlet[direction]
        lo = 1 if left else 0
        hi = n - 1 if right else n
        return np.arange(lo, hi)

    @property
    def free_dims(self):
        """Constrained dimensions per direction."""
        return tuple(len(self.free_indices_1d(l)) for l in range(self.ndim))

    @property
    def numdofs(self):
        return int(np.prod(self.dims))

    @property
    def num_free(self):
        return int(np.prod(self.free_dims))

    def linear_index(self, multi):
        """Lexicographic linear index (first direction slowest)."""
        return int(np.ravel_multi_index(multi, self.dims))

    def multi_index(self, linear):
        return tuple(int(t) for t in np.unravel_index(linear, self.dims))

    def free_to_full(self):
        """Map free (constrained) linear indices to full tensor indices.

        Returns an int array of length num_free; entry q is the full-space
        lexicographic index of the q-th free dof (free dofs ordered
        lexicographically themselves).
        """
        grids = np.meshgrid(*[self.free_indices_1d(l) for l in range(self.ndim)],
                            indexing='ij')
        return np.ravel_multi_index([g.ravel() for g in grids], self.dims)

    def full_to_free(self):
        """Inverse of free_to_full; -1 marks constrained dofs."""
        out = np.full(self.numdofs, -1, dtype=np.int64)
        out[self.free_to_full()] = np.arange(self.num_free)
        return out

    def eval_basis(self, direction, x, deriv_order=0):
        """Univariate basis evaluation along one direction."""
        return eval_basis(self.kvs[direction], x, deriv_order)

    def __repr__(self):
        return 'SplineSpace(p=%s, dims=%s)' % (self.degrees, self.dims)


def approximation_constant(p, k, r):
    """Constant in the spline L2 projection error bound, three-branch form.

    Args:
        p: degree, k: smoothness (0 <= k <= p-1), r: Sobolev order
        (1 <= r <= p+1).
    """
    if not (0 <= k <= p - 1):
        raise ValueError('need 0 <= k <= p-1, got p=%d, k=%d' % (p, k))
    if not (1 <= r <= p + 1):
        raise ValueError('need 1 <= r <= p+1, got r=%d' % r)
    if k == p - 1:
        return (1.0 / math.pi) ** r
    base = 1.0 / math.sqrt((p - k) * (p - k + 1))
    if k >= r - 2:
        return 0.5 ** r * base ** r
    ratio = math.factorial(p + 1 - r) / math.factorial(p - 1 + r - 2 * k)
    return 0.5 ** r * base ** (k + 1) * math.sqrt(ratio)
