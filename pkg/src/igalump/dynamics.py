"""Central-difference time stepping and the manufactured plate problem.

The integrator works on operators only: a mass solve and a stiffness apply
per step, so consistent, lumped and low-rank-scaled masses all run through
the same loop. Instability is detected, recorded on the trajectory and
never raised.
"""

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .assembly import _quad_grid, assemble_single_patch, load_vector
from .geometry import _tensor_apply
from .linalg import FactorizedOperator, banded_cholesky
from .spectral import critical_timestep
from .splines import SplineSpace, make_open_uniform


@dataclass
class Trajectory:
    """Sampled solution of one explicit run.

    samples has one row per time in times, floor(T/dt)+1 of them. stable
    flips to False the first time the sample norm exceeds 1e6 times the
    initial scale (the larger of the first two sample norms; detection is
    off when a forced run starts from rest with no reference magnitude).
    blown_up_at records that sample index, integration stops there, and
    later rows repeat the diverged state.
    """
    dt: float
    times: np.ndarray
    samples: np.ndarray
    stable: bool = True
    blown_up_at: int = None

    @property
    def nsteps(self):
        return len(self.times) - 1

    def norms(self):
        return np.linalg.norm(self.samples, axis=1)


def _as_solve(op):
    if isinstance(op, FactorizedOperator):
        return op.solve
    if callable(op):
        return op
    raise TypeError('mass solve must be a FactorizedOperator or callable')


def _as_matvec(op):
    if callable(op) and not hasattr(op, 'shape'):
        return op
    return lambda x: op @ x


def central_difference(M_solve, K_apply, f, u0, v0, dt, T):
    """Integrate M u'' + K u = f from (u0, v0) with step dt up to T.

    f maps a time to a load vector, or is None for a free problem. The
    first step is the Taylor start u0 + dt v0 + dt^2/2 M^{-1}(f(0) - K u0);
    afterwards the standard two-level recurrence runs with one mass solve
    and one stiffness apply per step.
    """
    if dt <= 0 or T <= 0:
        raise ValueError('step size and horizon must be positive')
    solve = _as_solve(M_solve)
    K = _as_matvec(K_apply)
    load = (lambda t: None) if f is None else f
    u0 = np.asarray(u0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    nsteps = int(math.floor(T / dt))
    times = dt * np.arange(nsteps + 1)
    samples = np.empty((nsteps + 1, len(u0)))
    samples[0] = u0
    stable = True
    blown_up_at = None
    scale = np.linalg.norm(u0)

    def accel(t, u):
        r = -K(u)
        ft = load(t)
        if ft is not None:
            r = r + ft
        return solve(r)

    with np.errstate(over='ignore', invalid='ignore'):
        if nsteps >= 1:
            samples[1] = u0 + dt * v0 + 0.5 * dt * dt * accel(0.0, u0)
            scale = max(scale, np.linalg.norm(samples[1]))
        for k in range(1, nsteps):
            samples[k + 1] = 2.0 * samples[k] - samples[k - 1] \
                + dt * dt * accel(times[k], samples[k])
            if scale > 0.0 \
                    and not np.linalg.norm(samples[k + 1]) <= 1e6 * scale:
                stable = False
                blown_up_at = k + 1
                samples[k + 2:] = samples[k + 1]
                break
    return Trajectory(dt, times, samples, stable, blown_up_at)


def l2_error(space, patch, coeffs, exact, t=None, nquad=None):
    """Quadrature L2 distance between the spline field and exact.

    exact is called with physical coordinate arrays, plus t when given.
    The rule matches assembly (p+1 Gauss points per direction) unless
    nquad overrides it.
    """
    pts, wts, vals, _ders, _firsts, _nqs = _quad_grid(space, nquad)
    F, _J, detJ = patch.grid_eval(pts)
    coords = np.moveaxis(F, -1, 0)
    ref = exact(*coords) if t is None else exact(*coords, t)
    full = np.zeros(space.numdofs)
    full[space.free_to_full()] = np.asarray(coeffs, dtype=float)
    uh = _tensor_apply(full.reshape(space.dims), [V.T for V in vals])
    diff2 = (uh - ref) ** 2 * np.abs(detJ)
    w = reduce(np.multiply.outer, wts)
    return math.sqrt(float(np.sum(diff2 * w)))


# ----------------------------------------------------- manufactured problem

def plate_deflection(x, y):
    """Spatial factor x y (x+4) (y-4) (x^2+y^2-1); zero on the plate rim."""
    return (x * x + 4.0 * x) * (y * y - 4.0 * y) * (x * x + y * y - 1.0)


def plate_deflection_laplacian(x, y):
    q = (x * x + 4.0 * x) * (y * y - 4.0 * y)
    w = x * x + y * y - 1.0
    lap_q = 2.0 * (y * y - 4.0 * y) + 2.0 * (x * x + 4.0 * x)
    cross = (2.0 * x + 4.0) * (y * y - 4.0 * y) * 2.0 * x \
        + (x * x + 4.0 * x) * (2.0 * y - 4.0) * 2.0 * y
    return lap_q * w + 2.0 * cross + 4.0 * q


@dataclass
class WaveProblem:
    """Everything a run needs: discretization, operators and exact field."""
    space: SplineSpace
    patch: object
    pair: object        # consistent AssembledPair with rho = kappa = 1
    f: object           # time -> load vector on the free dofs
    u0: np.ndarray
    v0: np.ndarray
    exact: object       # (x, y, t) -> displacement
    rho: object
    kappa: object


def manufactured_wave_problem(patch, p, subdivisions, nquad=None):
    """Forced wave equation on the plate whose solution is known exactly.

    The displacement is the plate deflection times 2 + sin(2 pi t); all
    five polynomial factors vanish on the plate boundary, so homogeneous
    Dirichlet conditions apply on every side. The load comes from the
    closed-form Laplacian; initial data are consistent-mass L2 projections.
    """
    kv = make_open_uniform(subdivisions, p, p - 1)
    space = SplineSpace([kv, kv], dirichlet=((True, True), (True, True)))
    one = lambda *xs: 1.0
    pair = assemble_single_patch(space, patch, one, one, nquad=nquad)
    mass = banded_cholesky(pair.M, pair.M.scalar_bandwidth())

    two_pi = 2.0 * math.pi
    f_const = load_vector(
        space, patch, lambda x, y: -2.0 * plate_deflection_laplacian(x, y),
        nquad=nquad)
    f_wave = load_vector(
        space, patch,
        lambda x, y: -two_pi ** 2 * plate_deflection(x, y)
        - plate_deflection_laplacian(x, y),
        nquad=nquad)

    def f(t):
        return f_const + math.sin(two_pi * t) * f_wave

    u0 = mass.solve(load_vector(
        space, patch, lambda x, y: 2.0 * plate_deflection(x, y), nquad=nquad))
    v0 = mass.solve(load_vector(
        space, patch, lambda x, y: two_pi * plate_deflection(x, y),
        nquad=nquad))

    def exact(x, y, t):
        return plate_deflection(x, y) * (2.0 + np.sin(two_pi * t))

    return WaveProblem(space, patch, pair, f, u0, v0, exact,
                       rho=one, kappa=one)


# ------------------------------------------------------------ CFL utilities

def step_count(T, lam_max, safeguard=0.85):
    """Number of steps floor(T / (safeguard * 2 / sqrt(lam_max)))."""
    return int(math.floor(T / (safeguard * critical_timestep(lam_max))))


def stability_boundary(M_solve, K_apply, n, dt_start, steps=1000, seed=0,
                       rel_resolution=0.005):
    """Empirical largest stable step by bisection on blow-up detection.

    Runs `steps` free steps from a seeded random start for each candidate.
    Returns the largest step verified stable, resolved to rel_resolution.
    """
    rng = np.random.default_rng(seed)
    u0 = rng.normal(size=n)
    v0 = np.zeros(n)

    def is_stable(dt):
        traj = central_difference(M_solve, K_apply, None, u0, v0, dt,
                                  steps * dt)
        return traj.stable

    dt = float(dt_start)
    if is_stable(dt):
        lo, hi = dt, 2.0 * dt
        for _ in range(60):
            if not is_stable(hi):
                break
            lo, hi = hi, 2.0 * hi
        else:
            raise ValueError('no instability found; dt_start far too small')
    else:
        lo, hi = 0.5 * dt, dt
        for _ in range(60):
            if is_stable(lo):
                break
            lo, hi = 0.5 * lo, lo
        else:
            raise ValueError('no stable step found; system may be singular')
    while hi - lo > rel_resolution * lo:
        mid = 0.5 * (lo + hi)
        if is_stable(mid):
            lo = mid
        else:
            hi = mid
    return lo


def write_trajectory_csv(path, traj, errors=None):
    """CSV rows (t, norm[, l2_error]) for one trajectory."""
    norms = traj.norms()
    with open(path, 'w') as f:
        if errors is None:
            f.write('t,norm\n')
            for t, nr in zip(traj.times, norms):
                f.write('%.17g,%.17g\n' % (t, nr))
        else:
            f.write('t,norm,l2_error\n')
            for t, nr, e in zip(traj.times, norms, errors):
                f.write('%.17g,%.17g,%.17g\n' % (t, nr, e))
