"""Experiment drivers behind the command line.

Each run_* function takes a validated ExperimentConfig, composes the
assembly / lumping / eigenvalue machinery, and writes CSV tables plus SVG
figures into the configured output directory. Every figure has its raw
data in a CSV next to it, and reruns with the same config and seed write
byte-identical files.
"""

import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import (assemble_multipatch, assemble_single_patch,
                       assemble_trimmed, jacobi_rescale)
from .dynamics import (central_difference, l2_error,
                       manufactured_wave_problem, step_count,
                       write_trajectory_csv, Trajectory)
from .geometry import (MultipatchTopology, catalog, classify_elements,
                       outer_faces, rotated_square_region)
from .linalg import banded_cholesky, dense_generalized_eig, _measured_bandwidth
from .lumping import (HierBandedMatrix, _as_csr, block_lumped_family,
                      hierarchical_lump, lump_rowsum, multipatch_lump,
                      pad_lump_trim)
from .spectral import (LanczosConfig, critical_timestep, deflate, lanczos,
                       write_spectrum_csv)
from .splines import SplineSpace, make_open_uniform
from .svgplot import LinePlot

_KINDS = ('spectrum', 'convergence', 'simulate', 'deflate-ratio',
          'trimmed-sweep', 'bandwidth-report')
_PENCIL_RE = re.compile(r'^(M|rowsum|P[1-9][0-9]*|H[1-9][0-9]*)$')
_DENSE_CAP = 4000
_ONE = lambda *xs: 1.0


class ConfigError(Exception):
    """Malformed or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    kind: str
    geometry: str = 'unit_square'
    geometry_params: dict = field(default_factory=dict)
    p: int = 2
    k: int = None               # eigenpair count for Lanczos-only spectra
    subdivisions: tuple = (8,)  # elements per direction; singleton broadcasts
    levels: int = 4
    pencils: tuple = ('M', 'P1')
    ranks: tuple = ()
    horizons: tuple = ()        # time spans of the ratio study
    tspan: float = 1.0
    safeguard: float = 0.85
    density: str = 'one'
    dirichlet: bool = None      # None = per-experiment default
    nquad: int = None
    nangles: int = 1
    out: str = 'out'
    seed: int = 0
    threads: int = 1
    source: str = field(default='', repr=False, compare=False)
    lines: dict = field(default_factory=dict, repr=False, compare=False)

    def where(self, key):
        """Config location of key, for error messages."""
        if key in self.lines:
            return '%s:%d' % (self.source, self.lines[key])
        return self.source or '<config>'


_SCALAR_KEYS = {'kind': str, 'geometry': str, 'out': str, 'density': str,
                'p': int, 'k': int, 'levels': int, 'seed': int,
                'nangles': int, 'threads': int, 'nquad': int,
                'tspan': float, 'safeguard': float, 'dirichlet': bool}
_LIST_KEYS = {'subdivisions': int, 'pencils': str, 'ranks': int,
              'horizons': float}

# applied for keys the file leaves out, after the kind is known
_KIND_DEFAULTS = {
    'convergence': {'density': 'nonseparable', 'subdivisions': (4,)},
    'simulate': {'geometry': 'plate_hole', 'pencils': ('P1', 'P2', 'P3'),
                 'subdivisions': (16,), 'p': 3, 'tspan': 6.0},
    'deflate-ratio': {'geometry': 'plate_hole', 'pencils': ('P1',),
                      'ranks': (10, 20, 40), 'subdivisions': (16, 8), 'p': 3},
    'trimmed-sweep': {'geometry': 'rotated_square', 'subdivisions': (20,),
                      'pencils': ('M', 'P1', 'P2', 'rowsum'), 'nangles': 40},
    'bandwidth-report': {'geometry': 'unit_cube', 'subdivisions': (6,),
                         'pencils': ('M', 'H1', 'H2', 'H3')},
}


def _coerce(kind, raw, where):
    try:
        if kind is bool:
            low = raw.lower()
            if low in ('true', 'yes', 'on', '1'):
                return True
            if low in ('false', 'no', 'off', '0'):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError('%s: expected %s, got %r'
                          % (where, kind.__name__, raw)) from None


def _num(raw, where):
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        raise ConfigError('%s: expected a number, got %r'
                          % (where, raw)) from None


def parse_config(path):
    """Read one experiment from a key = value file, validated and defaulted.

    Unknown keys, malformed values and out-of-range settings raise
    ConfigError with the offending file:line.
    """
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            raw_lines = fh.readlines()
    except OSError as exc:
        raise ConfigError('cannot read config %s: %s' % (path, exc)) from None

    entries = {}
    for lineno, raw in enumerate(raw_lines, 1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        if '=' not in line:
            raise ConfigError('%s:%d: expected key = value, got %r'
                              % (path, lineno, line))
        key, _, val = line.partition('=')
        key, val = key.strip(), val.strip()
        if not key or not val:
            raise ConfigError('%s:%d: empty key or value' % (path, lineno))
        if key in entries:
            raise ConfigError('%s:%d: duplicate key %r' % (path, lineno, key))
        entries[key] = (val, lineno)

    if 'kind' not in entries:
        raise ConfigError('%s: missing required key "kind"' % path)

    cfg = ExperimentConfig(kind='', source=path,
                           lines={k: ln for k, (_v, ln) in entries.items()})
    params = {}
    for key, (val, lineno) in entries.items():
        where = '%s:%d' % (path, lineno)
        if key in _SCALAR_KEYS:
            setattr(cfg, key, _coerce(_SCALAR_KEYS[key], val, where))
        elif key in _LIST_KEYS:
            parts = val.replace(',', ' ').split()
            typ = _LIST_KEYS[key]
            setattr(cfg, key, tuple(
                p if typ is str else _coerce(typ, p, where) for p in parts))
        elif key.startswith('geometry.'):
            params[key[len('geometry.'):]] = _num(val, where)
        else:
            raise ConfigError('%s: unknown key %r' % (where, key))
    cfg.geometry_params = params

    if cfg.kind not in _KINDS:
        raise ConfigError('%s: unknown experiment kind %r (choose from %s)'
                          % (cfg.where('kind'), cfg.kind, ', '.join(_KINDS)))
    for key, value in _KIND_DEFAULTS.get(cfg.kind, {}).items():
        if key not in entries:
            setattr(cfg, key, value)
    _validate(cfg)
    return cfg


def _validate(cfg):
    def require(ok, key, msg):
        if not ok:
            raise ConfigError('%s: %s' % (cfg.where(key), msg))

    require(cfg.p >= 1, 'p', 'degree must be at least 1')
    require(cfg.k is None or cfg.k >= 1, 'k', 'k must be at least 1')
    require(cfg.levels >= 1, 'levels', 'levels must be at least 1')
    if cfg.kind == 'convergence':
        require(cfg.levels >= 3, 'levels',
                'a convergence study needs at least 3 refinement levels')
    require(cfg.safeguard > 0 and cfg.safeguard <= 1, 'safeguard',
            'safeguard must lie in (0, 1]')
    require(cfg.tspan > 0, 'tspan', 'time span must be positive')
    require(cfg.nangles >= 1, 'nangles', 'nangles must be at least 1')
    require(cfg.threads >= 1, 'threads', 'threads must be at least 1')
    require(cfg.seed >= 0, 'seed', 'seed must be nonnegative')
    require(cfg.nquad is None or cfg.nquad >= 1, 'nquad',
            'nquad must be at least 1')
    require(len(cfg.subdivisions) >= 1
            and all(s >= 1 for s in cfg.subdivisions),
            'subdivisions', 'subdivisions must be positive')
    require(all(r >= 1 for r in cfg.ranks), 'ranks',
            'deflation ranks must be positive')
    require(all(t > 0 for t in cfg.horizons), 'horizons',
            'horizons must be positive')
    require(len(cfg.pencils) >= 1, 'pencils', 'select at least one pencil')
    for label in cfg.pencils:
        require(_PENCIL_RE.match(label) is not None, 'pencils',
                'bad pencil label %r (use M, rowsum, P<i> or H<k>)' % label)
    require(cfg.density in ('one', 'nonseparable'), 'density',
            'density must be "one" or "nonseparable"')

    if cfg.geometry == 'rotated_square':
        require(cfg.kind in ('spectrum', 'trimmed-sweep'), 'geometry',
                'rotated_square is only available for spectrum and '
                'trimmed-sweep runs')
        extra = set(cfg.geometry_params) - {'cx', 'cy', 'half_side'}
        require(not extra, 'geometry',
                'unknown trim parameters %s' % sorted(extra))
        require(cfg.geometry_params.get('half_side', 0.35) > 0,
                'geometry', 'half_side must be positive')
        require(not cfg.ranks, 'ranks',
                'scaled-pencil curves are not available on trimmed spectra')
    else:
        require(cfg.kind != 'trimmed-sweep', 'geometry',
                'trimmed-sweep requires geometry = rotated_square')
        try:
            catalog(cfg.geometry, **cfg.geometry_params)
        except KeyError:
            raise ConfigError('%s: unknown geometry id %r'
                              % (cfg.where('geometry'), cfg.geometry)) \
                from None
        except TypeError as exc:
            raise ConfigError('%s: bad geometry parameters: %s'
                              % (cfg.where('geometry'), exc)) from None
    if cfg.kind == 'simulate':
        require(cfg.geometry == 'plate_hole', 'geometry',
                'simulate uses the manufactured plate problem; '
                'set geometry = plate_hole')


def apply_overrides(cfg, out=None, seed=None, threads=None):
    """Fold command-line flag values over the parsed config."""
    updates = {}
    if out is not None:
        updates['out'] = out
    if seed is not None:
        if seed < 0:
            raise ConfigError('--seed must be nonnegative')
        updates['seed'] = seed
    if threads is not None:
        if threads < 1:
            raise ConfigError('--threads must be at least 1')
        updates['threads'] = threads
    return replace(cfg, **updates) if updates else cfg


# --------------------------------------------------------------- assembly

def _broadcast_subs(cfg, d):
    subs = cfg.subdivisions
    if len(subs) == 1:
        return subs * d
    if len(subs) != d:
        raise ConfigError('%s: got %d subdivision counts for a %dd geometry'
                          % (cfg.where('subdivisions'), len(subs), d))
    return subs


def _density_field(name):
    if name == 'one':
        return _ONE

    def rho(*xs):
        xs = [np.asarray(x, dtype=float) for x in xs]
        prod, total = xs[0], xs[0]
        for x in xs[1:]:
            prod = prod * x
            total = total + x
        return np.abs(np.sin(prod)) + total + 1.0
    return rho


def _build_spaces(cfg, patches, interfaces, dirichlet):
    d = patches[0].ndim
    subs = _broadcast_subs(cfg, d)
    kvs = lambda: [make_open_uniform(n, cfg.p, cfg.p - 1) for n in subs]
    if len(patches) == 1:
        flags = ((dirichlet, dirichlet),) * d
        return [SplineSpace(kvs(), dirichlet=flags)]
    outer = set(outer_faces(patches, interfaces)) if dirichlet else set()
    spaces = []
    for ip in range(len(patches)):
        flags = tuple(tuple((ip, l, s) in outer for s in (0, 1))
                      for l in range(d))
        spaces.append(SplineSpace(kvs(), dirichlet=flags))
    return spaces


def _assemble(cfg, dirichlet):
    """Pair over the configured geometry; (pair, topology, local_pairs)."""
    patches, interfaces = catalog(cfg.geometry, **cfg.geometry_params)
    rho = _density_field(cfg.density)
    spaces = _build_spaces(cfg, patches, interfaces, dirichlet)
    if len(patches) == 1:
        pair = assemble_single_patch(spaces[0], patches[0], rho, _ONE,
                                     nquad=cfg.nquad)
        return pair, None, None
    topo = MultipatchTopology(spaces, interfaces)
    glob, locs = assemble_multipatch(topo, patches, rho, _ONE,
                                     nquad=cfg.nquad)
    return glob, topo, locs


def _assemble_trimmed_at(cfg, angle):
    patches, _ifaces = catalog('unit_square')
    subs = _broadcast_subs(cfg, 2)
    kvs = [make_open_uniform(n, cfg.p, cfg.p - 1) for n in subs]
    space = SplineSpace(kvs)
    params = cfg.geometry_params
    region = rotated_square_region(
        center=(params.get('cx', 0.5), params.get('cy', 0.5)),
        angle=angle, half_side=params.get('half_side', 0.35))
    mask = classify_elements(space, patches[0], region)
    pair = assemble_trimmed(space, patches[0], mask,
                            _density_field(cfg.density), _ONE,
                            nquad=cfg.nquad)
    return pair


def _mass_variant(cfg, pair, label, topo=None, locs=None):
    """The mass matrix the pencil label selects, on any assembly route."""
    M = pair.M
    if label == 'M':
        return M
    if label == 'rowsum':
        return lump_rowsum(M)
    fam, idx = label[0], int(label[1:])
    try:
        if pair.embedding is not None:
            bandwidths = (cfg.p,) * len(pair.background_dims)
            kw = {'i': idx} if fam == 'P' else {'level': idx}
            return pad_lump_trim(M, pair.embedding, pair.background_dims,
                                 bandwidths, **kw)
        if topo is not None:
            mats = [loc.M for loc in locs]
            kw = {'i': idx} if fam == 'P' else {'level': idx}
            return multipatch_lump(mats, topo.l2g, topo.n_global, **kw)
        if fam == 'P':
            return block_lumped_family(M, idx)
        return hierarchical_lump(M, idx)
    except ValueError as exc:
        raise ConfigError('%s: pencil %s: %s'
                          % (cfg.where('pencils'), label, exc)) from None


# ------------------------------------------------------------ eigensolves

def _mass_factor(Mvar):
    if isinstance(Mvar, HierBandedMatrix):
        return banded_cholesky(Mvar, Mvar.scalar_bandwidth())
    A = _as_csr(Mvar)
    return banded_cholesky(A, _measured_bandwidth(A))


def _eig_all(K, Mvar, rescale=False):
    A, B = K, Mvar
    if rescale:
        A, B, _d = jacobi_rescale(K, Mvar)
    w, _U = dense_generalized_eig(A, B)
    return w


def _extreme_eigenvalue(K, Mvar, which, seed=0):
    """Smallest or largest generalized eigenvalue, dense below the cap."""
    n = K.shape[0]
    if n <= _DENSE_CAP:
        w = _eig_all(K, Mvar)
        return float(w[0] if which == 'smallest' else w[-1])
    A, B = _as_csr(K), _as_csr(Mvar)
    v0 = np.full(n, n ** -0.5)
    if which == 'smallest':
        vals = spla.eigsh(A, k=1, M=B, sigma=0.0, v0=v0,
                          return_eigenvectors=False)
        return float(vals[0])
    res = lanczos(n, K, _mass_factor(Mvar), Mvar,
                  LanczosConfig(k=1, tol=1e-8), seed=seed)
    _require_converged(res, 'largest eigenvalue')
    return float(res.values[0])


def _require_converged(res, what):
    if not np.all(res.converged):
        raise ValueError('eigensolver failed to converge for %s '
                         '(residuals %s)' % (what, res.residuals))


def _ensure_out(cfg):
    os.makedirs(cfg.out, exist_ok=True)


def _run_sweep(cfg, work, items):
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            return list(ex.map(work, items))
    return [work(it) for it in items]


# ----------------------------------------------------------------- runners

def run_spectrum(cfg):
    """Full (or top-k) spectra of (K, M~) for each selected pencil."""
    _ensure_out(cfg)
    if cfg.geometry == 'rotated_square':
        return _run_spectrum_trimmed(cfg)
    dirichlet = False if cfg.dirichlet is None else cfg.dirichlet
    pair, topo, locs = _assemble(cfg, dirichlet)
    n = pair.K.shape[0]
    if cfg.k is None and n > _DENSE_CAP:
        raise ConfigError('%s: %d dofs exceed the dense oracle cap %d; '
                          'set k for a Lanczos-only spectrum'
                          % (cfg.where('subdivisions'), n, _DENSE_CAP))

    spectra = []
    variants = {}
    for label in cfg.pencils:
        Mvar = _mass_variant(cfg, pair, label, topo, locs)
        variants[label] = Mvar
        if cfg.k is not None:
            res = lanczos(n, pair.K, _mass_factor(Mvar), Mvar,
                          LanczosConfig(k=cfg.k), seed=cfg.seed)
            _require_converged(res, 'pencil %s' % label)
            vals = np.sort(res.values)
        else:
            vals = _eig_all(pair.K, Mvar)
        spectra.append((label, vals))

    if cfg.ranks:
        if cfg.k is not None:
            raise ConfigError('%s: scaled-pencil curves need the dense '
                              'route; drop k' % cfg.where('ranks'))
        base = next((lb for lb in cfg.pencils if lb != 'M'), cfg.pencils[0])
        Mvar = variants[base]
        w, U = dense_generalized_eig(pair.K, Mvar)
        for r in cfg.ranks:
            eigendata = (w[::-1][:r + 1], U[:, ::-1][:, :r + 1])
            try:
                pencil = deflate(pair.K, Mvar, r, 'scale-mass', eigendata)
            except ValueError as exc:
                raise ConfigError('%s: rank %d: %s'
                                  % (cfg.where('ranks'), r, exc)) from None
            wbar = _eig_all(*pencil.dense_pair())
            spectra.append(('%s+r%d' % (base, r), wbar))

    csv = os.path.join(cfg.out, 'spectrum.csv')
    write_spectrum_csv(csv, spectra)
    plot = LinePlot(title='%s, p=%d' % (cfg.geometry, cfg.p),
                    xlabel='mode index k', ylabel='lambda_k')
    for label, vals in spectra:
        plot.add(np.arange(1, len(vals) + 1), vals, label)
    svg = os.path.join(cfg.out, 'spectrum.svg')
    plot.save(svg)
    return [csv, svg]


def _run_spectrum_trimmed(cfg):
    angles = [2.0 * math.pi * i / cfg.nangles for i in range(cfg.nangles)]

    def one(item):
        idx, angle = item
        pair = _assemble_trimmed_at(cfg, angle)
        spectra = []
        for label in cfg.pencils:
            Mvar = _mass_variant(cfg, pair, label)
            spectra.append((label, _eig_all(pair.K, Mvar, rescale=True)))
        path = os.path.join(cfg.out, 'spectrum_ang%03d.csv' % idx)
        write_spectrum_csv(path, spectra)
        return path, pair.K.shape[0], [(lb, v[-1]) for lb, v in spectra]

    results = _run_sweep(cfg, one, list(enumerate(angles)))
    written = [r[0] for r in results]

    summary = os.path.join(cfg.out, 'sweep_summary.csv')
    with open(summary, 'w') as f:
        f.write('angle,n_active,label,lambda_max\n')
        for (path, n, tops), angle in zip(results, angles):
            for label, lam in tops:
                f.write('%.17g,%d,%s,%.17g\n' % (angle, n, label, lam))
    written.append(summary)

    plot = LinePlot(title='trimmed rotated square, p=%d' % cfg.p,
                    xlabel='rotation angle', ylabel='lambda_max', ylog=True)
    for j, label in enumerate(cfg.pencils):
        plot.add(angles, [r[2][j][1] for r in results], label)
    svg = os.path.join(cfg.out, 'sweep.svg')
    plot.save(svg)
    written.append(svg)
    return written


def run_convergence(cfg):
    """Smallest-frequency error under mesh refinement, one curve per pencil."""
    _ensure_out(cfg)
    patches, interfaces = catalog(cfg.geometry, **cfg.geometry_params)
    if len(patches) != 1:
        raise ConfigError('%s: convergence studies run on a single patch'
                          % cfg.where('geometry'))
    dirichlet = True if cfg.dirichlet is None else cfg.dirichlet
    d = patches[0].ndim
    base = _broadcast_subs(cfg, d)

    def level_pair(subs):
        kvs = [make_open_uniform(n, cfg.p, cfg.p - 1) for n in subs]
        flags = ((dirichlet, dirichlet),) * d
        space = SplineSpace(kvs, dirichlet=flags)
        return assemble_single_patch(space, patches[0],
                                     _density_field(cfg.density), _ONE,
                                     nquad=cfg.nquad)

    def omega1(pair, label):
        Mvar = _mass_variant(cfg, pair, label)
        return math.sqrt(_extreme_eigenvalue(pair.K, Mvar, 'smallest',
                                             seed=cfg.seed))

    hs, errors = [], {label: [] for label in cfg.pencils}
    ref_subs = tuple(n * 2 ** (cfg.levels + 1) for n in base)
    omega_ref = omega1(level_pair(ref_subs), 'M')
    for level in range(cfg.levels):
        subs = tuple(n * 2 ** level for n in base)
        hs.append(1.0 / min(subs))
        pair = level_pair(subs)
        for label in cfg.pencils:
            w = omega1(pair, label)
            errors[label].append((omega_ref - w) / omega_ref)

    csv = os.path.join(cfg.out, 'convergence.csv')
    with open(csv, 'w') as f:
        f.write('h,' + ','.join(cfg.pencils) + '\n')
        for i, h in enumerate(hs):
            row = [errors[lb][i] for lb in cfg.pencils]
            f.write(','.join('%.17g' % v for v in [h] + row) + '\n')

    slopes = {}
    for label in cfg.pencils:
        loge = np.log(np.abs(np.asarray(errors[label])))
        slopes[label] = float(np.polyfit(np.log(hs), loge, 1)[0])
    slopes_csv = os.path.join(cfg.out, 'slopes.csv')
    with open(slopes_csv, 'w') as f:
        f.write('label,slope\n')
        for label in cfg.pencils:
            f.write('%s,%.17g\n' % (label, slopes[label]))

    plot = LinePlot(title='smallest-frequency convergence, p=%d' % cfg.p,
                    xlabel='h', ylabel='|relative error|',
                    xlog=True, ylog=True)
    for label in cfg.pencils:
        plot.add(hs, np.abs(errors[label]),
                 '%s (slope %.2f)' % (label, slopes[label]))
    svg = os.path.join(cfg.out, 'convergence.svg')
    plot.save(svg)
    return [csv, slopes_csv, svg]


def run_simulate(cfg):
    """Manufactured plate runs per mass treatment, at shared and own steps."""
    _ensure_out(cfg)
    patches, _ifaces = catalog(cfg.geometry)
    subs = _broadcast_subs(cfg, 2)
    if subs[0] != subs[1]:
        raise ConfigError('%s: the manufactured problem runs on an '
                          'isotropic mesh' % cfg.where('subdivisions'))
    prob = manufactured_wave_problem(patches[0], cfg.p, subs[0],
                                     nquad=cfg.nquad)
    K = prob.pair.K
    lam_M = _extreme_eigenvalue(K, prob.pair.M, 'largest', seed=cfg.seed)
    dt_shared = cfg.safeguard * critical_timestep(lam_M)

    zeros = np.zeros(K.shape[0])

    def rel_error_curve(traj):
        stride = max(1, traj.nsteps // 240)
        idx = list(range(0, len(traj.times), stride))
        if idx[-1] != len(traj.times) - 1:
            idx.append(len(traj.times) - 1)
        errs = []
        for i in idx:
            t = traj.times[i]
            num = l2_error(prob.space, prob.patch, traj.samples[i],
                           prob.exact, t=t, nquad=cfg.nquad)
            den = l2_error(prob.space, prob.patch, zeros, prob.exact, t=t,
                           nquad=cfg.nquad)
            errs.append(num / den)
        sub = Trajectory(dt=traj.dt, times=traj.times[idx],
                         samples=traj.samples[idx], stable=traj.stable)
        return sub, errs

    written, curves = [], []
    for label in cfg.pencils:
        Mvar = _mass_variant(cfg, prob.pair, label)
        lam = lam_M if label == 'M' else \
            _extreme_eigenvalue(K, Mvar, 'largest', seed=cfg.seed)
        factor = _mass_factor(Mvar)
        for tag, dt in (('shared', dt_shared),
                        ('critical', cfg.safeguard * critical_timestep(lam))):
            traj = central_difference(factor, K, prob.f, prob.u0, prob.v0,
                                      dt, cfg.tspan)
            if not traj.stable:
                raise ValueError('simulation with %s blew up at step %d of '
                                 'dt=%g' % (label, traj.blown_up_at, dt))
            sub, errs = rel_error_curve(traj)
            path = os.path.join(cfg.out, 'sim_%s_%s.csv' % (label, tag))
            write_trajectory_csv(path, sub, errors=errs)
            written.append(path)
            if tag == 'shared':
                curves.append((label, sub.times, errs))

    plot = LinePlot(title='plate, p=%d, shared dt=%.3g' % (cfg.p, dt_shared),
                    xlabel='t', ylabel='relative L2 error', ylog=True)
    for label, times, errs in curves:
        plot.add(times, errs, label)
    svg = os.path.join(cfg.out, 'simulate.svg')
    plot.save(svg)
    written.append(svg)
    return written


def run_deflate_ratio(cfg):
    """Cost ratio (N_s + N_i) / N_w of deflated vs plain stepping over T."""
    _ensure_out(cfg)
    dirichlet = False if cfg.dirichlet is None else cfg.dirichlet
    pair, topo, locs = _assemble(cfg, dirichlet)
    label = cfg.pencils[0]
    Mvar = _mass_variant(cfg, pair, label, topo, locs)
    factor = _mass_factor(Mvar)
    n = pair.K.shape[0]

    per_rank = []
    for r in cfg.ranks:
        if r + 1 > n:
            raise ConfigError('%s: rank %d needs %d eigenpairs but the '
                              'problem has %d dofs'
                              % (cfg.where('ranks'), r, r + 1, n))
        res = lanczos(n, pair.K, factor, Mvar, LanczosConfig(k=r + 1),
                      seed=cfg.seed)
        _require_converged(res, 'rank %d' % r)
        lam_n, lam_cut = float(res.values[0]), float(res.values[r])
        per_rank.append((r, lam_n, lam_cut, res.n_iter, res.n_matvec))

    horizons = cfg.horizons
    if not horizons:
        # center the grid on the break-even horizon of each rank
        stars = []
        for r, lam_n, lam_cut, n_iter, _nm in per_rank:
            rate_w = 1.0 / (cfg.safeguard * critical_timestep(lam_n))
            rate_s = 1.0 / (cfg.safeguard * critical_timestep(lam_cut))
            stars.append(n_iter / (rate_w - rate_s))
        center = math.exp(np.mean(np.log(stars)))
        horizons = tuple(center * 2.0 ** e for e in range(-3, 4))

    csv = os.path.join(cfg.out, 'deflate_ratio.csv')
    rows = {r: ([], []) for r in cfg.ranks}
    with open(csv, 'w') as f:
        f.write('rank,T,N_w,N_s,N_i,n_matvec,ratio\n')
        for r, lam_n, lam_cut, n_iter, n_matvec in per_rank:
            for T in horizons:
                N_w = step_count(T, lam_n, cfg.safeguard)
                N_s = step_count(T, lam_cut, cfg.safeguard)
                if N_w == 0:
                    raise ValueError('horizon %g is shorter than one step'
                                     % T)
                ratio = (N_s + n_iter) / N_w
                f.write('%d,%.17g,%d,%d,%d,%d,%.17g\n'
                        % (r, T, N_w, N_s, n_iter, n_matvec, ratio))
                rows[r][0].append(T)
                rows[r][1].append(ratio)

    plot = LinePlot(title='deflation break-even on (K, %s)' % label,
                    xlabel='T', ylabel='(N_s + N_i) / N_w', xlog=True)
    for r in cfg.ranks:
        plot.add(rows[r][0], rows[r][1], 'r=%d' % r)
    plot.add([min(horizons), max(horizons)], [1.0, 1.0], 'break-even')
    svg = os.path.join(cfg.out, 'deflate_ratio.svg')
    plot.save(svg)
    return [csv, svg]


def run_trimmed_sweep(cfg):
    """lambda_max of each pencil over a sweep of trim rotation angles."""
    _ensure_out(cfg)
    angles = [2.0 * math.pi * i / cfg.nangles for i in range(cfg.nangles)]

    def one(angle):
        pair = _assemble_trimmed_at(cfg, angle)
        out = []
        for label in cfg.pencils:
            Mvar = _mass_variant(cfg, pair, label)
            if label != 'M':
                # definiteness check on the rescaled lumped mass
                _mass_factor(_rescaled_mass(pair.K, Mvar))
            w = _eig_all(pair.K, Mvar, rescale=True)
            out.append((label, float(w[-1])))
        return pair.K.shape[0], out

    results = _run_sweep(cfg, one, angles)

    csv = os.path.join(cfg.out, 'trimmed_sweep.csv')
    with open(csv, 'w') as f:
        f.write('angle,n_active,label,lambda_max,spd\n')
        for angle, (n, tops) in zip(angles, results):
            for label, lam in tops:
                f.write('%.17g,%d,%s,%.17g,1\n' % (angle, n, label, lam))

    plot = LinePlot(title='trimmed rotated square, p=%d' % cfg.p,
                    xlabel='rotation angle', ylabel='lambda_max', ylog=True)
    for j, label in enumerate(cfg.pencils):
        plot.add(angles, [res[1][j][1] for res in results], label)
    svg = os.path.join(cfg.out, 'trimmed_sweep.svg')
    plot.save(svg)
    return [csv, svg]


def _rescaled_mass(K, Mvar):
    _A, B, _d = jacobi_rescale(K, Mvar)
    return B


def run_bandwidth_report(cfg):
    """Predicted vs measured scalar bandwidths of the lumped families."""
    _ensure_out(cfg)
    pair, topo, _locs = _assemble(
        cfg, False if cfg.dirichlet is None else cfg.dirichlet)
    if topo is not None:
        raise ConfigError('%s: bandwidth structure needs a single tensor '
                          'patch' % cfg.where('geometry'))
    csv = os.path.join(cfg.out, 'bandwidth.csv')
    with open(csv, 'w') as f:
        f.write('label,n,bandwidths,predicted,measured,equal\n')
        for label in cfg.pencils:
            Mvar = _mass_variant(cfg, pair, label)
            pred = Mvar.scalar_bandwidth()
            meas = Mvar.measured_bandwidth()
            f.write('%s,%d,%s,%d,%d,%d\n'
                    % (label, Mvar.shape[0],
                       'x'.join(str(b) for b in Mvar.bandwidths),
                       pred, meas, int(pred == meas)))
    return [csv]


RUNNERS = {
    'spectrum': run_spectrum,
    'convergence': run_convergence,
    'simulate': run_simulate,
    'deflate-ratio': run_deflate_ratio,
    'trimmed-sweep': run_trimmed_sweep,
    'bandwidth-report': run_bandwidth_report,
}
