#!/usr/bin/env python3
"""Run every study config in scripts/configs through the command line.

Each config sets its own out directory under results/ relative to the
repository root, which is where the subprocesses run. Pass config names
(without .cfg) to run a subset; -n lists what would run.
"""

import argparse
import re
import subprocess
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / 'scripts' / 'configs'


def kind_of(path):
    for line in path.read_text().splitlines():
        m = re.match(r'\s*kind\s*=\s*([a-z-]+)', line)
        if m:
            return m.group(1)
    sys.exit('no kind in %s' % path)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument('names', nargs='*', help='config names, default all')
    ap.add_argument('-n', '--dry-run', action='store_true',
                    help='print the commands without running')
    ap.add_argument('--seed', type=int, default=None,
                    help='override the seed of every run')
    args = ap.parse_args()

    cfgs = sorted(CONFIGS.glob('*.cfg'))
    if args.names:
        wanted = set(args.names)
        cfgs = [c for c in cfgs if c.stem in wanted]
        missing = wanted - {c.stem for c in cfgs}
        if missing:
            sys.exit('unknown config(s): %s' % ', '.join(sorted(missing)))

    for cfg in cfgs:
        cmd = ['igalump', kind_of(cfg), '--config',
               str(cfg.relative_to(ROOT))]
        if args.seed is not None:
            cmd += ['--seed', str(args.seed)]
        print('+', ' '.join(cmd), flush=True)
        if args.dry_run:
            continue
        t0 = time.perf_counter()
        rc = subprocess.call(cmd, cwd=ROOT)
        print('  %.1fs exit %d' % (time.perf_counter() - t0, rc), flush=True)
        if rc != 0:
            sys.exit(rc)


if __name__ == '__main__':
    main()
