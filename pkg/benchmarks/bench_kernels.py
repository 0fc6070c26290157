"""
Compares the compiled kernels with the pure-Python fallback.

Run from the repository root after installing the package::

    python3 benchmarks/bench_kernels.py [--repeats 5]

Both backends receive identical inputs; the script checks that their
outputs agree before timing them.
"""
import argparse
import statistics
import timeit

import numpy as np

from mmcoal import _pykernels
from mmcoal.genealogy import draw_uniforms, kernel_tables
from mmcoal.measures import BolthausenSznitman, Dirac, Kingman

try:
    from mmcoal import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None


def coalescent_case(measure, n, seed=0):
    tab = kernel_tables(measure, n)
    _, uks, usub = draw_uniforms(n, np.random.default_rng(seed))

    def run(mod):
        ks = np.empty(n - 1, dtype=np.int64)
        children = np.empty(2 * n, dtype=np.int64)
        ne = mod.coalescent_events(n, tab.family, tab.a, tab.b, tab.p, tab.p2, tab.logm2,
                                   uks, usub, ks, children)
        return ks[:ne].copy(), children[: int(ks[:ne].sum())].copy()

    return run


def tree_case(rows, features, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(rows, features))
    y = (X[:, 0] + X[:, 1] + rng.normal(size=rows) > 0).astype(np.int64)
    boot = rng.integers(0, rows, size=rows)
    perms = rng.permuted(np.tile(np.arange(features, dtype=np.int64), (2 * rows, 1)), axis=1)
    mtry = int(np.ceil(np.sqrt(features)))

    def run(mod):
        return mod.grow_tree(X, y, boot, perms, mtry, 2, 2)

    return run


def _same(a, b):
    return all(np.array_equal(u, v) for u, v in zip(a, b))


def bench(name, case, repeats):
    py = min(timeit.repeat(lambda: case(_pykernels), number=1, repeat=repeats))
    if _ckernels is None:
        print(f"{name:<34} python {py * 1e3:9.2f} ms   compiled  n/a")
        return
    if not _same(case(_pykernels), case(_ckernels)):
        raise SystemExit(f"{name}: backends disagree")
    c = statistics.median(timeit.repeat(lambda: case(_ckernels), number=1, repeat=max(repeats, 5)))
    print(f"{name:<34} python {py * 1e3:9.2f} ms   compiled {c * 1e3:8.3f} ms   speed-up {py / c:7.1f}x")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    cases = [
        ("coalescent Kingman n=1000", coalescent_case(Kingman(), 1000)),
        ("coalescent BSZ n=1000", coalescent_case(BolthausenSznitman(), 1000)),
        ("coalescent Dirac(0.3) n=1000", coalescent_case(Dirac(0.3), 1000)),
        ("grow_tree 2000 rows x 25 features", tree_case(2000, 25)),
        ("grow_tree 10000 rows x 25 features", tree_case(10_000, 25)),
    ]
    for name, case in cases:
        bench(name, case, args.repeats)


if __name__ == "__main__":
    main()
