"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py --n 10000 100000 --repeat 5 --csv kernels.csv

Each row is the median wall time of one kernel call (milliseconds) for both
backends on the same inputs, plus the speedup of the compiled one.
"""

import argparse
import csv
import sys
import timeit

import numpy as np

from greedybn.kernels import load_backend

FIELDS = ("kernel", "n", "j", "groups", "python_ms", "compiled_ms", "speedup")


def make_inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    cont = np.asfortranarray(rng.normal(size=(n, 6)))
    disc = np.asfortranarray(rng.integers(0, 3, size=(n, 4)).astype(np.int32))
    return cont, disc


def cases(core, cont, disc):
    """(name, j, groups, callable(backend)) for every kernel shape worth timing."""
    pidx = np.array([0, 1], dtype=np.intp)
    nlev = np.array([3, 3], dtype=np.int64)
    codes = core.config_codes(disc, pidx, nlev)
    logp = np.log(np.full((9, 3), 1 / 3))
    out = [
        ("config_codes", 0, 9, lambda K: K.config_codes(disc, pidx, nlev)),
        ("cpt_counts", 0, 9, lambda K: K.cpt_counts(disc, 2, pidx, nlev, 3)),
        ("cpt_logprob_sum", 0, 9, lambda K: K.cpt_logprob_sum(disc, 2, pidx, nlev, logp)),
    ]
    for grouped in (False, True):
        g, ng = (codes, 9) if grouped else (None, 1)
        for j in (0, 1, 2, 4):
            xs = np.arange(1, 1 + j, dtype=np.intp)
            if j <= 2:
                out.append(("moments_fit", j, ng,
                            lambda K, xs=xs, g=g, ng=ng: K.moments_fit(cont, 0, xs, g, ng, 1e-12)))
            out.append(("qr_fit", j, ng, lambda K, xs=xs, g=g, ng=ng: K.qr_fit(cont, 0, xs, g, ng, 1e-9)))
            coef = np.ascontiguousarray(np.ones((ng, j + 1)))
            out.append(("resid_ssr", j, ng, lambda K, xs=xs, g=g, c=coef: K.resid_ssr(cont, 0, xs, g, c)))
    return out


def median_ms(fn, repeat):
    fn()
    return 1e3 * float(np.median(timeit.repeat(fn, number=1, repeat=repeat)))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[10_000, 100_000])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--csv", help="also write the table to this file")
    args = ap.parse_args(argv)

    py = load_backend("python")
    try:
        core = load_backend("compiled")
    except ImportError:
        sys.exit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    rows = []
    for n in args.n:
        cont, disc = make_inputs(n)
        for name, j, ng, fn in cases(core, cont, disc):
            t_py = median_ms(lambda: fn(py), args.repeat)
            t_c = median_ms(lambda: fn(core), args.repeat)
            rows.append((name, n, j, ng, round(t_py, 4), round(t_c, 4), round(t_py / t_c, 2)))
            print("{:<16} n={:<8} j={} groups={:<2} python {:>9.3f} ms  compiled {:>8.3f} ms  x{:.1f}"
                  .format(name, n, j, ng, t_py, t_c, t_py / t_c), flush=True)

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(FIELDS)
            w.writerows(rows)


if __name__ == "__main__":
    main()
