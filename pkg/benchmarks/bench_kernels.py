"""Compare the compiled kernel backend against the pure-Python fallback.

Times the two hot kernels (bottom-up conjugate softmax recursion, bottom-up
linear maximization) on the built-in games and reports the speedup.  Run as

    python3 benchmarks/bench_kernels.py [--ranks 13] [--repeats 200]
"""

import argparse
import time

import numpy as np

from efgfom import _kernels_py, dgf, games

try:
    from efgfom import _kernels as _compiled
except ImportError:
    _compiled = None


def bench(fn, args, repeats):
    fn(*args)  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - start) / repeats


def run(label, t, repeats, rng):
    g = rng.normal(size=t.n_seqs) * 5.0
    w = dgf.compute_gamma_w(t).gamma
    conj_args = (g, w, t.seq_start, t.n_actions, t.parent_seq)
    lin_args = (g, t.seq_start, t.n_actions, t.parent_seq)
    backends = [("python", _kernels_py)]
    if _compiled is not None:
        backends.append(("cython", _compiled))
    results = {}
    for name, mod in backends:
        results[name] = (
            bench(mod.tree_conjugate_entropy, conj_args, repeats),
            bench(mod.tree_linear_max, lin_args, repeats),
        )
    for kernel, idx in (("conjugate", 0), ("linear_max", 1)):
        line = f"{label:12s} {kernel:11s}"
        for name, times in results.items():
            line += f"  {name} {times[idx] * 1e6:9.1f} us"
        if len(results) == 2:
            ratio = results["python"][idx] / results["cython"][idx]
            line += f"  speedup {ratio:5.1f}x"
        print(line)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--ranks", type=int, default=13,
                        help="rank count for the large Leduc instance")
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()
    if _compiled is None:
        print("compiled backend not available; timing the fallback only")
    rng = np.random.default_rng(0)
    run("kuhn", games.generate_kuhn().treeplex_x, args.repeats, rng)
    run("leduc-3", games.generate_leduc(3).treeplex_x, args.repeats, rng)
    run(f"leduc-{args.ranks}",
        games.generate_leduc(args.ranks).treeplex_x, args.repeats, rng)


if __name__ == "__main__":
    main()
