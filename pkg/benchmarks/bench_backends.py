"""Compare the compiled and numpy kernel backends.

Usage: python3 benchmarks/bench_backends.py [--n 2000] [--seed 0]
"""

import argparse

from groundpose import backend
from groundpose.bench import speed_bench


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000, help="instances per solver (default: 2000)")
    ap.add_argument("--seed", type=int, default=0, help="base seed (default: 0)")
    args = ap.parse_args(argv)

    names = backend.available()
    print(f"{'solver':<7}" + "".join(f"{b + ' mean us':>20}" for b in names) + f"{'speedup':>10}")
    for kind in ("2pt", "fhf", "hf", "f1hf2"):
        res = {b: speed_bench(kind, args.n, args.seed, backend_name=b, warmup=min(200, args.n))
               for b in names}
        line = f"{kind:<7}" + "".join(f"{res[b].mean_us:>20.2f}" for b in names)
        if len(names) == 2:
            line += f"{res['python'].mean_us / res['compiled'].mean_us:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
