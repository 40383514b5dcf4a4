"""Compare the compiled and numpy GF(2^8) kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per (kernel, shape, backend) with the best time of
``--repeat`` runs, plus the speedup of the compiled kernels.
"""

import argparse
import timeit

import numpy as np

from regencore import kernels
from regencore._tables import INV, MUL

CASES = [
    # (name, shape description, callable factory)
    ("matmul", "18x9 @ 9x65536", lambda rng: (rng.integers(0, 256, (18, 9), dtype=np.uint8),
                                              rng.integers(0, 256, (9, 65536), dtype=np.uint8))),
    ("matmul", "200x100 @ 100x1024", lambda rng: (rng.integers(0, 256, (200, 100), dtype=np.uint8),
                                                  rng.integers(0, 256, (100, 1024), dtype=np.uint8))),
    ("invert", "100x100", lambda rng: (rng.integers(0, 256, (100, 100), dtype=np.uint8),)),
    ("rank", "84x84", lambda rng: (rng.integers(0, 256, (84, 84), dtype=np.uint8),)),
]


def call(impl, name, args):
    if name == "matmul":
        return impl.matmul(*args, MUL)
    return getattr(impl, name)(*args, MUL, INV)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; only the python backend is timed")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<8} {'shape':<22} {'backend':<8} {'best (ms)':>10}")
    for name, shape, make in CASES:
        data = make(rng)
        results = {}
        for backend in backends:
            impl = kernels.get_backend(backend)
            out = call(impl, name, data)
            results[backend] = out
            best = min(timeit.repeat(lambda: call(impl, name, data), number=1, repeat=args.repeat))
            results[backend + "_t"] = best
            print(f"{name:<8} {shape:<22} {backend:<8} {best * 1e3:>10.3f}")
        if len(backends) == 2:
            a, b = results["cython"], results["python"]
            same = (a is None and b is None) or np.array_equal(a, b)
            print(f"{'':<8} {'':<22} {'speedup':<8} {results['python_t'] / results['cython_t']:>9.1f}x"
                  f"{'' if same else '  (OUTPUTS DIFFER)'}")


if __name__ == "__main__":
    main()
