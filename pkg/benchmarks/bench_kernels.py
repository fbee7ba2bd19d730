"""Compare the compiled kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py``. Each row reports the best
per-call time over several ``timeit`` repeats for both backends and checks
that their outputs agree.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from blockflip import _kernels_py

try:
    from blockflip import _kernels_ext
except ImportError:
    _kernels_ext = None

SIZES = [(2, 2), (3, 3), (4, 4), (8, 8)]
KERNELS = ["partial_trace_first", "partial_transpose_second", "reshuffle_contract"]

_CRITERION_SNIPPET = """
import timeit, numpy as np
from blockflip import factorization_criterion
from blockflip.states import random_density
rho = random_density({d}, np.random.default_rng(0))
t = min(timeit.repeat(lambda: factorization_criterion(rho, ({n}, {m})), number={number}, repeat=5))
print(t / {number})
"""


def _best(fn, number):
    return min(timeit.repeat(fn, number=number, repeat=5)) / number


def _criterion_time(n, m, pure, number):
    # the backend is fixed at import, so each backend runs in its own interpreter
    env = dict(os.environ, BLOCKFLIP_PURE_PYTHON="1" if pure else "0")
    code = _CRITERION_SNIPPET.format(d=n * m, n=n, m=m, number=number)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--number", type=int, default=2000, help="calls per timing repeat")
    args = parser.parse_args(argv)
    if _kernels_ext is None:
        print("compiled extension not built; nothing to compare", file=sys.stderr)
        return 1
    rng = np.random.default_rng(1)
    print(f"{'kernel':<26}{'dims':>6}{'python us':>12}{'cython us':>12}{'speedup':>9}")
    for n, m in SIZES:
        d = n * m
        x = np.ascontiguousarray(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
        for name in KERNELS:
            py, ext = getattr(_kernels_py, name), getattr(_kernels_ext, name)
            np.testing.assert_allclose(ext(x, n, m), py(x, n, m), atol=1e-10)
            number = max(args.number // d, 10)
            tp = _best(lambda: py(x, n, m), number)
            tc = _best(lambda: ext(x, n, m), number)
            print(f"{name:<26}{f'{n}x{m}':>6}{tp * 1e6:12.2f}{tc * 1e6:12.2f}{tp / tc:9.1f}")
    for n, m in SIZES:
        number = max(args.number // (20 * n * m), 5)
        tp = _criterion_time(n, m, True, number)
        tc = _criterion_time(n, m, False, number)
        print(f"{'factorization_criterion':<26}{f'{n}x{m}':>6}{tp * 1e6:12.2f}{tc * 1e6:12.2f}{tp / tc:9.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
