"""Time the numba kernels against their pure-numpy twins.

Runs each hot kernel at several problem sizes, reports timings and the
speedup, and checks that both backends agree on the output.  The package
selects its backend at import time via LMBFUSION_BACKEND; this script loads
both implementation modules directly, so it works regardless of the flag.

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from lmbfusion import kernels_numba as knb
from lmbfusion import kernels_numpy as knp

REPEATS = 30


def timeit(fn, *args):
    fn(*args)  # warm (numba compiles here)
    best = float("inf")
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def row(name, size, numpy_fn, numba_fn, args, check):
    t_np = timeit(numpy_fn, *args)
    t_nb = timeit(numba_fn, *args)
    a = numpy_fn(*args)
    b = numba_fn(*args)
    agree = check(a, b)
    print(
        f"{name:28s} {size:>12s}  numpy {t_np * 1e6:9.1f} us  numba {t_nb * 1e6:9.1f} us"
        f"  speedup {t_np / t_nb:6.2f}x  agree {agree}"
    )
    assert agree, f"{name} backends disagree"


def close(a, b):
    return bool(np.allclose(a, b, atol=1e-12, rtol=0))


def equal(a, b):
    return bool(np.array_equal(a, b))


def main():
    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'size':>12s}")

    for n in (1_000, 10_000, 100_000):
        states = np.ascontiguousarray(rng.standard_normal((n, 5)) * 10)
        noise = np.ascontiguousarray(rng.standard_normal((n, 3)) * 0.1)
        row("ct_propagate", f"{n} part.", knp.ct_propagate, knb.ct_propagate, (states, noise), close)

    for n in (1_000, 10_000, 100_000):
        w = rng.random(n)
        w = np.ascontiguousarray(w / w.sum())
        row(
            "systematic_indices",
            f"{n} wts",
            knp.systematic_indices,
            knb.systematic_indices,
            (w, 0.37, n),
            equal,
        )

    for n, m in ((1_000, 5), (1_000, 20), (10_000, 20)):
        px = np.ascontiguousarray(rng.standard_normal(n) * 30)
        py = np.ascontiguousarray(rng.standard_normal(n) * 30)
        zx = np.ascontiguousarray(rng.standard_normal(m) * 30)
        zy = np.ascontiguousarray(rng.standard_normal(m) * 30)
        row(
            "likelihood_matrix",
            f"{n}x{m}",
            knp.likelihood_matrix,
            knb.likelihood_matrix,
            (px, py, zx, zy, 1.0),
            close,
        )

    for k in (2, 8):
        sizes = np.full(k, 1000, dtype=np.int64)
        betas = rng.random(k)
        betas = np.ascontiguousarray(betas / betas.sum())
        row(
            "uniform_mixture_indices",
            f"{k} sources",
            knp.uniform_mixture_indices,
            knb.uniform_mixture_indices,
            (sizes, betas, 0.5, 1000),
            equal,
        )

    logf = np.ascontiguousarray(np.log(rng.random((25, 16)) + 1e-12))
    row(
        "gibbs_associations",
        "25x15 200sw",
        knp.gibbs_associations,
        knb.gibbs_associations,
        (logf, 200, 1234),
        equal,
    )

    from lmbfusion.filtering import partial_injection_count

    total = partial_injection_count(6, 6)
    row(
        "enum_associations",
        f"{total} events",
        knp.enum_associations,
        knb.enum_associations,
        (6, 6, total),
        equal,
    )


if __name__ == "__main__":
    main()
