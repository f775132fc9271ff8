"""Compare the numba and numpy kernel paths.

Run: python3 benchmarks/bench_kernels.py --batch 16 --hidden 64 --repeats 2000

Times the raw GRU gate/candidate/backward kernels and the Adam update, then
one full generator forward+backward at desk scale under each path.
"""
import argparse
import time

import numpy as np

from hpgan import _kernels as K
from hpgan import autodiff as ad
from hpgan.models import Generator, generate


def timed(fn, repeats):
    fn()  # warm-up (and JIT compile for numba)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats * 1e6


def kernel_cases(impl, B, H, rng):
    gx, gh_ur = rng.normal(size=(B, 3 * H)), rng.normal(size=(B, 2 * H))
    gh_c, h, g = rng.normal(size=(B, H)), rng.uniform(-1, 1, (B, H)), rng.normal(size=(B, H))
    u, r, _ = K.NUMPY.gru_gates(gx, gh_ur, h)
    c, _ = K.NUMPY.gru_candidate(gx, gh_c, u, h)
    theta = rng.normal(size=(H, 3 * H))
    gt, m, v = rng.normal(size=theta.shape), np.zeros(theta.shape), np.zeros(theta.shape)
    return {
        "gru_gates": lambda: impl.gru_gates(gx, gh_ur, h),
        "gru_candidate": lambda: impl.gru_candidate(gx, gh_c, u, h),
        "gru_backward_a": lambda: impl.gru_backward_a(g, u, c, h),
        "gru_backward_b": lambda: impl.gru_backward_b(g, r, h, g),
        "adam_update": lambda: impl.adam_update(theta, gt, m, v, 1e-3, 0.5, 0.9, 1e-8, 1),
    }


def generator_pass(B, H, rng):
    gen = Generator.init(rng, 5, H, 2, 16)
    prior = rng.uniform(-1, 1, (B, 10, 5, 3))
    z = rng.uniform(-1, 1, (B, 16))
    params = gen.params()

    def run():
        out = generate(gen, prior, z, 10)
        ad.backward(ad.mean(ad.square(out)), params)
    return run


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--repeats", type=int, default=2000)
    args = p.parse_args()
    if K.NUMBA is None:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    cases_np = kernel_cases(K.NUMPY, args.batch, args.hidden, rng)
    cases_nb = kernel_cases(K.NUMBA, args.batch, args.hidden, np.random.default_rng(0))
    print(f"{'kernel':<16}{'numpy us':>12}{'numba us':>12}{'speedup':>10}")
    for name in cases_np:
        t_np = timed(cases_np[name], args.repeats)
        t_nb = timed(cases_nb[name], args.repeats)
        print(f"{name:<16}{t_np:12.2f}{t_nb:12.2f}{t_np / t_nb:10.2f}")

    saved = K.active
    reps = max(1, args.repeats // 100)
    try:
        K.active = K.NUMPY
        t_np = timed(generator_pass(args.batch, args.hidden, np.random.default_rng(1)), reps)
        K.active = K.NUMBA
        t_nb = timed(generator_pass(args.batch, args.hidden, np.random.default_rng(1)), reps)
    finally:
        K.active = saved
    print(f"{'generator f+b':<16}{t_np:12.0f}{t_nb:12.0f}{t_np / t_nb:10.2f}")


if __name__ == "__main__":
    main()
