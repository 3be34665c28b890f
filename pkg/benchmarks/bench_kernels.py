"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--rows 4096] [--cols 64] [--repeat 5]

Prints one line per kernel: best-of-``repeat`` time per call for each backend,
the speedup, and the max absolute difference between their outputs. A short
end-to-end training-step timing follows (both backends, same model).
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from mgstc.numcore import kernels


def _cases(rows, cols, rng):
    x = rng.normal(size=(rows, cols))
    dy = rng.normal(size=(rows, cols))
    y = kernels.python_kernels.softmax_forward(x)
    xhat, rstd = kernels.python_kernels.layernorm_forward(x, 1e-5)
    return {
        "softmax_forward": (x,),
        "softmax_backward": (y, dy),
        "layernorm_forward": (x, 1e-5),
        "layernorm_backward": (dy, xhat, rstd),
        "gelu_forward": (x,),
        "gelu_backward": (x, dy),
        "cumulative_mean": (x.reshape(-1),),
    }


def _flat(out):
    if isinstance(out, tuple):
        return np.concatenate([np.ravel(o) for o in out])
    return np.ravel(out)


def _best(fn, args, repeat):
    number = max(1, int(0.05 / max(timeit.timeit(lambda: fn(*args), number=1), 1e-7)))
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


STEP_SNIPPET = """
import time, numpy as np
from mgstc.stmodel import ModelConfig, MGSTC, mse_loss
from mgstc.numcore import kernels
cfg = ModelConfig(n_series=4, history=96, chunk_len=24, stride=12, d_model=64, horizon=12,
                  n_heads=4, n_agg=2)
m = MGSTC(cfg, seed=0, lr=1e-3)
rng = np.random.default_rng(0)
x, y = rng.normal(size=(16, 4, 96)), rng.normal(size=(16, 4, 12))
m.step(mse_loss(m.forward(x), y))
t = time.perf_counter()
for _ in range(30):
    m.step(mse_loss(m.forward(x), y))
print(kernels.BACKEND, (time.perf_counter() - t) / 30 * 1e3)
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=4096)
    ap.add_argument("--cols", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-step", action="store_true", help="skip the training-step timing")
    args = ap.parse_args()

    if kernels.compiled_kernels is None:
        print("compiled extension not built; only the fallback is available", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':20s} {'python us':>11s} {'cython us':>11s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, call_args in _cases(args.rows, args.cols, rng).items():
        py = getattr(kernels.python_kernels, name)
        cy = getattr(kernels.compiled_kernels, name)
        diff = float(np.max(np.abs(_flat(py(*call_args)) - _flat(cy(*call_args)))))
        tp, tc = _best(py, call_args, args.repeat), _best(cy, call_args, args.repeat)
        print(f"{name:20s} {tp * 1e6:11.1f} {tc * 1e6:11.1f} {tp / tc:8.2f} {diff:11.2e}")

    if not args.skip_step:
        print("\ntraining step (N=4, T=96, D=64, batch 16), ms per step:")
        for backend in ("python", "cython"):
            env = dict(os.environ, MGSTC_KERNELS=backend)
            out = subprocess.run([sys.executable, "-c", STEP_SNIPPET], env=env,
                                 capture_output=True, text=True, check=True).stdout.split()
            print(f"  {out[0]:8s} {float(out[1]):8.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
