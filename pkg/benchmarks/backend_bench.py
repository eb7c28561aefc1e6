#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Times the three hot kernels on training-realistic shapes, plus one full
forward+backward step of the student model under each backend, and checks
both backends agree bitwise while at it.

Run: python3 benchmarks/backend_bench.py
"""

import time

import numpy as np

from simrod._kernels import _numpy as np_impl

try:
    from simrod._kernels import _ext as cy_impl
except ImportError:
    cy_impl = None


def timeit(fn, *args, repeat=20):
    fn(*args)  # warm
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_kernels():
    rng = np.random.default_rng(0)
    print(f"{'kernel':<26} {'numpy':>10} {'cython':>10} {'speedup':>8}")
    cases = [
        ("im2col 3x3 s2 (8,16,48,48)", "im2col",
         (rng.normal(size=(8, 16, 48, 48)).astype(np.float32), 3, 2, 1)),
        ("im2col 3x3 s1 (8,64,12,12)", "im2col",
         (rng.normal(size=(8, 64, 12, 12)).astype(np.float32), 3, 1, 1)),
    ]
    cols = np_impl.im2col(rng.normal(size=(8, 16, 48, 48)).astype(np.float32), 3, 2, 1)
    cases.append(("col2im 3x3 s2 -> (8,16,48,48)", "col2im", (cols, 48, 48, 3, 2, 1)))

    boxes = rng.uniform(0, 1, size=(400, 4))
    boxes[:, 2:] = boxes[:, :2] + rng.uniform(0.02, 0.4, size=(400, 2))
    order = np.argsort(-rng.uniform(size=400), kind="stable")
    cases.append(("nms 400 boxes", "nms_suppress",
                  (np.ascontiguousarray(boxes[order]), 0.65)))

    for name, fn_name, args in cases:
        t_np, out_np = timeit(getattr(np_impl, fn_name), *args)
        if cy_impl is None:
            print(f"{name:<26} {t_np * 1e3:9.3f}ms {'n/a':>10} {'-':>8}")
            continue
        t_cy, out_cy = timeit(getattr(cy_impl, fn_name), *args)
        assert np.array_equal(out_np, out_cy), f"backend mismatch in {name}"
        print(f"{name:<26} {t_np * 1e3:9.3f}ms {t_cy * 1e3:9.3f}ms "
              f"{t_np / t_cy:7.2f}x")


def bench_training_step():
    import os
    import subprocess
    import sys

    code = r"""
import time
import numpy as np
import simrod
from simrod.boxes import BoundingBox
from simrod.detector import Detector, detection_loss, init_params, student_config

params = init_params(student_config(3), 0)
det = Detector(params)
rng = np.random.default_rng(0)
x = rng.uniform(size=(8, 3, 96, 96)).astype(np.float32)
labels = [[BoundingBox(0, 0.4, 0.4, 0.3, 0.3)] for _ in range(8)]

def step():
    raw, cache = det.forward(x, training=True, with_cache=True)
    _t, _b, draw = detection_loss(raw, labels, det.config)
    det.backward(cache, draw)

step()
best = min(
    (lambda t0: (step(), time.perf_counter() - t0)[1])(time.perf_counter())
    for _ in range(10))
print(f"{simrod.BACKEND}: {best * 1e3:.1f} ms / training step (B=8)")
"""
    for pure in ("0", "1"):
        env = dict(os.environ, SIMROD_PURE_PYTHON=pure)
        subprocess.run([sys.executable, "-c", code], env=env, check=True)


if __name__ == "__main__":
    print("== hot kernels ==")
    bench_kernels()
    print("\n== full training step, per backend ==")
    bench_training_step()
