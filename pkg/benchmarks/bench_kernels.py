"""Compare the compiled and numpy kernels.

Times a single SC decode for each backend and block length, then the
end-to-end frame loop (message, CRC, encode, channel, decoder) of both.

    python benchmarks/bench_kernels.py --lengths 256 1024 --repeat 5
"""

import argparse
import time

import numpy as np

from polarflip import _backend, _pycore
from polarflip.composite_decoders import DecoderSpec
from polarflip.harness import simulate_chunk
from polarflip.polar_code import build_code_spec


def best_of(fn, repeat, number):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn()
        best = min(best, (time.perf_counter() - t0) / number)
    return best


def bench_sc(N, repeat):
    spec = build_code_spec(N, N // 2 - 16, 16)
    rng = np.random.default_rng(0)
    llr = 2.0 * (1.0 + 0.7 * rng.standard_normal(N)) / 0.49
    rows = []
    kernels = [("python", _pycore.ScKernel(spec.frozen_mask, False))]
    if _backend.COMPILED:
        from polarflip import _core

        kernels.insert(0, ("cython", _core.ScKernel(spec.frozen_mask, False)))
    for name, kernel in kernels:
        number = 2000 if name == "cython" else 20
        rows.append((name, best_of(lambda: kernel.decode(llr, -1), repeat, number)))
    return rows


def bench_frames(N, decoder, frames, repeat):
    spec = build_code_spec(N, N // 2 - 16, 16)
    dspec = DecoderSpec.parse(decoder)
    backends = ["cython", "python"] if _backend.COMPILED else ["python"]
    rows = []
    for name in backends:
        n = frames if name == "cython" else max(10, frames // 50)
        saved = _backend.impl
        if name == "python":
            _backend.impl = _pycore  # numpy kernel under the python frame loop
        try:
            t = best_of(lambda: simulate_chunk(spec, dspec, 2.5, 1, 0, n, backend=name), repeat, 1) / n
        finally:
            _backend.impl = saved
        rows.append((name, t))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--lengths", type=int, nargs="+", default=[256, 1024, 2048])
    parser.add_argument("--decoder", default="dscfp:8:8")
    parser.add_argument("--frames", type=int, default=2000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    print(f"default backend: {_backend.NAME}")
    print(f"{'N':>6} {'stage':<20} {'backend':<8} {'time/op':>12} {'speedup':>8}")
    for N in args.lengths:
        for stage, rows in (
            ("sc decode", bench_sc(N, args.repeat)),
            ("frame " + args.decoder, bench_frames(N, args.decoder, args.frames, args.repeat)),
        ):
            slowest = max(t for _, t in rows)
            for name, t in rows:
                print(f"{N:>6} {stage:<20} {name:<8} {t * 1e6:>10.1f}us {slowest / t:>7.1f}x")


if __name__ == "__main__":
    main()
