"""Compare the numba kernels against the pure-numpy fallback.

Runs the three hot paths (block dequantization, quantized dot products,
quantized matmul) and one end-to-end generation on a tiny in-memory
model under both backends, and checks that the backends agree
numerically while timing them.

Usage:
    python3 benchmarks/kernel_backends.py [--rows 512] [--cols 4096]
                                          [--reps 5] [--json]

The same selection is available globally through the VIEN_KERNELS
environment variable (``numpy``, ``numba``, or ``auto``).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from vien.model import GenParams, generate, load_model
from vien.gguf import parse
from vien.quant import (
    QuantType,
    dequantize_tensor,
    matmul_q,
    numba_available,
    quantize_tensor,
    set_kernel_backend,
)

QTYPES = [QuantType.Q8_0, QuantType.Q2_K, QuantType.Q3_K,
          QuantType.Q4_K, QuantType.Q5_K, QuantType.Q6_K]


def time_call(fn, reps):
    """Best-of-reps wall time in milliseconds, plus the last result."""
    best = float("inf")
    result = None
    for _ in range(reps):
        start = time.perf_counter()
        result = fn()
        best = min(best, (time.perf_counter() - start) * 1000.0)
    return best, result


def bench_kernels(rows, cols, reps):
    rng = np.random.default_rng(7)
    weights = rng.standard_normal((rows, cols)).astype(np.float32)
    x = rng.standard_normal((1, cols)).astype(np.float32)

    rows_out = {}
    for qtype in QTYPES:
        data = quantize_tensor(weights, qtype)
        entry = {}
        for backend in ("numpy", "numba"):
            set_kernel_backend(backend)
            # Warm-up compiles the numba kernels outside the timer.
            dequantize_tensor(data, qtype, (rows, cols))
            matmul_q(data, qtype, rows, cols, x)
            dq_ms, dq = time_call(
                lambda: dequantize_tensor(data, qtype, (rows, cols)), reps
            )
            mm_ms, mv = time_call(
                lambda: matmul_q(data, qtype, rows, cols, x), reps
            )
            entry[backend] = {
                "dequantize_ms": dq_ms,
                "matmul_ms": mm_ms,
                "_dq": dq,
                "_mv": mv,
            }
        agree_dq = np.array_equal(entry["numpy"]["_dq"], entry["numba"]["_dq"])
        mv_np = entry["numpy"]["_mv"].astype(np.float64)
        mv_nb = entry["numba"]["_mv"].astype(np.float64)
        scale = np.maximum(1.0, np.abs(mv_np))
        mv_rel = float(np.max(np.abs(mv_np - mv_nb) / scale))
        for backend in entry.values():
            backend.pop("_dq")
            backend.pop("_mv")
        rows_out[qtype.name] = {
            **entry,
            "dequantize_exact_match": bool(agree_dq),
            "matmul_max_rel_diff": mv_rel,
        }
    return rows_out


def bench_generation(reps):
    from fixtures_pipeline import build_pipeline_file

    blob = build_pipeline_file(seed=6, n_layers=2, embed_dim=256, n_heads=4,
                               n_kv_heads=2, ffn_hidden_dim=512,
                               context_len=128, qtype=QuantType.Q4_K)
    model = load_model(parse(blob))
    params = GenParams(max_new_tokens=24)
    prompt = [1, 5, 9, 11, 3]

    out = {}
    ids = {}
    for backend in ("numpy", "numba"):
        set_kernel_backend(backend)
        generate(model, prompt, params)  # warm-up / JIT
        ms, result = time_call(lambda: generate(model, prompt, params), reps)
        out[backend] = {
            "generate_ms": ms,
            "ms_per_token": ms / len(result.ids),
        }
        ids[backend] = result.ids
    out["greedy_ids_identical"] = ids["numpy"] == ids["numba"]
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=512)
    parser.add_argument("--cols", type=int, default=4096)
    parser.add_argument("--reps", type=int, default=5)
    parser.add_argument("--json", action="store_true")
    args = parser.parse_args(argv)

    if not numba_available():
        print("numba is not importable; nothing to compare", file=sys.stderr)
        return 1

    kernels = bench_kernels(args.rows, args.cols, args.reps)
    generation = bench_generation(args.reps)
    report = {
        "matrix": {"rows": args.rows, "cols": args.cols, "reps": args.reps},
        "kernels": kernels,
        "generation": generation,
    }

    if args.json:
        print(json.dumps(report, indent=2))
        return 0

    print(f"weights {args.rows}x{args.cols}, best of {args.reps} reps, "
          f"times in ms\n")
    print(f"{'qtype':<6} {'dequant np':>11} {'dequant nb':>11} {'speedup':>8} "
          f"{'matmul np':>10} {'matmul nb':>10} {'speedup':>8}  agree")
    for name, row in kernels.items():
        dq_np = row["numpy"]["dequantize_ms"]
        dq_nb = row["numba"]["dequantize_ms"]
        mm_np = row["numpy"]["matmul_ms"]
        mm_nb = row["numba"]["matmul_ms"]
        agree = "exact" if row["dequantize_exact_match"] else (
            f"rel {row['matmul_max_rel_diff']:.1e}")
        print(f"{name:<6} {dq_np:>11.2f} {dq_nb:>11.2f} {dq_np/dq_nb:>7.1f}x "
              f"{mm_np:>10.2f} {mm_nb:>10.2f} {mm_np/mm_nb:>7.1f}x  {agree}")

    gen_np = generation["numpy"]
    gen_nb = generation["numba"]
    print(f"\nend-to-end generation (tiny Q4_K model, 24 tokens):")
    print(f"  numpy  {gen_np['generate_ms']:>8.1f} ms "
          f"({gen_np['ms_per_token']:.1f} ms/token)")
    print(f"  numba  {gen_nb['generate_ms']:>8.1f} ms "
          f"({gen_nb['ms_per_token']:.1f} ms/token)  "
          f"{gen_np['generate_ms']/gen_nb['generate_ms']:.1f}x")
    print(f"  greedy ids identical: {generation['greedy_ids_identical']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
