"""Wall-clock scaling of one solver across problem sizes.

Runs the same operating point (m/n=0.5, k/m=0.1, light noise) at a
geometric ladder of n and records mean seconds per solve and per
iteration.  Timings are machine-dependent; the point of the CSV is the
relative growth, which should track the cost of one operator apply.
"""

import argparse
import pathlib

from ssamp.harness import ExperimentConfig, emit, run_runtime, runtime_table

SIZES = (400, 800, 1600, 3200, 6400)


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=5)
    parser.add_argument("--max-iters", type=int, default=500)
    parser.add_argument("--solver", default="ssamp_oracle")
    parser.add_argument("--matrix", default="iid_gaussian")
    parser.add_argument("--delta", type=float, default=1e-10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", type=pathlib.Path, default="results/runtime")
    return parser.parse_args()


def main():
    args = parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for n in SIZES:
        config = ExperimentConfig(
            solver=args.solver,
            matrix=args.matrix,
            n=n,
            grid_m_over_n=(0.5,),
            grid_k_over_m=(0.1,),
            trials=args.trials,
            delta=args.delta,
            max_iters=args.max_iters,
            seed_base=args.seed,
            record_timing=True,
        )
        (row,) = run_runtime(config)
        rows.append(row)
        print(f"n={n}: {row[5]:.3f}s per solve, {row[6] * 1e3:.2f} ms per iteration",
              flush=True)
    out = args.out_dir / f"runtime_{args.solver}_{args.matrix}.csv"
    emit(runtime_table(rows), "csv", out)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
