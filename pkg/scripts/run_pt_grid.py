"""Monte-Carlo phase-transition grids for every solver/ensemble combination.

Sweeps the (m/n, k/m) plane at a fixed n, records per-cell success rates,
and extracts the half-success curve per solver.  Writes one grid CSV and
one curve CSV per combination into --out-dir.

A full 10x10 grid with 20 trials per cell takes a few minutes per solver
at n=500; crank --trials and --n for smoother curves once the quick look
is in hand.
"""

import argparse
import pathlib

from ssamp.harness import (
    ExperimentConfig,
    curve_table,
    emit,
    phase_table,
    pt_curve,
    run_phase_grid,
)

COMBOS = (
    ("ssamp_oracle", "iid_gaussian", False),
    ("ssamp_em", "iid_gaussian", False),
    ("tvamp", "iid_gaussian", False),
    ("ssamp_oracle", "subsampled_dct", True),
    ("ssamp_oracle", "subsampled_wht", True),
)


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=500)
    parser.add_argument("--trials", type=int, default=20)
    parser.add_argument("--max-iters", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--points", type=int, default=10,
                        help="grid points per axis, spanning (0, 1)")
    parser.add_argument("--out-dir", type=pathlib.Path, default="results/pt")
    return parser.parse_args()


def main():
    args = parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    grid = tuple(round(i / (args.points + 1), 10) for i in range(1, args.points + 1))
    for solver, matrix, signs in COMBOS:
        n = args.n
        if matrix == "subsampled_wht":  # fast transform needs a power of two
            n = 1 << (n - 1).bit_length()
        config = ExperimentConfig(
            solver=solver,
            matrix=matrix,
            sign_randomize=signs,
            n=n,
            grid_m_over_n=grid,
            grid_k_over_m=grid,
            trials=args.trials,
            max_iters=args.max_iters,
            seed_base=args.seed,
        )
        tag = f"{solver}_{matrix}" + ("_signs" if signs else "")

        def progress(cell, total, m_over_n, k_over_m, tag=tag):
            print(f"{tag}: cell {cell + 1}/{total} "
                  f"m/n={m_over_n:g} k/m={k_over_m:g}", flush=True)

        cells = run_phase_grid(config, progress=progress)
        emit(phase_table(cells), "csv", args.out_dir / f"grid_{tag}.csv")
        emit(curve_table(pt_curve(cells)), "csv", args.out_dir / f"curve_{tag}.csv")
        print(f"wrote grid_{tag}.csv / curve_{tag}.csv")


if __name__ == "__main__":
    main()
