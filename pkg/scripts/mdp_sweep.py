#!/usr/bin/env python3
"""End-to-end synthetic diversity-instance sweep.

Generates mdp_like instances, runs the five solver configurations on each,
and writes traces, median residue profiles (iteration and runtime axes), and
residue-distribution CDFs into an output directory. Mirrors the benchmark
protocol at desk scale; point the CLI at real MDPLIB files for the full thing.

Usage:
    python scripts/mdp_sweep.py --count 10 --n 40 --out results/
"""

import argparse
from pathlib import Path

import numpy as np

from gradcut.bench import (
    default_x0,
    median_profile,
    residue,
    residue_distribution,
    synth_instance,
    write_distribution_csv,
    write_distribution_svg,
    write_profile_csv,
    write_profile_svg,
    write_trace_csv,
)
from gradcut.engine import CONFIG_NAMES, SolverConfig, run
from gradcut.milp import HighsBackend


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--n", type=int, default=40)
    ap.add_argument("--m", type=int, default=None, help="default n // 5")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--time-limit", type=float, default=10.0)
    ap.add_argument("--max-iters", type=int, default=40)
    ap.add_argument("--budgets", type=float, nargs="*", default=[2.0, 5.0])
    ap.add_argument("--out", default="results")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    m = args.m if args.m is not None else max(2, args.n // 5)

    traces = {}
    for i in range(args.count):
        inst = synth_instance(args.n, m, "mdp_like", seed=args.seed + i)
        x0 = default_x0(inst.dom)
        for config in CONFIG_NAMES:
            cfg = SolverConfig.from_name(
                config, time_limit=args.time_limit, max_outer_iters=args.max_iters
            )
            outcome = run(
                inst.obj, inst.dom, x0, cfg, HighsBackend(exact_gaps=False),
                instance_name=inst.name, config_name=config,
            )
            traces[(inst.name, config)] = outcome.trace
            write_trace_csv(outcome.trace, out / f"{inst.name}__{config}.csv")
            print(
                f"{inst.name:28s} {config:10s} f_best={outcome.f_best:12.3f} "
                f"iters={outcome.iterations:3d} {outcome.runtime:6.2f}s"
            )

    names = sorted({name for name, _ in traces})
    f_star = {
        name: min(min(r.ub for r in traces[(name, c)].records) for c in CONFIG_NAMES)
        for name in names
    }
    for kind in ("iterations", "runtime"):
        series = {
            c: [residue(traces[(name, c)], f_star[name], kind) for name in names]
            for c in CONFIG_NAMES
        }
        hi = max(pt[0] for curves in series.values() for s in curves for pt in s.points)
        grid = (
            np.arange(0.0, hi + 1.0) if kind == "iterations" else np.linspace(0.0, hi, 101)
        )
        bands = {c: median_profile(series[c], grid) for c in CONFIG_NAMES}
        write_profile_csv(bands, out / f"profile_{kind}.csv")
        write_profile_svg(bands, out / f"profile_{kind}.svg", x_label=kind)
        if kind == "runtime":
            for budget in args.budgets:
                curves = {c: residue_distribution(series[c], budget) for c in CONFIG_NAMES}
                tag = f"{budget:g}".replace(".", "p")
                write_distribution_csv(curves, out / f"cdf_t{tag}.csv")
                write_distribution_svg(curves, out / f"cdf_t{tag}.svg", f"t={budget:g}s")
    print(f"\nprofiles and distributions written to {out}/")


if __name__ == "__main__":
    main()
