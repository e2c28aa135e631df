"""Rate of the lower-bound array: Monte Carlo estimates next to the exact law.

For every n the script reports the simulated d_K at the terminal time and at
the end of the perturbation window, together with the same quantities from
deterministic density propagation, and fits log-log slopes to each series.
"""
import argparse

from mdslab.bounds import rate_fit
from mdslab.config import parse_config
from mdslab.experiments import cmd_distance, resolve_threads
from mdslab.generators import bolthausen_density, bolthausen_window
from mdslab.kolmogorov import dk_density_vs_normal


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[4096, 8192, 16384, 32768, 65536])
    ap.add_argument("--reps", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--grid-step", type=float, default=0.01, help="density propagation grid step")
    args = ap.parse_args()
    threads = resolve_threads(args.threads)

    series = {}
    for where in ("terminal", "window_end"):
        cfg = parse_config(
            {
                "schema_version": 1,
                "generator": {"kind": "bolthausen", "d": 1},
                "n_grid": args.n,
                "replications": args.reps,
                "master_seed": args.seed,
                "measure_at": where,
            }
        )
        rows = cmd_distance(cfg, threads).rows
        series[f"mc_{where}"] = [(r["n"], r["dk_value"]) for r in rows]
        series[f"mc_{where}_noise"] = [(r["n"], r["mc_error_bonferroni"]) for r in rows]

    for where in ("terminal", "window_end"):
        pts = []
        for n in args.n:
            horizon = n if where == "terminal" else bolthausen_window(n)[1]
            x, p = bolthausen_density(n, horizon, h=args.grid_step)
            pts.append((n, dk_density_vs_normal(x, p, horizon)))
        series[f"exact_{where}"] = pts

    print(f"{'n':>7} " + " ".join(f"{k:>22}" for k in series))
    for i, n in enumerate(args.n):
        print(f"{n:>7} " + " ".join(f"{series[k][i][1]:>22.3e}" for k in series))
    for k, pts in series.items():
        if "noise" not in k:
            print(f"slope[{k}] = {rate_fit(pts).slope:+.3f}")


if __name__ == "__main__":
    main()
