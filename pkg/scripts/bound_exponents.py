"""Fitted n-exponents of every bound evaluator on a wide grid of horizons."""
import argparse

from mdslab.bounds import MomentStats, bound_t1, bound_t2, bound_t3, bound_t4, kappa_statement, rate_fit


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=50)
    ap.add_argument("--kmin", type=int, default=10)
    ap.add_argument("--kmax", type=int, default=30)
    args = ap.parse_args()
    grid = [2**k for k in range(args.kmin, args.kmax + 1, 2)]

    def stats(n):
        return MomentStats(2.0, 0.7, 1.5, 1.2, 0.8, 0.9, 1.3, 2.5, n, args.d)

    series = {
        "t1": [bound_t1(stats(n)).value for n in grid],
        "t2": [bound_t2(stats(n)).value for n in grid],
        "t2 / log correction": [
            r.value / r.components["log_correction"] for r in (bound_t2(stats(n)) for n in grid)
        ],
        "t3a": [bound_t3(stats(n), "without_alpha").value for n in grid],
        "t3b": [bound_t3(stats(n), "with_alpha").value for n in grid],
        "t4 (kappa = log(nd)/sqrt(n))": [bound_t4(stats(n), kappa_statement(n, args.d), 1.0).value for n in grid],
    }
    for name, vals in series.items():
        print(f"{name:>30}: slope {rate_fit(list(zip(grid, vals))).slope:+.4f}")


if __name__ == "__main__":
    main()
