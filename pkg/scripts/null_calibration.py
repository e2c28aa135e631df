"""Same-law calibration of the d_K estimator across dimensions and seeds."""
import argparse

import numpy as np

from mdslab.generators import IidGaussian, simulate_sums
from mdslab.kolmogorov import build_family, estimate_dk, reference_probs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", type=int, nargs="+", default=[1, 5, 20])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--reps", type=int, default=100_000)
    ap.add_argument("--threshold", type=float, default=0.02)
    args = ap.parse_args()

    for d in args.dims:
        rng = np.random.default_rng(d)
        a = rng.standard_normal((d, d))
        sigma = a @ a.T / d + 0.5 * np.eye(d)
        fam = build_family(d, sigma)
        ref = reference_probs(sigma, fam)
        vals = np.array(
            [
                estimate_dk(simulate_sums(IidGaussian(sigma), 1, args.reps, np.random.default_rng(s)).sums, sigma, fam, reference=ref).value
                for s in range(args.seeds)
            ]
        )
        print(
            f"d={d:>3}: median {np.median(vals):.4f}, max {vals.max():.4f}, "
            f"{np.sum(vals <= args.threshold)}/{args.seeds} at or below {args.threshold}"
        )


if __name__ == "__main__":
    main()
