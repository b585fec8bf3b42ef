"""Write a synthetic MAR(3,3) series with Student-t(3) noise to data/synthetic_mar33.csv.

The coefficients are the published Bitcoin estimates, so the walkthrough
in the README can be run end to end without the live price feed.
"""

import argparse
from pathlib import Path

from gcov.cli import write_series_csv
from gcov.simulation import rng_stream, simulate_mar

PHI = (0.7029, 0.1020, 0.1666)
PSI = (0.3359, -0.0026, 0.0072)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--T", type=int, default=2000)
    p.add_argument("--nu", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data" / "synthetic_mar33.csv"))
    args = p.parse_args(argv)
    y = simulate_mar(PHI, PSI, args.T, args.nu, rng_stream(args.seed, 0))
    write_series_csv(args.out, y, ["price"])
    print(f"wrote {args.T} observations to {args.out}")


if __name__ == "__main__":
    main()
