#!/usr/bin/env python3
"""Write synthetic input bundles for the pipeline profiles.

    python scripts/make_synthetic_data.py --kind market --out data/synthetic
    python scripts/make_synthetic_data.py --kind sine --out data/sine
"""

import argparse
import os
import sys

from grnn.synthetic import write_bundle, write_sine


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--kind", choices=("market", "sine"), default="market")
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--days", type=int, default=None)
    args = parser.parse_args()

    if args.kind == "market":
        manifest = write_bundle(args.out, seed=args.seed,
                                **({"n_days": args.days} if args.days else {}))
        for name, (path, column) in manifest.items():
            print(f"{name} = {path}:{column}")
    else:
        os.makedirs(args.out, exist_ok=True)
        path, column = write_sine(os.path.join(args.out, "sine.csv"),
                                  n_points=args.days or 400)
        print(f"SINE = {path}:{column}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
