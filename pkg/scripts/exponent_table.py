"""Life-span exponent sweeps at N = 1, theta = 1, p = 3.

Each --A value gets its own run directory and the manifests are merged into
one report.  The default window suits A = 0.3 (theory slope -5).  Larger A
steepen the law fast (-10 at 0.4, -20 at 0.45), so a one-decade window makes
T vary by 10^10 or more and the box grows with T; pick --lo/--hi accordingly.
"""

import argparse
import json
import sys

import numpy as np

from fracheat.harness import RunConfig, report, resolve_output, run


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--A", type=float, nargs="+", default=[0.3])
    ap.add_argument("--lo", type=float, default=0.01)
    ap.add_argument("--hi", type=float, default=0.1)
    ap.add_argument("--points", type=int, default=5)
    ap.add_argument("--out", default="runs/exponent_table")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args(argv)
    manifests = []
    for A in args.A:
        cfg = RunConfig.from_dict({
            "experiment": "sweep",
            "params": {"N": 1, "theta": 1.0, "p": 3.0},
            "datum": {"family": "power_law", "A": A},
            "spec": {"lambdas": np.geomspace(args.lo, args.hi, args.points).tolist(), "sweep": {"M": 4096, "K": 512}},
        })
        manifests.append(run(cfg, f"{args.out}/A{A:g}", jobs=args.jobs))
        print(json.dumps({"A": A, "fit": manifests[-1]["measurements"].get("fit")}))
    print(report(manifests, resolve_output(f"{args.out}/report.csv")))
    return 0


if __name__ == "__main__":
    sys.exit(main())
