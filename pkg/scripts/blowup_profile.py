"""Scaled ball averages near blow-up for a supercritical sweep.

For each amplitude the run is repeated with snapshots over the last decade
of T - t that the grid resolves; the table lists the spread of
(T-t)^{1/(p-1)} sup_x avg_{B(x,(T-t)^{1/theta})} u over that window.
"""

import argparse

import numpy as np

from fracheat.kernel import ModelParams
from fracheat.lifespan import SweepConfig, blowup_profile, lifespan_sweep
from fracheat.semigroup import PowerLaw


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--A", type=float, default=0.3)
    ap.add_argument("--p", type=float, default=3.0)
    ap.add_argument("--lo", type=float, default=0.01)
    ap.add_argument("--hi", type=float, default=0.1)
    ap.add_argument("--points", type=int, default=5)
    args = ap.parse_args(argv)
    params = ModelParams(1, 1.0, args.p)
    cfg = SweepConfig(M=4096, K=512)
    recs = lifespan_sweep(PowerLaw(args.A), np.geomspace(args.lo, args.hi, args.points), params, cfg)
    print("lambda        T_est          spread  window_span")
    for rec in recs:
        if not rec.usable:
            print(f"{rec.amplitude:<13.6g} {rec.status}")
            continue
        prof = blowup_profile(rec, PowerLaw(args.A), params, cfg)
        print(f"{rec.amplitude:<13.6g} {rec.T_est:<14.8g} {prof['spread']:<7.4f} {prof['window_tau_span']:.3g}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
