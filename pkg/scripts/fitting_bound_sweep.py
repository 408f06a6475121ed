"""Track fitted-model transport error against the continuity bound.

Samples training text from a hidden-Markov source, fits growing-order
empirical chains, and measures the per-letter transport distance between
source windows and model windows on held-out draws, next to the a-priori
bound evaluated from the source's continuity profile.

    python3 scripts/fitting_bound_sweep.py
    python3 scripts/fitting_bound_sweep.py --m-grid 1000,10000,100000 --window 6
"""
import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from markovdetect.bounds_lab import approx_experiment
from markovdetect.markov import HiddenMarkovSource


def parse_ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def default_source():
    return HiddenMarkovSource.with_stationary_start(
        transition=np.array([[0.9, 0.1], [0.2, 0.8]]),
        emission=np.array([[0.8, 0.2], [0.3, 0.7]]),
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m-grid", type=parse_ints, default=[1_000, 10_000, 100_000])
    ap.add_argument("--rate-exponent", type=float, default=None,
                    help="memory growth nu; default 2/ln(max m)")
    ap.add_argument("--tail-exponent", type=float, default=0.25)
    ap.add_argument("--window", type=int, default=6)
    ap.add_argument("--n-windows", type=int, default=2_000)
    ap.add_argument("--bootstrap", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    nu = args.rate_exponent
    if nu is None:
        nu = 2.0 / math.log(max(args.m_grid))
    exp = approx_experiment(default_source(), args.m_grid, nu,
                            args.tail_exponent, window=args.window,
                            n_windows=args.n_windows, bootstrap=args.bootstrap,
                            seed=args.seed)
    print(f"memory growth nu={nu:.5f}  tail exponent mu={args.tail_exponent}  "
          f"window {args.window}")
    print(f"{'m':>8} {'order':>5} {'dbar':>8} {'ci':>19} {'bound':>10}")
    for r in exp.rows:
        ci = f"[{r.ci_low:.4f}, {r.ci_high:.4f}]"
        flag = "  VIOLATION" if r.violation else ""
        print(f"{r.train_len:>8} {r.order:>5} {r.dbar_estimate:>8.4f} "
              f"{ci:>19} {r.bound:>10.4f}{flag}")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(exp.to_json(), indent=2, sort_keys=True) + "\n")
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
