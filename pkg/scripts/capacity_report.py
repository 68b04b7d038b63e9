"""Capacity summary for every channel in channels/.

Prints causal capacity, the non-causal lower bound at n=1, and the Holevo
value of the state-averaged channel (no state knowledge baseline).

Usage: python3 scripts/capacity_report.py [channels-dir] [--seed N]
"""

import argparse
import pathlib
import sys

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from gpcq.causal import causal_capacity, inner_maximize
from gpcq.channel import load_channel
from gpcq.noncausal import noncausal_lower_bound


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("channels_dir", nargs="?", default="channels")
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--restarts", type=int, default=16)
    args = ap.parse_args()

    paths = sorted(pathlib.Path(args.channels_dir).glob("*.chan"))
    if not paths:
        sys.exit(f"no .chan files in {args.channels_dir}")
    print(f"{'channel':<12} {'causal':>10} {'noncausal':>10} {'averaged':>10}")
    for path in paths:
        ch = load_channel(str(path))
        causal = causal_capacity(ch)
        wit = noncausal_lower_bound(ch, restarts=args.restarts, seed=args.seed)
        avg_states = np.einsum("s,sxij->xij", ch.p.probs, ch.tensor())
        avg = inner_maximize(avg_states)
        print(
            f"{path.stem:<12} {causal.value:>10.6f} {wit.value:>10.6f} {avg.value:>10.6f}"
        )


if __name__ == "__main__":
    main()
