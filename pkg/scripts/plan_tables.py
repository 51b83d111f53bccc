#!/usr/bin/env python3
"""Print recurrence tables and balance-gate certifications for a sweep of
window parameters, including the headline choice d = k = 100 T^3."""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from allowseq.planner import plan_sizes  # noqa: E402


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--t-max", type=int, default=2)
    ap.add_argument("--d", type=int, default=None,
                    help="override d (default 100*T^3)")
    ap.add_argument("--k", type=int, default=None,
                    help="override k (default d)")
    args = ap.parse_args()
    for t in range(args.t_max + 1):
        T = 3 ** (2 * t)
        d = args.d if args.d is not None else 100 * T**3
        k = args.k if args.k is not None else d
        table = plan_sizes(t, d, k, 1)
        print(table.to_text())
        print()


if __name__ == "__main__":
    main()
