#!/usr/bin/env python3
"""Recompute the exhaustive-search golden files for n = 2..7.

The stored values are oracle-discovered ground truth; every run of the
test suite re-verifies the witnesses against the recorded optimum.
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from allowseq.oracle import search_best_deviation  # noqa: E402

GOLDEN_DIR = pathlib.Path(__file__).resolve().parent.parent / "tests" / "golden"


def main():
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    for n in range(2, 8):
        res = search_best_deviation(n)
        path = GOLDEN_DIR / f"search_n{n}.txt"
        path.write_text(res.to_text())
        print(f"wrote {path} (best = {res.best_min_deviation})")


if __name__ == "__main__":
    main()
