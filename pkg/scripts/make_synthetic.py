"""Regenerate the bundled synthetic series and the scanner golden files.

The series is 1,000 daily N(0, 1) values followed by 1,000 N(2, 1) values
(the change is at position 1000), rounded to 6 decimals.
"""

import datetime as dt
import sys
from pathlib import Path

import numpy as np

from entropy_cpd.cli import main

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "src" / "entropy_cpd" / "data" / "synthetic_change.csv"
GOLDEN = ROOT / "tests" / "golden" / "synthetic_scan.csv"


def write_series():
    rng = np.random.default_rng(20240501)
    values = np.r_[rng.normal(0.0, 1.0, 1000), rng.normal(2.0, 1.0, 1000)]
    start = dt.date(2016, 1, 1)
    lines = ["date,value"]
    lines += [f"{start + dt.timedelta(days=i)},{v:.6f}" for i, v in enumerate(values)]
    DATA.write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    write_series()
    sys.exit(main(["scan", "--input", str(DATA), "--window", "250", "--k", "4",
                   "--preprocess", "quantile", "--reference", "previous",
                   "--methods", "asymptotic2,aic,twosample3", "--alpha", "0.01",
                   "--out", str(GOLDEN)]))
