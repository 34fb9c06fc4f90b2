"""Convert a numeric CSV file into a Layers dataset file.

    python tools/csv2lyrd.py in.csv out.bin [--label-column -1]
                             [--regression] [--format binary|ascii]
"""

import argparse
import sys

from layerslang import dataio
from layerslang.diagnostics import DataError


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("csv")
    p.add_argument("out")
    p.add_argument("--label-column", type=int, default=-1)
    p.add_argument("--regression", action="store_true",
                   help="treat the label column as a real target")
    p.add_argument("--format", choices=("binary", "ascii"), default="binary")
    p.add_argument("--delimiter", default=",")
    args = p.parse_args(argv)
    try:
        ds = dataio.from_csv(args.csv, args.label_column, not args.regression, args.delimiter)
    except (OSError, ValueError) as exc:
        print(f"csv2lyrd: {exc}", file=sys.stderr)
        return 1
    try:
        dataio.write(ds, args.out, args.format)
    except DataError as exc:
        print(f"csv2lyrd: {exc}", file=sys.stderr)
        return 1
    info = ds.info
    print(f"{args.out}: n={info.n} d={info.d} k={info.k} t={info.t}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
