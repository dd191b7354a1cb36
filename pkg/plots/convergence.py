"""Script entry: log-log convergence plot from a convergence.csv."""

import argparse
import sys

from .figures import plot_convergence


def main(argv=None):
    parser = argparse.ArgumentParser(prog="plots.convergence")
    parser.add_argument("--in", dest="input", required=True,
                        metavar="CONVERGENCE_CSV")
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    slope = plot_convergence(args.input, args.out)
    print(f"wrote {args.out} (fitted slope {slope:.3f})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
