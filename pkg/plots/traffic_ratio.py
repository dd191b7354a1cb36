"""Script entry: traffic-ratio bar chart from two metrics.csv files."""

import argparse
import sys

from .figures import plot_traffic_ratio


def main(argv=None):
    parser = argparse.ArgumentParser(prog="plots.traffic_ratio")
    parser.add_argument("--in", dest="inputs", nargs=2, required=True,
                        metavar=("FUSED_CSV", "STRAIGHTFORWARD_CSV"))
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    ratio = plot_traffic_ratio(args.inputs[0], args.inputs[1], args.out)
    print(f"wrote {args.out} (measured ratio {ratio:.4f})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
