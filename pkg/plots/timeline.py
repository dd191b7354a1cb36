"""Script entry: per-sweep task timeline from a trace.csv."""

import argparse
import sys

from .figures import plot_task_timeline


def main(argv=None):
    parser = argparse.ArgumentParser(prog="plots.timeline")
    parser.add_argument("--in", dest="input", required=True,
                        metavar="TRACE_CSV")
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    changes = plot_task_timeline(args.input, args.out)
    print(f"wrote {args.out} ({changes} task switches)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
