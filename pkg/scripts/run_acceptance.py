"""Print the acceptance table for a suite; exit status 1 if any criterion fails."""
import argparse
import sys

from autocontrol_lab.acceptance import SUITES, verify


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("suite", nargs="?", default="acceptance", choices=SUITES)
    args = ap.parse_args()
    results = verify(args.suite)
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
