"""Brute-force convolution-rule constant with truncation doubling."""
import argparse

from autocontrol_lab.diagnostics import convolution_rule_oracle


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--sa", type=float, default=5.0)
    ap.add_argument("--sb", type=float, default=5.0)
    ap.add_argument("--M", type=int, default=32)
    ap.add_argument("--weight", default="gamma", choices=("none", "gamma"))
    args = ap.parse_args()
    res = convolution_rule_oracle(args.n, args.sa, args.sb, args.M, args.weight)
    ok, bad = res.normalized_nonincreasing(args.M / 4)
    print(f"c = {res.c:.6g}  stability = {res.stability:.6f}  s_out = {res.s_out:g}")
    print(f"measured decay exponent = {res.measured_exponent:.3f}")
    print(f"shell-wise non-increasing over |α| <= {args.M / 4:g}: {ok} {bad if bad else ''}")


if __name__ == "__main__":
    main()
