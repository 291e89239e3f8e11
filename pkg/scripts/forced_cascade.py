"""Fitted envelope exponent on the positive orthant under dynamic forcing."""
import argparse

from autocontrol_lab.experiments import forced_cascade


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.parse_args()
    m = forced_cascade()
    for t, s in zip(m["times"], m["exponents"]):
        print(f"t={t:.3f}  s_fit={s:.4f}")
    print(f"longest strictly decreasing run: {m['longest_decreasing_run']}")
    print(f"max |v| on negative orthant: {m['negative_orthant_max']}")


if __name__ == "__main__":
    main()
