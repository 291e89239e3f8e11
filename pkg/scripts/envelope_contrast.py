"""Envelope preservation at the admissible ρ versus the same run with ρ inflated 100×."""
import argparse
import json

from autocontrol_lab.experiments import PreservationSetup, envelope_preservation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--inflate", type=float, default=100.0)
    ap.add_argument("--steps", type=int, default=64)
    args = ap.parse_args()
    out = envelope_preservation(PreservationSetup(steps=args.steps), inflate=args.inflate)
    out.pop("constants")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
