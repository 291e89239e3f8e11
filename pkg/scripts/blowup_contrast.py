"""Shell-model blow-up next to an envelope-preserved damped Burgers run."""
import json

from autocontrol_lab.experiments import blowup_contrast


def main():
    m = blowup_contrast()
    print(json.dumps(m, indent=2, default=str))


if __name__ == "__main__":
    main()
