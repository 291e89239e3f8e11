"""RK4 on x' = λx² against the exact solution, plus the blow-up time estimate."""
import argparse

import numpy as np

from autocontrol_lab.testbeds import ScalarOdeConfig, estimate_blowup_time, integrate_ode


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--x0", type=float, default=1.0)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--dt", type=float, default=1e-5)
    args = ap.parse_args()
    cfg = ScalarOdeConfig(args.x0, args.lam)
    t_end = 0.9 * cfg.blowup_time
    ts, xs = integrate_ode(cfg, t_end, args.dt)
    exact = cfg.x0 / (1 - cfg.lam_ode * cfg.x0 * ts)
    print(f"max rel err up to t={t_end:.3f}: {np.max(np.abs(xs / exact - 1)):.3e}")
    est = estimate_blowup_time(cfg, dt=args.dt)
    print(f"blow-up time: estimate {est['estimate']:.6f}, analytic {cfg.blowup_time:.6f}")


if __name__ == "__main__":
    main()
