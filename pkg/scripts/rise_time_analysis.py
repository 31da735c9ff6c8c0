"""Rise of the gated output power under a switched-on drive pair.

For the linear three-mode model the converted power approaches its plateau
as (1 - exp(-gamma_eff t / 2))^2 once the optical modes follow adiabatically,
with gamma_eff = gamma_m (1 + C1 + C2). This script compares the simulated
gated rise with that form: the time to reach 1 - 1/e and 95% of the plateau,
in units of 1/gamma_eff, for a range of drive powers.

    python scripts/rise_time_analysis.py [--gate-us 0.5]
"""
import argparse
import math

import numpy as np

from omx.config import RunConfig
from omx.experiments import transient_output
from omx.model import steady_state_amplitudes


def crossing(t, y, level):
    i = int(np.argmax(y >= level))
    return float(np.interp(level, [y[i - 1], y[i]], [t[i - 1], t[i]])) if y[i] >= level and i else math.nan


def analytic(frac):
    """gamma_eff * t at which (1 - exp(-x/2))^2 = frac."""
    return -2.0 * math.log(1.0 - math.sqrt(frac))


def main():
    ap = argparse.ArgumentParser(description="gated rise time versus drive power")
    ap.add_argument("--gate-us", type=float, default=0.5)
    args = ap.parse_args()
    cfg = RunConfig()
    print(f"analytic: 1-1/e at {analytic(1 - math.exp(-1)):.3f}/gamma_eff, 95% at {analytic(0.95):.3f}/gamma_eff")
    print("p1_mw,p2_mw,c1,c2,inv_gamma_eff_us,t_1e_us,t_95_us,t_1e_x_gamma_eff,t_95_x_gamma_eff")
    for p1, p2 in ((0.25, 0.75), (5.0, 15.0), (25.0, 6.0), (30.0, 30.0)):
        params = cfg.system_params(p1, p2)
        g_eff = params.mech.gamma_m * (1 + params.c1 + params.c2)
        t_end = 12e6 / g_eff
        delays = np.arange(0.0, t_end - args.gate_us, t_end / 600)
        flux = transient_output(cfg, p1, p2, 10 * t_end, t_end, args.gate_us, delays)
        st = steady_state_amplitudes(params, params.mech.omega_m, cfg.signal_amplitude(params))
        y = flux / (params.mode2.kappa_ext * abs(st.alpha2) ** 2)
        t = delays + 0.5 * args.gate_us
        t_e, t_95 = crossing(t, y, 1 - math.exp(-1)), crossing(t, y, 0.95)
        tau = 1e6 / g_eff
        print(f"{p1},{p2},{params.c1:.3f},{params.c2:.3f},{tau:.3f},{t_e:.3f},{t_95:.3f},{t_e / tau:.3f},{t_95 / tau:.3f}")


if __name__ == "__main__":
    main()
