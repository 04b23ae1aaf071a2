"""Refit the shipped emission-model and finite-key constants.

Prints the values to paste into src/diqkd/data/default.cfg and the
dataclass defaults. Run from the repo root: ``python3 scripts/calibrate.py``.
"""
import argparse
from dataclasses import replace

from diqkd.emission import KEY_WINDOW, EmissionTimeModel, calibrate_model, two_photon_acceptance, window_scan
from diqkd.keyrate import calibrate_penalty_constant


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--v-max", type=float, default=0.92, help="visibility of uncontaminated events (held fixed)")
    ap.add_argument("--target-n", type=float, default=1.75e5, help="block length anchor at eps = 1e-5")
    args = ap.parse_args()

    base = replace(EmissionTimeModel(), v_max=args.v_max)
    m = calibrate_model(base, KEY_WINDOW)
    pt = window_scan(m, [KEY_WINDOW.t_s_ns], KEY_WINDOW.t_e_ns)[0]
    c = calibrate_penalty_constant(target_n=args.target_n)

    print(f"pulse_center_ns = {m.pulse_center_ns:.10g}")
    print(f"double_emission_fraction = {m.double_emission_fraction:.10g}")
    print(f"v_max = {m.v_max:g}")
    print(f"q_floor = {m.q_floor:.10g}")
    print(f"penalty_c = {c:.6g}")
    print(f"# check: S={pt.s_value:.6g} Q={pt.qber:.6g} "
          f"two_photon_acceptance={two_photon_acceptance(m, KEY_WINDOW):.6g} relative_rate={pt.relative_rate:.6g}")


if __name__ == "__main__":
    main()
