"""Projective-simulability visibility of the entangled-basis POVM family.

For each angle, prints the critical visibility, whether the t = 1 problem
carries a valid infeasibility certificate, and the certifier's verdict.
"""

import argparse

import numpy as np

from qrm.casestudies import ejm_povm
from qrm.pguess import certify_pc_below_one
from qrm.pmsim import pm_visibility


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-theta", type=float, default=np.pi / 10)
    ap.add_argument("--points", type=int, default=11)
    args = ap.parse_args()

    print(f"{'theta':>8} {'t_star':>12} {'cert':>6} verdict")
    for theta in np.linspace(0.0, args.max_theta, args.points):
        m = ejm_povm(theta)
        vis = pm_visibility(m)
        cert = vis.dual_certificate is not None and vis.dual_certificate["check"]["valid"]
        print(f"{theta:8.5f} {vis.t_star:12.9f} {str(cert):>6} {certify_pc_below_one(m).verdict}")


if __name__ == "__main__":
    main()
