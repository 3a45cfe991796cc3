"""End-to-end separation check at theta = 0.

Quantum side information: the perfect construction reaches 1.
Classical side information: the POVM is not a mixture of projective
measurements, so no classical strategy reaches 1.
"""

from qrm.casestudies import ejm_basis, ejm_povm
from qrm.pguess import certify_pc_below_one, eval_quantum_strategy, perfect_quantum_construction


def main():
    state, povm, strategy = perfect_quantum_construction(ejm_basis(0.0))
    report = eval_quantum_strategy(strategy, state, povm)
    print(f"quantum strategy value   {report.value:.12f}")
    print(f"largest residual         {max(report.residuals.values()):.1e}")
    cert = certify_pc_below_one(ejm_povm(0.0))
    print(f"critical visibility      {cert.t_star:.9f}")
    print(f"classical verdict        {cert.verdict} ({cert.reason})")


if __name__ == "__main__":
    main()
