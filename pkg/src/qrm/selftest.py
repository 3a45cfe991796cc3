"""Small oracle suite run by ``qrm selftest``.

Each check compares a solver output with a value computed another way
(closed form, direct construction or linear algebra). Seeds are fixed so
the report is reproducible.
"""

from __future__ import annotations

import numpy as np

from .casestudies import f_of_mu, qrng_model
from .matcore import proj, random_density, random_state_vector
from .pguess import (
    discriminate_ensemble,
    eval_classical_strategy,
    eval_quantum_strategy,
    lift_classical_to_quantum,
    pguess_pm_classical,
    pguess_pm_quantum,
    pguess_pure_povm,
)
from .pmsim import pm_visibility
from .qobj import Povm, verify_dilation
from .sampling import (
    helstrom_value,
    random_basis_pm,
    random_classical_strategy,
    random_rank_one_povm,
    strategy_targets,
)

SEED = 20240611


def _helstrom(rng, n=10):
    err = 0.0
    for _ in range(n):
        d = int(rng.integers(2, 4))
        p0 = float(rng.uniform(0.05, 0.95))
        r0, r1 = random_density(d, rng), random_density(d, rng)
        value, _ = discriminate_ensemble([p0 * r0, (1 - p0) * r1])
        err = max(err, abs(value - helstrom_value(p0, r0, r1)))
    return err, 1e-8


def _classical_equals_quantum_for_pm(rng, n=4):
    err = 0.0
    for k in range(n):
        d = 2 + k % 2
        rho, pm = random_density(d, rng), random_basis_pm(d, rng)
        err = max(err, abs(pguess_pm_classical(rho, pm).value - pguess_pm_quantum(rho, pm).value))
    return err, 1e-6


def _lift(rng, n=4):
    err = 0.0
    for _ in range(n):
        s = random_classical_strategy(2, 3, 2, 2, rng)
        rho, m = strategy_targets(s)
        classical = eval_classical_strategy(s, rho, m)
        quantum = eval_quantum_strategy(lift_classical_to_quantum(s), rho, m)
        err = max(err, abs(classical.value - quantum.value), max(quantum.residuals.values()))
    return err, 1e-9


def _extremal_shortcut(rng, n=4):
    err = 0.0
    for _ in range(n):
        m = random_rank_one_povm(2, 4, rng)
        phi = random_state_vector(2, rng)
        direct = max(np.vdot(phi, e @ phi).real for e in m.effects)
        err = max(err, abs(pguess_pure_povm(phi, m).value - direct))
    return err, 1e-8


def _qrng_closed_form(rng, mus=(0.0, 0.3, 0.7, 1.0)):
    # Eve who knows which detectors are live is certain only when both are
    # dead; otherwise the outcome follows the photon path, a fair coin.
    err = 0.0
    for mu in mus:
        model = qrng_model(mu)
        err = max(err, verify_dilation(model.impl, model.povm))
        err = max(err, abs(f_of_mu(mu) - (0.5 + 0.5 * (1 - mu) ** 2)))
    return err, 1e-7


def _tetrahedral_visibility(rng):
    vecs = [np.array([1.0, 1.0, 1.0]), np.array([1.0, -1.0, -1.0]),
            np.array([-1.0, 1.0, -1.0]), np.array([-1.0, -1.0, 1.0])]
    paulis = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]
    effects = tuple((np.eye(2) + sum(c * p for c, p in zip(v / np.sqrt(3), paulis))) / 4 for v in vecs)
    t = pm_visibility(Povm(effects)).t_star
    return abs(t - np.sqrt(2 / 3)), 1e-6


def _trivial_pm(rng):
    rho = np.eye(2) / 2
    pm = Povm((proj([1, 0]), proj([0, 1])))
    # I/2 splits into the two basis states, so Eve always guesses right
    return abs(pguess_pm_classical(rho, pm).value - 1.0), 1e-8


CHECKS = {
    "helstrom": _helstrom,
    "pm_classical_equals_quantum": _classical_equals_quantum_for_pm,
    "lift_round_trip": _lift,
    "extremal_shortcut": _extremal_shortcut,
    "qrng_known_implementation": _qrng_closed_form,
    "tetrahedral_visibility": _tetrahedral_visibility,
    "maximally_mixed_pm": _trivial_pm,
}


def run_selftest(tol: float = 1e-8) -> dict:
    rng = np.random.default_rng(SEED)
    results = {}
    for name, check in CHECKS.items():
        err, bound = check(rng)
        results[name] = {"passed": bool(err <= bound), "error": float(err), "bound": bound}
    return {"checks": results, "passed": all(r["passed"] for r in results.values())}
