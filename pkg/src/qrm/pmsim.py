"""Projective simulability of four-outcome qubit POVMs.

A four-outcome qubit POVM is a mixture of projective measurements iff its
effects split as ``M_i = sum_{j != i} N_ij^{+/-}`` (``+`` when ``i < j``) with
``N_ij^+ + N_ij^- = p_ij I``, ``N >= 0`` and ``p`` a probability vector over
the six outcome pairs. :func:`pm_visibility` finds the largest amount of the
POVM that survives white noise while keeping this form.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import conic
from .matcore import herm
from .qobj import InvalidInput, Povm

PAIRS = tuple(combinations(range(4), 2))


@dataclass
class VisibilityResult:
    t_star: float
    povm: Povm
    pairs: dict  # (i, j) -> (p_ij, N_plus, N_minus)
    dual_certificate: dict | None
    solution: conic.SdpSolution


def depolarize(m: Povm, t: float) -> Povm:
    """``t M^x + (1 - t) Tr[M^x] I / d``."""
    d = m.dim
    return Povm(tuple(t * e + (1 - t) * np.trace(e).real * np.eye(d) / d for e in m.effects), m.labels)


def _problem(m: Povm, fixed_t: float | None = None) -> conic.SdpProblem:
    p = conic.SdpProblem()
    t = p.variable("t", 1, real=True)
    p.add_psd(1.0 - t)
    if fixed_t is not None:
        p.add_equality(t, fixed_t)
    n_plus, n_minus, probs = {}, {}, {}
    for i, j in PAIRS:
        n_plus[i, j] = p.variable(f"N{i}{j}+", 2)
        n_minus[i, j] = p.variable(f"N{i}{j}-", 2)
        probs[i, j] = p.variable(f"p{i}{j}", 1, real=True)
        p.add_matrix_equality(n_plus[i, j] + n_minus[i, j] - probs[i, j].kron(np.eye(2)), np.zeros((2, 2)))
    p.add_equality(sum((probs[k] for k in PAIRS[1:]), probs[PAIRS[0]]), 1.0)
    for x, e in enumerate(m.effects):
        e = herm(e)
        noise = np.trace(e).real * np.eye(2) / 2
        parts = [n_plus[i, j] if i == x else n_minus[i, j] for i, j in PAIRS if x in (i, j)]
        target = t.kron(e - noise) + noise
        p.add_matrix_equality(sum(parts[1:], parts[0]) - target, np.zeros((2, 2)))
    p.maximize(t)
    return p


def _check_shape(m: Povm) -> None:
    if m.dim != 2 or len(m) != 4:
        raise InvalidInput(f"need a 4-outcome qubit POVM, got dim {m.dim} with {len(m)} outcomes")


def pm_visibility(m: Povm, tol: float = conic.DEFAULT_SDP_TOL) -> VisibilityResult:
    """Largest ``t`` in [0, 1] at which the depolarized POVM is PM-simulable.

    When ``t_star`` falls short of one, the same system with ``t = 1`` is
    solved as well and its infeasibility ray is attached as
    ``dual_certificate``.
    """
    _check_shape(m)
    prob = _problem(m)
    sol = conic.solve_sdp(prob, tol)
    if not sol.optimal:
        raise conic.SolverFailure(f"visibility SDP failed ({sol.status.value})", sol)
    t_star = min(1.0, max(0.0, float(sol.values["t"].real[0, 0])))
    pairs = {
        (i, j): (
            float(sol.values[f"p{i}{j}"].real[0, 0]),
            herm(sol.values[f"N{i}{j}+"]),
            herm(sol.values[f"N{i}{j}-"]),
        )
        for i, j in PAIRS
    }
    cert = None
    if t_star < 1.0 - 1e-6:
        at_one = _problem(m, fixed_t=1.0)
        feas = conic.solve_sdp(at_one, tol)
        if feas.status is conic.Status.INFEASIBLE:
            cert = dict(feas.certificate)
            cert["check"] = conic.check_infeasibility_certificate(at_one, cert)
    return VisibilityResult(t_star, m, pairs, cert, sol)


def certificate_problem(m: Povm) -> conic.SdpProblem:
    """The ``t = 1`` feasibility system a dual certificate refers to."""
    _check_shape(m)
    return _problem(m, fixed_t=1.0)


def two_outcome_to_pms(a: np.ndarray) -> list[tuple[float, np.ndarray, np.ndarray]]:
    """Split a qubit effect pair ``{A, I - A}`` into projective pairs.

    With eigenvalues ``a1 >= a2`` of ``A`` and eigenvector ``v1``:
    ``A = a2 I + (a1 - a2) |v1><v1|``, so the pair is
    ``a2 {I, 0} + (a1 - a2) {P, I - P} + (1 - a1) {0, I}``.
    """
    w, v = np.linalg.eigh(herm(a))
    a2, a1 = np.clip(w, 0.0, 1.0)
    p1 = np.outer(v[:, 1], v[:, 1].conj())
    eye, zero = np.eye(2, dtype=complex), np.zeros((2, 2), dtype=complex)
    parts = [(a2, eye, zero), (a1 - a2, p1, eye - p1), (1.0 - a1, zero, eye)]
    return [(float(w_), plus, minus) for w_, plus, minus in parts if w_ > 0]


def extract_pm_decomposition(v: VisibilityResult, min_weight: float = 1e-10, tol: float = 1e-7) -> list[tuple[float, Povm]]:
    """Projective measurements whose mixture is ``depolarize(povm, t_star)``.

    Pairs with ``p_ij > min_weight`` give the two-outcome POVM
    ``{N_ij^+ / p_ij, N_ij^- / p_ij}`` on outcomes ``i, j``, which is then split
    into projective pairs. Raises if an emitted measurement is not projective
    within ``tol``.
    """
    out = []
    for (i, j), (pij, n_plus, _) in v.pairs.items():
        if pij <= min_weight:
            continue
        for w, plus, minus in two_outcome_to_pms(n_plus / pij):
            effects = [np.zeros((2, 2), dtype=complex) for _ in range(4)]
            effects[i], effects[j] = plus, minus
            pm = Povm(tuple(effects), v.povm.labels)
            if not pm.is_projective(tol):
                raise RuntimeError(f"extracted measurement on pair {(i, j)} is not projective")
            out.append((pij * w, pm))
    total = sum(w for w, _ in out)
    return [(w / total, pm) for w, pm in out]


def mixture(decomp: list[tuple[float, Povm]]) -> Povm:
    n = len(decomp[0][1])
    return Povm(tuple(sum(w * pm[x] for w, pm in decomp) for x in range(n)), decomp[0][1].labels)
