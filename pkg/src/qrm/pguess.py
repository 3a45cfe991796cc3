"""Eve's guessing probability under classical and quantum side information.

Two regimes are solved exactly as SDPs: projective measurements on mixed
states and arbitrary POVMs on pure states. In general only explicit strategies
can be evaluated (lower bounds), lifted from classical to quantum, extracted
back from separable quantum ones, or bounded away from one by a
projective-simulability certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import conic
from .matcore import CMatrix, dag, herm, kron, partial_trace, permute_subsystems, proj
from .qobj import (
    Ensemble,
    InvalidInput,
    Povm,
    ProjImpl,
    QState,
    born,
    extremal_decomposition,
    naimark_from_decomposition,
    purify,
    steer,
    validate,
)

SolverFailure = conic.SolverFailure

STRATEGY_TOL = 1e-7
MIN_BRANCH_WEIGHT = 1e-12


class StrategyViolation(InvalidInput):
    """A strategy does not satisfy the constraints of its guessing problem."""

    def __init__(self, violated: dict[str, float]):
        self.violated = violated
        text = ", ".join(f"{k} (residual {v:.2e})" for k, v in violated.items())
        super().__init__(f"strategy violates constraints: {text}")


@dataclass
class GuessReport:
    value: float
    kind: str  # exact_sdp | strategy_lower_bound | certificate
    witness: Any = None
    residuals: dict[str, float] = field(default_factory=dict)


def _solve(p: conic.SdpProblem, tol: float) -> conic.SdpSolution:
    sol = conic.solve_sdp(p, tol)
    if not sol.optimal:
        raise SolverFailure(f"SDP not solved to optimality ({sol.status.value})", sol)
    return sol


def _rho(rho) -> CMatrix:
    return rho.rho if isinstance(rho, QState) else np.asarray(rho, dtype=complex)


def support_basis(h: CMatrix, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal columns spanning the range of a PSD matrix."""
    w, v = np.linalg.eigh(herm(h))
    return v[:, w > tol * max(1.0, float(w.max(initial=0.0)))]


def _best_guess(probs: Sequence[float], tol: float = 1e-12) -> int:
    """Smallest index attaining the maximum (ties within ``tol``)."""
    probs = np.asarray(probs)
    return int(np.flatnonzero(probs >= probs.max() - tol)[0])


# ---------------------------------------------------------------- exact SDPs


def discriminate_ensemble(e: Ensemble | Sequence[CMatrix], tol: float = conic.DEFAULT_SDP_TOL) -> tuple[float, Povm]:
    """Optimal success probability ``max sum_x Tr[M^x tau^x]`` over POVMs.

    ``e`` is an :class:`Ensemble` or a list of subnormalized states ``tau^x``.
    """
    taus = e.subnormalized() if isinstance(e, Ensemble) else [np.asarray(t, dtype=complex) for t in e]
    d = taus[0].shape[0]
    if any(t.shape != (d, d) for t in taus):
        raise ValueError("ensemble members must share a dimension")
    p = conic.SdpProblem()
    ms = [p.variable(f"M{x}", d) for x in range(len(taus))]
    p.add_matrix_equality(sum(ms[1:], ms[0]), np.eye(d))
    p.maximize(sum((m.inner(herm(t)) for m, t in zip(ms[1:], taus[1:])), ms[0].inner(herm(taus[0]))))
    sol = _solve(p, tol)
    povm = Povm(tuple(herm(sol.values[f"M{x}"]) for x in range(len(taus))))
    return sol.primal_objective, povm


def pguess_pm_classical(rho, pm: Povm, tol: float = conic.DEFAULT_SDP_TOL) -> GuessReport:
    """Classical guessing probability for a projective measurement.

    Solves ``max sum_e Tr[Pi^e sigma_e]`` over ``sigma_e >= 0`` with
    ``sum_e sigma_e = rho``: the members of the optimal decomposition that Eve
    labels ``e`` are grouped into ``sigma_e``. The witness is the pure-state
    strategy read off the spectral decompositions of the ``sigma_e``.
    """
    r = _rho(rho)
    if not pm.is_projective(1e-7):
        raise InvalidInput("pguess_pm_classical needs a projective measurement")
    d = r.shape[0]
    # sigma_e live on supp(rho); restricting keeps the problem strictly feasible
    v = support_basis(r)
    p = conic.SdpProblem()
    sig = [p.variable(f"s{e}", v.shape[1]).sandwich(v) for e in range(len(pm))]
    p.add_matrix_equality(sum(sig[1:], sig[0]), r)
    p.maximize(sum((s.inner(pi) for s, pi in zip(sig[1:], pm.effects[1:])), sig[0].inner(pm.effects[0])))
    sol = _solve(p, tol)
    branches = []
    for e in range(len(pm)):
        w, vecs = np.linalg.eigh(herm(v @ sol.values[f"s{e}"] @ dag(v)))
        for k in range(d):
            if w[k] > MIN_BRANCH_WEIGHT:
                branches.append(Branch(float(w[k]), vecs[:, k], pm, guess=e))
    witness = ClassicalStrategy(_renormalize(branches))
    return GuessReport(sol.primal_objective, "exact_sdp", witness, {"gap": sol.gap, "primal": sol.residual})


def pguess_pm_quantum(rho, pm: Povm, tol: float = conic.DEFAULT_SDP_TOL) -> GuessReport:
    """Quantum guessing probability for a projective measurement.

    Eve holds a purification; measuring ``pm`` on the system steers her
    system, and she discriminates the steered ensemble.
    """
    r = _rho(rho)
    if not pm.is_projective(1e-7):
        raise InvalidInput("pguess_pm_quantum needs a projective measurement")
    psi, de = purify(r)
    steered = steer(psi, (r.shape[0], de), 0, pm)
    value, eve = discriminate_ensemble([p * s for p, s in steered], tol)
    return GuessReport(value, "exact_sdp", eve, {})


def _nearest_povm(effects: Sequence[CMatrix], labels=()) -> Povm:
    """Clip negative eigenvalues and rescale to ``sum = I``.

    Dividing solver output by a small branch weight amplifies its error;
    this restores exact validity at a cost of the same order.
    """
    clipped = []
    for e in effects:
        w, v = np.linalg.eigh(herm(e))
        clipped.append((v * np.clip(w, 0.0, None)) @ dag(v))
    w, v = np.linalg.eigh(herm(sum(clipped)))
    inv_sqrt = (v * w ** -0.5) @ dag(v)
    return Povm(tuple(herm(inv_sqrt @ e @ inv_sqrt) for e in clipped), labels)


def pguess_pure_povm(phi, m: Povm, tol: float = conic.DEFAULT_SDP_TOL) -> GuessReport:
    """Guessing probability for a POVM on a pure state.

    Variables ``M^{x,e} >= 0`` group the decomposition of ``m`` by Eve's guess
    ``e``: ``sum_e M^{x,e} = M^x`` and ``sum_x M^{x,e} = q_e I``. The objective
    is ``sum_e <phi|M^{e,e}|phi>``. Classical and quantum values coincide for
    pure states, so this is both.
    """
    if isinstance(phi, QState):
        vec = phi.vector(1e-7)
    else:
        vec = np.asarray(phi, dtype=complex).ravel()
        if vec.ndim != 1 or vec.size != m.dim:
            raise InvalidInput("pure state vector expected")
    vec = vec / np.linalg.norm(vec)
    d, n = m.dim, len(m)
    phi_proj = proj(vec)
    # M^{x,e} live on supp(M^x); zero effects drop out entirely
    supports = [support_basis(e) for e in m.effects]
    p = conic.SdpProblem()
    mv = [
        [p.variable(f"M{x}_{e}", v.shape[1]).sandwich(v) if v.shape[1] else None for e in range(n)]
        for x, v in enumerate(supports)
    ]
    q = [p.variable(f"q{e}", 1, real=True) for e in range(n)]
    for x in range(n):
        if mv[x][0] is not None:
            p.add_matrix_equality(sum(mv[x][1:], mv[x][0]), m.effects[x])
    for e in range(n):
        col = sum((mv[x][e] for x in range(n) if mv[x][e] is not None), conic.Affine.constant(np.zeros((d, d))))
        p.add_matrix_equality(col - q[e].kron(np.eye(d)), np.zeros((d, d)))
    p.maximize(sum((mv[e][e].inner(phi_proj) for e in range(n) if mv[e][e] is not None), conic.Affine.constant(0.0)))
    sol = _solve(p, tol)

    def sub_effect(x: int, e: int) -> CMatrix:
        v = supports[x]
        if not v.shape[1]:
            return np.zeros((d, d), dtype=complex)
        return herm(v @ sol.values[f"M{x}_{e}"] @ dag(v))

    branches = []
    for e in range(n):
        qe = float(sol.values[f"q{e}"].real[0, 0])
        if qe <= MIN_BRANCH_WEIGHT:
            continue
        sub = _nearest_povm([sub_effect(x, e) / qe for x in range(n)], m.labels)
        branches.append(Branch(qe, vec, sub, guess=e))
    witness = ClassicalStrategy(_renormalize(branches))
    return GuessReport(sol.primal_objective, "exact_sdp", witness, {"gap": sol.gap, "primal": sol.residual})


# ---------------------------------------------------------------- strategies


@dataclass
class Branch:
    """One value of Eve's classical variable: weight, pure state, POVM, guess.

    ``guess=None`` means the best guess for this branch, ties going to the
    smallest outcome index.
    """

    weight: float
    state: np.ndarray
    povm: Povm
    guess: int | None = None

    def __post_init__(self):
        self.state = np.asarray(self.state, dtype=complex).ravel()

    def probabilities(self) -> np.ndarray:
        return born(proj(self.state), self.povm)

    def chosen_guess(self) -> int:
        return _best_guess(self.probabilities()) if self.guess is None else int(self.guess)


@dataclass
class ClassicalStrategy:
    branches: list[Branch]

    def value(self) -> float:
        return float(sum(b.weight * b.probabilities()[b.chosen_guess()] for b in self.branches))


def _renormalize(branches: list[Branch]) -> list[Branch]:
    total = sum(b.weight for b in branches)
    for b in branches:
        b.weight /= total
    return branches


def classical_residuals(s: ClassicalStrategy, rho, m: Povm) -> dict[str, float]:
    r = _rho(rho)
    weights = np.array([b.weight for b in s.branches])
    state = sum(b.weight * proj(b.state) for b in s.branches)
    meas = [sum(b.weight * b.povm[x] for b in s.branches) for x in range(len(m))]
    stats = sum(b.weight * b.probabilities() for b in s.branches)
    branch_povm = max(
        max(v for _, v in validate(b.povm, 1.0).checks.values()) for b in s.branches
    )
    return {
        "weights": max(abs(weights.sum() - 1.0), max(0.0, -weights.min())),
        "branch_povms": branch_povm,
        "state": float(np.linalg.norm(state - r, 2)),
        "measurement": max(float(np.linalg.norm(a - b, 2)) for a, b in zip(meas, m.effects)),
        "statistics": float(np.max(np.abs(stats - born(r, m)))),
    }


def eval_classical_strategy(s: ClassicalStrategy, rho, m: Povm, tol: float = STRATEGY_TOL) -> GuessReport:
    """Value ``sum_b p_b <phi_b|M^{g_b, b}|phi_b>`` of a checked classical strategy.

    Raises :class:`StrategyViolation` naming each violated constraint
    (``state``, ``measurement``, ``statistics``).
    """
    if not s.branches:
        raise InvalidInput("strategy has no branches")
    if any(b.povm.dim != m.dim or len(b.povm) != len(m) or b.state.size != m.dim for b in s.branches):
        raise InvalidInput("strategy branches do not match the POVM shape")
    res = classical_residuals(s, rho, m)
    bad = {k: v for k, v in res.items() if v > tol}
    if bad:
        raise StrategyViolation(bad)
    return GuessReport(s.value(), "strategy_lower_bound", s, res)


@dataclass
class ProductForm:
    """Eve's purification split as ``psi1_{S E1} (x) psi2_{A E2}``."""

    psi1: np.ndarray
    env1_dim: int
    psi2: np.ndarray
    env2_dim: int
    povm1: Povm
    povm2: Povm
    guess: Any = None  # table guess[a][b] -> x; None: M_E^x = M1^x (x) M2^x


@dataclass
class QuantumStrategy:
    """Projective implementation, purification on S (x) A (x) E, Eve's POVM."""

    impl: ProjImpl
    psi: np.ndarray
    eve_povm: Povm
    product_form: ProductForm | None = None

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=complex).ravel()

    @property
    def dims(self) -> tuple[int, int, int]:
        ds, da = self.impl.system_dim, self.impl.ancilla_dim
        return ds, da, self.psi.size // (ds * da)

    @classmethod
    def from_product(cls, impl: ProjImpl, pf: ProductForm) -> "QuantumStrategy":
        ds, da = impl.system_dim, impl.ancilla_dim
        psi = np.kron(pf.psi1, pf.psi2)  # S E1 A E2
        psi = permute_subsystems(psi, [ds, pf.env1_dim, da, pf.env2_dim], [0, 2, 1, 3])
        nx = len(impl.projectors)
        if pf.guess is None:
            effects = [np.kron(pf.povm1[x], pf.povm2[x]) for x in range(nx)]
        else:
            effects = [np.zeros((pf.env1_dim * pf.env2_dim,) * 2, dtype=complex) for _ in range(nx)]
            for a in range(len(pf.povm1)):
                for b in range(len(pf.povm2)):
                    effects[int(pf.guess[a][b])] += np.kron(pf.povm1[a], pf.povm2[b])
        return cls(impl, psi, Povm(tuple(effects)), pf)

    def joint_state(self) -> CMatrix:
        return proj(self.psi)

    def value(self) -> float:
        ds, da, de = self.dims
        psi = self.psi.reshape(ds * da, de)
        return float(sum(np.trace(dag(psi) @ pi @ psi @ me.T).real
                         for pi, me in zip(self.impl.projectors, self.eve_povm.effects)))

    def postmeasurement_states(self) -> list[tuple[float, CMatrix]]:
        """Eve's outcome probabilities and the conditional states on S (x) A."""
        ds, da, de = self.dims
        return steer(self.psi, (ds * da, de), 1, self.eve_povm)


def quantum_residuals(s: QuantumStrategy, rho, m: Povm) -> dict[str, float]:
    r = _rho(rho)
    ds, da, de = s.dims
    if ds * da * de != s.psi.size:
        raise InvalidInput("purification length does not match the implementation dims")
    full = s.joint_state()
    rho_s = partial_trace(full, [ds, da, de], [1, 2])
    sigma_a = partial_trace(full, [ds, da, de], [0, 2])
    rho_sa = partial_trace(full, [ds, da, de], [2])
    induced = ProjImpl(ds, da, s.impl.projectors, sigma_a).induced_povm()
    stats = np.array([np.trace(pi @ rho_sa).real for pi in s.impl.projectors])
    impl_rep = validate(ProjImpl(ds, da, s.impl.projectors, np.eye(da) / da), 1.0)
    eve_rep = validate(s.eve_povm, 1.0)
    return {
        "norm": abs(np.linalg.norm(s.psi) - 1.0),
        "projectors": max(impl_rep.checks["projectors"][1], impl_rep.checks["completeness"][1]),
        "eve_povm": max(v for _, v in eve_rep.checks.values()),
        "state": float(np.linalg.norm(rho_s - r, 2)),
        "measurement": max(float(np.linalg.norm(a - b, 2)) for a, b in zip(induced.effects, m.effects)),
        "statistics": float(np.max(np.abs(stats - born(r, m)))),
    }


def eval_quantum_strategy(s: QuantumStrategy, rho, m: Povm, tol: float = STRATEGY_TOL) -> GuessReport:
    """Value ``sum_x <psi|Pi^x (x) M_E^x|psi>`` of a checked quantum strategy."""
    if len(s.impl.projectors) != len(m) or len(s.eve_povm) != len(m) or s.impl.system_dim != m.dim:
        raise InvalidInput("strategy does not match the POVM shape")
    res = quantum_residuals(s, rho, m)
    bad = {k: v for k, v in res.items() if v > tol}
    if bad:
        raise StrategyViolation(bad)
    return GuessReport(s.value(), "strategy_lower_bound", s, res)


def lift_classical_to_quantum(s: ClassicalStrategy) -> QuantumStrategy:
    """Quantum strategy with the same value as a classical one.

    Each branch ``b`` gets its own ancilla label ``j = b`` and Eve label
    ``b``: ``psi = sum_b sqrt(p_b) |phi_b>|0, b>|b>``; the implementation is
    the Naimark dilation of the branch POVMs and Eve answers the branch's
    guess after reading ``b``.
    """
    branches = [b for b in s.branches if b.weight > MIN_BRANCH_WEIGHT]
    if not branches:
        raise InvalidInput("strategy has no branch with positive weight")
    total = sum(b.weight for b in branches)
    weights = [b.weight / total for b in branches]
    impl = naimark_from_decomposition(list(zip(weights, [b.povm for b in branches])))
    nx = len(branches[0].povm)
    nb = len(branches)
    zero = np.eye(nx)[0]
    psi = sum(
        np.sqrt(w) * kron(b.state, zero, np.eye(nb)[k], np.eye(nb)[k])
        for k, (w, b) in enumerate(zip(weights, branches))
    )
    eve = [np.zeros((nb, nb), dtype=complex) for _ in range(nx)]
    for k, b in enumerate(branches):
        eve[b.chosen_guess()][k, k] = 1.0
    return QuantumStrategy(impl, psi, Povm(tuple(eve)))


def cq_decomposition(tau: CMatrix, dims: Sequence[int], tol: float = 1e-9) -> list[tuple[float, np.ndarray, np.ndarray]]:
    """Product decomposition of a state block diagonal in the A computational basis.

    Returns ``[(p, phi_S, phi_A), ...]``; raises :class:`InvalidInput` if
    ``tau`` has coherences between different A basis states. This is a
    convenience for states known to be of this form, not a separability test.
    """
    ds, da = dims
    t = np.asarray(tau).reshape(ds, da, ds, da)
    off = t.copy()
    for a in range(da):
        off[:, a, :, a] = 0
    if np.max(np.abs(off), initial=0.0) > tol:
        raise InvalidInput("state is not block diagonal in the ancilla basis")
    out = []
    for a in range(da):
        w, v = np.linalg.eigh(herm(t[:, a, :, a]))
        for k in range(ds):
            if w[k] > tol * 1e-3:
                out.append((float(w[k]), v[:, k], np.eye(da, dtype=complex)[a]))
    total = sum(p for p, _, _ in out)
    return [(p / total, s, a) for p, s, a in out]


def extract_classical_from_separable(
    s: QuantumStrategy,
    decompositions: Sequence[Sequence[tuple[float, np.ndarray, np.ndarray]]],
    tol: float = STRATEGY_TOL,
    refine: bool = True,
) -> ClassicalStrategy:
    """Classical strategy at least as good as a quantum one with separable
    postmeasurement states.

    ``decompositions[x]`` lists ``(p(i|x), phi_S, phi_A)`` with
    ``tau^x = sum_i p(i|x) |phi_S phi_A><phi_S phi_A|``. Branch ``(x, i)`` gets
    weight ``p(x) p(i|x)``, state ``phi_S`` and POVM
    ``F^y = Tr_A[Pi^y (I (x) |phi_A><phi_A|)]``, with its best guess.
    """
    ds, da, _ = s.dims
    post = s.postmeasurement_states()
    if len(decompositions) != len(post):
        raise InvalidInput("one decomposition per Eve outcome required")
    branches = []
    for x, ((px, tau), dec) in enumerate(zip(post, decompositions)):
        if px <= MIN_BRANCH_WEIGHT:
            continue
        rebuilt = sum(w * proj(np.kron(a, b)) for w, a, b in dec) if dec else np.zeros_like(tau)
        err = float(np.linalg.norm(rebuilt - tau, 2))
        if err > tol:
            raise InvalidInput(f"decomposition for Eve outcome {x} misses tau by {err:.2e}")
        for w, phi_s, phi_a in dec:
            if px * w <= MIN_BRANCH_WEIGHT:
                continue
            lift = kron(np.eye(ds), proj(phi_a))
            effects = tuple(herm(partial_trace(pi @ lift, [ds, da], [1])) for pi in s.impl.projectors)
            branches.append(Branch(px * w, np.asarray(phi_s) / np.linalg.norm(phi_s), Povm(effects)))
    out = ClassicalStrategy(_renormalize(branches))
    return refine_strategy(out) if refine else out


def refine_strategy(s: ClassicalStrategy, tol: float = 1e-9) -> ClassicalStrategy:
    """Replace every branch POVM by its extremal decomposition.

    Guesses are re-chosen per refined branch; by convexity of the max this
    never lowers the value.
    """
    out = []
    for b in s.branches:
        for w, povm in extremal_decomposition(b.povm, tol):
            out.append(Branch(b.weight * w, b.state, povm))
    return ClassicalStrategy(out)


def perfect_quantum_construction(basis: Sequence[np.ndarray], tol: float = 1e-9) -> tuple[QState, Povm, QuantumStrategy]:
    """State, POVM and strategy for which quantum Eve guesses perfectly.

    From an orthonormal basis ``{psi^x}`` of ``S (x) A`` (both of dim d):
    ``rho = I/d``, ``M^x = Tr_A[|psi^x><psi^x|] / d``, and Eve holds
    ``sum_x |psi^x>|x> / d``.
    """
    vecs = np.array([np.asarray(v, dtype=complex).ravel() for v in basis])
    n = vecs.shape[0]
    d = int(round(np.sqrt(vecs.shape[1])))
    if d * d != vecs.shape[1] or n != d * d:
        raise InvalidInput("need d^2 vectors on a d x d space")
    if np.max(np.abs(vecs.conj() @ vecs.T - np.eye(n))) > tol:
        raise InvalidInput("basis is not orthonormal")
    projectors = tuple(proj(v) for v in vecs)
    effects = tuple(herm(partial_trace(p, [d, d], [1])) / d for p in projectors)
    impl = ProjImpl(d, d, projectors, np.eye(d, dtype=complex) / d)
    psi = sum(np.kron(v, np.eye(n)[x]) for x, v in enumerate(vecs)) / d
    eve = Povm(tuple(proj(np.eye(n)[x]) for x in range(n)))
    return QState(np.eye(d, dtype=complex) / d), Povm(effects), QuantumStrategy(impl, psi, eve)


# ---------------------------------------------------------------- certificate


@dataclass
class Certificate:
    verdict: str  # certified | inconclusive
    t_star: float
    margin: float
    infeasibility: dict | None
    reason: str


def certify_pc_below_one(m: Povm, tol: float = 1e-6) -> Certificate:
    """Certify that the classical guessing probability is below one for every state.

    Applies to qubit POVMs and to POVMs with ``d**2`` outcomes, where a
    perfect classical guess forces the POVM to be a mixture of projective
    measurements. If the projective-simulability visibility is below one by
    more than ``tol`` the POVM is not such a mixture.
    """
    from .pmsim import pm_visibility

    d = m.dim
    if not (d == 2 or len(m) == d * d):
        raise InvalidInput("certificate needs a qubit POVM or one with d^2 outcomes")
    if d != 2 or len(m) > 4:
        raise InvalidInput("projective-simulability test is implemented for qubit POVMs with at most 4 outcomes")
    vis = pm_visibility(m.padded(4) if len(m) < 4 else m)
    margin = 1.0 - vis.t_star
    if margin > tol:
        return Certificate(
            "certified", vis.t_star, margin, vis.dual_certificate,
            "not a convex combination of projective measurements, so no strategy guesses perfectly",
        )
    return Certificate("inconclusive", vis.t_star, margin, vis.dual_certificate,
                       "projectively simulable within tolerance")
