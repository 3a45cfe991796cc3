"""Random instances for property tests and the self-test suite."""

from __future__ import annotations

import numpy as np

from .matcore import dag, herm, proj, random_state_vector, random_unitary
from .pguess import Branch, ClassicalStrategy, ProductForm, QuantumStrategy
from .qobj import Povm, naimark_from_decomposition, purify


def normalize_effects(parts) -> Povm:
    """``S^{-1/2} A_x S^{-1/2}`` with ``S = sum_x A_x``."""
    s = herm(sum(parts))
    w, v = np.linalg.eigh(s)
    inv_sqrt = v @ np.diag(w ** -0.5) @ dag(v)
    return Povm(tuple(herm(inv_sqrt @ a @ inv_sqrt) for a in parts))


def random_povm(dim: int, n_outcomes: int, rng: np.random.Generator, rank: int | None = None) -> Povm:
    rank = dim if rank is None else rank
    parts = []
    for _ in range(n_outcomes):
        g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
        parts.append(g @ dag(g))
    return normalize_effects(parts)


def random_rank_one_povm(dim: int, n_outcomes: int, rng: np.random.Generator) -> Povm:
    """Rank-one effects; for ``n_outcomes <= dim**2`` they are generically
    linearly independent, hence extremal."""
    return normalize_effects([proj(random_state_vector(dim, rng)) for _ in range(n_outcomes)])


def random_basis_pm(dim: int, rng: np.random.Generator) -> Povm:
    u = random_unitary(dim, rng)
    return Povm(tuple(proj(u[:, k]) for k in range(dim)))


def random_classical_strategy(
    dim: int, n_outcomes: int, n_states: int, n_povms: int, rng: np.random.Generator
) -> ClassicalStrategy:
    """Branches ``(i, k)`` pairing a state decomposition with an independent
    POVM decomposition, weight ``q_i r_k``.

    Independence makes the branch statistics average to those of the
    targets, so the strategy is feasible for :func:`strategy_targets`.
    """
    q = rng.dirichlet(np.ones(n_states))
    r = rng.dirichlet(np.ones(n_povms))
    states = [random_state_vector(dim, rng) for _ in range(n_states)]
    povms = [random_povm(dim, n_outcomes, rng) for _ in range(n_povms)]
    return ClassicalStrategy(
        [Branch(float(q[i] * r[k]), states[i], povms[k]) for i in range(n_states) for k in range(n_povms)]
    )


def strategy_targets(s: ClassicalStrategy) -> tuple[np.ndarray, Povm]:
    """The state and POVM a classical strategy decomposes."""
    rho = sum(b.weight * proj(b.state) for b in s.branches)
    n = len(s.branches[0].povm)
    effects = tuple(sum(b.weight * b.povm[x] for b in s.branches) for x in range(n))
    return rho, Povm(effects)


def random_product_strategy(
    phi: np.ndarray,
    parts: list[tuple[float, Povm]],
    rng: np.random.Generator,
    env1_dim: int = 2,
    best_guess: bool = True,
) -> tuple[Povm, QuantumStrategy]:
    """Product-form quantum strategy for the pure state ``phi`` and the
    POVM ``sum_k p_k M_k``.

    The implementation is the dilation of ``parts``; ``E1`` holds a random
    state uncorrelated with ``S`` and ``E2`` purifies the ancilla. Eve's
    local POVMs are random; her guess table is either optimal for them or
    random.
    """
    impl = naimark_from_decomposition(parts)
    target = Povm(tuple(sum(p * m[x] for p, m in parts) for x in range(len(parts[0][1]))))
    psi2, env2 = purify(impl.ancilla_state)
    psi1 = np.kron(np.asarray(phi, dtype=complex).ravel(), random_state_vector(env1_dim, rng))
    nx = len(target)
    povm1, povm2 = random_povm(env1_dim, nx, rng), random_povm(env2, nx, rng)
    if best_guess:
        joint = QuantumStrategy.from_product(
            impl, ProductForm(psi1, env1_dim, psi2, env2, povm1, povm2, np.zeros((nx, nx), dtype=int))
        )
        ds, da, de = joint.dims
        psi = joint.psi.reshape(ds * da, de)
        table = np.zeros((nx, nx), dtype=int)
        for a in range(nx):
            for b in range(nx):
                eve = np.kron(povm1[a], povm2[b])
                probs = [np.trace(dag(psi) @ pi @ psi @ eve.T).real for pi in impl.projectors]
                table[a, b] = int(np.argmax(probs))
        guess = table.tolist()
    else:
        guess = rng.integers(0, nx, size=(nx, nx)).tolist()
    pf = ProductForm(psi1, env1_dim, psi2, env2, povm1, povm2, guess)
    return target, QuantumStrategy.from_product(impl, pf)


def helstrom_value(p0: float, rho0: np.ndarray, rho1: np.ndarray) -> float:
    w = np.linalg.eigvalsh(herm(p0 * rho0 - (1 - p0) * rho1))
    return 0.5 * (1.0 + float(np.abs(w).sum()))

