import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from qrm.casestudies import ejm_povm
from qrm.conic import check_infeasibility_certificate
from qrm.matcore import proj
from qrm.pmsim import (
    PAIRS,
    certificate_problem,
    depolarize,
    extract_pm_decomposition,
    mixture,
    pm_visibility,
    two_outcome_to_pms,
)
from qrm.qobj import InvalidInput, Povm
from qrm.sampling import random_basis_pm, random_povm

seeds = st.integers(min_value=0, max_value=2**32 - 1)
PAULIS = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]
TETRA = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / np.sqrt(3)


def bloch_povm(dirs, length=1.0):
    return Povm(tuple((np.eye(2) + length * sum(c * p for c, p in zip(n, PAULIS))) / 4 for n in dirs))


def sphere(k):
    i = np.arange(k) + 0.5
    phi = np.arccos(1 - 2 * i / k)
    theta = np.pi * (1 + 5**0.5) * i
    return np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=1)


def lp_visibility(m: Povm, k=150):
    """Largest t reachable by mixing a fixed finite set of projective
    measurements: a lower bound on the SDP value."""
    pms = []
    for i, j in PAIRS:
        for n in sphere(k):
            p = (np.eye(2) + sum(c * s for c, s in zip(n, PAULIS))) / 2
            effects = [np.zeros((2, 2), dtype=complex) for _ in range(4)]
            effects[i], effects[j] = p, np.eye(2) - p
            pms.append(effects)
    for i in range(4):
        effects = [np.zeros((2, 2), dtype=complex) for _ in range(4)]
        effects[i] = np.eye(2)
        pms.append(effects)

    def coords(h):
        return [h[0, 0].real, h[1, 1].real, h[0, 1].real, h[0, 1].imag]

    cols = [np.concatenate([coords(e) for e in pm]) for pm in pms]
    noise = [np.trace(e).real * np.eye(2) / 2 for e in m.effects]
    t_col = -np.concatenate([coords(e - z) for e, z in zip(m.effects, noise)])
    a_eq = np.column_stack(cols + [t_col])
    b_eq = np.concatenate([coords(z) for z in noise])
    c = np.zeros(a_eq.shape[1])
    c[-1] = -1.0
    bounds = [(0, None)] * len(pms) + [(0, 1)]
    res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    assert res.status == 0
    return -res.fun


class TestVisibility:
    def test_padded_projective(self):
        v = pm_visibility(Povm((proj([1, 0]), proj([0, 1]))).padded(4))
        assert v.t_star == pytest.approx(1.0, abs=1e-7)
        assert v.dual_certificate is None

    def test_ejm_not_simulable(self):
        v = pm_visibility(ejm_povm(0.0))
        assert v.t_star < 1 - 1e-4
        check = check_infeasibility_certificate(certificate_problem(ejm_povm(0.0)), v.dual_certificate)
        assert check["valid"]

    def test_ejm_is_shrunk_tetrahedron(self):
        # reduced states of the theta = 0 basis have Bloch length sqrt(3)/2
        m = ejm_povm(0.0)
        for e, n in zip(m.effects, TETRA):
            bloch = np.array([np.trace(e @ p).real for p in PAULIS]) / np.trace(e).real
            np.testing.assert_allclose(bloch, np.sqrt(3) / 2 * n, atol=1e-12)

    def test_ejm_value_from_tetrahedron(self):
        # shrinking the Bloch vectors by s divides the critical visibility by s
        t_tetra = pm_visibility(bloch_povm(TETRA)).t_star
        t_ejm = pm_visibility(ejm_povm(0.0)).t_star
        assert t_ejm == pytest.approx(min(1.0, t_tetra / (np.sqrt(3) / 2)), abs=1e-7)

    @pytest.mark.parametrize("m", [bloch_povm(TETRA), ejm_povm(0.0), ejm_povm(np.pi / 10)], ids=["tetra", "ejm0", "ejm_pi10"])
    def test_lp_lower_bound(self, m):
        t_sdp = pm_visibility(m).t_star
        t_lp = lp_visibility(m)
        assert t_lp <= t_sdp + 1e-7
        assert t_lp >= t_sdp - 0.02
        assert t_sdp < 1

    def test_mixture_of_three_pms(self, rng):
        parts = []
        for k in range(3):
            basis = random_basis_pm(2, rng)
            effects = [np.zeros((2, 2), dtype=complex) for _ in range(4)]
            i, j = PAIRS[k]
            effects[i], effects[j] = basis[0], basis[1]
            parts.append((1 / 3, Povm(tuple(effects))))
        target = mixture(parts)
        v = pm_visibility(target)
        assert v.t_star == pytest.approx(1.0, abs=1e-7)
        rebuilt = mixture(extract_pm_decomposition(v))
        assert max(np.abs(a - b).max() for a, b in zip(rebuilt.effects, target.effects)) <= 1e-7

    def test_pair_constraint_residual(self, rng):
        for m in (ejm_povm(0.0), random_povm(2, 4, rng)):
            v = pm_visibility(m)
            for p, n_plus, n_minus in v.pairs.values():
                assert np.abs(n_plus + n_minus - p * np.eye(2)).max() <= 1e-8

    def test_rejects_wrong_shape(self, rng):
        with pytest.raises(InvalidInput):
            pm_visibility(random_povm(2, 3, rng))
        with pytest.raises(InvalidInput):
            pm_visibility(random_povm(3, 4, rng))

    @given(seeds, st.floats(0.3, 0.95))
    def test_noise_monotonicity(self, seed, t_prime):
        m = random_povm(2, 4, np.random.default_rng(seed), rank=1)
        t0 = pm_visibility(m).t_star
        t1 = pm_visibility(depolarize(m, t_prime)).t_star
        assert t1 >= min(1.0, t0 / t_prime) - 1e-6


class TestExtraction:
    def test_ejm_reconstruction(self):
        v = pm_visibility(ejm_povm(0.0))
        decomp = extract_pm_decomposition(v)
        assert all(pm.is_projective(1e-7) for _, pm in decomp)
        target = depolarize(ejm_povm(0.0), v.t_star)
        rebuilt = mixture(decomp)
        assert max(np.abs(a - b).max() for a, b in zip(rebuilt.effects, target.effects)) <= 1e-8

    def test_projective_input_single_pair(self):
        m = Povm((proj([1, 0]), proj([0, 1]))).padded(4)
        decomp = extract_pm_decomposition(pm_visibility(m))
        rebuilt = mixture(decomp)
        assert max(np.abs(a - b).max() for a, b in zip(rebuilt.effects, m.effects)) <= 1e-7

    def test_soundness(self, rng):
        seen = set()
        for k in range(10):
            m = random_povm(2, 4, rng, rank=1 + k % 2)
            v = pm_visibility(m)
            if v.t_star >= 1 - 1e-7:
                seen.add("simulable")
                rebuilt = mixture(extract_pm_decomposition(v))
                assert max(np.abs(a - b).max() for a, b in zip(rebuilt.effects, m.effects)) <= 1e-7
            elif v.t_star < 1 - 1e-6:
                seen.add("not simulable")
                assert v.dual_certificate["check"]["valid"]
        assert seen == {"simulable", "not simulable"}

    @given(seeds)
    def test_two_outcome_split(self, seed):
        rng = np.random.default_rng(seed)
        a = random_povm(2, 2, rng)[0]
        parts = two_outcome_to_pms(a)
        assert sum(w for w, _, _ in parts) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(sum(w * plus for w, plus, _ in parts), a, atol=1e-12)
        for _, plus, minus in parts:
            np.testing.assert_allclose(plus @ plus, plus, atol=1e-12)
            np.testing.assert_allclose(plus + minus, np.eye(2), atol=1e-12)


def test_depolarize_endpoints(rng):
    m = random_povm(2, 4, rng)
    for a, b in zip(depolarize(m, 1.0).effects, m.effects):
        np.testing.assert_allclose(a, b)
    for e, orig in zip(depolarize(m, 0.0).effects, m.effects):
        np.testing.assert_allclose(e, np.trace(orig).real * np.eye(2) / 2, atol=1e-15)

