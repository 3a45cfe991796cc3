import csv
import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qrm.casestudies import (
    CurveRow,
    curve,
    curve_csv,
    curve_monotone,
    default_mu_grid,
    ejm_basis,
    ejm_povm,
    f_of_mu,
    pq_of_mu,
    qrng_model,
)
from qrm.matcore import partial_trace, proj
from qrm.pguess import eval_quantum_strategy, perfect_quantum_construction
from qrm.qobj import InvalidInput, born, validate, verify_dilation

PAULIS = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]
thetas = st.floats(min_value=0.0, max_value=np.pi / 2)
mus = st.floats(min_value=0.0, max_value=1.0)


def bloch(rho):
    return np.array([np.trace(rho @ p).real for p in PAULIS])


def known_implementation_value(mu):
    # Eve knowing which detectors work is certain only if both are dead;
    # otherwise the outcome is decided by the photon path
    return (1 - mu) ** 2 + 0.5 * (1 - (1 - mu) ** 2)


class TestEjm:
    @given(thetas)
    def test_orthonormal(self, theta):
        b = np.array(ejm_basis(theta))
        assert np.abs(b.conj() @ b.T - np.eye(4)).max() <= 1e-12

    def test_marginals_at_zero(self):
        vecs = [bloch(partial_trace(proj(v), [2, 2], [1])) for v in ejm_basis(0.0)]
        lengths = [np.linalg.norm(v) for v in vecs]
        np.testing.assert_allclose(lengths, np.sqrt(3) / 2, atol=1e-12)
        signs = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / np.sqrt(3)
        cos = [np.dot(v, n) / np.linalg.norm(v) for v, n in zip(vecs, signs)]
        np.testing.assert_allclose(cos, 1.0, atol=1e-12)

    @given(st.floats(min_value=0.0, max_value=np.pi / 2 - 1e-3))
    def test_continuity(self, theta):
        a, b = ejm_basis(theta), ejm_basis(theta + 1e-6)
        assert min(abs(np.vdot(u, v)) for u, v in zip(a, b)) >= 1 - 1e-9

    @given(thetas)
    def test_povm(self, theta):
        m = ejm_povm(theta)
        assert validate(m).ok
        np.testing.assert_allclose([np.trace(e).real for e in m.effects], 0.5, atol=1e-12)

    def test_outside_range(self):
        with pytest.raises(InvalidInput):
            ejm_basis(-0.1)
        with pytest.raises(InvalidInput):
            ejm_povm(2.0)

    def test_perfect_quantum_value(self):
        state, m, s = perfect_quantum_construction(ejm_basis(0.0))
        assert eval_quantum_strategy(s, state, m).value == pytest.approx(1.0, abs=1e-9)
        for a, b in zip(m.effects, ejm_povm(0.0).effects):
            np.testing.assert_allclose(a, b, atol=1e-14)


class TestQrngModel:
    def test_full_efficiency_statistics(self):
        model = qrng_model(1.0)
        np.testing.assert_allclose(born(proj(model.state), model.povm), [0, 0.5, 0.5, 0], atol=1e-15)

    def test_zero_efficiency_statistics(self):
        model = qrng_model(0.0)
        np.testing.assert_allclose(born(proj(model.state), model.povm), [1, 0, 0, 0], atol=1e-15)

    def test_dilation_across_grid(self):
        for mu in default_mu_grid():
            model = qrng_model(mu)
            assert verify_dilation(model.impl, model.povm) <= 1e-10
            assert validate(model.impl).ok

    def test_outcome_order(self):
        assert qrng_model(0.3).povm.labels == ("00", "01", "10", "11")

    def test_rejects_bad_mu(self):
        with pytest.raises(InvalidInput):
            qrng_model(1.5)


class TestGuessing:
    def test_endpoints(self):
        assert f_of_mu(0.0) == pytest.approx(1.0, abs=1e-7)
        assert f_of_mu(1.0) == pytest.approx(0.5, abs=1e-7)
        assert pq_of_mu(0.0) == pytest.approx(1.0, abs=1e-7)
        assert pq_of_mu(1.0) == pytest.approx(0.5, abs=1e-7)

    def test_half_efficiency_interior(self):
        assert 0.5 < f_of_mu(0.5) < 1

    @given(mus)
    def test_known_implementation_closed_form(self, mu):
        assert f_of_mu(mu) == pytest.approx(known_implementation_value(mu), abs=1e-7)

    @pytest.mark.parametrize("mu", np.round(np.arange(0.1, 1.0, 0.1), 10))
    def test_free_implementation_is_larger(self, mu):
        assert pq_of_mu(mu) > f_of_mu(mu) + 1e-4


@pytest.fixture(scope="module")
def rows():
    return curve()


class TestCurve:
    def test_grid(self, rows):
        assert len(rows) == 21
        assert rows[0].mu == 0.0 and rows[-1].mu == 1.0

    def test_endpoints(self, rows):
        assert (rows[0].f_mu, rows[0].pguess_q) == pytest.approx((1, 1), abs=1e-6)
        assert (rows[-1].f_mu, rows[-1].pguess_q) == pytest.approx((0.5, 0.5), abs=1e-6)

    def test_strict_gap(self, rows):
        assert all(r.pguess_q - r.f_mu > 1e-4 for r in rows[1:-1])

    def test_monotone(self, rows):
        assert curve_monotone(rows) == {"f_mu": True, "pguess_q": True}

    def test_csv(self, rows):
        text = curve_csv(rows)
        parsed = list(csv.DictReader(io.StringIO(text)))
        assert text.splitlines()[0] == "mu,f_mu,pguess_q"
        assert len(parsed) == 21
        assert float(parsed[10]["f_mu"]) == pytest.approx(rows[10].f_mu, rel=1e-8)

    def test_csv_significant_digits(self):
        text = curve_csv([CurveRow(0.05, 0.951250000123, 2 / 3)])
        assert text.splitlines()[1] == "0.05,0.95125,0.666666667"
