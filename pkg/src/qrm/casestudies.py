"""Worked constructions: an entangled two-qubit basis family and a beam-splitter QRNG."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .matcore import herm, kron, partial_trace, permute_subsystems, proj
from .pguess import discriminate_ensemble, pguess_pure_povm
from .qobj import InvalidInput, Povm, ProjImpl, purify, steer

SIGN_VECTORS = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)


@dataclass(frozen=True)
class EjmParams:
    theta: float
    eta: np.ndarray  # z component of each unit direction
    phi: np.ndarray  # azimuth of each direction

    @classmethod
    def from_theta(cls, theta: float) -> "EjmParams":
        if not 0.0 <= theta <= np.pi / 2 + 1e-12:
            raise InvalidInput(f"theta={theta} outside [0, pi/2]")
        unit = SIGN_VECTORS / np.sqrt(3)
        return cls(float(theta), unit[:, 2], np.arctan2(unit[:, 1], unit[:, 0]))


def _spinor(eta: float, phi: float, sign: int) -> np.ndarray:
    """Qubit state with Bloch vector ``sign * (sqrt(1-eta^2) cos phi, ..., eta)``."""
    up = np.sqrt((1 + sign * eta) / 2) * np.exp(-1j * phi / 2)
    down = sign * np.sqrt((1 - sign * eta) / 2) * np.exp(1j * phi / 2)
    return np.array([up, down])


def ejm_basis(theta: float) -> list[np.ndarray]:
    """Four orthonormal two-qubit vectors of the entangled family at ``theta``."""
    params = EjmParams.from_theta(theta)
    a = (np.sqrt(3) + np.exp(1j * theta)) / (2 * np.sqrt(2))
    b = (np.sqrt(3) - np.exp(1j * theta)) / (2 * np.sqrt(2))
    out = []
    for eta, phi in zip(params.eta, params.phi):
        plus, minus = _spinor(eta, phi, +1), _spinor(eta, phi, -1)
        out.append(a * np.kron(plus, minus) + b * np.kron(minus, plus))
    return out


def ejm_povm(theta: float) -> Povm:
    """Qubit POVM ``Tr_A[|Phi_x><Phi_x|] / 2`` from the basis at ``theta``."""
    return Povm(tuple(herm(partial_trace(proj(v), [2, 2], [1])) / 2 for v in ejm_basis(theta)))


# ---------------------------------------------------------------- QRNG

OUTCOMES = ("00", "01", "10", "11")


@dataclass(frozen=True)
class QrngModel:
    """Single photon on a balanced beam splitter, detectors of efficiency ``mu``.

    Modes are truncated to photon numbers {0, 1}; the system is mode 1 (x)
    mode 2. ``impl`` orders factors as (1, 2 | 1', 2'); ``projectors_1122``
    holds the same projectors in the order 1, 1', 2, 2'.
    """

    mu: float
    state: np.ndarray
    povm: Povm
    impl: ProjImpl
    projectors_1122: tuple
    ancilla_mode_state: np.ndarray


def qrng_model(mu: float) -> QrngModel:
    if not 0.0 <= mu <= 1.0:
        raise InvalidInput(f"mu={mu} outside [0, 1]")
    one = proj([0, 1])
    eye = np.eye(2)
    state = (np.kron([0, 1], [1, 0]) + np.kron([1, 0], [0, 1])) / np.sqrt(2)
    click = mu * one
    path = [eye - click, click]
    povm = Povm(tuple(np.kron(path[x], path[y]) for x in (0, 1) for y in (0, 1)), OUTCOMES)
    pi1 = np.kron(one, one)  # on D (x) D'
    pi_path = [np.eye(4) - pi1, pi1]
    sigma = np.diag([1 - mu, mu]).astype(complex)
    proj_1122 = tuple(np.kron(pi_path[x], pi_path[y]) for x in (0, 1) for y in (0, 1))
    # (1, 1', 2, 2') -> (1, 2, 1', 2')
    projectors = tuple(permute_subsystems(p, [2, 2, 2, 2], [0, 2, 1, 3]) for p in proj_1122)
    impl = ProjImpl(4, 4, projectors, np.kron(sigma, sigma))
    return QrngModel(float(mu), state.astype(complex), povm, impl, proj_1122, sigma)


def f_of_mu(mu: float, tol: float = 1e-8) -> float:
    """Eve's guessing probability when the implementation is fixed to the
    threshold-detector dilation and she purifies the ancillas."""
    model = qrng_model(mu)
    joint = kron(proj(model.state), model.ancilla_mode_state, model.ancilla_mode_state)  # 1 2 1' 2'
    joint = permute_subsystems(joint, [2, 2, 2, 2], [0, 2, 1, 3])  # 1 1' 2 2'
    psi, de = purify(joint)
    measured = Povm(model.projectors_1122)
    steered = steer(psi, (16, de), 0, measured)
    value, _ = discriminate_ensemble([p * s for p, s in steered], tol)
    return value


def pq_of_mu(mu: float, tol: float = 1e-8) -> float:
    """Eve's guessing probability when she also picks the implementation."""
    model = qrng_model(mu)
    return pguess_pure_povm(model.state, model.povm, tol).value


def default_mu_grid() -> np.ndarray:
    return np.round(np.linspace(0.0, 1.0, 21), 12)


@dataclass
class CurveRow:
    mu: float
    f_mu: float
    pguess_q: float


def curve(mu_grid=None, tol: float = 1e-8) -> list[CurveRow]:
    grid = default_mu_grid() if mu_grid is None else [float(m) for m in mu_grid]
    return [CurveRow(float(m), f_of_mu(m, tol), pq_of_mu(m, tol)) for m in grid]


def curve_monotone(rows: list[CurveRow], slack: float = 1e-7) -> dict[str, bool]:
    """Whether each column is weakly decreasing along the grid."""
    f = np.array([r.f_mu for r in rows])
    q = np.array([r.pguess_q for r in rows])
    return {"f_mu": bool(np.all(np.diff(f) <= slack)), "pguess_q": bool(np.all(np.diff(q) <= slack))}


def curve_csv(rows: list[CurveRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["mu", "f_mu", "pguess_q"])
    for r in rows:
        w.writerow([f"{r.mu:.9g}", f"{r.f_mu:.9g}", f"{r.pguess_q:.9g}"])
    return buf.getvalue()
