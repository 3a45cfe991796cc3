"""States, POVMs, projective implementations and the operations between them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .matcore import (
    DEFAULT_TOL,
    CMatrix,
    dag,
    eigh,
    herm,
    kron,
    partial_trace,
    proj,
    psd_sqrt,
    unitary_completion,
)


class InvalidInput(ValueError):
    """An object failed a validity check required by an operation."""


@dataclass
class ValidationReport:
    """Pass/fail per invariant, each with its residual magnitude."""

    checks: dict[str, tuple[bool, float]] = field(default_factory=dict)

    def add(self, name: str, residual: float, tol: float) -> None:
        self.checks[name] = (bool(residual <= tol), float(residual))

    @property
    def ok(self) -> bool:
        return all(passed for passed, _ in self.checks.values())

    def failures(self) -> list[str]:
        return [name for name, (passed, _) in self.checks.items() if not passed]

    def raise_if_failed(self, what: str = "object") -> None:
        if not self.ok:
            details = ", ".join(f"{k} (residual {self.checks[k][1]:.2e})" for k in self.failures())
            raise InvalidInput(f"invalid {what}: {details}")


@dataclass(frozen=True)
class QState:
    rho: CMatrix

    def __post_init__(self):
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=complex))

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @classmethod
    def pure(cls, vec) -> "QState":
        v = np.asarray(vec, dtype=complex).ravel()
        return cls(proj(v / np.linalg.norm(v)))

    def purity(self) -> float:
        return float(np.trace(self.rho @ self.rho).real)

    def is_pure(self, tol: float = DEFAULT_TOL) -> bool:
        return abs(self.purity() - 1.0) <= tol

    def vector(self, tol: float = DEFAULT_TOL) -> np.ndarray:
        """State vector of a pure state (global phase fixed by eigh)."""
        if not self.is_pure(tol):
            raise InvalidInput("state is not pure")
        w, v = eigh(self.rho)
        return v[:, 0]


@dataclass(frozen=True)
class Povm:
    effects: tuple
    labels: tuple = ()

    def __post_init__(self):
        effects = tuple(np.asarray(e, dtype=complex) for e in self.effects)
        object.__setattr__(self, "effects", effects)
        labels = tuple(self.labels) if self.labels else tuple(range(len(effects)))
        if len(labels) != len(effects):
            raise ValueError("one label per effect required")
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    @property
    def n_outcomes(self) -> int:
        return len(self.effects)

    def __len__(self) -> int:
        return len(self.effects)

    def __getitem__(self, x: int) -> CMatrix:
        return self.effects[x]

    def is_projective(self, tol: float = DEFAULT_TOL) -> bool:
        return all(np.max(np.abs(e @ e - e)) <= tol for e in self.effects)

    def padded(self, n: int) -> "Povm":
        """Append zero effects up to ``n`` outcomes."""
        if n < len(self):
            raise ValueError("cannot pad to fewer outcomes")
        zeros = [np.zeros((self.dim, self.dim), dtype=complex)] * (n - len(self))
        extra = [f"pad{k}" for k in range(n - len(self))]
        labels = list(self.labels) + extra
        return Povm(tuple(self.effects) + tuple(zeros), tuple(labels))


@dataclass(frozen=True)
class ProjImpl:
    """Projective measurement on system (x) ancilla plus an ancilla state."""

    system_dim: int
    ancilla_dim: int
    projectors: tuple
    ancilla_state: CMatrix

    def __post_init__(self):
        object.__setattr__(self, "projectors", tuple(np.asarray(p, dtype=complex) for p in self.projectors))
        object.__setattr__(self, "ancilla_state", np.asarray(self.ancilla_state, dtype=complex))

    def induced_povm(self, labels: Sequence = ()) -> Povm:
        """Effects ``Tr_A[Pi^x (I_S (x) sigma_A)]``."""
        lift = kron(np.eye(self.system_dim), self.ancilla_state)
        dims = [self.system_dim, self.ancilla_dim]
        return Povm(tuple(partial_trace(p @ lift, dims, [1]) for p in self.projectors), tuple(labels))


@dataclass(frozen=True)
class Ensemble:
    """Weighted states; ``states`` may be normalized (weights carry mass) or not."""

    weights: tuple
    states: tuple

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "states", tuple(np.asarray(s, dtype=complex) for s in self.states))

    @classmethod
    def from_subnormalized(cls, taus: Sequence[CMatrix]) -> "Ensemble":
        taus = [np.asarray(t, dtype=complex) for t in taus]
        ws = [float(np.trace(t).real) for t in taus]
        sts = [t / w if w > 1e-15 else np.zeros_like(t) for t, w in zip(taus, ws)]
        return cls(tuple(ws), tuple(sts))

    def subnormalized(self) -> list[CMatrix]:
        return [w * s for w, s in zip(self.weights, self.states)]

    def average(self) -> CMatrix:
        return sum(self.subnormalized())


def validate(obj, tol: float = DEFAULT_TOL, povm: Povm | None = None) -> ValidationReport:
    """Check the invariants of a state, POVM, projective implementation or ensemble.

    For a :class:`ProjImpl`, pass ``povm`` to also check the dilation identity.
    """
    rep = ValidationReport()
    if isinstance(obj, QState):
        r = obj.rho
        rep.add("hermitian", float(np.max(np.abs(r - dag(r)))), tol)
        rep.add("psd", max(0.0, -float(np.linalg.eigvalsh(herm(r)).min())), tol)
        rep.add("unit_trace", abs(np.trace(r) - 1.0), tol)
    elif isinstance(obj, Povm):
        herm_res = max(float(np.max(np.abs(e - dag(e)))) for e in obj.effects)
        psd_res = max(max(0.0, -float(np.linalg.eigvalsh(herm(e)).min())) for e in obj.effects)
        rep.add("hermitian", herm_res, tol)
        rep.add("psd", psd_res, tol)
        rep.add("completeness", float(np.linalg.norm(sum(obj.effects) - np.eye(obj.dim), 2)), tol)
    elif isinstance(obj, ProjImpl):
        d = obj.system_dim * obj.ancilla_dim
        proj_res = max(float(np.max(np.abs(p @ p - p))) for p in obj.projectors)
        herm_res = max(float(np.max(np.abs(p - dag(p)))) for p in obj.projectors)
        rep.add("projectors", max(proj_res, herm_res), tol)
        rep.add("completeness", float(np.linalg.norm(sum(obj.projectors) - np.eye(d), 2)), tol)
        sub = validate(QState(obj.ancilla_state), tol)
        rep.add("ancilla_state", max(res for _, res in sub.checks.values()), tol)
        if povm is not None:
            rep.add("dilation", verify_dilation(obj, povm), tol)
    elif isinstance(obj, Ensemble):
        rep.add("nonnegative_weights", max(0.0, -min(obj.weights)), tol)
        rep.add("weights_sum", abs(sum(obj.weights) - 1.0), tol)
    else:
        raise TypeError(f"cannot validate {type(obj).__name__}")
    return rep


def born(rho: QState | CMatrix, m: Povm) -> np.ndarray:
    """Outcome distribution ``Tr[M^x rho]``."""
    r = rho.rho if isinstance(rho, QState) else np.asarray(rho)
    if r.shape[0] != m.dim:
        raise ValueError(f"state dim {r.shape[0]} does not match POVM dim {m.dim}")
    return np.array([np.trace(e @ r).real for e in m.effects])


def purify(rho: QState | CMatrix, tol: float = 1e-12) -> tuple[np.ndarray, int]:
    """Spectral purification ``sum_k sqrt(l_k) |v_k>|k>``.

    Returns ``(psi, env_dim)`` with ``env_dim`` the numerical rank of rho.
    """
    r = rho.rho if isinstance(rho, QState) else np.asarray(rho, dtype=complex)
    w, v = eigh(r)
    keep = w > tol
    w, v = w[keep], v[:, keep]
    k = len(w)
    psi = sum(np.sqrt(w[i]) * np.kron(v[:, i], np.eye(k)[i]) for i in range(k))
    return np.asarray(psi, dtype=complex), k


def steer(
    psi: np.ndarray, dims: Sequence[int], measured: int, m: Povm, tol: float = 1e-12
) -> list[tuple[float, CMatrix]]:
    """Conditional states on one half of a bipartite pure state.

    Measuring ``m`` on subsystem ``measured`` (0 or 1) of ``psi`` yields, per
    outcome, its probability and the normalized state left on the other side.
    Outcomes with probability below ``tol`` give ``(0.0, zeros)``.
    """
    da, db = dims
    if measured not in (0, 1):
        raise ValueError("measured must be 0 or 1")
    if m.dim != dims[measured]:
        raise ValueError("POVM dimension does not match measured subsystem")
    psi = np.asarray(psi, dtype=complex).ravel()
    if psi.size != da * db:
        raise ValueError("state vector length does not match dims")
    rho = proj(psi)
    other = 1 - measured
    out = []
    for e in m.effects:
        op = kron(e, np.eye(db)) if measured == 0 else kron(np.eye(da), e)
        tau = partial_trace(op @ rho, dims, [measured])
        p = float(np.trace(tau).real)
        if p < tol:
            out.append((0.0, np.zeros((dims[other], dims[other]), dtype=complex)))
        else:
            out.append((p, herm(tau) / p))
    return out


def naimark_from_decomposition(decomp: Sequence[tuple[float, Povm]], tol: float = 1e-9) -> ProjImpl:
    """Projective implementation of a mixture of POVMs.

    The ancilla is ``A1 (x) A2`` with ``dim A1`` = number of outcomes and
    ``dim A2`` = number of branches, prepared in ``|0><0| (x) sum_j p_j |j><j|``.
    The isometry ``|phi,0,j> -> sum_x sqrt(M^{x,j}) |phi,x,j>`` is completed to
    a unitary ``U`` and ``Pi^x = U^dagger (I (x) |x><x| (x) I) U``.
    """
    if not decomp:
        raise InvalidInput("empty decomposition")
    weights = np.array([float(w) for w, _ in decomp])
    povms = [m for _, m in decomp]
    if np.any(weights < -tol) or abs(weights.sum() - 1.0) > tol:
        raise InvalidInput("decomposition weights must be a probability vector")
    d = povms[0].dim
    nx = len(povms[0])
    if any(m.dim != d or len(m) != nx for m in povms):
        raise InvalidInput("branch POVMs must share dimension and outcome count")
    for m in povms:
        validate(m, tol).raise_if_failed("branch POVM")
    nj = len(povms)
    big = d * nx * nj

    def index(k: int, x: int, j: int) -> int:
        return (k * nx + x) * nj + j

    sector = [index(k, 0, j) for k in range(d) for j in range(nj)]
    iso = np.zeros((big, len(sector)), dtype=complex)
    for j, m in enumerate(povms):
        roots = [psd_sqrt(herm(e), tol) for e in m.effects]
        for k in range(d):
            c = k * nj + j
            for x, r in enumerate(roots):
                for kk in range(d):
                    iso[index(kk, x, j), c] += r[kk, k]
    completed = unitary_completion(iso, 1e-8)
    rest = sorted(set(range(big)) - set(sector))
    # U sends the |k,0,j> basis vectors to the isometry columns, the rest to the complement
    u = np.zeros((big, big), dtype=complex)
    u[:, sector] = completed[:, : len(sector)]
    u[:, rest] = completed[:, len(sector) :]
    projectors = []
    for x in range(nx):
        p_anc = kron(np.eye(d), proj(np.eye(nx)[x]), np.eye(nj))
        projectors.append(herm(dag(u) @ p_anc @ u))
    sigma = kron(proj(np.eye(nx)[0]), np.diag(weights).astype(complex))
    return ProjImpl(d, nx * nj, tuple(projectors), sigma)


def verify_dilation(impl: ProjImpl, m: Povm) -> float:
    """``max_x || Tr_A[Pi^x (I (x) sigma_A)] - M^x ||`` (spectral norm)."""
    if impl.system_dim != m.dim or len(impl.projectors) != len(m):
        raise ValueError("implementation and POVM do not match")
    induced = impl.induced_povm()
    return max(float(np.linalg.norm(a - b, 2)) for a, b in zip(induced.effects, m.effects))


def _support(e: CMatrix, tol: float) -> np.ndarray:
    w, v = np.linalg.eigh(herm(e))
    return v[:, w > tol]


def is_extremal_rank_one(m: Povm, tol: float = DEFAULT_TOL) -> bool | None:
    """Linear independence of the rank-one effects of ``m``.

    Returns ``None`` (not applicable) when some nonzero effect has rank > 1.
    """
    ops = []
    for e in m.effects:
        r = _support(e, tol).shape[1]
        if r == 0:
            continue
        if r > 1:
            return None
        ops.append(herm(e).ravel())
    mat = np.array(ops)
    return bool(np.linalg.matrix_rank(mat, tol=tol) == len(ops))


def _perturbation_directions(m: Povm, tol: float) -> tuple[list[np.ndarray], np.ndarray]:
    """Null space of ``{H_x} -> sum_x V_x H_x V_x^dagger``.

    ``V_x`` spans the support of ``M^x``; a nonzero null vector is a direction
    ``D_x = V_x H_x V_x^dagger`` with ``sum_x D_x = 0`` along which ``m`` splits
    into two other POVMs.
    """
    supports = [_support(e, tol) for e in m.effects]
    cols = []
    for v in supports:
        r = v.shape[1]
        for b in _herm_basis(r):
            cols.append((v @ b @ dag(v)).ravel())
    if not cols:
        return supports, np.zeros((0, 0))
    mat = np.array(cols).T
    real = np.vstack([mat.real, mat.imag])
    null = scipy.linalg.null_space(real, rcond=1e-10)
    return supports, null


def _herm_basis(r: int) -> list[np.ndarray]:
    out = []
    for i in range(r):
        for j in range(r):
            b = np.zeros((r, r), dtype=complex)
            if i == j:
                b[i, i] = 1
            elif i < j:
                b[i, j] = b[j, i] = 1
            else:
                b[i, j], b[j, i] = 1j, -1j
            out.append(b)
    return out


def is_extremal(m: Povm, tol: float = 1e-9) -> bool:
    """Extremality in the convex set of POVMs with this outcome set."""
    _, null = _perturbation_directions(m, tol)
    return null.shape[1] == 0


def _max_step(e: CMatrix, d: CMatrix, v: np.ndarray) -> float:
    """Largest s >= 0 with e + s d >= 0, for d supported inside supp(e) = span(v)."""
    if v.shape[1] == 0:
        return np.inf
    er = dag(v) @ e @ v
    dr = dag(v) @ d @ v
    inv_root = np.linalg.inv(psd_sqrt(herm(er), 1e-6))
    w = np.linalg.eigvalsh(herm(inv_root @ dr @ inv_root))
    lo = w.min()
    return np.inf if lo >= 0 else -1.0 / lo


def extremal_decomposition(m: Povm, tol: float = 1e-9, max_depth: int = 64) -> list[tuple[float, Povm]]:
    """Write ``m`` as a convex combination of extremal POVMs.

    Repeatedly splits along a perturbation direction, pushing both halves to
    the boundary of the POVM set; each split lowers the total effect rank, so
    the recursion ends at extremal POVMs.
    """

    def split(povm: Povm, depth: int) -> list[tuple[float, Povm]]:
        supports, null = _perturbation_directions(povm, tol)
        if null.shape[1] == 0 or depth >= max_depth:
            return [(1.0, povm)]
        coeffs = null[:, 0]
        dirs, k = [], 0
        for v in supports:
            r = v.shape[1]
            basis = _herm_basis(r)
            h = sum(c * b for c, b in zip(coeffs[k : k + r * r], basis)) if r else np.zeros((0, 0))
            k += r * r
            dirs.append(v @ h @ dag(v) if r else np.zeros_like(povm.effects[0]))
        s_plus = min(_max_step(e, dd, v) for e, dd, v in zip(povm.effects, dirs, supports))
        s_minus = min(_max_step(e, -dd, v) for e, dd, v in zip(povm.effects, dirs, supports))
        plus = _clean(Povm(tuple(e + s_plus * dd for e, dd in zip(povm.effects, dirs)), povm.labels), tol)
        minus = _clean(Povm(tuple(e - s_minus * dd for e, dd in zip(povm.effects, dirs)), povm.labels), tol)
        # povm = a * plus + (1 - a) * minus
        a = s_minus / (s_plus + s_minus)
        out = [(a * w, p) for w, p in split(plus, depth + 1)]
        out += [((1 - a) * w, p) for w, p in split(minus, depth + 1)]
        return out

    return [(w, p) for w, p in split(m, 0) if w > 1e-14]


def _clean(m: Povm, tol: float) -> Povm:
    """Zero out eigenvalues below ``tol`` so boundary effects lose rank exactly."""
    effects = []
    for e in m.effects:
        w, v = np.linalg.eigh(herm(e))
        w = np.where(w > tol * 10, w, 0.0)
        effects.append((v * w) @ dag(v))
    # restore exact completeness on the largest effect
    resid = np.eye(m.dim) - sum(effects)
    i = int(np.argmax([np.trace(e).real for e in effects]))
    effects[i] = herm(effects[i] + resid)
    return Povm(tuple(effects), m.labels)
