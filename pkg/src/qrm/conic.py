"""Small semidefinite programs over Hermitian matrix variables.

A problem is written in terms of :class:`Affine` expressions, i.e.
Hermitian-matrix-valued affine functions of the variables. Each Hermitian
``n x n`` variable is stored through ``n**2`` real coordinates (diagonal,
real and imaginary parts of the strict upper triangle). Complex PSD blocks
are lowered to real symmetric ones with :func:`embed_hermitian`, and the
resulting real cone program is handed to the CVXOPT interior-point solver.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from cvxopt import matrix as cvx_matrix
from cvxopt import solvers as cvx_solvers

from .matcore import CMatrix, herm

DEFAULT_SDP_TOL = 1e-8


def hermitian_basis(n: int, real: bool = False) -> np.ndarray:
    """Coordinate basis of n x n Hermitian (or real symmetric) matrices.

    Shape ``(n_params, n, n)``. The coordinates of ``H`` are its diagonal
    entries, then ``Re H[i, j]`` and (complex case) ``Im H[i, j]`` for i < j.
    """
    mats = []
    for i in range(n):
        b = np.zeros((n, n), dtype=complex)
        b[i, i] = 1.0
        mats.append(b)
    for i in range(n):
        for j in range(i + 1, n):
            b = np.zeros((n, n), dtype=complex)
            b[i, j] = b[j, i] = 1.0
            mats.append(b)
    if not real:
        for i in range(n):
            for j in range(i + 1, n):
                b = np.zeros((n, n), dtype=complex)
                b[i, j] = 1j
                b[j, i] = -1j
                mats.append(b)
    return np.array(mats).reshape(len(mats), n, n)


def hermitian_coords(h: CMatrix, real: bool = False) -> np.ndarray:
    """Inverse of :func:`hermitian_basis`: coordinates of a Hermitian matrix."""
    h = np.asarray(h)
    n = h.shape[0]
    iu = np.triu_indices(n, 1)
    parts = [np.diag(h).real, h[iu].real]
    if not real:
        parts.append(h[iu].imag)
    return np.concatenate(parts)


def embed_hermitian(h: CMatrix) -> np.ndarray:
    """Real symmetric embedding ``[[X, -Y], [Y, X]]`` of ``H = X + iY``."""
    h = np.asarray(h)
    x, y = h.real, h.imag
    return np.block([[x, -y], [y, x]])


def unembed_hermitian(s: np.ndarray) -> CMatrix:
    """Project a real symmetric 2n x 2n matrix back onto a Hermitian n x n one.

    Exact inverse of :func:`embed_hermitian` on its range; for other inputs it
    returns the Hermitian matrix whose embedding is the nearest structured
    matrix, which is PSD whenever ``s`` is.
    """
    s = np.asarray(s, dtype=float)
    n = s.shape[0] // 2
    a, b, c, d = s[:n, :n], s[:n, n:], s[n:, :n], s[n:, n:]
    return 0.5 * (a + d) + 0.5j * (c - b)


@dataclass(frozen=True)
class Variable:
    name: str
    dim: int
    real: bool = False
    psd: bool = True

    @property
    def basis(self) -> np.ndarray:
        return hermitian_basis(self.dim, self.real)

    @property
    def n_params(self) -> int:
        return self.dim * self.dim if not self.real else self.dim * (self.dim + 1) // 2


class Affine:
    """Hermitian-matrix-valued affine function of the problem variables.

    ``value = const + sum_v sum_k x[v, k] * terms[v][k]`` where ``x[v, k]``
    are the real coordinates of variable ``v``.
    """

    __array_priority__ = 100

    def __init__(self, const: CMatrix, terms: Mapping[str, np.ndarray] | None = None):
        self.const = np.asarray(const, dtype=complex)
        if self.const.ndim == 0:
            self.const = self.const.reshape(1, 1)
        self.terms = {k: np.asarray(v, dtype=complex) for k, v in (terms or {}).items()}

    @property
    def dim(self) -> int:
        return self.const.shape[0]

    @classmethod
    def constant(cls, m) -> "Affine":
        return cls(np.asarray(m, dtype=complex))

    @staticmethod
    def lift(other, dim: int) -> "Affine":
        if isinstance(other, Affine):
            return other
        other = np.asarray(other, dtype=complex)
        if other.ndim == 0:
            other = other * np.eye(dim)
        return Affine(other)

    def _map(self, fn) -> "Affine":
        return Affine(fn(self.const[None])[0], {k: fn(v) for k, v in self.terms.items()})

    def __add__(self, other) -> "Affine":
        other = Affine.lift(other, self.dim)
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch {self.dim} vs {other.dim}")
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms[k] + v if k in terms else v
        return Affine(self.const + other.const, terms)

    __radd__ = __add__

    def __neg__(self) -> "Affine":
        return self * -1.0

    def __sub__(self, other) -> "Affine":
        return self + (-Affine.lift(other, self.dim))

    def __rsub__(self, other) -> "Affine":
        return Affine.lift(other, self.dim) + (-self)

    def __mul__(self, scalar) -> "Affine":
        s = float(scalar)
        return self._map(lambda a: a * s)

    __rmul__ = __mul__

    def sandwich(self, left: CMatrix, right: CMatrix | None = None) -> "Affine":
        """``left @ E @ right`` (``right`` defaults to ``left^dagger``)."""
        left = np.asarray(left, dtype=complex)
        right = np.conj(left).T if right is None else np.asarray(right, dtype=complex)
        return self._map(lambda a: left[None] @ a @ right[None])

    def kron(self, m: CMatrix, left: bool = False) -> "Affine":
        """``E (x) m`` (or ``m (x) E`` with ``left=True``) for a constant ``m``."""
        m = np.asarray(m, dtype=complex)

        def op(a):
            p = a.shape[0]
            if left:
                out = np.einsum("ij,pkl->pikjl", m, a)
            else:
                out = np.einsum("pij,kl->pikjl", a, m)
            d = a.shape[1] * m.shape[0]
            return out.reshape(p, d, d)

        return self._map(op)

    def trace(self) -> "Affine":
        return self._map(lambda a: np.trace(a, axis1=1, axis2=2)[:, None, None])

    def inner(self, c: CMatrix) -> "Affine":
        """Scalar expression ``Tr[c E]``."""
        c = np.asarray(c, dtype=complex)
        return self._map(lambda a: np.einsum("ij,pji->p", c, a)[:, None, None])

    def entry(self, i: int, j: int) -> "Affine":
        return self._map(lambda a: a[:, i : i + 1, j : j + 1])

    def substitute(self, var: str, new_var: str, jac: np.ndarray) -> "Affine":
        """Replace coordinates of ``var`` by ``jac @ coordinates of new_var``."""
        terms = {k: v for k, v in self.terms.items() if k != var}
        if var in self.terms:
            terms[new_var] = np.einsum("kq,kij->qij", jac, self.terms[var])
        return Affine(self.const, terms)

    def value(self, coords: Mapping[str, np.ndarray]) -> CMatrix:
        out = self.const.copy()
        for k, v in self.terms.items():
            out = out + np.einsum("p,pij->ij", coords[k], v)
        return out


def _is_real(e: Affine, tol: float = 1e-14) -> bool:
    if np.max(np.abs(e.const.imag), initial=0.0) > tol:
        return False
    return all(np.max(np.abs(v.imag), initial=0.0) <= tol for v in e.terms.values())


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class SdpProblem:
    """Conic program over Hermitian matrix variables.

    Equalities are scalar: ``expr == rhs`` with ``expr`` a 1 x 1 Affine.
    Matrix equalities are expanded into scalar ones over Hermitian coordinates.
    """

    sense: str = "max"
    variables: dict[str, Variable] = field(default_factory=dict)
    equalities: list[tuple[Affine, float]] = field(default_factory=list)
    psd_constraints: list[Affine] = field(default_factory=list)
    objective: Affine = field(default_factory=lambda: Affine.constant(0.0))

    def variable(self, name: str, dim: int, *, real: bool = False, psd: bool = True) -> Affine:
        if name in self.variables:
            raise ValueError(f"duplicate variable {name!r}")
        v = Variable(name, int(dim), real, psd)
        self.variables[name] = v
        return Affine(np.zeros((v.dim, v.dim)), {name: v.basis})

    def var(self, name: str) -> Affine:
        v = self.variables[name]
        return Affine(np.zeros((v.dim, v.dim)), {name: v.basis})

    def add_equality(self, lhs, rhs: float) -> None:
        """``lhs == rhs``; ``lhs`` is a scalar Affine or a map ``name -> A``
        read as ``sum_k Re Tr[A_k X_k]``."""
        if not isinstance(lhs, Affine):
            expr = Affine.constant(0.0)
            for name, a in lhs.items():
                expr = expr + self.var(name).inner(herm(np.asarray(a, dtype=complex)))
            lhs = expr
        if lhs.dim != 1:
            raise ValueError("scalar equality needs a 1 x 1 expression")
        self.equalities.append((lhs, float(np.real(rhs))))

    def add_matrix_equality(self, lhs: Affine, rhs) -> None:
        """Hermitian matrix equality, expanded over Hermitian coordinates."""
        rhs = np.asarray(Affine.lift(rhs, lhs.dim).const)
        n = lhs.dim
        diff = lhs - rhs
        for i in range(n):
            self.add_equality(diff.entry(i, i), 0.0)
        real = _is_real(diff)
        for i in range(n):
            for j in range(i + 1, n):
                e = diff.entry(i, j)
                self.add_equality(_real_part(e), 0.0)
                if not real:
                    self.add_equality(_imag_part(e), 0.0)

    def add_psd(self, expr: Affine) -> None:
        self.psd_constraints.append(expr)

    def maximize(self, expr: Affine) -> None:
        self._set_objective(expr, "max")

    def minimize(self, expr: Affine) -> None:
        self._set_objective(expr, "min")

    def _set_objective(self, expr: Affine, sense: str) -> None:
        if expr.dim != 1:
            raise ValueError("objective must be a scalar expression")
        self.objective = expr
        self.sense = sense

    def all_psd_constraints(self) -> list[Affine]:
        own = [self.var(v.name) for v in self.variables.values() if v.psd]
        return own + list(self.psd_constraints)

    def check(self) -> None:
        """Raise ``ValueError`` on a malformed problem."""
        if self.sense not in ("max", "min"):
            raise ValueError(f"unknown sense {self.sense!r}")
        exprs = [self.objective] + [e for e, _ in self.equalities] + self.psd_constraints
        for e in exprs:
            for name, t in e.terms.items():
                if name not in self.variables:
                    raise ValueError(f"expression references unknown variable {name!r}")
                v = self.variables[name]
                if t.shape[0] != v.n_params:
                    raise ValueError(f"coefficients for {name!r} have wrong size")
        for e in self.psd_constraints:
            if np.max(np.abs(e.const - e.const.conj().T), initial=0.0) > 1e-12:
                raise ValueError("PSD constraint with non-Hermitian constant")


def _real_part(e: Affine) -> Affine:
    return e._map(lambda a: a.real.astype(complex))


def _imag_part(e: Affine) -> Affine:
    return e._map(lambda a: a.imag.astype(complex))


def embed_complex(p: SdpProblem) -> SdpProblem:
    """Equivalent problem with only real symmetric variables.

    A Hermitian ``n x n`` variable ``H`` becomes a real symmetric ``2n x 2n``
    variable ``S``; everywhere ``H`` appeared, the problem now reads
    ``unembed_hermitian(S)``. Linear functionals ``Tr[C H]`` therefore equal
    ``Tr[embed(C) S] / 2``, so objective and equality values are preserved.
    Complex PSD constraints become real constraints of twice the size.
    """
    p.check()
    q = SdpProblem(sense=p.sense)
    jacs: dict[str, tuple[str, np.ndarray]] = {}
    for v in p.variables.values():
        if v.real:
            q.variables[v.name] = v
            continue
        new = Variable(v.name, 2 * v.dim, real=True, psd=v.psd)
        # column q: Hermitian coordinates of unembed(basis_q)
        jac = np.array([hermitian_coords(unembed_hermitian(b.real)) for b in new.basis]).T
        q.variables[v.name] = new
        jacs[v.name] = (v.name, jac)

    def convert(e: Affine) -> Affine:
        for name, (new_name, jac) in jacs.items():
            e = e.substitute(name, new_name, jac)
        return e

    q.objective = convert(p.objective)
    q.equalities = [(convert(e), b) for e, b in p.equalities]
    for e in p.psd_constraints:
        e = convert(e)
        if _is_real(e):
            q.psd_constraints.append(e)
        else:
            q.psd_constraints.append(e._map(lambda a: np.array([embed_hermitian(x) for x in a]).astype(complex)))
    return q


@dataclass
class SdpSolution:
    status: Status
    values: dict[str, CMatrix]
    primal_objective: float
    dual_objective: float
    gap: float
    residual: float = 0.0
    certificate: dict | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class SolverFailure(RuntimeError):
    """The SDP backend did not return a certified optimum."""

    def __init__(self, message: str, solution: SdpSolution | None = None):
        super().__init__(message)
        self.solution = solution


@dataclass
class _Lowered:
    c: np.ndarray
    c0: float
    A: np.ndarray
    b: np.ndarray
    lin_rows: np.ndarray  # G rows for the nonnegative orthant
    lin_h: np.ndarray
    blocks: list[tuple[np.ndarray, np.ndarray, int]]  # (G block, h block, size)
    offsets: dict[str, tuple[int, int]]
    sign: float


def _lower(p: SdpProblem) -> _Lowered:
    p.check()
    offsets = {}
    n = 0
    for v in p.variables.values():
        offsets[v.name] = (n, v.n_params)
        n += v.n_params

    def row(e: Affine) -> tuple[np.ndarray, float]:
        r = np.zeros(n)
        for name, t in e.terms.items():
            o, k = offsets[name]
            r[o : o + k] += t[:, 0, 0].real
        return r, float(e.const[0, 0].real)

    sign = -1.0 if p.sense == "max" else 1.0
    c, c0 = row(p.objective)

    a_rows, b = [], []
    for e, rhs in p.equalities:
        r, k = row(e)
        a_rows.append(r)
        b.append(rhs - k)
    A = np.array(a_rows).reshape(len(a_rows), n)
    b = np.array(b)

    lin_rows, lin_h, blocks = [], [], []
    for e in p.all_psd_constraints():
        if e.dim == 1:
            r, k = row(e)
            lin_rows.append(-r)
            lin_h.append(k)
            continue
        if not _is_real(e):
            e = e._map(lambda a: np.array([embed_hermitian(x) for x in a]).astype(complex))
        m = e.dim
        g = np.zeros((m * m, n))
        for name, t in e.terms.items():
            o, k = offsets[name]
            # cvxopt stores symmetric blocks column-major
            g[:, o : o + k] = -t.real.transpose(0, 2, 1).reshape(k, m * m).T
        blocks.append((g, e.const.real.T.reshape(-1), m))

    return _Lowered(
        c=sign * c,
        c0=c0,
        A=A,
        b=b,
        lin_rows=np.array(lin_rows).reshape(len(lin_rows), n),
        lin_h=np.array(lin_h),
        blocks=blocks,
        offsets=offsets,
        sign=sign,
    )


def _reduce_equalities(A: np.ndarray, b: np.ndarray, tol: float):
    """Orthonormal row basis for ``A x = b``; flags inconsistent systems."""
    if A.shape[0] == 0:
        return A, b, np.zeros((0, 0)), 0.0
    u, s, _ = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(s > max(A.shape) * s.max(initial=0.0) * 1e-12)) if s.size else 0
    ur = u[:, :rank]
    inconsistency = float(np.linalg.norm(b - ur @ (ur.T @ b)))
    return ur.T @ A, ur.T @ b, ur, inconsistency


def solve_sdp(p: SdpProblem, tol: float = DEFAULT_SDP_TOL, max_iters: int = 200) -> SdpSolution:
    """Solve with CVXOPT's primal-dual interior-point method.

    The solution is accepted as optimal when the recomputed duality gap and
    the primal residuals are both within ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    low = _lower(p)
    n = low.c.size
    A, b, ur, inconsistency = _reduce_equalities(low.A, low.b, tol)
    if inconsistency > tol:
        return SdpSolution(
            Status.INFEASIBLE, {}, np.nan, np.nan, np.inf,
            certificate={"kind": "inconsistent_equalities", "residual": inconsistency},
        )

    g_parts = [low.lin_rows] + [blk[0] for blk in low.blocks]
    h_parts = [low.lin_h] + [blk[1] for blk in low.blocks]
    G = np.vstack(g_parts) if n else np.zeros((0, 0))
    h = np.concatenate(h_parts)
    dims = {"l": int(low.lin_rows.shape[0]), "q": [], "s": [blk[2] for blk in low.blocks]}

    opts = {
        "show_progress": False,
        "maxiters": max_iters,
        "abstol": tol * 1e-2,
        "reltol": tol * 1e-2,
        "feastol": tol * 1e-2,
        "refinement": 2,
    }
    args = [cvx_matrix(low.c), cvx_matrix(G), cvx_matrix(h), dims]
    if A.shape[0]:
        args += [cvx_matrix(A), cvx_matrix(b)]
    try:
        res = cvx_solvers.conelp(*args, options=opts)
    except (ArithmeticError, ValueError) as exc:
        return SdpSolution(Status.NUMERICAL_FAILURE, {}, np.nan, np.nan, np.inf,
                           certificate={"kind": "solver_error", "message": str(exc)})

    status = res["status"]
    iters = int(res.get("iterations", 0))
    if status == "primal infeasible":
        y = np.zeros(low.A.shape[0]) if res["y"] is None else ur @ np.array(res["y"]).ravel()
        cert = {"kind": "dual_ray", "z": np.array(res["z"]).ravel(), "y": y}
        return SdpSolution(Status.INFEASIBLE, {}, np.nan, np.nan, np.inf, certificate=cert, iterations=iters)
    if status == "dual infeasible":
        cert = {"kind": "primal_ray", "x": np.array(res["x"]).ravel()}
        return SdpSolution(Status.UNBOUNDED, {}, np.nan, np.nan, np.inf, certificate=cert, iterations=iters)
    if res["x"] is None:
        return SdpSolution(Status.NUMERICAL_FAILURE, {}, np.nan, np.nan, np.inf, iterations=iters)

    x = np.array(res["x"]).ravel()
    z = np.array(res["z"]).ravel()
    y = np.zeros(0) if res["y"] is None else np.array(res["y"]).ravel()
    primal = float(low.c @ x)
    dual = float(-(h @ z) - (b @ y if b.size else 0.0))
    values = {}
    coords = {}
    for v in p.variables.values():
        o, k = low.offsets[v.name]
        coords[v.name] = x[o : o + k]
        values[v.name] = np.einsum("p,pij->ij", coords[v.name], v.basis)
    residual = primal_residual(p, coords)
    # back to the caller's sense and constant
    primal_obj = low.sign * primal + low.c0
    dual_obj = low.sign * dual + low.c0
    gap = abs(primal_obj - dual_obj)
    ok = status == "optimal" or (gap <= tol and residual <= tol)
    st = Status.OPTIMAL if ok and gap <= tol and residual <= tol else Status.NUMERICAL_FAILURE
    return SdpSolution(st, values, primal_obj, dual_obj, gap, residual=residual,
                       certificate={"kind": "dual_point", "z": z, "y": y}, iterations=iters)


def primal_residual(p: SdpProblem, coords: Mapping[str, np.ndarray]) -> float:
    """Largest equality violation or negative eigenvalue at a primal point."""
    worst = 0.0
    for e, rhs in p.equalities:
        worst = max(worst, abs(e.value(coords)[0, 0].real - rhs))
    for e in p.all_psd_constraints():
        m = herm(e.value(coords))
        worst = max(worst, -float(np.linalg.eigvalsh(m).min()))
    return worst


def check_infeasibility_certificate(p: SdpProblem, cert: Mapping, tol: float = 1e-7) -> dict:
    """Verify a dual improving ray ``(y, z)`` for ``p``.

    Valid means ``z`` lies in the dual cone, ``A^T y + G^T z = 0`` and
    ``b^T y + h^T z < 0`` (Farkas). Quantities are normalized by ``|(y, z)|``;
    ``z`` is first projected onto the cone and stationarity is measured after
    the projection.
    """
    low = _lower(p)
    z = np.asarray(cert["z"], dtype=float).copy()
    y = np.asarray(cert.get("y", np.zeros(low.A.shape[0])), dtype=float)
    G = np.vstack([low.lin_rows] + [blk[0] for blk in low.blocks])
    h = np.concatenate([low.lin_h] + [blk[1] for blk in low.blocks])
    scale = max(float(np.linalg.norm(np.concatenate([y, z]))), 1e-300)
    cone_violation = 0.0
    nl = low.lin_rows.shape[0]
    if nl:
        cone_violation = max(cone_violation, -float(z[:nl].min()))
        z[:nl] = np.clip(z[:nl], 0.0, None)
    o = nl
    for _, _, m in low.blocks:
        blk = z[o : o + m * m].reshape(m, m)
        w, v = np.linalg.eigh(0.5 * (blk + blk.T))
        cone_violation = max(cone_violation, -float(w.min()))
        z[o : o + m * m] = ((v * np.clip(w, 0.0, None)) @ v.T).reshape(-1)
        o += m * m
    stationarity = float(np.linalg.norm(low.A.T @ y + G.T @ z)) / scale
    objective = float(low.b @ y + h @ z) / scale
    return {
        "stationarity": stationarity,
        "cone_violation": cone_violation / scale,
        "objective": objective,
        "valid": stationarity <= tol and objective < -tol,
    }
