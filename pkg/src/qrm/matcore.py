"""Dense complex linear algebra for small operators.

Matrices are plain ``numpy`` complex arrays. Subsystems of a tensor product
are indexed left to right, so ``kron(a, b)`` has ``a`` as subsystem 0.
"""

from __future__ import annotations

from functools import reduce
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

CMatrix = np.ndarray

DEFAULT_TOL = 1e-9


def as_cmatrix(m) -> CMatrix:
    return np.asarray(m, dtype=complex)


def dag(m: CMatrix) -> CMatrix:
    return np.conj(m).T


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def proj(v) -> CMatrix:
    v = np.asarray(v, dtype=complex).ravel()
    return np.outer(v, v.conj())


def kron(*mats) -> CMatrix:
    """Kronecker product of any number of factors, left to right."""
    if not mats:
        raise ValueError("kron needs at least one factor")
    return reduce(np.kron, (np.asarray(m) for m in mats))


def herm(m: CMatrix) -> CMatrix:
    """Hermitian part (m + m^dagger) / 2."""
    return 0.5 * (m + dag(m))


def is_hermitian(m: CMatrix, tol: float = DEFAULT_TOL) -> bool:
    m = np.asarray(m)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.max(np.abs(m - dag(m)), initial=0.0) <= tol


def is_psd(m: CMatrix, tol: float = DEFAULT_TOL) -> bool:
    if not is_hermitian(m, tol):
        return False
    return np.linalg.eigvalsh(herm(m)).min(initial=0.0) >= -tol


def is_unitary(m: CMatrix, tol: float = DEFAULT_TOL) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    return np.max(np.abs(dag(m) @ m - np.eye(m.shape[0])), initial=0.0) <= tol


def is_projector(m: CMatrix, tol: float = DEFAULT_TOL) -> bool:
    return is_hermitian(m, tol) and np.max(np.abs(m @ m - m), initial=0.0) <= tol


def _check_dims(m: CMatrix, dims: Sequence[int]) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if int(np.prod(dims)) != m.shape[0]:
        raise ValueError(f"subsystem dims {list(dims)} do not multiply to {m.shape[0]}")


def partial_trace(m: CMatrix, dims: Sequence[int], traced: Iterable[int]) -> CMatrix:
    """Trace out the subsystems listed in ``traced``.

    Remaining subsystems keep their relative order.
    """
    m = np.asarray(m)
    dims = [int(d) for d in dims]
    _check_dims(m, dims)
    traced = sorted(set(traced))
    n = len(dims)
    if any(i < 0 or i >= n for i in traced):
        raise ValueError(f"traced indices {traced} out of range for {n} subsystems")
    kept = [i for i in range(n) if i not in traced]
    t = m.reshape(dims + dims)
    # einsum labels: row indices 0..n-1, column indices n..2n-1; traced pairs share a label
    row = list(range(n))
    col = [i if i in traced else n + i for i in range(n)]
    out = [i for i in kept] + [n + i for i in kept]
    r = np.einsum(t, row + col, out)
    dk = int(np.prod([dims[i] for i in kept])) if kept else 1
    return r.reshape(dk, dk)


def permute_subsystems(m: CMatrix, dims: Sequence[int], order: Sequence[int]) -> CMatrix:
    """Reorder tensor factors so that new subsystem k is old subsystem ``order[k]``.

    Accepts square matrices and vectors.
    """
    m = np.asarray(m)
    dims = [int(d) for d in dims]
    n = len(dims)
    if sorted(order) != list(range(n)):
        raise ValueError(f"{order} is not a permutation of {n} subsystems")
    if m.ndim == 1:
        if m.shape[0] != int(np.prod(dims)):
            raise ValueError("vector length does not match dims")
        return m.reshape(dims).transpose(order).reshape(-1)
    _check_dims(m, dims)
    t = m.reshape(dims + dims).transpose(list(order) + [n + i for i in order])
    return t.reshape(m.shape)


def eigh(h: CMatrix, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, CMatrix]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues in descending order."""
    h = np.asarray(h)
    if not is_hermitian(h, tol):
        raise ValueError("eigh requires a Hermitian matrix")
    w, v = np.linalg.eigh(herm(h))
    return w[::-1].copy(), v[:, ::-1].copy()


def psd_sqrt(h: CMatrix, tol: float = DEFAULT_TOL) -> CMatrix:
    """Principal square root of a PSD matrix."""
    w, v = eigh(h, tol)
    if w.size and w[-1] < -tol:
        raise ValueError(f"matrix has negative eigenvalue {w[-1]:.3e}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ dag(v)


def unitary_completion(isometry: CMatrix, tol: float = DEFAULT_TOL) -> CMatrix:
    """Extend orthonormal columns to a square unitary.

    The leading columns of the result are the input columns, untouched; the
    rest is an orthonormal basis of their complement.
    """
    v = np.asarray(isometry, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    n, k = v.shape
    if k > n:
        raise ValueError("more columns than rows")
    if np.max(np.abs(dag(v) @ v - np.eye(k)), initial=0.0) > tol:
        raise ValueError("input columns are not orthonormal")
    if k == n:
        return v.copy()
    comp = scipy.linalg.null_space(dag(v))
    return np.hstack([v, comp])


def trace_norm(m: CMatrix) -> float:
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    if is_hermitian(m, 1e-12):
        return float(np.abs(np.linalg.eigvalsh(herm(m))).sum())
    return float(np.linalg.svd(m, compute_uv=False).sum())


def random_unitary(dim: int, rng: np.random.Generator) -> CMatrix:
    """Haar-random unitary via QR of a Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(dim: int, rng: np.random.Generator) -> CMatrix:
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return herm(z)


def random_state_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> CMatrix:
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ dag(g)
    return rho / np.trace(rho).real
