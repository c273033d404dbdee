"""Dense complex linear algebra on small Hilbert spaces.

Vectors and operators are plain ``numpy`` arrays of dtype ``complex128``.
Every comparison uses absolute tolerances: all matrices handled here have
entries of magnitude at most one.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_TOL = 1e-9


def as_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=complex)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"expected a non-empty 1-D vector, got shape {arr.shape}")
    return arr


def as_matrix(m) -> np.ndarray:
    arr = np.asarray(m, dtype=complex)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
    return arr


def is_hermitian(m, tol: float = DEFAULT_TOL) -> bool:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        return False
    return bool(np.max(np.abs(m - m.conj().T)) <= tol)


def _require_hermitian(m, tol):
    m = as_matrix(m)
    if not is_hermitian(m, tol):
        raise ValueError("matrix is not Hermitian within tolerance")
    return m


def ket_bra(u, v=None) -> np.ndarray:
    """Outer product ``|u><v|`` (``|u><u|`` when ``v`` is omitted)."""
    u = as_vector(u)
    v = u if v is None else as_vector(v)
    return np.outer(u, v.conj())


def expectation_value(op, psi) -> float:
    """Real part of ``<psi|op|psi>``."""
    psi = as_vector(psi)
    return float(np.real(np.vdot(psi, as_matrix(op) @ psi)))


def tensor_product(a, b) -> np.ndarray:
    """Kronecker product; entry ``(i1 i2, j1 j2)`` equals ``a[i1, j1] * b[i2, j2]``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    return np.kron(a, b)


def partial_trace(rho, dims: Sequence[int], keep: int) -> np.ndarray:
    """Reduced operator on factor ``keep`` (0 or 1) of a bipartite operator.

    Parameters
    ----------
    rho : array_like
        Operator on ``H_0 (x) H_1`` of shape ``(d0*d1, d0*d1)``.
    dims : (int, int)
        Factor dimensions ``(d0, d1)``.
    keep : int
        Index of the factor to keep; the other one is traced out.
    """
    rho = as_matrix(rho)
    if len(dims) != 2:
        raise ValueError("partial_trace supports exactly two factors")
    d0, d1 = (int(d) for d in dims)
    if d0 < 1 or d1 < 1 or rho.shape != (d0 * d1, d0 * d1):
        raise ValueError(
            f"operator of shape {rho.shape} does not match factor dims {(d0, d1)}"
        )
    t = rho.reshape(d0, d1, d0, d1)
    if keep == 0:
        return np.einsum("ijkj->ik", t)
    if keep == 1:
        return np.einsum("ijil->jl", t)
    raise ValueError(f"keep must be 0 or 1, got {keep}")


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending distinct eigenvalues with their (possibly degenerate) projectors."""

    eigenvalues: tuple
    projectors: tuple

    @property
    def degeneracies(self) -> tuple:
        return tuple(int(round(np.real(np.trace(p)))) for p in self.projectors)

    def reassemble(self) -> np.ndarray:
        return sum(lam * p for lam, p in zip(self.eigenvalues, self.projectors))


def spectral_decompose(h, tol: float = DEFAULT_TOL) -> SpectralDecomposition:
    """Spectral decomposition of a Hermitian matrix.

    Eigenvalues closer than ``tol`` to their predecessor are merged into a
    single degenerate eigenspace; the reported eigenvalue is the mean of the
    merged group.
    """
    h = _require_hermitian(h, tol)
    h = (h + h.conj().T) / 2
    vals, vecs = np.linalg.eigh(h)
    groups = [[0]]
    for i in range(1, len(vals)):
        if vals[i] - vals[groups[-1][-1]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    eigenvalues = []
    projectors = []
    for idx in groups:
        eigenvalues.append(float(np.mean(vals[idx])))
        cols = vecs[:, idx]
        projectors.append(cols @ cols.conj().T)
    return SpectralDecomposition(tuple(eigenvalues), tuple(projectors))


def is_psd(m, tol: float = DEFAULT_TOL) -> bool:
    """True iff the smallest eigenvalue of Hermitian ``m`` is at least ``-tol``."""
    m = _require_hermitian(m, tol)
    return bool(np.linalg.eigvalsh((m + m.conj().T) / 2)[0] >= -tol)


def check_projector_family(projectors, tol: float = 1e-10) -> None:
    """Raise ``ValueError`` unless the projectors are Hermitian, idempotent,
    mutually orthogonal and sum to the identity."""
    if not projectors:
        raise ValueError("empty projector family")
    dim = projectors[0].shape[0]
    total = np.zeros((dim, dim), dtype=complex)
    for i, p in enumerate(projectors):
        if p.shape != (dim, dim):
            raise ValueError(f"projector {i} has shape {p.shape}, expected {(dim, dim)}")
        if not is_hermitian(p, tol):
            raise ValueError(f"projector {i} is not Hermitian")
        if np.max(np.abs(p @ p - p)) > tol:
            raise ValueError(f"projector {i} is not idempotent")
        for j in range(i):
            if np.max(np.abs(p @ projectors[j])) > tol:
                raise ValueError(f"projectors {j} and {i} are not orthogonal")
        total += p
    if np.max(np.abs(total - np.eye(dim))) > tol:
        raise ValueError("projectors do not sum to the identity")


def max_abs(m) -> float:
    return float(np.max(np.abs(np.asarray(m))))


def random_unit_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (m + m.conj().T) / 2


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
