"""Dense complex-matrix helpers.

Every matrix function goes through an explicit eigendecomposition. Hermitian
inputs use ``numpy.linalg.eigh``; unitary inputs use a complex Schur form,
which is diagonal for normal matrices up to roundoff.
"""
from __future__ import annotations

import warnings
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import (
    BranchWarning,
    ConvergenceError,
    NotHermitianError,
    NotPSDError,
    NotUnitaryError,
    ShapeError,
)

HERM_TOL = 1e-10
UNIT_TOL = 1e-10
PSD_TOL = 1e-10
BRANCH_GAP = 1e-8


def as_square(a) -> np.ndarray:
    """Return ``a`` as a finite square complex array."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ShapeError("matrix has non-finite entries")
    return m


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


def is_hermitian(a, tol: float = HERM_TOL) -> bool:
    m = np.asarray(a)
    scale = np.linalg.norm(m)
    return np.linalg.norm(m - m.conj().T) <= tol * max(scale, 1e-300) or scale == 0.0


def as_hermitian(a, tol: float = HERM_TOL) -> np.ndarray:
    """Validate the Hermitian invariant and return the symmetrized matrix."""
    m = as_square(a)
    if not is_hermitian(m, tol):
        raise NotHermitianError("matrix is not Hermitian within tolerance")
    return hermitize(m)


def is_unitary(u, tol: float = UNIT_TOL) -> bool:
    m = np.asarray(u)
    d = m.shape[0]
    return np.linalg.norm(m.conj().T @ m - np.eye(d)) <= tol * np.sqrt(d)


def as_unitary(u, tol: float = UNIT_TOL) -> np.ndarray:
    m = as_square(u)
    if not is_unitary(m, tol):
        raise NotUnitaryError("matrix is not unitary within tolerance")
    return m


def eig_hermitian(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in ascending order and the unitary of eigenvectors (columns)."""
    m = as_hermitian(a)
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceError(str(exc)) from exc
    return w, v


def from_eig(w, v) -> np.ndarray:
    """Rebuild ``V diag(w) V^dagger``."""
    return (v * w) @ v.conj().T


def hermitian_function(a, f) -> np.ndarray:
    w, v = eig_hermitian(a)
    return hermitize(from_eig(f(w), v))


def unitary_eigenphases(u) -> tuple[np.ndarray, np.ndarray]:
    """Eigenphases in (-pi, pi] and the unitary of eigenvectors of a unitary."""
    m = as_unitary(u, tol=1e-8)
    t, z = sla.schur(m, output="complex")
    phases = np.angle(np.diag(t))
    phases = np.where(phases <= -np.pi, np.pi, phases)
    return phases, z


def matrix_log_unitary(u, branch_gap: float = BRANCH_GAP) -> np.ndarray:
    """Principal Hermitian logarithm ``H = i log U`` so that ``exp(-iH) = U``.

    Eigenphases are taken in (-pi, pi]. A ``BranchWarning`` is issued when an
    eigenphase lies within ``branch_gap`` of the cut at -pi.
    """
    phases, z = unitary_eigenphases(u)
    if np.any(np.pi - np.abs(phases) < branch_gap):
        warnings.warn("eigenphase next to the branch cut of the logarithm", BranchWarning, stacklevel=2)
    return hermitize(from_eig(-phases, z))


def matrix_exp_skewh(h, t: float = 1.0) -> np.ndarray:
    """``exp(-i H t)`` for Hermitian ``H``."""
    w, v = eig_hermitian(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def matrix_sqrt_psd(a, psd_tol: float = PSD_TOL) -> np.ndarray:
    """Square root of a PSD matrix; eigenvalues above ``-psd_tol`` are clamped."""
    w, v = eig_hermitian(a)
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    if np.any(w < -psd_tol * scale):
        raise NotPSDError(f"smallest eigenvalue {w.min():.3e} below tolerance")
    return hermitize(from_eig(np.sqrt(np.clip(w, 0.0, None)), v))


class Norms(NamedTuple):
    hs: float
    op: float
    trace_norm: float


def norms(a) -> Norms:
    """Hilbert-Schmidt, operator and trace norm from the singular values."""
    m = as_square(a)
    s = np.linalg.svd(m, compute_uv=False)
    return Norms(float(np.sqrt(np.sum(s**2))), float(s[0]) if s.size else 0.0, float(np.sum(s)))


def hs_norm(a) -> float:
    return float(np.linalg.norm(a))


def op_norm(a) -> float:
    return float(np.linalg.norm(np.asarray(a), 2))


def commutator(a, b) -> np.ndarray:
    return a @ b - b @ a


def kron(*ops) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, as_square(op))
    return out


def _check_dims(n: int, dims: Sequence[int]) -> list[int]:
    dims = [int(x) for x in dims]
    if any(x < 1 for x in dims) or int(np.prod(dims)) != n:
        raise ShapeError(f"subsystem dims {dims} do not multiply to {n}")
    return dims


def partial_trace(a, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    ``keep`` may be an int or an iterable of subsystem indices; the kept
    factors stay in their original order.
    """
    m = as_square(a)
    dims = _check_dims(m.shape[0], dims)
    keep = sorted({int(keep)} if np.isscalar(keep) else {int(k) for k in keep})
    n = len(dims)
    if any(k < 0 or k >= n for k in keep):
        raise ShapeError(f"keep indices {keep} out of range for {n} subsystems")
    t = m.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # contract traced axes pairwise, highest index first so positions stay valid
    cur = n
    for i in reversed(traced):
        t = np.trace(t, axis1=i, axis2=i + cur)
        cur -= 1
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(dk, dk)


def embed(op, sites: Sequence[int], dims: Sequence[int]) -> np.ndarray:
    """Act with ``op`` on the listed subsystems and with the identity elsewhere."""
    dims = [int(x) for x in dims]
    sites = [int(s) for s in sites]
    if len(set(sites)) != len(sites) or any(s < 0 or s >= len(dims) for s in sites):
        raise ShapeError(f"invalid sites {sites}")
    m = as_square(op)
    local = [dims[s] for s in sites]
    if m.shape[0] != int(np.prod(local)):
        raise ShapeError("operator size does not match the selected subsystems")
    rest = [i for i in range(len(dims)) if i not in sites]
    drest = int(np.prod([dims[i] for i in rest])) if rest else 1
    full = np.kron(m, np.eye(drest))
    # full acts on ordering sites + rest; permute back to natural order
    order = sites + rest
    n = len(dims)
    shape = [dims[i] for i in order]
    t = full.reshape(shape + shape)
    inv = np.argsort(order)
    t = t.transpose(list(inv) + [n + i for i in inv])
    d = int(np.prod(dims))
    return t.reshape(d, d)
