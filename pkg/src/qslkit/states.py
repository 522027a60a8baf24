"""Density matrices, generalized Bloch vectors, entropy and Gibbs states."""
from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from . import matcore
from .errors import DomainError, NotAStateError, NotPSDError, ShapeError

TRACE_TOL = 1e-10
PSD_REPAIR_TOL = 1e-10
BLOCH_PSD_TOL = 1e-8


class DensityMatrix:
    """Unit-trace positive semidefinite Hermitian matrix.

    Small negative eigenvalues (down to ``-1e-10``) are clamped to zero and the
    matrix is renormalized; anything more negative raises ``NotPSDError``.
    The spectrum is computed once, on first use, and cached.
    """

    __slots__ = ("_m", "_eig", "_lock")

    def __init__(self, matrix, *, validate: bool = True):
        m = matcore.as_hermitian(matrix)
        self._lock = threading.Lock()
        self._eig = None
        if validate:
            tr = np.trace(m).real
            if abs(tr - 1.0) > TRACE_TOL:
                raise NotAStateError(f"trace {tr!r} differs from 1")
            w, v = matcore.eig_hermitian(m)
            if w[0] < -PSD_REPAIR_TOL:
                raise NotPSDError(f"eigenvalue {w[0]:.3e} is negative")
            if w[0] < 0.0:
                w = np.clip(w, 0.0, None)
                w = w / w.sum()
                m = matcore.hermitize(matcore.from_eig(w, v))
            self._eig = (w, v)
        m.setflags(write=False)
        self._m = m

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    @property
    def dim(self) -> int:
        return self._m.shape[0]

    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        """Ascending eigenvalues and eigenvectors, computed once."""
        if self._eig is None:
            with self._lock:
                if self._eig is None:
                    self._eig = matcore.eig_hermitian(self._m)
        return self._eig

    @property
    def spectrum(self) -> np.ndarray:
        return self.eig()[0]

    def __array__(self, dtype=None, copy=None):
        return self._m if dtype is None else self._m.astype(dtype)

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim}, purity={purity(self):.6g})"

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "re": self._m.real.tolist(),
            "im": self._m.imag.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "DensityMatrix":
        m = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
        if m.shape != (data["dim"], data["dim"]):
            raise ShapeError("JSON matrix shape does not match dim")
        return cls(m)


StateLike = Union[DensityMatrix, np.ndarray]


def as_matrix(x: StateLike) -> np.ndarray:
    """Matrix of a state; raw arrays are passed through unchecked."""
    if isinstance(x, DensityMatrix):
        return x.matrix
    return np.asarray(x, dtype=complex)


def as_state(x: StateLike) -> DensityMatrix:
    return x if isinstance(x, DensityMatrix) else DensityMatrix(x)


def pure_state(psi) -> DensityMatrix:
    v = np.asarray(psi, dtype=complex).ravel()
    n = np.linalg.norm(v)
    if n == 0:
        raise DomainError("zero vector")
    v = v / n
    return DensityMatrix(np.outer(v, v.conj()))


def maximally_mixed(d: int) -> DensityMatrix:
    return DensityMatrix(np.eye(d) / d)


def diagonal_state(p) -> DensityMatrix:
    return DensityMatrix(np.diag(np.asarray(p, dtype=float)))


@dataclass(frozen=True)
class GeneratorBasis:
    """Orthonormal traceless Hermitian generators with tr[L_i L_j] = 2 delta_ij."""

    d: int
    operators: np.ndarray  # shape (d*d - 1, d, d)
    tag: str = "gellmann"

    def __len__(self) -> int:
        return self.operators.shape[0]


@lru_cache(maxsize=64)
def _gell_mann(d: int) -> GeneratorBasis:
    ops = []
    pairs = [(j, k) for j in range(d) for k in range(j + 1, d)]
    for j, k in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[j, k] = m[k, j] = 1.0
        ops.append(m)
    for j, k in pairs:
        m = np.zeros((d, d), dtype=complex)
        m[j, k] = -1j
        m[k, j] = 1j
        ops.append(m)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        ops.append(np.diag(np.sqrt(2.0 / (l * (l + 1))) * diag).astype(complex))
    arr = np.array(ops)
    arr.setflags(write=False)
    return GeneratorBasis(d, arr)


def gell_mann_basis(d: int) -> GeneratorBasis:
    """Generalized Gell-Mann matrices: symmetric, antisymmetric, then diagonal."""
    if int(d) != d or d < 2:
        raise DomainError("dimension must be an integer >= 2")
    return _gell_mann(int(d))


def bloch_scale(d: int) -> float:
    return float(np.sqrt(d * (d - 1) / 2.0))


@dataclass(frozen=True)
class BlochVector:
    d: int
    r: np.ndarray
    basis: str = "gellmann"

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.r))

    def to_json(self) -> dict:
        return {"d": self.d, "basis": self.basis, "r": [float(x) for x in self.r]}

    @classmethod
    def from_json(cls, data: dict) -> "BlochVector":
        return cls(int(data["d"]), np.asarray(data["r"], dtype=float), data.get("basis", "gellmann"))


def to_bloch(rho: StateLike, basis: GeneratorBasis | None = None) -> BlochVector:
    m = as_matrix(rho)
    d = m.shape[0]
    basis = basis or gell_mann_basis(d)
    if basis.d != d:
        raise ShapeError("basis dimension does not match the state")
    # tr[rho L_a] for all a at once; L_a Hermitian so tr[rho L_a] = sum(rho * L_a^T)
    overlaps = np.einsum("ij,aji->a", m, basis.operators).real
    r = d * overlaps / (2.0 * bloch_scale(d))
    return BlochVector(d, r, basis.tag)


def from_bloch(r: BlochVector, basis: GeneratorBasis | None = None) -> DensityMatrix:
    d = r.d
    basis = basis or gell_mann_basis(d)
    comps = np.asarray(r.r, dtype=float)
    if comps.shape != (d * d - 1,):
        raise ShapeError("Bloch vector has the wrong length")
    m = (np.eye(d) + bloch_scale(d) * np.einsum("a,aij->ij", comps, basis.operators)) / d
    m = matcore.hermitize(m)
    w = np.linalg.eigvalsh(m)
    if w[0] < -BLOCH_PSD_TOL:
        raise NotAStateError("Bloch vector lies outside the state space")
    if w[0] < 0.0:
        w2, v = np.linalg.eigh(m)
        w2 = np.clip(w2, 0.0, None)
        m = matcore.hermitize(matcore.from_eig(w2 / w2.sum(), v))
    return DensityMatrix(m)


def purity(rho: StateLike) -> float:
    m = as_matrix(rho)
    return float(np.real(np.vdot(m, m)))


def bloch_radius_from_purity(p: float, d: int) -> float:
    return float(np.sqrt(max(0.0, (d * p - 1.0) / (d - 1.0))))


def _entropy_of(p: np.ndarray) -> float:
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    nz = p[p > 0.0]
    return float(-np.sum(nz * np.log(nz)))


def vn_entropy(rho: StateLike) -> float:
    """Von Neumann entropy in nats, with 0 log 0 = 0."""
    w = rho.spectrum if isinstance(rho, DensityMatrix) else np.linalg.eigvalsh(as_matrix(rho))
    return _entropy_of(w)


def _gibbs_populations(energies: np.ndarray, beta: float) -> np.ndarray:
    x = -beta * energies
    x = x - x.max()
    p = np.exp(x)
    return p / p.sum()


def gibbs_state(h0, beta: float) -> DensityMatrix:
    """exp(-beta H) / Z."""
    if not np.isfinite(beta):
        raise DomainError("beta must be finite")
    w, v = matcore.eig_hermitian(h0)
    p = _gibbs_populations(w, beta)
    return DensityMatrix(matcore.hermitize(matcore.from_eig(p, v)))


def qubit_inverse_temperature(p0: float, omega0: float, omega1: float) -> float:
    """Inverse temperature of a qubit with ground population ``p0``."""
    if not 0.0 < p0 < 1.0:
        raise DomainError("p0 must lie in (0, 1)")
    return float(np.log(p0 / (1.0 - p0)) / (omega1 - omega0))


def gibbs_entropy(h0, beta: float) -> float:
    w = np.linalg.eigvalsh(matcore.as_hermitian(h0))
    return _entropy_of(_gibbs_populations(w, beta))


def gibbs_matching_entropy(
    h0, s_target: float, beta_max: float = 1e3, *, negative: bool = False, tol: float = 1e-8
) -> tuple[DensityMatrix, float]:
    """Gibbs state whose entropy equals ``s_target``, found by bisection.

    The entropy of a Gibbs state falls monotonically as ``|beta|`` grows, so the
    search runs over [0, beta_max] (or [-beta_max, 0] when ``negative``).
    """
    w = np.linalg.eigvalsh(matcore.as_hermitian(h0))
    d = w.size
    if not 0.0 < s_target < np.log(d):
        raise DomainError("target entropy must lie in (0, log d)")
    sign = -1.0 if negative else 1.0

    def excess(b):
        return _entropy_of(_gibbs_populations(w, sign * b)) - s_target

    lo, hi = 0.0, float(beta_max)
    if excess(hi) > 0.0:
        raise DomainError("target entropy is below the reachable range")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    beta = sign * 0.5 * (lo + hi)
    if abs(excess(abs(beta))) > tol:
        raise DomainError("bisection failed to reach the entropy tolerance")
    return gibbs_state(h0, beta), beta


def mix_with(rho: StateLike, phi: StateLike, eps: float) -> DensityMatrix:
    """Convex mixture ``eps * rho + (1 - eps) * phi``."""
    if not 0.0 <= eps <= 1.0:
        raise DomainError("mixing weight must lie in [0, 1]")
    a, b = as_matrix(rho), as_matrix(phi)
    if a.shape != b.shape:
        raise ShapeError("states have different dimensions")
    return DensityMatrix(eps * a + (1.0 - eps) * b)
