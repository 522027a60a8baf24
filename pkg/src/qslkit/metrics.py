"""Distinguishability measures between quantum states."""
from __future__ import annotations

import numpy as np

from . import matcore
from .errors import DomainError, ShapeError, UndefinedAngleError
from .states import DensityMatrix, StateLike, as_matrix, bloch_scale, purity, to_bloch

PURITY_TOL = 1e-8
ARCCOS_TOL = 1e-12
UNDEFINED_TOL = 1e-12


def safe_arccos(x: float, tol: float = ARCCOS_TOL) -> float:
    """arccos after clamping roundoff overshoot of at most ``tol``."""
    if x > 1.0 + tol or x < -1.0 - tol:
        raise DomainError(f"arccos argument {x!r} outside [-1, 1]")
    return float(np.arccos(min(1.0, max(-1.0, x))))


def _pair(rho: StateLike, sigma: StateLike) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_matrix(rho), as_matrix(sigma)
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch {a.shape} vs {b.shape}")
    return a, b


def overlap(rho: StateLike, sigma: StateLike) -> float:
    """tr[rho sigma]."""
    a, b = _pair(rho, sigma)
    return float(np.real(np.vdot(a, b)))


def fubini_study(psi, phi) -> float:
    u = np.asarray(psi, dtype=complex).ravel()
    v = np.asarray(phi, dtype=complex).ravel()
    if u.shape != v.shape:
        raise ShapeError("vectors have different lengths")
    for w in (u, v):
        if abs(np.linalg.norm(w) - 1.0) > 1e-10:
            raise DomainError("state vectors must have unit norm")
    return safe_arccos(abs(np.vdot(u, v)), tol=1e-10)


def _sqrt(rho: StateLike) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        w, v = rho.eig()
        return matcore.from_eig(np.sqrt(np.clip(w, 0.0, None)), v)
    return matcore.matrix_sqrt_psd(rho)


def fidelity(rho: StateLike, sigma: StateLike) -> float:
    """Root fidelity tr|sqrt(rho) sqrt(sigma)|, which equals |<psi|phi>| on pure states."""
    _pair(rho, sigma)
    s = np.linalg.svd(_sqrt(rho) @ _sqrt(sigma), compute_uv=False)
    return float(min(1.0, np.sum(s)))


def bures_angle(rho: StateLike, sigma: StateLike) -> float:
    return safe_arccos(fidelity(rho, sigma))


def affinity(rho: StateLike, sigma: StateLike) -> float:
    """tr[sqrt(rho) sqrt(sigma)]."""
    _pair(rho, sigma)
    return float(np.real(np.trace(_sqrt(rho) @ _sqrt(sigma))))


def sub_fidelity(rho: StateLike, sigma: StateLike) -> float:
    """sqrt(z + sqrt(2 (z^2 - tr[rho sigma rho sigma]))) with z = tr[rho sigma]."""
    a, b = _pair(rho, sigma)
    ab = a @ b
    z = float(np.real(np.trace(ab)))
    beta = float(np.real(np.vdot(ab.conj().T, ab)))
    return float(np.sqrt(max(0.0, z + np.sqrt(max(0.0, 2.0 * (z * z - beta))))))


def relative_purity(rho: StateLike, sigma: StateLike) -> float:
    """tr[rho sigma] / tr[rho^2]."""
    return overlap(rho, sigma) / purity(rho)


def _equal_purity(rho: StateLike, sigma: StateLike, purity_tol: float) -> tuple[float, float, float]:
    a, b = _pair(rho, sigma)
    pa = float(np.real(np.vdot(a, a)))
    pb = float(np.real(np.vdot(b, b)))
    if abs(pa - pb) > purity_tol * max(pa, pb):
        raise DomainError(f"states have different purities {pa!r} and {pb!r}")
    return pa, pb, float(np.real(np.vdot(a, b)))


def _half_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Angle between two nonzero matrices, well conditioned near 0 and pi."""
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    return float(2.0 * np.arctan2(np.linalg.norm(a - b), np.linalg.norm(a + b)))


def gba_theta(rho: StateLike, sigma: StateLike, purity_tol: float = PURITY_TOL) -> float:
    """Angle between the generalized Bloch vectors of two equal-purity states.

    Equal to arccos((d tr[rho sigma] - 1) / (d tr[rho^2] - 1)); evaluated as the
    angle between the traceless parts so that antipodal pairs stay accurate.
    """
    pa, pb, _ = _equal_purity(rho, sigma, purity_tol)
    a, b = as_matrix(rho), as_matrix(sigma)
    d = a.shape[0]
    if d * np.sqrt(pa * pb) - 1.0 < UNDEFINED_TOL:
        raise UndefinedAngleError("angle is undefined for the maximally mixed state")
    eye = np.eye(d) / d
    return _half_angle(a - eye, b - eye)


def phi_angle(rho: StateLike, sigma: StateLike, purity_tol: float = PURITY_TOL) -> float:
    """arccos sqrt(tr[rho sigma] / tr[rho^2]) for equal-purity states.

    With w the Hilbert-Schmidt angle between rho and sigma, cos^2 Phi = cos w
    and sin^2 Phi = 2 sin^2(w/2), which avoids cancellation near Phi = 0.
    """
    pa, pb, _ = _equal_purity(rho, sigma, purity_tol)
    a, b = as_matrix(rho), as_matrix(sigma)
    d = a.shape[0]
    if d * np.sqrt(pa * pb) - 1.0 < UNDEFINED_TOL:
        raise UndefinedAngleError("angle is undefined for the maximally mixed state")
    w = _half_angle(a, b)
    return float(np.arctan2(np.sqrt(2.0) * np.sin(w / 2.0), np.sqrt(max(0.0, np.cos(w)))))


def euclid_d(rho: StateLike, sigma: StateLike, route: str = "hs") -> float:
    """Euclidean distance between generalized Bloch vectors.

    ``route="hs"`` uses sqrt(d/(d-1)) ||rho - sigma||_HS; ``route="bloch"``
    builds both vectors explicitly.
    """
    a, b = _pair(rho, sigma)
    d = a.shape[0]
    if route == "hs":
        return float(np.sqrt(d / (d - 1.0)) * np.linalg.norm(a - b))
    if route == "bloch":
        return float(np.linalg.norm(to_bloch(a).r - to_bloch(b).r))
    raise DomainError(f"unknown route {route!r}")


def hs_distance(rho: StateLike, sigma: StateLike) -> float:
    a, b = _pair(rho, sigma)
    return float(np.linalg.norm(a - b))


def overlap_from_bloch(r, s, d: int) -> float:
    """tr[rho sigma] rebuilt from two Bloch vectors."""
    c2 = bloch_scale(d) ** 2
    return float((1.0 + c2 * (2.0 / d) * np.dot(r, s)) / d)
