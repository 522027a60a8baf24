"""Iterative search for efficient time-independent Hamiltonians.

Given isospectral states rho and sigma with eigenbases {r_k} and {s_k}, every
unitary O(phi) = sum_k exp(i phi_k) |s_k><r_k| maps rho to sigma. Starting
from such an O, each iteration removes the part of H = i log O that commutes
with the state (the "parallel" component, picked out by :func:`mask`). The
update keeps O mapping rho to sigma, so every iterate is an exact solution.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import matcore, metrics
from .ensembles import RandomSource, SampleStream, as_generator, bures_state, random_hamiltonian
from .errors import DomainError
from .states import DensityMatrix, StateLike, as_matrix, as_state

DEGENERACY_TOL = 1e-9
SPECTRUM_TOL = 1e-8
VARIANTS = ("forward", "backward", "two-sided")
DEFAULT_EPS_PURE = 1e-4
DEFAULT_EPS_MIXED = 1e-2
DEFAULT_MAX_ITER = 1000


@dataclass(frozen=True)
class PhaseVector:
    phases: np.ndarray

    @classmethod
    def zeros(cls, d: int) -> "PhaseVector":
        return cls(np.zeros(d))

    def wrapped(self) -> np.ndarray:
        return np.mod(self.phases, 2 * np.pi)

    def torus(self) -> np.ndarray:
        """Phases relative to the first, which only sets a global phase."""
        return np.mod(self.phases[1:] - self.phases[0], 2 * np.pi)

    def __neg__(self) -> "PhaseVector":
        return PhaseVector(-np.asarray(self.phases))


def _degenerate_blocks(w: np.ndarray) -> list[list[int]]:
    blocks = [[0]]
    for i in range(1, w.size):
        if abs(w[i] - w[blocks[-1][-1]]) <= DEGENERACY_TOL * max(1.0, abs(w[i])):
            blocks[-1].append(i)
        else:
            blocks.append([i])
    return blocks


@dataclass(frozen=True)
class Problem:
    """An isospectral pair with fixed eigenbases (columns of ``r`` and ``s``)."""

    rho: np.ndarray
    sigma: np.ndarray
    spectrum: np.ndarray
    r: np.ndarray
    s: np.ndarray

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def swapped(self) -> "Problem":
        return Problem(self.sigma, self.rho, self.spectrum, self.s, self.r)


def make_problem(rho: StateLike, sigma: StateLike, r=None, s=None) -> Problem:
    """Pair the eigenbases of two states; custom bases may be supplied as columns."""
    a, b = as_state(rho), as_state(sigma)
    if a.dim != b.dim:
        raise DomainError("states have different dimensions")
    wa, va = a.eig()
    wb, vb = b.eig()
    if np.max(np.abs(wa - wb)) > SPECTRUM_TOL:
        raise DomainError("states are not isospectral")
    r = va if r is None else np.asarray(r, dtype=complex)
    s = vb if s is None else np.asarray(s, dtype=complex)
    for basis, m in ((r, a.matrix), (s, b.matrix)):
        if not matcore.is_unitary(basis, 1e-9):
            raise DomainError("basis is not orthonormal")
        if np.linalg.norm(m @ basis - basis * wa) > 1e-8:
            raise DomainError("basis vectors are not eigenvectors in ascending order")
    return Problem(a.matrix, b.matrix, wa, r, s)


def connect_unitary(
    rho: StateLike | Problem,
    sigma: StateLike | None = None,
    phi: PhaseVector | Sequence[float] | None = None,
    block_unitaries: Optional[Sequence[np.ndarray]] = None,
) -> np.ndarray:
    """O(phi) = sum_k exp(i phi_k) |s_k><r_k|.

    ``block_unitaries`` optionally supplies one unitary per block of
    degenerate eigenvalues, acting between the blocks after the phases.
    """
    prob = rho if isinstance(rho, Problem) else make_problem(rho, sigma)
    d = prob.dim
    ph = np.zeros(d) if phi is None else np.asarray(getattr(phi, "phases", phi), dtype=float)
    if ph.shape != (d,):
        raise DomainError("phase vector has the wrong length")
    core = np.diag(np.exp(1j * ph))
    if block_unitaries is not None:
        blocks = _degenerate_blocks(prob.spectrum)
        if len(block_unitaries) != len(blocks):
            raise DomainError("one unitary per degenerate block is required")
        for idx, u in zip(blocks, block_unitaries):
            u = matcore.as_unitary(u)
            if u.shape != (len(idx), len(idx)):
                raise DomainError("block unitary has the wrong size")
            core[np.ix_(idx, idx)] = u @ core[np.ix_(idx, idx)]
    return prob.s @ core @ prob.r.conj().T


def phases_of(prob: Problem, o: np.ndarray) -> np.ndarray:
    """phi_k = arg <s_k|O|r_k>."""
    return np.angle(np.einsum("ik,ij,jk->k", prob.s.conj(), o, prob.r))


def mask(h, rho: StateLike) -> np.ndarray:
    """Projection of ``h`` onto the operators commuting with ``rho``.

    In the eigenbasis of ``rho`` the entries between unequal eigenvalues are
    dropped.
    """
    h = matcore.as_hermitian(h)
    st = as_state(rho)
    w, v = st.eig()
    keep = np.abs(w[:, None] - w[None, :]) <= DEGENERACY_TOL * np.maximum(1.0, np.abs(w))[:, None]
    ht = v.conj().T @ h @ v
    return matcore.hermitize(v @ (ht * keep) @ v.conj().T)


def _mask_eig(h: np.ndarray, w: np.ndarray, v: np.ndarray) -> np.ndarray:
    keep = np.abs(w[:, None] - w[None, :]) <= DEGENERACY_TOL * np.maximum(1.0, np.abs(w))[:, None]
    ht = v.conj().T @ h @ v
    return matcore.hermitize(v @ (ht * keep) @ v.conj().T)


def efficiency_eta(h, rho: StateLike) -> float:
    """Energy spread over the operator norm of ``h``."""
    h = matcore.as_hermitian(h)
    nrm = matcore.op_norm(h)
    if nrm == 0.0:
        raise DomainError("efficiency of the zero Hamiltonian is undefined")
    m = as_matrix(rho)
    e1 = np.real(np.trace(m @ h))
    e2 = np.real(np.trace(m @ h @ h))
    return float(np.sqrt(max(0.0, e2 - e1 * e1)) / nrm)


def efficiency_eta_star(h, rho: StateLike) -> float:
    """sqrt(a - b) / sqrt(a - b + c^2), a = tr[rho^2 H^2], b = tr[(rho H)^2], c = tr[rho H].

    Equal to one exactly when ``h`` has no component commuting with ``rho``.
    """
    h = matcore.as_hermitian(h)
    if np.linalg.norm(h) == 0.0:
        raise DomainError("efficiency of the zero Hamiltonian is undefined")
    m = as_matrix(rho)
    rh = m @ h
    a = np.real(np.trace(rh @ h @ m))
    b = np.real(np.trace(rh @ rh))
    c = np.real(np.trace(rh))
    k = max(0.0, a - b)
    den = k + c * c
    if den <= 0.0:
        return 0.0
    return float(np.sqrt(k / den))


def evolution_time(h, rho: StateLike, omega: Optional[float] = None) -> float:
    """Duration of the gate exp(-i H) once H is rescaled to energy spread ``omega``.

    Without ``omega`` the action tau * Delta E is returned, which does not
    depend on how H is scaled.
    """
    m = as_matrix(rho)
    h = matcore.as_hermitian(h)
    e1 = np.real(np.trace(m @ h))
    de = float(np.sqrt(max(0.0, np.real(np.trace(m @ h @ h)) - e1 * e1)))
    return de if omega is None else de / omega


@dataclass(frozen=True)
class IterationRecord:
    o: np.ndarray
    h: np.ndarray
    h_norm: float
    parallel_norm: float
    eta_star: float
    qsl_ratio: float  # tau / T_QSL on the orbit exp(-i H t), t in [0, 1]
    endpoint_error: float

    @property
    def parallel_fraction(self) -> float:
        return self.parallel_norm / self.h_norm if self.h_norm > 0 else 0.0


@dataclass
class BrachistochroneRun:
    problem: Problem
    variant: str
    eps: float
    phi0: np.ndarray
    history: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.history) - 1

    @property
    def final(self) -> IterationRecord:
        return self.history[-1]

    @property
    def hamiltonian(self) -> np.ndarray:
        return self.final.h

    def phase_history(self) -> np.ndarray:
        return np.array([phases_of(self.problem, rec.o) for rec in self.history])

    def to_json(self, meta: Optional[dict] = None) -> dict:
        h = self.final.h
        out = {
            "variant": self.variant,
            "epsilon": self.eps,
            "dim": self.problem.dim,
            "converged": self.converged,
            "iterations": self.iterations,
            "phi0": [float(x) for x in self.phi0],
            "rho": {"re": self.problem.rho.real.tolist(), "im": self.problem.rho.imag.tolist()},
            "sigma": {"re": self.problem.sigma.real.tolist(), "im": self.problem.sigma.imag.tolist()},
            "parallel_fraction": [r.parallel_fraction for r in self.history],
            "eta_star": [r.eta_star for r in self.history],
            "qsl_ratio": [r.qsl_ratio for r in self.history],
            "final_h": {"re": h.real.tolist(), "im": h.imag.tolist()},
        }
        if meta:
            out["meta"] = meta
        return out


class _QslReference:
    """Distances between the endpoints, computed once per problem."""

    def __init__(self, prob: Problem):
        self.rho = prob.rho
        d = prob.dim
        self.d = d
        self.p = float(np.real(np.vdot(prob.rho, prob.rho)))
        self.bures = metrics.bures_angle(prob.rho, prob.sigma)
        self.mixed = self.p - 1.0 / d > 1e-12
        if self.mixed:
            self.theta = metrics.gba_theta(prob.rho, prob.sigma)
            self.phi = metrics.phi_angle(prob.rho, prob.sigma)

    def ratio(self, h: np.ndarray) -> float:
        """tau / max(T_L, T_Theta, T_Phi) for the unit-time orbit of ``h``.

        Speeds are constants of motion for a time-independent Hamiltonian.
        """
        m = self.rho
        rh = m @ h
        e1 = np.real(np.trace(rh))
        de = np.sqrt(max(0.0, np.real(np.trace(rh @ h)) - e1 * e1))
        cands = [self.bures / de if de > 0 else (0.0 if self.bures == 0 else np.inf)]
        if self.mixed:
            k = max(0.0, float(np.real(np.trace(rh @ h @ m) - np.trace(rh @ rh))))
            q_t = np.sqrt(2 * k / (self.p - 1.0 / self.d))
            q_p = np.sqrt(k / self.p)
            cands.append(self.theta / q_t if q_t > 0 else (0.0 if self.theta == 0 else np.inf))
            cands.append(self.phi / q_p if q_p > 0 else (0.0 if self.phi == 0 else np.inf))
        t = max(cands)
        if t == 0.0:
            return 1.0 if np.linalg.norm(h) == 0 else np.inf
        return float(1.0 / t)


def _record(prob: Problem, ref: _QslReference, o: np.ndarray, wr, vr) -> tuple[IterationRecord, np.ndarray]:
    h = matcore.matrix_log_unitary(o)
    par = _mask_eig(h, wr, vr)
    hn = float(np.linalg.norm(h))
    u = matcore.matrix_exp_skewh(h)
    err = float(np.linalg.norm(u @ prob.rho @ u.conj().T - prob.sigma))
    eta = efficiency_eta_star(h, prob.rho) if hn > 0 else 1.0
    rec = IterationRecord(o, h, hn, float(np.linalg.norm(par)), eta, ref.ratio(h), err)
    return rec, par


def solve(
    rho: StateLike | Problem,
    sigma: StateLike | None = None,
    phi0: PhaseVector | Sequence[float] | None = None,
    eps: float = DEFAULT_EPS_PURE,
    variant: str = "forward",
    max_iter: int = DEFAULT_MAX_ITER,
) -> BrachistochroneRun:
    """Iterate until ||M_rho[H]||_HS <= eps ||H||_HS or ``max_iter`` is reached.

    Updates, with H = i log O:

    * forward:   O <- O exp(i M_rho[H])
    * backward:  O <- exp(i M_sigma[H]) O
    * two-sided: O <- exp(i M_sigma[H]/2) O exp(i M_rho[H]/2)

    An unconverged run is returned with ``converged=False``.
    """
    if variant not in VARIANTS:
        raise DomainError(f"unknown variant {variant!r}")
    if not 0.0 < eps < 1.0:
        raise DomainError("eps must lie in (0, 1)")
    if max_iter < 1:
        raise DomainError("max_iter must be at least 1")
    prob = rho if isinstance(rho, Problem) else make_problem(rho, sigma)
    d = prob.dim
    phi = np.zeros(d) if phi0 is None else np.asarray(getattr(phi0, "phases", phi0), dtype=float)
    ref = _QslReference(prob)
    wr, vr = prob.spectrum, prob.r
    ws, vs = prob.spectrum, prob.s
    o = connect_unitary(prob, phi=phi)
    run = BrachistochroneRun(prob, variant, eps, phi.copy())
    for j in range(max_iter + 1):
        rec, par_r = _record(prob, ref, o, wr, vr)
        run.history.append(rec)
        if rec.parallel_norm <= eps * rec.h_norm:
            run.converged = True
            break
        if j == max_iter:
            break
        h = rec.h
        if variant == "forward":
            o = o @ _exp_i(par_r)
        elif variant == "backward":
            o = _exp_i(_mask_eig(h, ws, vs)) @ o
        else:
            o = _exp_i(0.5 * _mask_eig(h, ws, vs)) @ o @ _exp_i(0.5 * par_r)
    return run


def _exp_i(m: np.ndarray) -> np.ndarray:
    """exp(+i M) for Hermitian M."""
    return matcore.matrix_exp_skewh(-m)


def random_phases(d: int, src: RandomSource) -> PhaseVector:
    return PhaseVector(as_generator(src).uniform(0.0, 2 * np.pi, size=d))


def random_pair(d: int, src: RandomSource, mode: str = "mixed") -> tuple[DensityMatrix, DensityMatrix]:
    """Bures state rho (or its dominant eigenprojector) and a random isospectral sigma."""
    rng = as_generator(src)
    rho = bures_state(d, rng)
    if mode == "pure":
        w, v = rho.eig()
        rho = DensityMatrix(np.outer(v[:, -1], v[:, -1].conj()))
    elif mode != "mixed":
        raise DomainError(f"unknown mode {mode!r}")
    u = matcore.matrix_exp_skewh(random_hamiltonian(d, rng))
    sigma = DensityMatrix(matcore.hermitize(u @ rho.matrix @ u.conj().T))
    return rho, sigma


@dataclass(frozen=True)
class MultiStart:
    best: Optional[BrachistochroneRun]
    iterations: tuple
    converged: tuple

    @property
    def any_converged(self) -> bool:
        return any(self.converged)


def multi_start(
    rho: StateLike | Problem,
    sigma: StateLike | None,
    starts: int,
    eps: float,
    src: RandomSource,
    variant: str = "forward",
    max_iter: int = DEFAULT_MAX_ITER,
) -> MultiStart:
    """Run from ``starts`` random initial phases; keep the fastest converged run."""
    if starts < 1:
        raise DomainError("at least one start is required")
    prob = rho if isinstance(rho, Problem) else make_problem(rho, sigma)
    stream = src if isinstance(src, SampleStream) else None
    rng = None if stream is not None else as_generator(src)
    runs = []
    for i in range(starts):
        phi = random_phases(prob.dim, stream.at(i) if stream is not None else rng)
        runs.append(solve(prob, phi0=phi, eps=eps, variant=variant, max_iter=max_iter))
    done = [r for r in runs if r.converged]
    best = min(done, key=lambda r: r.iterations) if done else None
    return MultiStart(best, tuple(r.iterations for r in runs), tuple(r.converged for r in runs))


def _aligned_eigvecs(m: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Eigenvectors of ``m`` with phases chosen so <ref_k|v_k> is real and positive."""
    _, v = np.linalg.eigh(matcore.hermitize(m))
    ov = np.einsum("ik,ik->k", ref.conj(), v)
    ph = np.where(np.abs(ov) > 0, ov / np.where(np.abs(ov) > 0, np.abs(ov), 1.0), 1.0)
    return v * ph.conj()


def perturbation_study(
    rho: StateLike,
    sigma: StateLike,
    delta: float,
    kind: str,
    src: RandomSource,
    eps: float = DEFAULT_EPS_MIXED,
    phi0: PhaseVector | Sequence[float] | None = None,
    variant: str = "forward",
    max_iter: int = DEFAULT_MAX_ITER,
) -> float:
    """Relative HS deviation between the solutions of a problem and its perturbation.

    ``convex``: rho' = (1 - delta) rho + delta chi with chi a Bures state and
    sigma' = O rho' O^dag, O mapping the eigenbasis of rho onto that of sigma.
    ``unitary``: both states conjugated by exp(i delta G), G a random unit-norm
    Hamiltonian.
    """
    if not 0.0 <= delta < 1.0:
        raise DomainError("delta must lie in [0, 1)")
    prob = make_problem(rho, sigma)
    d = prob.dim
    rng = as_generator(src)
    phi = np.zeros(d) if phi0 is None else np.asarray(getattr(phi0, "phases", phi0), dtype=float)
    base = solve(prob, phi0=phi, eps=eps, variant=variant, max_iter=max_iter)
    if kind == "convex":
        chi = bures_state(d, rng).matrix
        o = prob.s @ prob.r.conj().T
        rp = matcore.hermitize((1.0 - delta) * prob.rho + delta * chi)
        r2 = _aligned_eigvecs(rp, prob.r)
        w2 = np.real(np.einsum("ik,ij,jk->k", r2.conj(), rp, r2))
        sp = matcore.hermitize(o @ rp @ o.conj().T)
        pert = Problem(rp, sp, w2, r2, o @ r2)
    elif kind == "unitary":
        g = random_hamiltonian(d, rng)
        g = g / np.linalg.norm(g)
        w = matcore.matrix_exp_skewh(-delta * g)
        pert = Problem(
            matcore.hermitize(w @ prob.rho @ w.conj().T),
            matcore.hermitize(w @ prob.sigma @ w.conj().T),
            prob.spectrum, w @ prob.r, w @ prob.s,
        )
    else:
        raise DomainError(f"unknown perturbation kind {kind!r}")
    other = solve(pert, phi0=phi, eps=eps, variant=variant, max_iter=max_iter)
    h = base.hamiltonian
    return float(np.linalg.norm(h - other.hamiltonian) / np.linalg.norm(h))
