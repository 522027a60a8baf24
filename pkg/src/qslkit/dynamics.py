"""Orbits of quantum states and time-averaged speed functionals.

An :class:`Orbit` stores the states on a time grid together with the exact
tangent at every node. Piecewise-constant Hamiltonians duplicate the node at
each switching time, so time averages by the trapezoid rule never straddle a
discontinuity.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import matcore
from .errors import DomainError, ShapeError, UndefinedAngleError
from .states import DensityMatrix, StateLike, as_state, to_bloch

DEFAULT_NODES = 257
_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@dataclass(frozen=True)
class Orbit:
    """A sampled trajectory rho_t on [0, tau].

    ``hamiltonians`` and ``h_index`` are set for Hamiltonian orbits; node ``k``
    evolves under ``hamiltonians[h_index[k]]``.
    """

    times: np.ndarray
    states: np.ndarray  # (m, d, d)
    tangents: np.ndarray  # (m, d, d), exact d rho / dt at each node
    kind: str
    hamiltonians: tuple = ()
    h_index: Optional[np.ndarray] = None
    params: dict = field(default_factory=dict)

    @property
    def tau(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def initial(self) -> DensityMatrix:
        return DensityMatrix(self.states[0])

    @property
    def final(self) -> DensityMatrix:
        return DensityMatrix(self.states[-1])

    @property
    def is_unitary(self) -> bool:
        return self.h_index is not None

    def __len__(self) -> int:
        return self.times.size

    def hamiltonian_at(self, k: int) -> np.ndarray:
        if self.h_index is None:
            raise DomainError(f"{self.kind} orbit has no Hamiltonian")
        return self.hamiltonians[self.h_index[k]]

    def time_average(self, values) -> float:
        """Trapezoid average of node values over [0, tau]."""
        vals = np.asarray(values, dtype=float)
        if self.tau <= 0.0:
            return float(vals[0])
        return float(_trapezoid(vals, self.times) / self.tau)


def _grid(tau: float, m: int) -> np.ndarray:
    if m < 2:
        raise DomainError("an orbit needs at least two nodes")
    if not tau >= 0.0:
        raise DomainError("duration must be non-negative")
    return np.linspace(0.0, tau, m)


def _evolve_const(rho: np.ndarray, h: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """rho(t) = U(t) rho U(t)^dag for each t in ``ts``, from one eigendecomposition."""
    w, v = matcore.eig_hermitian(h)
    rt = v.conj().T @ rho @ v
    gaps = w[:, None] - w[None, :]
    ph = np.exp(-1j * ts[:, None, None] * gaps[None, :, :])
    out = v[None] @ (rt[None] * ph) @ v.conj().T[None]
    return 0.5 * (out + np.conj(np.swapaxes(out, 1, 2)))


def _unitary_tangents(states: np.ndarray, hs: Sequence[np.ndarray], idx: np.ndarray) -> np.ndarray:
    tan = np.empty_like(states)
    for k in range(states.shape[0]):
        h = hs[idx[k]]
        tan[k] = -1j * (h @ states[k] - states[k] @ h)
    return tan


def unitary_orbit(rho0: StateLike, h, tau: float, m: int = DEFAULT_NODES) -> Orbit:
    """Orbit of a time-independent Hamiltonian."""
    rho = as_state(rho0).matrix
    h = matcore.as_hermitian(h)
    if h.shape != rho.shape:
        raise ShapeError("Hamiltonian and state dimensions differ")
    ts = _grid(tau, m)
    states = _evolve_const(rho, h, ts)
    idx = np.zeros(m, dtype=int)
    return Orbit(ts, states, _unitary_tangents(states, [h], idx), "unitary", (h,), idx)


def piecewise_orbit(
    rho0: StateLike, segments: Sequence[tuple], m_segment: int = 65
) -> Orbit:
    """Orbit of a piecewise-constant Hamiltonian given as ``[(H, duration), ...]``."""
    if not segments:
        raise DomainError("at least one segment is required")
    rho = as_state(rho0).matrix
    hs, blocks, tblocks, idx = [], [], [], []
    t0 = 0.0
    for j, (h, dt) in enumerate(segments):
        h = matcore.as_hermitian(h)
        if h.shape != rho.shape:
            raise ShapeError("Hamiltonian and state dimensions differ")
        local = _grid(float(dt), m_segment)
        block = _evolve_const(rho, h, local)
        hs.append(h)
        blocks.append(block)
        tblocks.append(t0 + local)
        idx.append(np.full(m_segment, j))
        rho = block[-1]
        t0 += float(dt)
    states = np.concatenate(blocks)
    idx = np.concatenate(idx)
    ts = np.concatenate(tblocks)
    return Orbit(ts, states, _unitary_tangents(states, hs, idx), "piecewise", tuple(hs), idx)


def dephasing_orbit(rho0: StateLike, gamma: float, tau: float, m: int = DEFAULT_NODES) -> Orbit:
    """Pure dephasing of a qubit: transverse Bloch components decay as exp(-2 gamma t)."""
    rho = as_state(rho0).matrix
    if rho.shape != (2, 2):
        raise DomainError("dephasing orbit is defined for a qubit")
    if gamma < 0.0:
        raise DomainError("gamma must be non-negative")
    ts = _grid(tau, m)
    decay = np.exp(-2.0 * gamma * ts)
    states = np.repeat(rho[None], m, axis=0)
    states[:, 0, 1] = rho[0, 1] * decay
    states[:, 1, 0] = rho[1, 0] * decay
    tangents = np.zeros_like(states)
    tangents[:, 0, 1] = -2.0 * gamma * states[:, 0, 1]
    tangents[:, 1, 0] = -2.0 * gamma * states[:, 1, 0]
    return Orbit(ts, states, tangents, "dephasing", params={"gamma": float(gamma)})


def dephasing_speed(r, gamma: float, t: float = 0.0) -> float:
    """Instantaneous HS speed sqrt(2) gamma exp(-2 gamma t) sqrt(r1^2 + r2^2)."""
    r = np.asarray(r, dtype=float)
    return float(np.sqrt(2.0) * gamma * np.exp(-2.0 * gamma * t) * np.hypot(r[0], r[1]))


def depolarizing_orbit(
    rho0: StateLike,
    eps: Callable[[np.ndarray], np.ndarray],
    tau: float,
    m: int = DEFAULT_NODES,
    deps: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> Orbit:
    """rho_t = eps(t) rho0 + (1 - eps(t)) 1/d for a monotone schedule with eps(0) = 1.

    ``deps`` is the derivative of ``eps``; without it a central difference is used.
    """
    rho = as_state(rho0).matrix
    d = rho.shape[0]
    ts = _grid(tau, m)
    e = np.asarray(np.vectorize(eps, otypes=[float])(ts), dtype=float)
    if abs(e[0] - 1.0) > 1e-12:
        raise DomainError("schedule must start at eps(0) = 1")
    steps = np.diff(e)
    if np.any(steps > 1e-12) and np.any(steps < -1e-12):
        raise DomainError("schedule is not monotone")
    if deps is None:
        h = 1e-6 * max(1.0, tau)
        de = (np.vectorize(eps, otypes=[float])(ts + h) - np.vectorize(eps, otypes=[float])(ts - h)) / (2 * h)
    else:
        de = np.asarray(np.vectorize(deps, otypes=[float])(ts), dtype=float)
    mixed = np.eye(d) / d
    offset = rho - mixed
    states = mixed[None] + e[:, None, None] * offset[None]
    tangents = de[:, None, None] * offset[None]
    return Orbit(ts, states.astype(complex), tangents.astype(complex), "depolarizing")


def dilated_orbit(
    rho0_s: StateLike, gamma_e: StateLike, h_se, tau: float, m: int = DEFAULT_NODES
) -> Orbit:
    """Reduced orbit of a system coupled unitarily to an environment.

    The joint state starts as rho0 (x) gamma_E; tangents are -i tr_E[H, Pi_t].
    """
    rs, ge = as_state(rho0_s).matrix, as_state(gamma_e).matrix
    ds, de = rs.shape[0], ge.shape[0]
    h = matcore.as_hermitian(h_se)
    if h.shape != (ds * de, ds * de):
        raise ShapeError("joint Hamiltonian does not match system and environment dims")
    ts = _grid(tau, m)
    joint = _evolve_const(np.kron(rs, ge), h, ts)
    states = np.empty((m, ds, ds), dtype=complex)
    tangents = np.empty_like(states)
    for k in range(m):
        states[k] = matcore.partial_trace(joint[k], [ds, de], 0)
        tangents[k] = matcore.partial_trace(-1j * matcore.commutator(h, joint[k]), [ds, de], 0)
    return Orbit(ts, states, tangents, "dilated", params={"dims": (ds, de), "h_se": h})


# ---------------------------------------------------------------- speeds


def speeds_hs(orbit: Orbit) -> np.ndarray:
    """||d rho / dt||_HS at each node from the exact tangent."""
    return np.linalg.norm(orbit.tangents, axis=(1, 2))


def commutator_variance(rho: np.ndarray, h: np.ndarray) -> float:
    """tr[rho^2 H^2] - tr[(rho H)^2], which is half the squared unitary speed."""
    rh = rho @ h
    k = np.real(np.trace(rho @ rho @ h @ h) - np.trace(rh @ rh))
    return float(max(0.0, k))


def unitary_speed(rho: np.ndarray, h: np.ndarray) -> float:
    return float(np.sqrt(2.0 * commutator_variance(rho, h)))


def avg_speed_hs(orbit: Orbit, route: str = "exact") -> float:
    """Time-averaged Hilbert-Schmidt speed.

    ``exact`` integrates the closed-form tangent norm; for Hamiltonian orbits
    this is sqrt(2 tr[H^2 rho^2 - (H rho)^2]). ``fd`` sums the norms of
    finite increments between nodes.
    """
    if route == "exact":
        if orbit.is_unitary:
            v = [unitary_speed(orbit.states[k], orbit.hamiltonian_at(k)) for k in range(len(orbit))]
        else:
            v = speeds_hs(orbit)
        return orbit.time_average(v)
    if route == "fd":
        if orbit.tau <= 0.0:
            return 0.0
        inc = np.linalg.norm(np.diff(orbit.states, axis=0), axis=(1, 2))
        return float(np.sum(inc) / orbit.tau)
    raise DomainError(f"unknown route {route!r}")


def avg_speed_bloch(orbit: Orbit) -> float:
    """Time-averaged length of the generalized Bloch tangent vector."""
    v = [np.linalg.norm(to_bloch(t).r) for t in orbit.tangents]
    return orbit.time_average(v)


def avg_speed_over_norm(orbit: Orbit) -> float:
    """Time average of ||rho_dot_t|| / ||rho_t||."""
    v = speeds_hs(orbit) / np.linalg.norm(orbit.states, axis=(1, 2))
    return orbit.time_average(v)


def _node_purity(orbit: Orbit) -> np.ndarray:
    return np.real(np.einsum("kij,kij->k", orbit.states.conj(), orbit.states))


def q_theta_nodes(orbit: Orbit) -> np.ndarray:
    d = orbit.dim
    p = _node_purity(orbit)
    if np.any(p - 1.0 / d < 1e-12):
        raise UndefinedAngleError("speed is undefined for the maximally mixed state")
    k = np.array([commutator_variance(orbit.states[i], orbit.hamiltonian_at(i)) for i in range(len(orbit))])
    return np.sqrt(2.0 * k / (p - 1.0 / d))


def q_phi_nodes(orbit: Orbit) -> np.ndarray:
    d = orbit.dim
    p = _node_purity(orbit)
    if np.any(p - 1.0 / d < 1e-12):
        raise UndefinedAngleError("speed is undefined for the maximally mixed state")
    k = np.array([commutator_variance(orbit.states[i], orbit.hamiltonian_at(i)) for i in range(len(orbit))])
    return np.sqrt(k / p)


def q_theta(orbit: Orbit) -> float:
    """Time average of sqrt(2 tr[rho^2 H^2 - (rho H)^2] / (tr[rho^2] - 1/d))."""
    return orbit.time_average(q_theta_nodes(orbit))


def q_phi(orbit: Orbit) -> float:
    """Time average of sqrt(tr[rho^2 H^2 - (rho H)^2] / tr[rho^2])."""
    return orbit.time_average(q_phi_nodes(orbit))


def energy_std(rho: np.ndarray, h: np.ndarray) -> float:
    e1 = np.real(np.trace(rho @ h))
    e2 = np.real(np.trace(rho @ h @ h))
    return float(np.sqrt(max(0.0, e2 - e1 * e1)))


def energy_above_ground(rho: np.ndarray, h: np.ndarray) -> float:
    e0 = np.linalg.eigvalsh(h)[0]
    return float(max(0.0, np.real(np.trace(rho @ h)) - e0))


def _hamiltonian_average(orbit: Orbit, fn) -> float:
    if not orbit.is_unitary:
        raise DomainError(f"{orbit.kind} orbit has no Hamiltonian")
    return orbit.time_average([fn(orbit.states[k], orbit.hamiltonian_at(k)) for k in range(len(orbit))])


def avg_std_energy(orbit: Orbit) -> float:
    """Time-averaged energy standard deviation."""
    return _hamiltonian_average(orbit, energy_std)


def avg_energy_above_ground(orbit: Orbit) -> float:
    """Time-averaged mean energy measured from the instantaneous ground level."""
    return _hamiltonian_average(orbit, energy_above_ground)


# ---------------------------------------------------------------- export


def orbit_to_csv(orbit: Orbit, meta: Optional[dict] = None) -> str:
    """CSV text with comment-line metadata, then t and the real/imag parts of vec(rho)."""
    buf = io.StringIO()
    info = {"kind": orbit.kind, "dim": orbit.dim, "nodes": len(orbit), "tau": repr(orbit.tau)}
    info.update(meta or {})
    for key, val in info.items():
        buf.write(f"# {key}={val}\n")
    d = orbit.dim
    cols = ["t"]
    for i in range(d):
        for j in range(d):
            cols += [f"re_{i}{j}", f"im_{i}{j}"]
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for t, rho in zip(orbit.times, orbit.states):
        row = ["%.17g" % t]
        for z in rho.ravel():
            row += ["%.17g" % z.real, "%.17g" % z.imag]
        w.writerow(row)
    return buf.getvalue()
