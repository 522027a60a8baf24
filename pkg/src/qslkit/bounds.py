"""Quantum speed limit evaluators.

Every bound is evaluated on an explicit :class:`~qslkit.dynamics.Orbit` whose
first and last states must match the declared endpoints. Units have hbar = 1;
``HBAR`` rescales reported times.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dynamics as dyn
from . import matcore, metrics
from .ensembles import RandomSource, SampleStream, bures_state, random_hamiltonian
from .errors import (
    DomainError,
    EndpointMismatchError,
    InconsistentOrbitError,
    UndefinedAngleError,
)
from .states import DensityMatrix, StateLike, as_matrix, purity

HBAR = 1.0
ENDPOINT_TOL = 1e-6
ORTHOGONAL_TOL = 1e-8
PURE_TOL = 1e-9

BOUND_NAMES = (
    "MT", "ML", "unified_pure", "T_L", "T_Theta", "T_Phi", "T_unified", "T_D",
    "T_Sun", "T_delCampo", "T_Deffner", "T_Sun_star", "T_Deffner_star",
)


@dataclass(frozen=True)
class QslReport:
    name: str
    value: float
    distance: float
    speed: float
    flags: frozenset = field(default_factory=frozenset)
    tau: Optional[float] = None

    @property
    def infinite(self) -> bool:
        return math.isinf(self.value)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "distance": self.distance,
            "speed": self.speed,
            "flags": sorted(self.flags),
            "tau": self.tau,
        }


def _report(name: str, distance: float, speed: float, flags, tau=None) -> QslReport:
    flags = set(flags)
    if speed > 0.0:
        value = HBAR * distance / speed
    elif distance <= 1e-12:
        value = 0.0
    else:
        value = math.inf
        flags.add("infinite")
    return QslReport(name, float(value), float(distance), float(speed), frozenset(flags), tau)


def _check_endpoints(a: np.ndarray, b: np.ndarray, orbit: dyn.Orbit) -> None:
    if a.shape != orbit.states[0].shape:
        raise EndpointMismatchError("endpoint dimension does not match the orbit")
    if np.linalg.norm(a - orbit.states[0]) > ENDPOINT_TOL:
        raise EndpointMismatchError("initial state is not the start of the orbit")
    if np.linalg.norm(b - orbit.states[-1]) > ENDPOINT_TOL:
        raise EndpointMismatchError("final state is not the end of the orbit")


def _is_pure(m: np.ndarray) -> bool:
    return abs(float(np.real(np.vdot(m, m))) - 1.0) <= PURE_TOL


def _base_flags(a: np.ndarray, b: np.ndarray, orbit: dyn.Orbit) -> set:
    flags = {"connected"}
    if orbit.is_unitary:
        flags.add("unitary")
    if _is_pure(a) or _is_pure(b):
        flags.add("pure_endpoint")
    pa, pb = np.real(np.vdot(a, a)), np.real(np.vdot(b, b))
    if abs(pa - pb) <= metrics.PURITY_TOL * max(pa, pb):
        flags.add("equal_purity")
    return flags


def _endpoints(rho: StateLike, sigma: StateLike, orbit: dyn.Orbit):
    a, b = as_matrix(rho), as_matrix(sigma)
    _check_endpoints(a, b, orbit)
    return a, b, _base_flags(a, b, orbit)


def _require_unitary(orbit: dyn.Orbit) -> None:
    if not orbit.is_unitary:
        raise DomainError(f"bound needs a Hamiltonian orbit, got {orbit.kind}")


# ---------------------------------------------------------------- pure states


def _projector(psi) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(psi, dtype=complex).ravel()
    if abs(np.linalg.norm(v) - 1.0) > 1e-10:
        raise DomainError("state vectors must have unit norm")
    return v, np.outer(v, v.conj())


def _pure_setup(psi, phi, orbit):
    _require_unitary(orbit)
    u, pu = _projector(psi)
    v, pv = _projector(phi)
    _check_endpoints(pu, pv, orbit)
    flags = {"connected", "unitary", "pure_endpoint"}
    if abs(np.vdot(u, v)) <= ORTHOGONAL_TOL:
        flags.add("orthogonal")
    return metrics.fubini_study(u, v), flags


def bound_mt_pure(psi, phi, orbit: dyn.Orbit) -> QslReport:
    """arccos|<psi|phi>| over the time-averaged energy spread."""
    dist, flags = _pure_setup(psi, phi, orbit)
    return _report("MT", dist, dyn.avg_std_energy(orbit), flags, orbit.tau)


def bound_ml_pure(psi, phi, orbit: dyn.Orbit) -> QslReport:
    """arccos|<psi|phi>| over the time-averaged energy above the ground level.

    A guaranteed lower bound only between orthogonal states (flag
    ``orthogonal``); for overlapping states it can exceed the true time.
    """
    dist, flags = _pure_setup(psi, phi, orbit)
    return _report("ML", dist, dyn.avg_energy_above_ground(orbit), flags, orbit.tau)


def bound_unified_pure(psi, phi, orbit: dyn.Orbit) -> QslReport:
    """arccos|<psi|phi>| / min(mean energy, energy spread); valid as ``bound_ml_pure``."""
    dist, flags = _pure_setup(psi, phi, orbit)
    speed = min(dyn.avg_std_energy(orbit), dyn.avg_energy_above_ground(orbit))
    return _report("unified_pure", dist, speed, flags, orbit.tau)


def optimal_pure_hamiltonian(psi, phi, delta_e: float = 1.0) -> tuple[np.ndarray, float]:
    """Two-level Hamiltonian rotating ``psi`` into ``phi`` along the geodesic.

    Returns ``(H, tau)`` with energy spread ``delta_e`` on ``psi`` and
    ``exp(-i H tau) psi`` equal to ``phi`` up to a global phase.
    """
    u, _ = _projector(psi)
    v, _ = _projector(phi)
    ov = np.vdot(u, v)
    theta = metrics.safe_arccos(abs(ov), tol=1e-10)
    d = u.size
    if theta < 1e-14:
        return np.zeros((d, d), dtype=complex), 0.0
    alpha = np.angle(ov) if abs(ov) > 0 else 0.0
    perp = np.exp(-1j * alpha) * v - np.cos(theta) * u
    perp = perp / np.linalg.norm(perp)
    h = 1j * delta_e * (np.outer(perp, u.conj()) - np.outer(u, perp.conj()))
    return matcore.hermitize(h), theta / delta_e


# ---------------------------------------------------------------- mixed states


def bound_tl(rho: StateLike, sigma: StateLike, orbit: dyn.Orbit) -> QslReport:
    """Bures angle over the time-averaged energy spread."""
    _require_unitary(orbit)
    a, b, flags = _endpoints(rho, sigma, orbit)
    return _report("T_L", metrics.bures_angle(a, b), dyn.avg_std_energy(orbit), flags, orbit.tau)


def bound_theta(rho: StateLike, sigma: StateLike, orbit: dyn.Orbit) -> QslReport:
    """Generalized Bloch angle over the averaged speed Q_Theta."""
    _require_unitary(orbit)
    a, b, flags = _endpoints(rho, sigma, orbit)
    return _report("T_Theta", metrics.gba_theta(a, b), dyn.q_theta(orbit), flags, orbit.tau)


def bound_phi(rho: StateLike, sigma: StateLike, orbit: dyn.Orbit) -> QslReport:
    _require_unitary(orbit)
    a, b, flags = _endpoints(rho, sigma, orbit)
    return _report("T_Phi", metrics.phi_angle(a, b), dyn.q_phi(orbit), flags, orbit.tau)


def bound_unified_mixed(rho: StateLike, sigma: StateLike, orbit: dyn.Orbit) -> QslReport:
    """Largest of T_L, T_Theta and T_Phi."""
    parts = [bound_tl(rho, sigma, orbit), bound_theta(rho, sigma, orbit), bound_phi(rho, sigma, orbit)]
    best = max(parts, key=lambda r: r.value)
    flags = set(best.flags) | {"from_" + best.name}
    return QslReport("T_unified", best.value, best.distance, best.speed, frozenset(flags), orbit.tau)


def bound_td(rho: StateLike, sigma: StateLike, orbit: dyn.Orbit, route: str = "exact") -> QslReport:
    """Hilbert-Schmidt distance over the time-averaged HS speed; any dynamics."""
    a, b, flags = _endpoints(rho, sigma, orbit)
    dist = metrics.hs_distance(a, b)
    speed = dyn.avg_speed_hs(orbit, route=route)
    if speed <= 0.0 and dist > 1e-12:
        raise InconsistentOrbitError("orbit has zero speed but distinct endpoints")
    return _report("T_D", dist, speed, flags, orbit.tau)


def _overlaps(a: np.ndarray, b: np.ndarray) -> tuple[float, float, float]:
    x = float(np.real(np.vdot(a, a)))
    y = float(np.real(np.vdot(b, b)))
    z = float(np.real(np.vdot(a, b)))
    return x, y, z


def bound_sun(rho: StateLike, sigma: StateLike, orbit: dyn.Orbit) -> QslReport:
    """|1 - z/sqrt(xy)| over twice the averaged relative speed ||rho_dot|| / ||rho||."""
    a, b, flags = _endpoints(rho, sigma, orbit)
    x, y, z = _overlaps(a, b)
    dist = abs(1.0 - z / math.sqrt(x * y))
    return _report("T_Sun", dist, 2.0 * dyn.avg_speed_over_norm(orbit), flags, orbit.tau)


def bound_delcampo(rho: StateLike, sigma: StateLike, orbit: dyn.Orbit) -> QslReport:
    """|1 - z/x| x over the averaged HS speed."""
    a, b, flags = _endpoints(rho, sigma, orbit)
    x, _, z = _overlaps(a, b)
    return _report("T_delCampo", abs(1.0 - z / x) * x, dyn.avg_speed_hs(orbit), flags, orbit.tau)


def bound_deffner(rho: StateLike, sigma: StateLike, orbit: dyn.Orbit) -> QslReport:
    """sin^2 of the Bures angle over the averaged HS speed; valid with a pure endpoint."""
    a, b, flags = _endpoints(rho, sigma, orbit)
    f = metrics.fidelity(a, b)
    return _report("T_Deffner", 1.0 - f * f, dyn.avg_speed_hs(orbit), flags, orbit.tau)


def bound_sun_star(rho: StateLike, sigma: StateLike, orbit: dyn.Orbit) -> QslReport:
    a, b, flags = _endpoints(rho, sigma, orbit)
    x, y, z = _overlaps(a, b)
    dist = abs(1.0 - z / math.sqrt(x * y)) * math.sqrt(x)
    return _report("T_Sun_star", dist, 2.0 * dyn.avg_speed_hs(orbit), flags, orbit.tau)


def bound_deffner_star(rho: StateLike, sigma: StateLike, orbit: dyn.Orbit) -> QslReport:
    """Deffner form with the sub-fidelity in place of the fidelity."""
    a, b, flags = _endpoints(rho, sigma, orbit)
    e = min(1.0, metrics.sub_fidelity(a, b))
    return _report("T_Deffner_star", 1.0 - e * e, dyn.avg_speed_hs(orbit), flags, orbit.tau)


_GENERIC = {
    "T_D": bound_td,
    "T_Sun": bound_sun,
    "T_delCampo": bound_delcampo,
    "T_Deffner": bound_deffner,
    "T_Sun_star": bound_sun_star,
    "T_Deffner_star": bound_deffner_star,
}
_UNITARY = {"T_L": bound_tl, "T_Theta": bound_theta, "T_Phi": bound_phi}


def all_bounds(rho: StateLike, sigma: StateLike, orbit: dyn.Orbit) -> dict[str, QslReport]:
    """Every mixed-state bound whose preconditions hold, on one shared orbit."""
    out = {name: fn(rho, sigma, orbit) for name, fn in _GENERIC.items()}
    if orbit.is_unitary:
        out["T_L"] = bound_tl(rho, sigma, orbit)
        try:
            out["T_Theta"] = bound_theta(rho, sigma, orbit)
            out["T_Phi"] = bound_phi(rho, sigma, orbit)
        except (UndefinedAngleError, DomainError):
            pass
        else:
            best = max((out["T_L"], out["T_Theta"], out["T_Phi"]), key=lambda r: r.value)
            out["T_unified"] = QslReport(
                "T_unified", best.value, best.distance, best.speed,
                frozenset(set(best.flags) | {"from_" + best.name}), orbit.tau,
            )
    return out


# ---------------------------------------------------------------- qubit closed forms


def qubit_scenario(theta: float, lam: float, varphi: float = 0.0, m: int = 65):
    """Qubit pair of equal spectrum (lam, 1 - lam) driven by e^{i varphi}|r1><r2| + h.c.

    Returns ``(rho, sigma, orbit)`` with the orbit running for time ``theta``.
    """
    h = np.array([[0.0, np.exp(1j * varphi)], [np.exp(-1j * varphi), 0.0]])
    rho = DensityMatrix(np.diag([lam, 1.0 - lam]).astype(complex))
    orbit = dyn.unitary_orbit(rho, h, theta, m)
    return rho, DensityMatrix(matcore.hermitize(orbit.states[-1])), orbit


def qubit_analytic_bounds(theta: float, lam: float) -> dict[str, float]:
    """Closed forms of T_Theta, T_Phi and T_L for the qubit scenario.

    With k = 1 - 2 lam the purity is (1 + k^2)/2 and Q_Phi = k sqrt(2/(1 + k^2)).
    """
    k = 1.0 - 2.0 * lam
    c2, c1, s1 = math.cos(2 * theta), math.cos(theta), math.sin(theta)
    k2 = k * k
    t_phi = metrics.safe_arccos(math.sqrt((1.0 + k2 * c2) / (1.0 + k2))) * math.sqrt((1.0 + k2) / (2.0 * k2))
    root = math.sqrt(max(0.0, 1.0 - k2 * s1 * s1))
    f_plus = 0.5 * math.sqrt(max(0.0, 1.0 + k2 * c2 + 2.0 * k * c1 * root))
    f_minus = 0.5 * math.sqrt(max(0.0, 1.0 + k2 * c2 - 2.0 * k * c1 * root))
    return {
        "T_Theta": float(theta),
        "T_Phi": float(t_phi),
        "T_L": metrics.safe_arccos(f_plus + f_minus, tol=1e-9),
    }


# ---------------------------------------------------------------- comparisons


def performance_function(x: float, y: float, z, beta):
    """sqrt(x + y - 2z) - sin^2(arccos E) with E the sub-fidelity from (z, beta).

    Non-negative exactly when T_D is at least the sub-fidelity Deffner bound.
    """
    z = np.asarray(z, dtype=float)
    beta = np.asarray(beta, dtype=float)
    e2 = z + np.sqrt(np.clip(2.0 * (z * z - beta), 0.0, None))
    return np.sqrt(np.clip(x + y - 2.0 * z, 0.0, None)) - (1.0 - np.minimum(1.0, e2))


def deffner_region_probability(x: float, y: float, n: int = 400) -> float:
    """Area fraction of {performance >= 0} over z in [0, sqrt(xy)], beta in [0, z^2].

    Midpoint rule in (z, u) with beta = u z^2, weighting by the Jacobian z^2.
    """
    if not (0.0 < x <= 1.0 + 1e-12 and 0.0 < y <= 1.0 + 1e-12):
        raise DomainError("purities must lie in (0, 1]")
    zmax = math.sqrt(x * y)
    z = (np.arange(n) + 0.5) / n * zmax
    u = (np.arange(n) + 0.5) / n
    zz, uu = np.meshgrid(z, u, indexing="ij")
    ok = performance_function(x, y, zz, uu * zz * zz) >= 0.0
    w = zz * zz
    return float(np.sum(w * ok) / np.sum(w))


SWEEP_COLUMNS = (
    "sample", "seed", "d", "purity_rho", "purity_sigma",
    "T_L", "T_Theta", "T_Phi", "T_D", "T_Sun", "T_delCampo",
    "T_Deffner", "T_Sun_star", "T_Deffner_star", "tau",
)


def tightness_sample(d: int, src: RandomSource, m: int = 3) -> dict:
    """One record: Bures rho, H = i log U with U Haar, sigma = U rho U^dag, tau = 1.

    The Hamiltonian is time independent, so every speed is constant along the
    orbit and a short grid integrates it exactly.
    """
    rng = src.generator() if isinstance(src, SampleStream) else src
    rho = bures_state(d, rng)
    h = random_hamiltonian(d, rng)
    orbit = dyn.unitary_orbit(rho, h, 1.0, m)
    sigma = orbit.states[-1]
    reps = all_bounds(rho.matrix, sigma, orbit)
    rec = {
        "d": d,
        "purity_rho": purity(rho),
        "purity_sigma": float(np.real(np.vdot(sigma, sigma))),
        "tau": orbit.tau,
    }
    for name in SWEEP_COLUMNS[5:-1]:
        rec[name] = reps[name].value if name in reps else float("nan")
    return rec


@dataclass(frozen=True)
class SweepSummary:
    d: int
    samples: int
    tl_wins: int
    win_fraction: float
    max_excess: float
    hierarchy_violations: int  # T_D below max(T_Sun, T_delCampo)

    def to_json(self) -> dict:
        return dict(self.__dict__)


def summarize_sweep(records: list[dict], d: int) -> SweepSummary:
    wins, excess, viol = 0, 0.0, 0
    for r in records:
        geo = max(r["T_Theta"], r["T_Phi"])
        if r["T_L"] > geo:
            wins += 1
            excess = max(excess, r["T_L"] / geo - 1.0)
        if r["T_D"] < max(r["T_Sun"], r["T_delCampo"]) * (1.0 - 1e-12):
            viol += 1
    n = len(records)
    return SweepSummary(d, n, wins, wins / n if n else 0.0, excess, viol)


def tightness_sweep(d: int, samples: int, stream: SampleStream, m: int = 3):
    """Evaluate all bounds on ``samples`` random orbits; returns (records, summary).

    Sample ``i`` draws from ``stream.at(i)``, so results do not depend on
    evaluation order.
    """
    records = []
    for i in range(samples):
        rec = tightness_sample(d, stream.at(i), m)
        rec["sample"] = i
        rec["seed"] = stream.seed
        records.append(rec)
    return records, summarize_sweep(records, d)
