"""Work extraction and charging of quantum batteries.

Covers passive states and ergotropy, work per copy for many-cell batteries,
separable extraction schedules, charging power along an orbit, the ladder
and separable-ball examples of collective advantage, the advantage upper
bounds, the Trotter overhead count and the operator-norm conjecture check.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import dynamics as dyn
from . import matcore, metrics
from .ensembles import RandomSource, SampleStream, as_generator, haar_unitary
from .errors import DomainError, ResourceError
from .states import (
    DensityMatrix,
    StateLike,
    as_matrix,
    as_state,
    gibbs_matching_entropy,
    vn_entropy,
)

LEVEL_CAP = 10**6
PASSIVE_TOL = 1e-12


@dataclass(frozen=True)
class BatteryModel:
    """N identical cells with ascending single-cell energies ``omega``."""

    n_cells: int
    omega: tuple

    def __post_init__(self):
        if self.n_cells < 1:
            raise DomainError("a battery needs at least one cell")
        if any(b <= a for a, b in zip(self.omega, self.omega[1:])):
            raise DomainError("cell energies must be strictly increasing")

    @property
    def d(self) -> int:
        return len(self.omega)

    @property
    def h0_cell(self) -> np.ndarray:
        return np.diag(np.asarray(self.omega, dtype=float)).astype(complex)

    def total_levels(self) -> np.ndarray:
        return level_sums(np.asarray(self.omega, dtype=float), self.n_cells)

    def h0_total(self) -> np.ndarray:
        return np.diag(self.total_levels()).astype(complex)


def _as_energies(h0) -> np.ndarray:
    a = np.asarray(h0)
    if a.ndim == 1:
        return a.astype(float)
    return np.linalg.eigvalsh(matcore.as_hermitian(a))


def _check_cap(d: int, n: int, cap: int) -> None:
    if d**n > cap:
        raise ResourceError(f"{d}^{n} levels exceed the cap of {cap}")


def level_sums(energies: np.ndarray, n: int, cap: int = LEVEL_CAP) -> np.ndarray:
    """Energies of the product basis, last cell fastest."""
    e = np.asarray(energies, dtype=float)
    _check_cap(e.size, n, cap)
    out = np.zeros(1)
    for _ in range(n):
        out = (out[:, None] + e[None, :]).ravel()
    return out


def product_spectrum(p: np.ndarray, n: int, cap: int = LEVEL_CAP) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    _check_cap(p.size, n, cap)
    out = np.ones(1)
    for _ in range(n):
        out = (out[:, None] * p[None, :]).ravel()
    return out


# ---------------------------------------------------------------- passivity


def passive_energy(populations, energies):
    """Energy of the passive rearrangement: largest population on the lowest level.

    Works with any numeric type, including ``Fraction``.
    """
    pops = sorted(populations, reverse=True)
    ens = sorted(energies)
    if len(pops) != len(ens):
        raise DomainError("populations and energies differ in length")
    return sum((p * e for p, e in zip(pops, ens)), start=type(pops[0])(0) if pops else 0)


def passive_state(rho: StateLike, h0) -> tuple[DensityMatrix, np.ndarray]:
    """Passive state of ``rho`` and a unitary V with V rho V^dag equal to it.

    Ties between eigenvalues of ``rho`` keep their original order.
    """
    st = as_state(rho)
    h = matcore.as_hermitian(h0)
    w, p = st.eig()
    en, q = matcore.eig_hermitian(h)
    order = np.argsort(-w, kind="stable")
    pops = w[order]
    v = q @ p[:, order].conj().T
    sig = matcore.hermitize(matcore.from_eig(pops, q))
    return DensityMatrix(sig), v


def ergotropy(rho: StateLike, h0) -> float:
    """tr[rho H0] minus the energy of the passive state; never negative."""
    st = as_state(rho)
    h = matcore.as_hermitian(h0)
    e = float(np.real(np.trace(st.matrix @ h)))
    w = passive_energy(st.spectrum, np.linalg.eigvalsh(h))
    return max(0.0, e - float(w))


def is_passive(rho: StateLike, h0, tol: float = 1e-10) -> bool:
    st = as_state(rho)
    h = matcore.as_hermitian(h0)
    if np.linalg.norm(matcore.commutator(st.matrix, h)) > tol:
        return False
    return ergotropy(st, h) <= tol


def ergotropy_gibbs_bound(rho: StateLike, h0) -> float:
    """tr[rho H0] - tr[G H0], G the Gibbs state with the entropy of ``rho``.

    An upper bound on the ergotropy, reached per copy as the number of copies grows.
    """
    st = as_state(rho)
    h = matcore.as_hermitian(h0)
    e = float(np.real(np.trace(st.matrix @ h)))
    s = vn_entropy(st)
    d = h.shape[0]
    if s <= 1e-14:
        return e - float(np.linalg.eigvalsh(h)[0])
    if s >= math.log(d) - 1e-14:
        return e - float(np.real(np.trace(h))) / d
    g, _ = gibbs_matching_entropy(h, s)
    return e - float(np.real(np.trace(g.matrix @ h)))


def wmax_per_copy(rho: StateLike, h0, n: int, cap: int = LEVEL_CAP) -> float:
    """Ergotropy of n copies divided by n, from sorted product eigenvalues."""
    if n < 1:
        raise DomainError("n must be at least 1")
    st = as_state(rho)
    h = matcore.as_hermitian(h0)
    en = np.linalg.eigvalsh(h)
    e1 = float(np.real(np.trace(st.matrix @ h)))
    pops = np.sort(product_spectrum(st.spectrum, n, cap))[::-1]
    levels = np.sort(level_sums(en, n, cap))
    return max(0.0, (n * e1 - float(np.dot(pops, levels))) / n)


def completely_passive_check(rho: StateLike, h0, n_max: int, cap: int = LEVEL_CAP) -> Optional[int]:
    """First number of copies whose joint state is not passive, or None."""
    st = as_state(rho)
    h = matcore.as_hermitian(h0)
    if not is_passive(st, h):
        return 1
    for n in range(2, n_max + 1):
        if wmax_per_copy(st, h, n, cap) * n > PASSIVE_TOL:
            return n
    return None


# ---------------------------------------------------------------- separable schedule


def _canonical_products(p: Sequence[float], idx: tuple) -> float:
    # multiply in a fixed order so permuted multi-indices give identical floats
    out = 1.0
    for i in sorted(idx):
        out *= p[i]
    return out


def separable_extraction_schedule(populations, energies, n: int, cap: int = LEVEL_CAP) -> list:
    """Swaps of product basis states that sort n copies of a diagonal state into its passive form.

    Each returned step ``(a, b)`` exchanges the populations of multi-indices
    ``a`` and ``b``, which differ in exactly one cell. A transposition of states
    differing in j cells is split into 2j - 1 such steps, changing the first
    differing cell first.
    """
    p = [float(x) for x in populations]
    e = [float(x) for x in energies]
    d = len(p)
    if len(e) != d:
        raise DomainError("populations and energies differ in length")
    _check_cap(d, n, cap)
    states = list(itertools.product(range(d), repeat=n))
    level = {s: sum(sorted(e[i] for i in s)) for s in states}
    value = {s: _canonical_products(p, s) for s in states}
    order = sorted(states, key=lambda s: level[s])  # stable: ties keep lexicographic order
    targets = sorted(value.values(), reverse=True)
    target = {}
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and level[order[j]] == level[order[i]]:
            j += 1
        group = order[i:j]
        need = sorted(targets[i:j], reverse=True)
        rest = list(need)
        unassigned = []
        for s in group:
            if value[s] in rest:
                rest.remove(value[s])
                target[s] = value[s]
            else:
                unassigned.append(s)
        for s, v in zip(unassigned, rest):
            target[s] = v
        i = j
    current = dict(value)
    steps = []
    for pos, s in enumerate(order):
        if current[s] == target[s]:
            continue
        src = next(t for t in order[pos + 1:] if current[t] == target[s] and current[t] != target[t])
        steps.extend(_single_cell_hops(src, s))
        current[s], current[src] = current[src], current[s]
    return steps


def _single_cell_hops(a: tuple, b: tuple) -> list:
    diff = [i for i in range(len(a)) if a[i] != b[i]]
    path = [a]
    cur = list(a)
    for i in diff:
        cur[i] = b[i]
        path.append(tuple(cur))
    forward = list(zip(path[:-1], path[1:]))
    return forward + forward[-2::-1]


def apply_schedule(populations, n: int, steps: list) -> dict:
    """Populations per multi-index after applying the swap steps in order."""
    p = [float(x) for x in populations]
    vals = {s: _canonical_products(p, s) for s in itertools.product(range(len(p)), repeat=n)}
    for a, b in steps:
        vals[a], vals[b] = vals[b], vals[a]
    return vals


# ---------------------------------------------------------------- power


@dataclass(frozen=True)
class PowerTrace:
    times: np.ndarray
    energy: np.ndarray
    power: np.ndarray

    @property
    def work_charged(self) -> np.ndarray:
        """E(t) - E(0): positive when energy flows into the battery."""
        return self.energy - self.energy[0]

    @property
    def work_extracted(self) -> np.ndarray:
        """E(0) - E(t): positive when energy is drawn from the battery."""
        return self.energy[0] - self.energy


def power_trace(orbit: dyn.Orbit, h0) -> PowerTrace:
    """Energy tr[rho_t H0] and instantaneous power -i tr{[H(t), rho(t)] H0}."""
    h = matcore.as_hermitian(h0)
    if h.shape[0] != orbit.dim:
        raise DomainError("internal Hamiltonian does not match the orbit")
    energy = np.real(np.einsum("kij,ji->k", orbit.states, h))
    power = np.real(np.einsum("kij,ji->k", orbit.tangents, h))
    return PowerTrace(orbit.times.copy(), energy, power)


def average_power(orbit: dyn.Orbit, h0) -> float:
    tr = power_trace(orbit, h0)
    return float(tr.work_charged[-1] / orbit.tau) if orbit.tau > 0 else 0.0


# ---------------------------------------------------------------- advantage


@dataclass(frozen=True)
class LadderAdvantage:
    tau_parallel: float
    tau_collective: float
    gamma: Fraction


def advantage_ladder(n: int, e_max: float) -> LadderAdvantage:
    """Parallel and collective charging times under an operator-norm cap ``e_max``.

    Times are counted in units of pi/(2 e_max): the parallel protocol needs N
    units, the collective one a single unit, so the advantage is exactly N.
    """
    if n < 1 or e_max <= 0.0:
        raise DomainError("need n >= 1 and e_max > 0")
    unit = math.pi / (2.0 * e_max)
    return LadderAdvantage(n * unit, unit, Fraction(n, 1))


def ladder_hamiltonians(n: int, d: int, e_max: float) -> tuple[np.ndarray, np.ndarray]:
    """(H_parallel, H_collective) coupling ground and top levels of n cells."""
    dims = [d] * n
    flip = np.zeros((d, d), dtype=complex)
    flip[0, d - 1] = flip[d - 1, 0] = 1.0
    hp = sum(matcore.embed(flip, [l], dims) for l in range(n)) * (e_max / n)
    dim = d**n
    hc = np.zeros((dim, dim), dtype=complex)
    hc[0, dim - 1] = hc[dim - 1, 0] = e_max
    return hp, hc


def simulate_ladder(n: int, d: int = 2, e_max: float = 1.0) -> tuple[float, float]:
    """Infidelities with the fully excited state at the ladder charging times."""
    if d**n > 4096:
        raise ResourceError("ladder simulation is limited to 4096 levels")
    adv = advantage_ladder(n, e_max)
    hp, hc = ladder_hamiltonians(n, d, e_max)
    dim = d**n
    g = np.zeros(dim, dtype=complex)
    g[0] = 1.0
    out = []
    for h, t in ((hp, adv.tau_parallel), (hc, adv.tau_collective)):
        psi = matcore.matrix_exp_skewh(h, t) @ g
        out.append(float(1.0 - abs(psi[-1]) ** 2))
    return out[0], out[1]


def _qubit_gibbs(beta: float) -> np.ndarray:
    p = np.array([1.0, math.exp(-beta)])
    return np.diag(p / p.sum()).astype(complex)


_X = np.array([[0, 1], [1, 0]], dtype=complex)


def advantage_separable_ball(n: int, beta: float) -> tuple[float, float]:
    """(Gamma_C1, Gamma_C2) for flipping n qubits from G_beta to G_-beta.

    Parallel driving applies X to each cell; collective driving applies
    alpha X^{(x)n}, with alpha fixed by matching the time-averaged energy spread
    (C1, scaled by sqrt(n)) or mean energy above ground (C2, scaled by n) of
    the parallel protocol. Both protocols take pi/2 at unit strength.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    rho = _qubit_gibbs(beta)
    # single cell under X: spread and energy above ground, constant in time
    mean = float(np.real(np.trace(rho @ _X)))
    spread1 = math.sqrt(max(0.0, 1.0 - mean * mean))
    above1 = mean + 1.0
    # collective generator X^{(x)n} on the product state: <X>^n and X^2 = 1
    mean_n = mean**n
    spread_n = math.sqrt(max(0.0, 1.0 - mean_n * mean_n))
    above_n = mean_n + 1.0
    alpha_c1 = math.sqrt(n) * spread1 / spread_n
    alpha_c2 = n * above1 / above_n
    # tau_par = pi/2 and tau_col = pi/(2 alpha)
    return alpha_c1, alpha_c2


def simulate_separable_ball(n: int, beta: float) -> dict:
    """Dense cross-check of the separable-ball protocols for n <= 6 qubits."""
    if n > 6:
        raise ResourceError("separable-ball simulation is limited to 6 qubits")
    rho1 = _qubit_gibbs(beta)
    target1 = _qubit_gibbs(-beta)
    rho = matcore.kron(*([rho1] * n))
    target = matcore.kron(*([target1] * n))
    dims = [2] * n
    hp = sum(matcore.embed(_X, [l], dims) for l in range(n))
    xn = matcore.kron(*([_X] * n))
    orb_p = dyn.unitary_orbit(rho, hp, math.pi / 2, 5)
    spread_p = dyn.avg_std_energy(orb_p)
    above_p = dyn.avg_energy_above_ground(orb_p)
    out = {"parallel_error": float(np.linalg.norm(orb_p.states[-1] - target))}
    for name, alpha_fn in (("C1", dyn.avg_std_energy), ("C2", dyn.avg_energy_above_ground)):
        unit = dyn.unitary_orbit(rho, xn, math.pi / 2, 5)
        ref = spread_p if name == "C1" else above_p
        alpha = ref / alpha_fn(unit)
        tau_c = math.pi / (2 * alpha)
        orb_c = dyn.unitary_orbit(rho, alpha * xn, tau_c, 5)
        out[name] = (math.pi / 2) / tau_c
        out[name + "_error"] = float(np.linalg.norm(orb_c.states[-1] - target))
    return out


def trotter_overhead_bound(k: int, m: int) -> int:
    """k (m - 1) + 1."""
    if k < 1 or m < 1:
        raise DomainError("k and m must be positive")
    return k * (m - 1) + 1


def trotter_overhead(k: int, m: int) -> int:
    """Largest family of pairwise-intersecting k-sets using each element at most m times.

    Exhaustive search with canonical labels: sets are added in increasing
    lexicographic order and new elements take the next unused labels. The
    search stops early once the upper bound k (m - 1) + 1 is reached.
    """
    bound = trotter_overhead_bound(k, m)
    first = tuple(range(k))
    best = 1

    def extend(family: list, degree: list, nlabels: int) -> None:
        nonlocal best
        if len(family) > best:
            best = len(family)
        if best == bound:
            return
        # every later set must take a free slot from each set already chosen
        spare = min(sum(m - degree[e] for e in f) for f in family)
        if len(family) + spare <= best:
            return
        avail = [e for e in range(nlabels) if degree[e] < m]
        last = family[-1]
        for fresh in range(k + 1):
            for old in itertools.combinations(avail, k - fresh):
                cand = old + tuple(range(nlabels, nlabels + fresh))
                if cand <= last:
                    continue
                s = set(cand)
                if not all(s.intersection(f) for f in family):
                    continue
                for e in old:
                    degree[e] += 1
                deg2 = degree + [1] * fresh
                family.append(cand)
                extend(family, deg2, nlabels + fresh)
                family.pop()
                for e in old:
                    degree[e] -= 1
                if best == bound:
                    return

    extend([first], [1] * k, k)
    return best


def trotter_errors(terms: Sequence[np.ndarray], t: float, steps: Sequence[int]) -> np.ndarray:
    """HS distance between the first-order product formula and exp(-i t sum(terms))."""
    hs = [matcore.as_hermitian(h) for h in terms]
    exact = matcore.matrix_exp_skewh(sum(hs), t)
    out = []
    for L in steps:
        step = np.eye(exact.shape[0], dtype=complex)
        for h in hs:
            step = matcore.matrix_exp_skewh(h, t / L) @ step
        out.append(np.linalg.norm(np.linalg.matrix_power(step, L) - exact))
    return np.array(out)


@dataclass(frozen=True)
class AdvantageBound:
    constraint: str
    value: float
    details: dict = field(default_factory=dict)


def advantage_upper_bounds(
    n: int,
    k: int,
    m: int,
    constraint: str,
    s_factor: float = 1.0,
    gamma: float = math.pi / 2,
    rho: Optional[StateLike] = None,
    sigma: Optional[StateLike] = None,
) -> AdvantageBound:
    """Upper bound on the collective advantage for k-body charging with participation m.

    ``c0`` returns gamma k (k (m - 1) + 1), which is gamma k for m = 1. The
    other constraints return s_factor * scale * L(rho, sigma) / L(rho^N, sigma^N)
    with scale sqrt(N) for ``c1`` and N for ``c2`` and ``opnorm``.
    """
    if not 1 <= k <= n:
        raise DomainError("need 1 <= k <= n")
    if m < 1:
        raise DomainError("m must be at least 1")
    if constraint == "c0":
        mult = trotter_overhead_bound(k, m)
        return AdvantageBound("c0", gamma * k * mult, {"gamma": gamma, "k": k, "overhead": mult})
    if constraint not in ("c1", "c2", "opnorm"):
        raise DomainError(f"unknown constraint {constraint!r}")
    if rho is None or sigma is None:
        raise DomainError("single-cell endpoints are required for this constraint")
    f = metrics.fidelity(rho, sigma)
    l1 = metrics.safe_arccos(f)
    ln = metrics.safe_arccos(f**n)
    if ln == 0.0:
        raise DomainError("endpoints coincide")
    scale = math.sqrt(n) if constraint == "c1" else float(n)
    ratio = l1 / ln
    return AdvantageBound(constraint, s_factor * scale * ratio, {"angle_cell": l1, "angle_total": ln, "scale": scale})


# ---------------------------------------------------------------- conjecture


@dataclass(frozen=True)
class ConjectureResult:
    n: int
    k: int
    samples: int
    max_p: float
    values: np.ndarray
    violations: tuple  # sample indices with P > 1


def conjecture_terms(n: int, k: int, rng: np.random.Generator):
    """One draw of (sum_mu h_mu, sum_mu [h_mu, iota_mu] / 2) on n qubits."""
    dims = [2] * n
    dim = 2**n
    x = np.zeros((dim, dim), dtype=complex)
    y = np.zeros((dim, dim), dtype=complex)
    exc = np.diag([0.0, 1.0]).astype(complex)
    iota_local = sum(matcore.embed(exc, [i], [2] * k) for i in range(k)) / k
    for mu in itertools.combinations(range(n), k):
        u = haar_unitary(2**k, rng)
        h = matcore.matrix_log_unitary(u)
        x += matcore.embed(h, list(mu), dims)
        y += matcore.embed(0.5 * matcore.commutator(h, iota_local), list(mu), dims)
    return x, y


def conjecture_ratio(x: np.ndarray, y: np.ndarray) -> float:
    return matcore.op_norm(y) / matcore.op_norm(x)


def conjecture_check(n: int, k: int, samples: int, stream: SampleStream) -> ConjectureResult:
    """Largest ratio ||sum Y_mu||_op / ||sum X_mu||_op over random k-body Hamiltonians."""
    if not 1 <= k <= n or 2**n > 2**6:
        raise DomainError("need 1 <= k <= n <= 6")
    vals = np.empty(samples)
    for i in range(samples):
        x, y = conjecture_terms(n, k, stream.at(i).generator())
        vals[i] = conjecture_ratio(x, y)
    viol = tuple(int(i) for i in np.nonzero(vals > 1.0)[0])
    return ConjectureResult(n, k, samples, float(vals.max()) if samples else 0.0, vals, viol)


# ---------------------------------------------------------------- constraints


@dataclass(frozen=True)
class ConstraintQuantities:
    spread: float  # time-averaged energy standard deviation
    energy: float  # time-averaged energy above ground
    opnorm: float  # time-averaged operator norm


def constraint_quantities(orbit: dyn.Orbit) -> ConstraintQuantities:
    """Time averages entering the C0, C1 and C2 constraints along a Hamiltonian orbit."""
    norms = [matcore.op_norm(h) for h in orbit.hamiltonians]
    ops = [norms[int(j)] for j in orbit.h_index]
    return ConstraintQuantities(
        dyn.avg_std_energy(orbit), dyn.avg_energy_above_ground(orbit), orbit.time_average(ops)
    )
