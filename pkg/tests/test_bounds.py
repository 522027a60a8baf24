import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qslkit import bounds as B, dynamics as D, matcore, metrics as M, states as S
from qslkit.ensembles import SampleStream, bures_state, random_hamiltonian
from qslkit.errors import DomainError, EndpointMismatchError, InconsistentOrbitError

from conftest import rng_for, seeds

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def rand_ket(d, rng):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def pure_orbit(psi, h, tau, m=33):
    return D.unitary_orbit(np.outer(psi, psi.conj()), h, tau, m)


def final_ket(psi, h, tau):
    return matcore.matrix_exp_skewh(h, tau) @ psi


def test_orthogonal_optimal_hamiltonian_saturates():
    psi = np.array([1, 0, 0], dtype=complex)
    phi = np.array([0, 1j, 0], dtype=complex)
    h, tau = B.optimal_pure_hamiltonian(psi, phi, delta_e=2.0)
    assert math.isclose(tau, (math.pi / 2) / 2.0)
    orb = pure_orbit(psi, h, tau)
    phi_t = final_ket(psi, h, tau)
    assert abs(abs(np.vdot(phi, phi_t)) - 1) <= 1e-12
    mt = B.bound_mt_pure(psi, phi_t, orb)
    assert abs(mt.value - tau) <= 1e-9
    assert B.bound_unified_pure(psi, phi_t, orb).value <= tau + 1e-9


def test_pure_bounds_vanish_on_equal_states(rng):
    psi = rand_ket(3, rng)
    h = np.zeros((3, 3))
    orb = pure_orbit(psi, h, 1.0, 5)
    for f in (B.bound_mt_pure, B.bound_ml_pure, B.bound_unified_pure):
        assert f(psi, psi, orb).value == 0.0


def test_endpoint_mismatch(rng):
    psi = rand_ket(2, rng)
    orb = pure_orbit(psi, SX, 1.0)
    with pytest.raises(EndpointMismatchError):
        B.bound_mt_pure(psi, psi, orb)


@given(seeds, st.integers(2, 6), st.floats(0.1, 3.0))
def test_pure_bounds_valid(seed, d, tau):
    rng = rng_for(seed)
    psi = rand_ket(d, rng)
    h = random_hamiltonian(d, rng)
    orb = pure_orbit(psi, h, tau)
    phi = final_ket(psi, h, tau)
    mt, ml, uni = (f(psi, phi, orb) for f in (B.bound_mt_pure, B.bound_ml_pure, B.bound_unified_pure))
    assert mt.value <= tau + 1e-8
    for rep in (ml, uni):
        if "orthogonal" in rep.flags:
            assert rep.value <= tau + 1e-8
    assert abs(uni.value - max(mt.value, ml.value)) <= 1e-12


def test_ml_form_not_a_bound_for_overlapping_states():
    # small excited weight q: mean energy q, spread sqrt(q(1-q)), so arccos/E overshoots
    q = 0.05
    psi = np.array([math.sqrt(1 - q), math.sqrt(q)], dtype=complex)
    h = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
    tau = 0.5
    orb = pure_orbit(psi, h, tau)
    phi = final_ket(psi, h, tau)
    ml = B.bound_ml_pure(psi, phi, orb)
    assert "orthogonal" not in ml.flags and ml.value > tau
    assert B.bound_mt_pure(psi, phi, orb).value <= tau


def test_ml_orthogonal_valid(rng):
    for _ in range(20):
        d = 3
        psi = rand_ket(d, rng)
        phi = rand_ket(d, rng)
        phi -= np.vdot(psi, phi) * psi
        phi /= np.linalg.norm(phi)
        h, tau = B.optimal_pure_hamiltonian(psi, phi, delta_e=1.3)
        orb = pure_orbit(psi, h, tau)
        end = final_ket(psi, h, tau)
        rep = B.bound_ml_pure(psi, end, orb)
        assert "orthogonal" in rep.flags and rep.value <= tau + 1e-8


def test_tl_pure_equals_mt(rng):
    psi = rand_ket(3, rng)
    h = random_hamiltonian(3, rng)
    orb = pure_orbit(psi, h, 0.7)
    phi = final_ket(psi, h, 0.7)
    rho, sigma = np.outer(psi, psi.conj()), np.outer(phi, phi.conj())
    assert abs(B.bound_tl(rho, sigma, orb).value - B.bound_mt_pure(psi, phi, orb).value) <= 1e-9


@pytest.mark.parametrize("theta", [math.pi / 8, math.pi / 4, math.pi / 2])
@pytest.mark.parametrize("lam", [0.1, 0.25, 0.45])
def test_qubit_scenario_closed_forms(theta, lam):
    rho, sigma, orb = B.qubit_scenario(theta, lam, varphi=0.7)
    closed = B.qubit_analytic_bounds(theta, lam)
    assert abs(B.bound_theta(rho, sigma, orb).value - theta) <= 1e-9
    assert abs(B.bound_phi(rho, sigma, orb).value - closed["T_Phi"]) <= 1e-9
    assert abs(B.bound_tl(rho, sigma, orb).value - closed["T_L"]) <= 1e-9
    uni = B.bound_unified_mixed(rho, sigma, orb)
    assert abs(uni.value - theta) <= 1e-9


def test_pure_qubit_bounds_coincide(rng):
    psi = rand_ket(2, rng)
    h = random_hamiltonian(2, rng)
    orb = pure_orbit(psi, h, 0.9)
    phi = final_ket(psi, h, 0.9)
    rho, sigma = np.outer(psi, psi.conj()), np.outer(phi, phi.conj())
    t = [B.bound_theta(rho, sigma, orb).value, B.bound_phi(rho, sigma, orb).value, B.bound_tl(rho, sigma, orb).value]
    assert max(t) - min(t) <= 1e-8


def test_cyclic_orbit_gives_zero():
    rho = np.diag([0.3, 0.7]).astype(complex) + 0.1 * SX
    orb = D.unitary_orbit(rho, SZ, math.pi, 65)
    reps = B.all_bounds(rho, orb.states[-1], orb)
    assert all(abs(r.value) <= 1e-7 for r in reps.values())


def test_frozen_orbit_infinite_and_inconsistent():
    rho, sigma = np.diag([0.9, 0.1]), np.diag([0.1, 0.9])
    orb = D.Orbit(
        np.array([0.0, 1.0]),
        np.array([rho, sigma], dtype=complex),
        np.zeros((2, 2, 2), dtype=complex),
        "custom",
    )
    with pytest.raises(InconsistentOrbitError):
        B.bound_td(rho, sigma, orb)
    rep = B.bound_sun(rho, sigma, orb)
    assert rep.infinite and "infinite" in rep.flags


def test_unitary_bounds_need_hamiltonian():
    orb = D.dephasing_orbit(np.full((2, 2), 0.5), 1.0, 1.0, 9)
    with pytest.raises(DomainError):
        B.bound_tl(orb.states[0], orb.states[-1], orb)


def test_depolarizing_td_equals_tau(rng):
    rho = bures_state(3, rng)
    orb = D.depolarizing_orbit(rho, lambda t: 1 - t / 2, 1.0, 65, deps=lambda t: -0.5)
    assert abs(B.bound_td(rho, orb.states[-1], orb).value - 1.0) <= 1e-9


def test_td_composition(rng):
    rho = bures_state(2, rng)
    alpha = bures_state(3, rng)
    h = random_hamiltonian(2, rng)
    orb = D.unitary_orbit(rho, h, 1.0, 65)
    big = D.unitary_orbit(np.kron(rho.matrix, alpha.matrix), np.kron(h, np.eye(3)), 1.0, 65)
    t1 = B.bound_td(rho, orb.states[-1], orb).value
    t2 = B.bound_td(big.states[0], big.states[-1], big).value
    assert abs(t1 - t2) <= 1e-9


def test_deffner_star_pure_uses_overlap(rng):
    psi = rand_ket(3, rng)
    h = random_hamiltonian(3, rng)
    orb = pure_orbit(psi, h, 0.8)
    rho, sigma = orb.states[0], orb.states[-1]
    rep = B.bound_deffner_star(rho, sigma, orb)
    z = M.overlap(rho, sigma)
    assert abs(rep.distance - (1 - z)) <= 1e-9
    assert "pure_endpoint" in rep.flags


def test_report_json(rng):
    rho, sigma, orb = B.qubit_scenario(0.5, 0.2)
    data = B.bound_theta(rho, sigma, orb).to_json()
    assert data["name"] == "T_Theta" and math.isclose(data["value"], 0.5)
    assert "unitary" in data["flags"]


@given(seeds, st.integers(2, 5), st.floats(0.2, 2.0))
def test_all_bounds_valid_and_ordered(seed, d, tau):
    rng = rng_for(seed)
    rho = bures_state(d, rng)
    orb = D.unitary_orbit(rho, random_hamiltonian(d, rng), tau, 65)
    reps = B.all_bounds(rho, orb.states[-1], orb)
    for name, rep in reps.items():
        if name == "T_Deffner" and "pure_endpoint" not in rep.flags:
            continue
        if name == "T_Deffner_star":
            continue
        assert rep.value <= tau * (1 + 1e-8) + 1e-8, name
    assert reps["T_Sun_star"].value >= reps["T_Sun"].value - 1e-12
    assert reps["T_Deffner_star"].value >= reps["T_Deffner"].value - 1e-12
    assert reps["T_D"].value >= max(reps["T_Sun"].value, reps["T_delCampo"].value) - 1e-12


@given(seeds, st.integers(2, 5), st.sampled_from([0.1, 0.5, 0.9]))
def test_theta_invariant_under_depolarization(seed, d, eps):
    rng = rng_for(seed)
    rho = bures_state(d, rng)
    h = random_hamiltonian(d, rng)
    orb = D.unitary_orbit(rho, h, 1.0, 33)
    mixed = S.mix_with(rho, S.maximally_mixed(d), eps)
    orb2 = D.unitary_orbit(mixed, h, 1.0, 33)
    t1 = B.bound_theta(rho, orb.states[-1], orb).value
    t2 = B.bound_theta(mixed, orb2.states[-1], orb2).value
    assert abs(t1 - t2) <= 1e-7


# ---------------------------------------------------------------- region


@pytest.mark.parametrize(
    "x, y, expect",
    [
        # semi-analytic reference, tests/oracles/generate.py
        (1.0, 1.0, 1.0),
        (0.5, 0.5, 0.9000000000000004),
        (0.8, 0.3, 0.986471704493568),
        (0.4, 0.7, 0.9715832789931793),
        (0.34, 0.34, 0.060656889978190125),
        (0.3, 0.6, 0.8204995942619289),
    ],
)
def test_deffner_region_oracle(x, y, expect):
    assert abs(B.deffner_region_probability(x, y) - expect) <= 2e-4


def test_deffner_region_rule_of_thumb():
    for x in np.linspace(0.34, 1.0, 7):
        for y in np.linspace(max(1 - x, 1 / 3), 1.0, 5):
            assert B.deffner_region_probability(x, y, n=200) >= 0.5


def test_deffner_region_monotone_in_y():
    for x in (0.35, 0.5, 0.8):
        vals = [B.deffner_region_probability(x, y, n=200) for y in np.linspace(1 / 3, 1, 15)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_deffner_region_domain():
    with pytest.raises(DomainError):
        B.deffner_region_probability(1.2, 0.5)


# ---------------------------------------------------------------- sweeps


def test_qubit_hierarchy_grid():
    for theta in (math.pi / 8, math.pi / 4, math.pi / 2):
        for lam in np.linspace(0.01, 0.49, 25):
            t = B.qubit_analytic_bounds(theta, lam)
            assert t["T_Theta"] >= t["T_Phi"] - 1e-12 >= t["T_L"] - 2e-12


def test_pure_subsample_phi_equals_tl():
    rng = rng_for(99)
    for d in (3, 5):
        for _ in range(20):
            psi = rand_ket(d, rng)
            h = random_hamiltonian(d, rng)
            orb = pure_orbit(psi, h, 1.0, 9)
            rho, sigma = orb.states[0], orb.states[-1]
            assert abs(B.bound_phi(rho, sigma, orb).value - B.bound_tl(rho, sigma, orb).value) <= 1e-8


def test_tightness_sweep_reproducible():
    recs, summary = B.tightness_sweep(4, 30, SampleStream(5, 4))
    again, _ = B.tightness_sweep(4, 30, SampleStream(5, 4))
    assert recs == again
    assert summary.samples == 30 and summary.hierarchy_violations == 0
    assert set(B.SWEEP_COLUMNS) <= set(recs[0])
    one = B.tightness_sample(4, SampleStream(5, 4).at(7))
    assert one["T_L"] == recs[7]["T_L"]
