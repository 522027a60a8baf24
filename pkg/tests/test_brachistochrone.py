import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qslkit import brachistochrone as B
from qslkit import matcore, metrics
from qslkit.ensembles import SampleStream, bures_state, random_hamiltonian
from qslkit.errors import DomainError

from conftest import rng_for, seeds

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)


def _qubit_problem(p=0.6):
    rho = (np.eye(2) + p * SX) / 2
    sigma = (np.eye(2) + p * SY) / 2
    r = np.column_stack([[1, -1], [1, 1]]) / math.sqrt(2)
    s = np.column_stack([[-1j, -1], [-1j, 1]]) / math.sqrt(2)
    return B.make_problem(rho, sigma, r, s)


def test_make_problem_rejects_mismatch():
    with pytest.raises(DomainError):
        B.make_problem(np.diag([0.3, 0.7]), np.diag([0.4, 0.6]))
    with pytest.raises(DomainError):
        B.make_problem(np.diag([0.3, 0.7]), np.diag([0.2, 0.3, 0.5]))
    with pytest.raises(DomainError):
        B.make_problem(np.diag([0.3, 0.7]), np.diag([0.7, 0.3]), r=np.eye(2)[:, ::-1])


def test_connect_unitary_identity():
    rho = np.diag([0.1, 0.3, 0.6])
    prob = B.make_problem(rho, rho)
    assert np.allclose(B.connect_unitary(prob, phi=np.zeros(3)), np.eye(3))


def test_connect_unitary_qubit_rotations():
    prob = _qubit_problem()
    hz = matcore.matrix_log_unitary(B.connect_unitary(prob, phi=[np.pi / 4, np.pi / 4]))
    assert np.allclose(hz, np.pi / 4 * SZ, atol=1e-12)
    hxy = matcore.matrix_log_unitary(B.connect_unitary(prob, phi=[3 * np.pi / 4, -np.pi / 4]))
    assert np.allclose(hxy, math.sqrt(2) / 4 * np.pi * (SX + SY), atol=1e-12)
    for h in (hz, hxy):
        u = matcore.matrix_exp_skewh(h)
        assert np.allclose(u @ prob.rho @ u.conj().T, prob.sigma, atol=1e-12)


def test_qubit_efficiencies():
    p = 0.6
    prob = _qubit_problem(p)
    hz = np.pi / 4 * SZ
    hxy = math.sqrt(2) / 4 * np.pi * (SX + SY)
    assert math.isclose(B.efficiency_eta(hz, prob.rho), 1.0)
    assert math.isclose(B.efficiency_eta(hxy, prob.rho), math.sqrt(1 - p * p / 2))
    # the z rotation is orthogonal to the commutant of rho, the xy one is not
    assert math.isclose(B.efficiency_eta_star(hz, prob.rho), 1.0)
    assert B.efficiency_eta_star(hxy, prob.rho) < 1.0


def test_connect_unitary_phases_round_trip(rng):
    rho, sigma = B.random_pair(4, rng)
    prob = B.make_problem(rho, sigma)
    phi = rng.uniform(-np.pi, np.pi, 4)
    o = B.connect_unitary(prob, phi=phi)
    back = B.phases_of(prob, o)
    assert np.allclose(np.exp(1j * back), np.exp(1j * phi))
    assert np.allclose(o @ prob.rho @ o.conj().T, prob.sigma, atol=1e-10)


def test_mask_examples():
    rho = np.diag([0.1, 0.3, 0.6])
    h = random_hamiltonian(3, SampleStream(1).generator())
    assert np.allclose(B.mask(h, rho), np.diag(np.diag(h)))
    deg = np.diag([0.2, 0.2, 0.6])
    m = B.mask(h, deg)
    expect = np.zeros_like(h)
    expect[:2, :2] = h[:2, :2]
    expect[2, 2] = h[2, 2]
    assert np.allclose(m, expect)
    commuting = np.diag([1.0, -2.0, 0.5])
    assert np.allclose(B.mask(commuting, rho), commuting)


@given(seeds, st.integers(2, 5))
def test_mask_is_orthogonal_projection(seed, d):
    rng = rng_for(seed)
    rho = bures_state(d, rng)
    h, g = random_hamiltonian(d, rng), random_hamiltonian(d, rng)
    m = B.mask(h, rho)
    assert np.linalg.norm(m @ rho.matrix - rho.matrix @ m) <= 1e-9 * max(1.0, np.linalg.norm(h))
    assert np.allclose(B.mask(m, rho), m, atol=1e-10)
    assert abs(np.trace((h - m) @ B.mask(g, rho))) <= 1e-9 * np.linalg.norm(h) * np.linalg.norm(g)


def test_efficiency_rejects_zero():
    rho = np.diag([0.4, 0.6])
    with pytest.raises(DomainError):
        B.efficiency_eta(np.zeros((2, 2)), rho)
    with pytest.raises(DomainError):
        B.efficiency_eta_star(np.zeros((2, 2)), rho)


@given(seeds, st.integers(2, 5))
def test_efficiency_ranges(seed, d):
    rng = rng_for(seed)
    rho = bures_state(d, rng)
    h = random_hamiltonian(d, rng)
    assert 0.0 <= B.efficiency_eta(h, rho) <= 1.0 + 1e-12
    assert 0.0 <= B.efficiency_eta_star(h, rho) <= 1.0 + 1e-12
    perp = h - B.mask(h, rho)
    if np.linalg.norm(perp) > 1e-6:
        assert B.efficiency_eta_star(perp, rho) >= 1 - 1e-6


def test_evolution_time_scale_invariant(rng):
    rho = bures_state(3, rng)
    h = random_hamiltonian(3, rng)
    assert math.isclose(B.evolution_time(h, rho), B.evolution_time(2 * h, rho) / 2)
    assert math.isclose(B.evolution_time(h, rho, omega=2.0), B.evolution_time(h, rho) / 2)


def test_orthogonal_qubit_optimum():
    rho = np.diag([0.0, 1.0])
    sigma = np.diag([1.0, 0.0])
    run = B.solve(rho, sigma, phi0=[0.3, -0.4], eps=1e-6)
    assert run.converged
    assert abs(B.evolution_time(run.hamiltonian, rho) - np.pi / 2) <= 1e-5


def test_solve_validation(rng):
    rho, sigma = B.random_pair(3, rng)
    with pytest.raises(DomainError):
        B.solve(rho, sigma, variant="sideways")
    with pytest.raises(DomainError):
        B.solve(rho, sigma, eps=0.0)
    with pytest.raises(DomainError):
        B.solve(rho, sigma, max_iter=0)


def test_solve_at_fixed_point():
    prob = _qubit_problem()
    run = B.solve(prob, phi0=[np.pi / 4, np.pi / 4], eps=1e-6)
    assert run.converged and run.iterations == 0
    assert math.isclose(run.final.eta_star, 1.0)


def test_unconverged_run_is_reported(rng):
    rho, sigma = B.random_pair(6, rng)
    run = B.solve(rho, sigma, phi0=rng.uniform(0, 2 * np.pi, 6), eps=1e-9, max_iter=1)
    assert not run.converged and run.iterations == 1


@pytest.mark.parametrize("variant", B.VARIANTS)
def test_every_iterate_is_exact(variant):
    rng = SampleStream(7, 3).generator()
    rho, sigma = B.random_pair(4, rng)
    run = B.solve(rho, sigma, phi0=B.random_phases(4, rng), eps=1e-2, variant=variant)
    assert run.converged
    assert max(r.endpoint_error for r in run.history) <= 1e-8
    assert run.final.parallel_norm <= 1e-2 * run.final.h_norm
    assert run.final.eta_star >= 0.9


@settings(max_examples=15)
@given(seeds, st.integers(2, 6))
def test_pure_state_optimum(seed, d):
    rng = rng_for(seed)
    rho, sigma = B.random_pair(d, rng, mode="pure")
    eps = 1e-4
    run = B.solve(rho, sigma, phi0=B.random_phases(d, rng), eps=eps)
    if run.converged:
        ratio = B.evolution_time(run.hamiltonian, rho) / metrics.bures_angle(rho, sigma)
        assert 1 - 1e-9 <= ratio <= 1 + 10 * eps
        assert B.efficiency_eta(run.hamiltonian, rho) >= 1 - eps


def test_backward_mirrors_forward():
    rng = SampleStream(3, 1).generator()
    rho, sigma = B.random_pair(3, rng)
    prob = B.make_problem(rho, sigma)
    phi = B.random_phases(3, rng).phases
    fwd = B.solve(prob, phi0=phi, eps=1e-2)
    bwd = B.solve(prob.swapped(), phi0=-phi, eps=1e-2, variant="backward")
    a = fwd.phase_history()
    b = -bwd.phase_history()
    a, b = a - a[:, :1], b - b[:, :1]
    assert a.shape == b.shape
    assert np.max(np.abs(np.angle(np.exp(1j * (a - b))))) <= 1e-6


def test_multi_start():
    stream = SampleStream(5, 0)
    rho, sigma = B.random_pair(4, stream.generator())
    one = B.multi_start(rho, sigma, 1, 1e-2, SampleStream(9))
    direct = B.solve(rho, sigma, phi0=B.random_phases(4, SampleStream(9).at(0)), eps=1e-2)
    assert one.iterations == (direct.iterations,)
    again = B.multi_start(rho, sigma, 1, 1e-2, SampleStream(9))
    assert again.iterations == one.iterations
    with pytest.raises(DomainError):
        B.multi_start(rho, sigma, 0, 1e-2, SampleStream(9))


def test_multi_start_picks_fast_run():
    rho, sigma = B.random_pair(20, SampleStream(11).generator())
    res = B.multi_start(rho, sigma, 32, 1e-2, SampleStream(12))
    assert res.any_converged
    done = [n for n, c in zip(res.iterations, res.converged) if c]
    assert res.best.iterations == min(done)
    assert res.best.iterations <= np.percentile(res.iterations, 20)


def test_perturbation_study(rng):
    rho, sigma = B.random_pair(3, rng)
    for kind in ("convex", "unitary"):
        assert B.perturbation_study(rho, sigma, 0.0, kind, SampleStream(1)) <= 1e-10
    small = B.perturbation_study(rho, sigma, 1e-6, "unitary", SampleStream(1))
    assert small <= 1e-3
    with pytest.raises(DomainError):
        B.perturbation_study(rho, sigma, 0.1, "shear", SampleStream(1))
    with pytest.raises(DomainError):
        B.perturbation_study(rho, sigma, 1.5, "convex", SampleStream(1))


def test_run_to_json(rng):
    rho, sigma = B.random_pair(3, rng)
    run = B.solve(rho, sigma, eps=1e-2)
    data = run.to_json(meta={"seed": 1})
    assert data["iterations"] == run.iterations
    assert len(data["eta_star"]) == run.iterations + 1
    assert data["meta"] == {"seed": 1}
    h = np.array(data["final_h"]["re"]) + 1j * np.array(data["final_h"]["im"])
    assert np.allclose(h, run.hamiltonian)
