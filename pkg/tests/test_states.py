import math
import threading

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qslkit import states as S
from qslkit.errors import DomainError, NotAStateError, NotPSDError

from conftest import rng_for, seeds

PAULI = [
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]]),
    np.diag([1.0, -1.0]).astype(complex),
]


def test_density_matrix_validation():
    with pytest.raises(NotAStateError):
        S.DensityMatrix(np.diag([0.5, 0.6]))
    with pytest.raises(NotPSDError):
        S.DensityMatrix(np.diag([1.1, -0.1]))
    rho = S.DensityMatrix(np.diag([1.0 + 5e-11, -5e-11]))
    assert rho.spectrum.min() >= 0.0


def test_density_matrix_json_round_trip(rng):
    rho = S.DensityMatrix(np.diag([0.3, 0.7]) + 0.1j * np.array([[0, 1], [-1, 0]]))
    back = S.DensityMatrix.from_json(rho.to_json())
    assert np.array_equal(back.matrix, rho.matrix)


def test_spectrum_cache_concurrent():
    rho = S.DensityMatrix(np.diag([0.2, 0.3, 0.5]), validate=False)
    out = []
    threads = [threading.Thread(target=lambda: out.append(rho.eig())) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(o is out[0] for o in out)


def test_gell_mann_qubit_is_pauli():
    ops = S.gell_mann_basis(2).operators
    assert np.allclose(ops, PAULI)


@pytest.mark.parametrize("d", [3, 5])
def test_gell_mann_orthonormal(d):
    ops = S.gell_mann_basis(d).operators
    assert len(ops) == d * d - 1
    gram = np.einsum("aij,bji->ab", ops, ops)
    assert np.allclose(gram, 2 * np.eye(d * d - 1), atol=1e-10)
    assert np.allclose(np.trace(ops, axis1=1, axis2=2), 0, atol=1e-12)


def test_gell_mann_rejects_small_d():
    with pytest.raises(DomainError):
        S.gell_mann_basis(1)


def test_bloch_examples():
    assert np.allclose(S.to_bloch(S.maximally_mixed(4)).r, 0)
    r = S.to_bloch(np.diag([1.0, 0.0])).r
    assert np.allclose(r, [0, 0, 1])


def test_bloch_purity_identity(rng):
    from qslkit.ensembles import bures_state

    rho = bures_state(4, rng)
    r = S.to_bloch(rho).norm
    assert abs(r - math.sqrt((4 * S.purity(rho) - 1) / 3)) <= 1e-10
    assert abs(r - S.bloch_radius_from_purity(S.purity(rho), 4)) <= 1e-10


def test_from_bloch_rejects_outside():
    with pytest.raises(NotAStateError):
        S.from_bloch(S.BlochVector(3, np.array([0, 0, 0, 0, 0, 0, 0, 1.5])))


def test_bloch_json():
    b = S.to_bloch(np.diag([0.7, 0.2, 0.1]))
    data = b.to_json()
    assert data["basis"] == "gellmann" and data["d"] == 3
    assert np.allclose(S.BlochVector.from_json(data).r, b.r)


def test_purity_entropy_examples():
    pure = S.pure_state(np.array([1, 1j]) / math.sqrt(2))
    assert math.isclose(S.purity(pure), 1.0) and abs(S.vn_entropy(pure)) < 1e-12
    mm = S.maximally_mixed(5)
    assert math.isclose(S.purity(mm), 0.2) and math.isclose(S.vn_entropy(mm), math.log(5))
    assert math.isclose(S.vn_entropy(np.diag([0.5, 0.5, 0.0])), math.log(2))


def test_gibbs_examples():
    h = np.diag([0.0, 1.0, 3.0])
    assert np.allclose(S.gibbs_state(h, 0.0).matrix, np.eye(3) / 3)
    p0, w0, w1 = 0.8, 0.5, 2.0
    beta = S.qubit_inverse_temperature(p0, w0, w1)
    assert math.isclose(beta, math.log(p0 / (1 - p0)) / (w1 - w0))
    g = S.gibbs_state(np.diag([w0, w1]), beta)
    assert math.isclose(g.matrix[0, 0].real, p0)


def test_gibbs_matching_entropy_three_level():
    # frozen from a dense beta scan (step 1e-4), tests/oracles/generate.py
    h = np.diag([0.0, 0.579, 1.0])
    p = np.array([0.538, 0.237, 0.224])
    p = p / p.sum()
    target = S.vn_entropy(np.diag(p))
    g, beta = S.gibbs_matching_entropy(h, target)
    assert abs(beta - 1.0363) <= 1e-4
    assert abs(S.vn_entropy(g) - target) <= 1e-8


def test_gibbs_matching_entropy_negative_branch():
    h = np.diag([0.0, 1.0, 2.0])
    target = S.gibbs_entropy(h, -0.7)
    g, beta = S.gibbs_matching_entropy(h, target, negative=True)
    assert abs(beta + 0.7) <= 1e-6


def test_gibbs_matching_entropy_range():
    with pytest.raises(DomainError):
        S.gibbs_matching_entropy(np.diag([0.0, 1.0]), math.log(2) + 0.1)
    with pytest.raises(DomainError):
        S.gibbs_matching_entropy(np.diag([0.0, 1.0]), 0.0)


def test_mix_with_examples():
    rho = np.diag([1.0, 0.0])
    phi = np.diag([0.2, 0.8])
    assert np.allclose(S.mix_with(rho, phi, 1.0).matrix, rho)
    assert np.allclose(S.mix_with(rho, phi, 0.0).matrix, phi)
    assert np.allclose(S.mix_with(rho, phi, 0.5).matrix, np.diag([0.6, 0.4]))
    with pytest.raises(DomainError):
        S.mix_with(rho, phi, 1.5)


@given(seeds, st.integers(2, 8))
def test_bloch_round_trip(seed, d):
    from qslkit.ensembles import bures_state

    rho = bures_state(d, rng_for(seed))
    back = S.from_bloch(S.to_bloch(rho))
    assert np.linalg.norm(back.matrix - rho.matrix) <= 1e-10
    assert S.to_bloch(rho).norm <= 1 + 1e-9


@given(seeds, st.integers(2, 6))
def test_bloch_length_unitary_invariant(seed, d):
    from qslkit import matcore
    from qslkit.ensembles import bures_state, haar_unitary

    rng = rng_for(seed)
    rho = bures_state(d, rng)
    u = haar_unitary(d, rng)
    moved = matcore.hermitize(u @ rho.matrix @ u.conj().T)
    assert abs(S.to_bloch(moved).norm - S.to_bloch(rho).norm) <= 1e-10


@given(seeds, st.integers(2, 6))
def test_overlap_from_bloch_vectors(seed, d):
    from qslkit.ensembles import bures_state

    rng = rng_for(seed)
    a, b = bures_state(d, rng), bures_state(d, rng)
    r, s = S.to_bloch(a).r, S.to_bloch(b).r
    direct = np.real(np.trace(a.matrix @ b.matrix))
    assert abs(direct - (1 + (d - 1) * r @ s) / d) <= 1e-10
