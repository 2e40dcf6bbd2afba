import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mergelab.info import rel_entropy_coherence, von_neumann_entropy
from mergelab.qstate import dephase, overlap, partial_trace, trace_distance
from mergelab.rates import e0_pure, e_min, ec_sum_lower_bound, separable_c_max
from mergelab.statezoo import (
    SeparableFamily,
    flower,
    flower_branch_form,
    haar_unitary,
    max_coherent,
    max_entangled,
    qft,
    random_density,
    random_pure,
    random_separable_family,
    separable_family_state,
    source_state,
)

seeds = st.integers(0, 2 ** 32 - 1)


def test_max_entangled():
    phi = max_entangled(2)
    assert np.allclose(phi.amplitudes, np.array([1, 0, 0, 1]) / math.sqrt(2))
    assert np.isclose(von_neumann_entropy(partial_trace(max_entangled(3), ["A"])), math.log2(3))
    assert np.isclose(overlap(phi, phi.density()), 1)
    with pytest.raises(ValueError):
        max_entangled(1)


def test_max_coherent():
    assert np.isclose(rel_entropy_coherence(max_coherent(2)), 1)
    assert np.allclose(dephase(max_coherent(5), ["B"]).matrix, np.eye(5) / 5)
    assert von_neumann_entropy(max_coherent(3)) == 0


def test_qft():
    h = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    assert np.allclose(qft(2), h)
    for d in (3, 4, 7):
        f = qft(d)
        assert np.allclose(np.abs(f) ** 2, 1 / d)
        assert np.allclose(f @ f.conj().T, np.eye(d))


@pytest.mark.parametrize("d", [2, 3, 4, 8])
def test_flower(d):
    psi = flower(d)
    assert psi.layout.dims == (d, 2, d)
    assert np.isclose(e0_pure(psi), 1)
    assert abs(e_min(psi)) < 1e-9
    assert np.isclose(overlap(flower_branch_form(d), psi.density()), 1)
    assert np.allclose(partial_trace(psi, ["R", "A"]).matrix, np.eye(d) / d)
    assert np.allclose(np.diag(partial_trace(psi, ["R", "B"]).matrix), [0.5, 0.5])


def test_flower_override():
    u = haar_unitary(3, np.random.default_rng(0))
    assert np.isclose(overlap(flower_branch_form(3, u), flower(3, u).density()), 1)
    with pytest.raises(Exception):
        flower(3, np.eye(2))


def test_separable_family_state_examples():
    single = SeparableFamily(np.array([[1.0]]), [[[0.6, 0.8]]])
    rho = separable_family_state(single)
    assert np.isclose(np.trace(rho.matrix @ rho.matrix).real, 1)
    fam = random_separable_family(2, 2, 3, seed=1)
    rho = separable_family_state(fam)
    assert np.isclose(np.trace(rho.matrix).real, 1)
    assert rho.layout.dims == (4, 3, 2)
    assert np.isclose(ec_sum_lower_bound(rho), separable_c_max(fam))


def test_separable_family_validation():
    with pytest.raises(ValueError, match="orthonormality"):
        SeparableFamily(np.array([[0.5, 0.5]]), [[[1, 0], [0.6, 0.8]]])
    with pytest.raises(ValueError):
        SeparableFamily(np.array([[0.5, 0.6]]), [[[1, 0], [0, 1]]])
    with pytest.raises(ValueError):
        random_separable_family(1, 3, 2)


def test_source_state():
    p = np.array([[0.4, 0.1], [0.1, 0.4]])
    psi = source_state(p)
    probs = np.sum(np.abs(psi.tensor) ** 2, axis=0)
    assert np.allclose(probs, p)
    psi = source_state(p, reference_dim=3, seed=4)
    assert psi.layout.dims == (3, 2, 2)
    assert np.allclose(np.sum(np.abs(psi.tensor) ** 2, axis=0), p)


def test_random_states_are_seeded():
    assert np.array_equal(random_pure((2, 3), seed=7).amplitudes, random_pure((2, 3), seed=7).amplitudes)
    assert np.isclose(np.linalg.norm(random_pure((4,), seed=1).amplitudes), 1)
    assert np.array_equal(random_density((2, 2), seed=3).matrix, random_density((2, 2), seed=3).matrix)
    assert np.linalg.matrix_rank(random_density((4,), rank=2, seed=0).matrix, tol=1e-9) == 2
    with pytest.raises(ValueError):
        random_density((2,), rank=3)


def test_mean_purity_of_random_qubits():
    rng = np.random.default_rng(2024)
    purity = [np.trace(m @ m).real for m in (random_density((2,), seed=rng).matrix for _ in range(10_000))]
    # Hilbert-Schmidt average 2d / (d^2 + 1) at d = 2; a qubit purity is never below 1/2
    assert abs(np.mean(purity) - 0.8) < 0.02
