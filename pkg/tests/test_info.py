import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mergelab.info import (
    JointDistribution,
    binary_entropy,
    conditional_shannon,
    dephased_entropy,
    diagonal_entropy,
    doubly_symmetric_binary,
    qi_relative_entropy,
    read_joint_csv,
    rel_entropy_coherence,
    shannon_entropy,
    von_neumann_entropy,
    write_joint_csv,
)
from mergelab.qstate import DensityOperator, SystemLayout, dephase, ket, maximally_mixed, partial_trace, tensor
from mergelab.rates import e0_pure
from mergelab.statezoo import max_coherent, max_entangled, random_density, random_pure

seeds = st.integers(0, 2 ** 32 - 1)


def test_von_neumann_examples():
    assert von_neumann_entropy(random_pure((3,), seed=0, labels=("A",))) == 0
    assert np.isclose(von_neumann_entropy(maximally_mixed([("A", 2)])), 1)
    for d in (2, 3, 4):
        assert np.isclose(von_neumann_entropy(partial_trace(max_entangled(d), ["A"])), math.log2(d))


def test_shannon_examples():
    assert np.isclose(shannon_entropy([0.25] * 4), 2)
    assert conditional_shannon(JointDistribution(np.eye(2) / 2)) == pytest.approx(0, abs=1e-12)
    assert np.isclose(conditional_shannon(JointDistribution(np.full((2, 2), 0.25))), 1)
    with pytest.raises(ValueError):
        shannon_entropy([0.5, 0.6])
    with pytest.raises(ValueError):
        shannon_entropy([1.2, -0.2])


def test_binary_entropy_examples():
    assert binary_entropy(0) == 0
    assert binary_entropy(1) == 0
    assert np.isclose(binary_entropy(0.5), 1)
    assert round(binary_entropy(0.11), 5) == 0.49992
    with pytest.raises(ValueError):
        binary_entropy(1.5)


def test_joint_distribution_checks_and_power():
    with pytest.raises(ValueError):
        JointDistribution([[0.5, 0.4]])
    p = doubly_symmetric_binary(0.11)
    assert np.allclose(p.marginal_x(), [0.5, 0.5])
    p2 = p.power(2)
    assert p2.shape == (4, 4)
    # word (x1 x2) is index 2*x1 + x2
    assert np.isclose(p2[1, 3], p.px_y[0, 1] * p.px_y[1, 1])
    assert np.isclose(conditional_shannon(p), binary_entropy(0.11))


def test_joint_csv_round_trip(tmp_path):
    p = doubly_symmetric_binary(0.2)
    path = tmp_path / "p.csv"
    write_joint_csv(p, path)
    assert path.read_text().splitlines()[0] == "x,y,p"
    assert np.allclose(read_joint_csv(path).px_y, p.px_y)


def test_coherence_examples():
    diag = DensityOperator(SystemLayout.of(("A", 3)), np.diag([0.5, 0.25, 0.25]))
    assert rel_entropy_coherence(diag) == 0
    assert np.isclose(rel_entropy_coherence(ket("A", [1, 1])), 1)
    for d in (3, 5):
        assert np.isclose(rel_entropy_coherence(max_coherent(d)), math.log2(d))


def test_qi_relative_entropy_examples():
    qi = DensityOperator(SystemLayout.of(("X", 2), ("Y", 2)), np.kron(random_density((2,), seed=1).matrix, np.diag([0.3, 0.7])))
    assert qi_relative_entropy(qi, ["Y"]) == pytest.approx(0, abs=1e-12)
    assert np.isclose(qi_relative_entropy(max_coherent(2, "Y"), ["Y"]), 1)
    phi = max_entangled(2, labels=("X", "Y"))
    assert np.isclose(qi_relative_entropy(phi, ["Y"]), 1)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_qi_relative_entropy_additive(seed):
    rng = np.random.default_rng(seed)
    rho = random_density((2, 2), seed=rng, labels=("X1", "Y1"))
    sigma = random_density((3, 2), seed=rng, labels=("X2", "Y2"))
    joint = qi_relative_entropy(tensor(rho, sigma), ["Y1", "Y2"])
    assert abs(joint - qi_relative_entropy(rho, ["Y1"]) - qi_relative_entropy(sigma, ["Y2"])) < 1e-9


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_dephasing_quantum_side_does_not_increase_qi(seed):
    rho = random_density((2, 3), seed=seed, labels=("X", "Y"))
    assert qi_relative_entropy(dephase(rho, ["X"]), ["Y"]) <= qi_relative_entropy(rho, ["Y"]) + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.01, 1), min_size=2, max_size=6))
def test_diagonal_state_entropy_is_shannon(weights):
    p = np.array(weights) / sum(weights)
    rho = DensityOperator(SystemLayout.of(("A", p.size)), np.diag(p))
    assert abs(von_neumann_entropy(rho) - shannon_entropy(p)) < 1e-9
    assert abs(diagonal_entropy(rho) - shannon_entropy(p)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_conditional_shannon_of_amplitudes_is_e0(seed):
    psi = random_pure((2, 3, 2), seed=seed)
    p = np.sum(np.abs(psi.tensor) ** 2, axis=0)
    assert abs(conditional_shannon(JointDistribution(p)) - e0_pure(psi)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_pure_global_dephased_entropies_reduce(seed):
    psi = random_pure((2, 2, 3), seed=seed)
    ab = partial_trace(psi, ["R"])
    assert abs(dephased_entropy(psi, ["A", "B"]) - von_neumann_entropy(dephase(ab, ["A", "B"]))) < 1e-9
    b = partial_trace(ab, ["A"])
    assert abs(dephased_entropy(psi, ["B"]) - von_neumann_entropy(dephase(b, ["B"]))) < 1e-9
