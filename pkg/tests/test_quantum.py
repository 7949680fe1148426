import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ltot import quantum as q


def random_state(dims, seed):
    rng = np.random.default_rng(seed)
    n = int(np.prod(dims))
    return q.StateVector.from_unnormalized(dims, rng.normal(size=n) + 1j * rng.normal(size=n))


def naive_partial_trace_first(psi, da, db):
    """Keep factor 0 of a (da, db) pure state by explicit summation."""
    m = psi.reshape(da, db)
    rho = np.zeros((da, da), dtype=complex)
    for i in range(da):
        for j in range(da):
            rho[i, j] = sum(m[i, k] * np.conj(m[j, k]) for k in range(db))
    return rho


def test_ket_and_tensor():
    s = q.tensor(q.ket((3,), 2), q.ket((2,), 1))
    assert s.dims == (3, 2)
    assert s.amplitudes[5] == 1


def test_unnormalised_state_rejected():
    with pytest.raises(ValueError):
        q.StateVector((2,), np.array([1, 1]))


def test_dimension_mismatch_rejected():
    with pytest.raises(q.DimensionError):
        q.StateVector((2, 2), np.ones(3) / np.sqrt(3))
    with pytest.raises(q.DimensionError):
        q.apply_unitary(q.ket((3,), 0), q.X, [0])
    with pytest.raises(q.DimensionError):
        q.measure(q.ket((3,), 0), q.computational_povm(2), random.Random(0))


def test_non_unitary_rejected():
    with pytest.raises(ValueError):
        q.UnitaryOp(np.array([[1, 1], [0, 1]]))


def test_bad_povm_rejected():
    with pytest.raises(ValueError):
        q.Povm((np.eye(2) * 0.5,))
    with pytest.raises(ValueError):
        q.Povm((np.diag([2.0, 0.0]), np.diag([-1.0, 1.0])))


@pytest.mark.parametrize("seed", range(5))
def test_partial_trace_matches_naive_sum(seed):
    s = random_state((3, 2), seed)
    got = q.partial_trace(s, [0]).matrix
    assert np.allclose(got, naive_partial_trace_first(s.amplitudes, 3, 2), atol=1e-12)


def test_partial_trace_of_density_agrees_with_vector():
    s = random_state((2, 3, 2), 11)
    from_vec = q.partial_trace(s, [2, 0]).matrix
    from_rho = q.partial_trace(s.density(), [2, 0]).matrix
    assert np.allclose(from_vec, from_rho, atol=1e-12)


def test_helstrom_matches_eigenvalue_formula():
    r0, r1 = q.partial_trace(q.phi_state(0), [0]), q.partial_trace(q.phi_state(1), [0])
    eig = np.linalg.eigvalsh(r0.matrix - r1.matrix)
    assert q.helstrom(r0, r1) == pytest.approx(0.5 + 0.25 * np.abs(eig).sum(), abs=1e-12)
    assert q.helstrom(r0, r1) == pytest.approx(0.75, abs=1e-12)


def test_helstrom_of_identical_and_orthogonal_states():
    a, b = q.ket((2,), 0), q.ket((2,), 1)
    assert q.helstrom(a, a) == pytest.approx(0.5)
    assert q.helstrom(a, b) == pytest.approx(1.0)


def test_bell_states_orthonormal():
    states = [q.bell_state(x0, x1) for x0 in (0, 1) for x1 in (0, 1)]
    assert np.allclose(q.gram_matrix(states), np.eye(4), atol=1e-12)


def test_hadamard_basis_states():
    assert q.equal_up_to_phase(q.hadamard_basis_state(0, 1), q.ket((2,), 1))
    plus = q.hadamard_basis_state(1, 0)
    assert np.allclose(plus.amplitudes, np.array([1, 1]) / np.sqrt(2))


def test_pauli_mask_is_x_then_z_convention():
    # X^x0 Z^x1 on |0>: Z does nothing, X flips
    out = q.apply_unitary(q.ket((2,), 0), q.pauli_mask(1, 1), [0])
    assert q.equal_up_to_phase(out, q.ket((2,), 1))


def test_qutrit_phase():
    u = q.qutrit_phase(1, 0).matrix
    assert np.allclose(np.diag(u), [-1, 1, 1])


def test_measure_collapses_to_outcome():
    s = q.superpose([(1, q.ket((2, 2), 0, 0)), (1, q.ket((2, 2), 1, 1))])
    rng = random.Random(3)
    for _ in range(20):
        k, post = q.measure(s, q.computational_povm(2), rng, targets=[1])
        assert q.equal_up_to_phase(post, q.ket((2, 2), k, k))


def test_measure_frequencies_follow_born_rule():
    s = q.StateVector((2,), np.array([np.sqrt(0.2), np.sqrt(0.8)]))
    rng = random.Random(5)
    hits = sum(q.measure(s, q.computational_povm(2), rng)[0] for _ in range(20000))
    assert abs(hits / 20000 - 0.8) < 4 * np.sqrt(0.16 / 20000)


def test_zero_probability_outcome_never_sampled():
    assert q.sample_index([0.0, 1.0], 0.0) == 1
    assert q.sample_index([0.5, 0.5, 0.0], 0.999999) == 1


def test_projective_povm_completes_to_identity():
    povm = q.Povm.projective([q.phi_state(0)])
    assert len(povm) == 2
    assert np.allclose(sum(povm.elements), np.eye(9))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), target=st.integers(0, 2))
def test_local_unitary_preserves_other_reductions(seed, target):
    s = random_state((2, 3, 2), seed)
    u = q.qutrit_phase(1, 1) if target == 1 else q.H
    out = q.apply_unitary(s, u, [target])
    others = [i for i in range(3) if i != target]
    assert np.allclose(q.partial_trace(s, others).matrix, q.partial_trace(out, others).matrix,
                       atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_born_probabilities_sum_to_one(seed):
    s = random_state((3, 3), seed)
    probs = q.born_probabilities(s, q.Povm.projective([q.phi_state(0)]))
    assert sum(probs) == pytest.approx(1.0, abs=1e-12)
    assert min(probs) >= -1e-15


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_trace_distance_is_a_metric_sample(seed):
    a, b, c = (q.partial_trace(random_state((2, 2), seed + i), [0]) for i in range(3))
    assert q.trace_distance(a, a) == pytest.approx(0.0, abs=1e-12)
    assert q.trace_distance(a, b) == pytest.approx(q.trace_distance(b, a), abs=1e-12)
    assert q.trace_distance(a, c) <= q.trace_distance(a, b) + q.trace_distance(b, c) + 1e-12
