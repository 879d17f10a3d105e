import math

import numpy as np
import pytest

from obsavg.errors import ConditioningError, DimensionCapError, DimensionMismatchError
from obsavg.linops import random_density, random_hermitian, tensor_power, trace_product
from obsavg.polarization import (
    MixtureSpec,
    coefficient_extract,
    product_expectation,
    product_vector,
    random_probe_states,
    reconstruct_from_diagonal,
    reconstruct_from_moments,
    symmetrized_product_sum,
)
from obsavg.symspace import CopySpace, copy_average, twirl

Z = np.diag([1.0, -1.0]).astype(complex)


def _random_matrix(rng, dim):
    return rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))


def _diag_oracle(x):
    return lambda factors: product_expectation(x, factors)


def _moment_oracle(x, n):
    return lambda rho: trace_product(x, tensor_power(rho.matrix, n))


def test_product_vector_and_expectation_examples():
    e0 = np.array([1.0, 0.0])
    e1 = np.array([0.0, 1.0])
    w = product_vector([e0, e1])
    assert np.array_equal(w, [0.0, 1.0, 0.0, 0.0])
    assert product_expectation(np.eye(4), [e0, e1]) == pytest.approx(1.0)
    # |00><00| has no overlap with |01>
    proj = np.zeros((4, 4), dtype=complex)
    proj[0, 0] = 1.0
    assert product_expectation(proj, [e0, e1]) == pytest.approx(0.0)


def test_product_expectation_matches_dense_oracle():
    rng = np.random.default_rng(60)
    x = _random_matrix(rng, 8)
    factors = [rng.standard_normal(2) + 1j * rng.standard_normal(2) for _ in range(3)]
    w = factors[0]
    for f in factors[1:]:
        w = np.kron(w, f)
    assert product_expectation(x, factors) == pytest.approx(w.conj() @ x @ w)


def test_product_expectation_shape_errors():
    with pytest.raises(DimensionMismatchError):
        product_expectation(np.eye(4), [np.ones(2), np.ones(3)])
    with pytest.raises(DimensionMismatchError):
        product_expectation(np.eye(8), [np.ones(2), np.ones(2)])


@pytest.mark.parametrize("d,n", [(2, 2), (2, 3), (3, 2)])
def test_reconstruct_from_diagonal_recovers_random_matrix(d, n):
    rng = np.random.default_rng(61)
    x = _random_matrix(rng, d**n)
    got = reconstruct_from_diagonal(_diag_oracle(x), d, n)
    assert np.abs(got - x).max() < 1e-10


def test_reconstruct_from_diagonal_identity():
    got = reconstruct_from_diagonal(_diag_oracle(np.eye(4, dtype=complex)), 2, 2)
    assert np.abs(got - np.eye(4)).max() < 1e-12


def test_reconstruct_from_diagonal_caps():
    with pytest.raises(DimensionCapError):
        reconstruct_from_diagonal(lambda f: 0.0, 4, 2)
    with pytest.raises(DimensionCapError):
        reconstruct_from_diagonal(lambda f: 0.0, 2, 5)


def test_symmetrized_sum_single_factor_reduces():
    rng = np.random.default_rng(62)
    x = _random_matrix(rng, 3)
    v = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    assert symmetrized_product_sum(x, [v]) == pytest.approx(
        product_expectation(x, [v])
    )


def test_symmetrized_sum_invariant_operator_collapses():
    # on a permutation-invariant X every ordering contributes the same value
    rng = np.random.default_rng(63)
    space = CopySpace(2, 3)
    x = twirl(_random_matrix(rng, 8), space)
    factors = [rng.standard_normal(2) + 1j * rng.standard_normal(2) for _ in range(3)]
    total = symmetrized_product_sum(x, factors)
    single = product_expectation(x, factors)
    assert total == pytest.approx(math.factorial(3) * single)


def test_mixture_spec_validation():
    v = np.array([1.0, 0.0])
    m = MixtureSpec.build([0.5, 1.5], [v, v])
    assert m.size == 2 and m.local_dim == 2
    assert np.allclose(m.operator(), np.diag([2.0, 0.0]))
    with pytest.raises(DimensionMismatchError):
        MixtureSpec.build([1.0], [v, v])
    with pytest.raises(DimensionMismatchError):
        MixtureSpec.build([1.0, -0.5], [v, v])


def test_coefficient_extract_single_copy():
    rng = np.random.default_rng(64)
    x = _random_matrix(rng, 2)
    v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    m = MixtureSpec.build([0.7], [v])
    # n = 1: the coefficient is just Tr[X |v><v|]
    assert coefficient_extract(x, m) == pytest.approx(
        complex(np.trace(x @ np.outer(v, v.conj())))
    )


def test_coefficient_extract_orthonormal_identity():
    # X = I, orthonormal vectors: every permutation term is 1, so the sum is n!
    eye = np.eye(2)
    m = MixtureSpec.build([1.0, 1.0], [eye[0], eye[1]])
    assert coefficient_extract(np.eye(4, dtype=complex), m) == pytest.approx(
        math.factorial(2)
    )


@pytest.mark.parametrize("d,n", [(2, 2), (2, 3), (3, 2)])
def test_coefficient_extract_matches_symmetrized_sum(d, n):
    rng = np.random.default_rng(65)
    for _ in range(5):
        x = _random_matrix(rng, d**n)
        vectors = [
            rng.standard_normal(d) + 1j * rng.standard_normal(d) for _ in range(n)
        ]
        weights = rng.uniform(0.5, 1.5, size=n)
        m = MixtureSpec.build(weights, vectors)
        lhs = coefficient_extract(x, m)
        rhs = symmetrized_product_sum(x, vectors)
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))


def test_coefficient_extract_independent_of_weights():
    rng = np.random.default_rng(66)
    x = _random_matrix(rng, 4)
    vectors = [rng.standard_normal(2) + 1j * rng.standard_normal(2) for _ in range(2)]
    a = coefficient_extract(x, MixtureSpec.build([1.0, 1.0], vectors))
    b = coefficient_extract(x, MixtureSpec.build([0.1, 9.0], vectors))
    assert a == pytest.approx(b)


def test_reconstruct_from_moments_recovers_invariant_operator():
    rng = np.random.default_rng(67)
    space = CopySpace(2, 2)
    x = twirl(random_hermitian(4, rng), space)
    probes = random_probe_states(2, 14, seed=5)
    rec = reconstruct_from_moments(_moment_oracle(x, 2), 2, 2, probes)
    assert np.abs(rec.matrix - x).max() < 1e-8
    assert rec.rank == rec.n_basis == 10
    assert rec.condition_number < 1e8
    assert rec.residual < 1e-10


def test_reconstruct_from_moments_copy_average_target():
    probes = random_probe_states(2, 12, seed=6)
    space = CopySpace(2, 2)
    target = copy_average(Z, space)
    rec = reconstruct_from_moments(_moment_oracle(target, 2), 2, 2, probes)
    assert np.abs(rec.matrix - target).max() < 1e-8


def test_reconstruct_from_moments_needs_enough_probes():
    probes = random_probe_states(2, 9, seed=7)
    with pytest.raises(ConditioningError) as err:
        reconstruct_from_moments(_moment_oracle(np.eye(4), 2), 2, 2, probes)
    assert err.value.code == "PROBE_RANK"


def test_reconstruct_from_moments_flags_degenerate_probes():
    # identical probes cannot span the invariant space
    rng = np.random.default_rng(68)
    probe = random_density(2, rng)
    with pytest.raises(ConditioningError):
        reconstruct_from_moments(_moment_oracle(np.eye(4), 2), 2, 2, [probe] * 12)


def test_vanishing_moments_imply_vanishing_invariant_operator():
    # oracle that reports zero moments must reconstruct (near) zero,
    # while a genuinely nonzero invariant operator has a visible moment
    probes = random_probe_states(2, 14, seed=8)
    rec = reconstruct_from_moments(lambda rho: 0.0, 2, 2, probes)
    assert np.linalg.norm(rec.matrix) <= 1e-6
    target = copy_average(Z, CopySpace(2, 2))
    moments = [abs(_moment_oracle(target, 2)(rho)) for rho in probes]
    assert max(moments) > 1e-3


def test_random_probe_states_seeded():
    a = random_probe_states(2, 3, seed=1)
    b = random_probe_states(2, 3, seed=1)
    for x, y in zip(a, b):
        assert np.array_equal(x.matrix, y.matrix)
