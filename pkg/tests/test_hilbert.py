import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from disentangle.hilbert import (BipartiteState, NotNormalizedError, apply_local, flatten,
                                 kron_local, product_state, random_state, random_unitary,
                                 require_normalized, unflatten, unitary_deviation)


def test_flatten_is_row_major():
    c = np.arange(6).reshape(2, 3)
    assert list(flatten(c)) == [0, 1, 2, 3, 4, 5]
    assert np.array_equal(unflatten(flatten(c), 2, 3), c)


def test_unflatten_rejects_wrong_length():
    with pytest.raises(ValueError):
        unflatten(np.ones(5), 2, 3)


def test_state_is_immutable_copy():
    c = np.eye(2) / np.sqrt(2)
    s = BipartiteState(c)
    c[0, 0] = 7
    assert s.c[0, 0] == pytest.approx(1 / np.sqrt(2))
    with pytest.raises(ValueError):
        s.c[0, 0] = 1


def test_from_vector_roundtrip(rng):
    s = random_state(3, 4, rng)
    assert np.array_equal(BipartiteState.from_vector(s.vector, 3, 4).c, s.c)
    assert s.dims == (3, 4)


@pytest.mark.parametrize("n1,n2", [(2, 2), (2, 5), (4, 3)])
def test_random_state_normalized_and_seeded(n1, n2):
    a, b = random_state(n1, n2, 7), random_state(n1, n2, 7)
    assert a.is_normalized()
    assert np.array_equal(a.c, b.c)
    assert not np.array_equal(a.c, random_state(n1, n2, 8).c)


def test_require_normalized():
    with pytest.raises(NotNormalizedError):
        require_normalized(BipartiteState(np.ones((2, 2))))
    require_normalized(BipartiteState(np.ones((2, 2)) / 2))


def test_normalized_zero_state_raises():
    with pytest.raises(ValueError):
        BipartiteState(np.zeros((2, 2))).normalized()


def test_product_state_is_outer_product(rng):
    u, v = rng.standard_normal(3), rng.standard_normal(2) + 1j
    s = product_state(u, v)
    assert s.is_normalized()
    assert np.linalg.matrix_rank(s.c) == 1
    with pytest.raises(ValueError, match="degenerate factor"):
        product_state(np.zeros(2), v)


@pytest.mark.parametrize("n", [1, 2, 5])
def test_random_unitary(n, rng):
    assert unitary_deviation(random_unitary(n, rng)) < 1e-13


def test_apply_local_matches_kron(rng):
    s = random_state(2, 3, rng)
    u1, u2 = random_unitary(2, rng), random_unitary(3, rng)
    out = apply_local(s, u1, u2)
    assert np.allclose(out.vector, kron_local(u1, u2) @ s.vector, atol=1e-14)
    assert np.allclose(apply_local(s).c, s.c)


def test_apply_local_rejects_non_unitary(rng):
    s = random_state(2, 2, rng)
    with pytest.raises(ValueError):
        apply_local(s, 2 * np.eye(2))
    with pytest.raises(ValueError):
        apply_local(s, None, np.eye(3))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_local_unitary_preserves_norm(n1, n2, seed):
    rng = np.random.default_rng(seed)
    s = apply_local(random_state(n1, n2, rng), random_unitary(n1, rng), random_unitary(n2, rng))
    assert s.is_normalized(1e-12)
