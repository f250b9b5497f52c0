from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import cgauss
from disentangle.entanglement import (enumerate_witnesses, q_purity, q_witness, reduced_purity,
                                      reduced_purity_other, witness_indices, witness_matrix,
                                      witness_overlaps)
from disentangle.hilbert import BipartiteState, NotNormalizedError, product_state, random_state


def schmidt_q(c):
    # independent oracle through the singular values
    s = np.linalg.svd(c, compute_uv=False)
    return 1.0 - np.sum(s ** 4)


@pytest.mark.parametrize("n1,n2", [(2, 2), (2, 3), (3, 3), (4, 2), (5, 4)])
def test_witness_count(n1, n2):
    assert len(witness_indices(n1, n2)) == comb(n1, 2) * comb(n2, 2)


def test_witness_overlap_is_minor(rng):
    s = random_state(3, 3, rng)
    for w in enumerate_witnesses(s):
        a, b, c_, d = w.indices
        minor = s.c[a, c_] * s.c[b, d] - s.c[a, d] * s.c[b, c_]
        assert np.vdot(w.vec, s.vector) == pytest.approx(minor, abs=1e-15)
        assert np.count_nonzero(w.vec) <= 2


def test_witness_matrix_batches(rng):
    cs = np.stack([random_state(2, 3, rng).c for _ in range(4)])
    batch = witness_matrix(cs)
    for i in range(4):
        assert np.array_equal(batch[i], witness_matrix(cs[i]))


def test_bell_and_maximal():
    bell = BipartiteState(np.eye(2) / np.sqrt(2))
    assert q_witness(bell) == pytest.approx(0.5, abs=1e-15)
    for n in (3, 4):
        assert q_witness(BipartiteState(np.eye(n) / np.sqrt(n))) == pytest.approx(1 - 1 / n, abs=1e-14)


def test_product_has_zero_q(rng):
    s = product_state(cgauss(rng, 3), cgauss(rng, 4))
    assert q_witness(s) < 1e-15


@pytest.mark.parametrize("n1,n2", [(2, 2), (3, 2), (3, 4), (4, 4)])
def test_three_routes_agree(n1, n2, rng):
    for _ in range(50):
        s = random_state(n1, n2, rng)
        q = q_witness(s)
        assert q == pytest.approx(q_purity(s), abs=1e-13)
        assert q == pytest.approx(schmidt_q(s.c), abs=1e-13)
        assert reduced_purity(s) == pytest.approx(reduced_purity_other(s), abs=1e-13)


def test_two_spin_closed_form(rng):
    for _ in range(100):
        s = random_state(2, 2, rng)
        (a, b), (c, d) = s.c
        assert q_witness(s) == pytest.approx(2 * abs(a * d - b * c) ** 2, abs=1e-15)


def test_haar_mean():
    # E[Tr rho^2] = (n1 + n2) / (n1 n2 + 1) for Haar-random pure states
    rng = np.random.default_rng(5)
    cs = np.stack([random_state(2, 2, rng).c for _ in range(20000)])
    assert np.mean(q_witness(cs)) == pytest.approx(1 - 4 / 5, abs=5e-3)
    cs = np.stack([random_state(2, 3, rng).c for _ in range(20000)])
    assert np.mean(q_witness(cs)) == pytest.approx(1 - 5 / 7, abs=5e-3)


def test_unnormalized_rejected():
    with pytest.raises(NotNormalizedError):
        q_witness(BipartiteState(np.ones((2, 2))))
    with pytest.raises(NotNormalizedError):
        q_witness(np.ones((3, 2, 2)))


def test_witness_overlaps_shape(rng):
    s = random_state(3, 2, rng)
    ov = witness_overlaps(s.vector, 3, 2)
    assert ov.shape == (3,)
    assert 2 * np.sum(np.abs(ov) ** 2) == pytest.approx(q_witness(s), abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 4), st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_q_bounds(n1, n2, seed):
    s = random_state(n1, n2, seed)
    q = q_witness(s)
    assert -1e-15 <= q <= 1 - 1 / min(n1, n2) + 1e-12
