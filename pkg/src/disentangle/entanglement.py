"""Entanglement level Q = 1 - P computed two independent ways.

The witness route sums squared overlaps with the minor vectors ``Psi_w``;
the purity route takes the trace of the squared Gram matrix ``C C^dag``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from .hilbert import NORM_TOL, BipartiteState, NotNormalizedError, require_normalized

StateLike = Union[BipartiteState, np.ndarray]


@dataclass(frozen=True)
class Witness:
    """One minor vector ``|Psi_{k1p,k1pp,k2p,k2pp}>`` stored as a ket.

    The defining bra is ``C[k1pp,k2pp] <k1p,k2p| - C[k1pp,k2p] <k1p,k2pp|``,
    so the ket carries the complex conjugates of those coefficients and
    ``np.vdot(w.vec, psi)`` is the minor ``C[k1p,k2p] C[k1pp,k2pp] - C[k1p,k2pp] C[k1pp,k2p]``.
    """

    k1p: int
    k1pp: int
    k2p: int
    k2pp: int
    vec: np.ndarray

    @property
    def indices(self) -> tuple[int, int, int, int]:
        return (self.k1p, self.k1pp, self.k2p, self.k2pp)

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.vec, self.vec).real)


@lru_cache(maxsize=64)
def witness_indices(n1: int, n2: int) -> np.ndarray:
    """Index quadruples ``(k1p, k1pp, k2p, k2pp)`` in lexicographic order."""
    i1, j1 = np.triu_indices(n1, k=1)
    i2, j2 = np.triu_indices(n2, k=1)
    rows = [(a, b, c, d) for a, b in zip(i1, j1) for c, d in zip(i2, j2)]
    out = np.array(rows, dtype=np.intp).reshape(-1, 4)
    out.setflags(write=False)
    return out


def witness_matrix(c: np.ndarray) -> np.ndarray:
    """All witness kets for coefficient matrix ``c`` as rows.

    Returns shape ``(n_witness, n1 * n2)``; a stack ``(..., n1, n2)`` gives
    ``(..., n_witness, n1 * n2)``.
    """
    c = np.asarray(c, dtype=complex)
    n1, n2 = c.shape[-2:]
    idx = witness_indices(n1, n2)
    k1p, k1pp, k2p, k2pp = idx.T
    rows = np.arange(len(idx))
    w = np.zeros(c.shape[:-2] + (len(idx), n1 * n2), dtype=complex)
    w[..., rows, k1p * n2 + k2p] = np.conj(c[..., k1pp, k2pp])
    w[..., rows, k1p * n2 + k2pp] = -np.conj(c[..., k1pp, k2p])
    return w


def enumerate_witnesses(state: BipartiteState) -> list[Witness]:
    vecs = witness_matrix(state.c)
    return [
        Witness(int(a), int(b), int(c), int(d), vec)
        for (a, b, c, d), vec in zip(witness_indices(state.n1, state.n2), vecs)
    ]


def _coefficients(state: StateLike) -> np.ndarray:
    if isinstance(state, BipartiteState):
        require_normalized(state)
        return state.c
    c = np.asarray(state, dtype=complex)
    if c.ndim < 2:
        raise ValueError("expected a BipartiteState or an array of shape (..., n1, n2)")
    dev = np.abs(np.sum(np.abs(c) ** 2, axis=(-2, -1)) - 1.0)
    if np.any(dev > NORM_TOL):
        raise NotNormalizedError(f"state is not normalized: max deviation {np.max(dev):.3e}")
    return c


def q_witness(state: StateLike):
    """Entanglement level from the witness overlaps, ``2 sum_w |<Psi_w|psi>|^2``.

    Accepts a :class:`BipartiteState` or a stack of coefficient matrices of
    shape ``(..., n1, n2)``; returns a float or an array of the batch shape.
    """
    c = _coefficients(state)
    n1, n2 = c.shape[-2:]
    psi = c.reshape(c.shape[:-2] + (n1 * n2,))
    overlaps = np.einsum("...wn,...n->...w", witness_matrix(c).conj(), psi)
    q = 2.0 * np.sum(np.abs(overlaps) ** 2, axis=-1)
    return float(q) if q.ndim == 0 else q


def reduced_purity(state: StateLike):
    """Purity ``Tr rho_1^2`` from the Gram matrix ``G = C C^dag``."""
    c = _coefficients(state)
    ch = np.swapaxes(c.conj(), -1, -2)
    # contract on the smaller factor; Tr[(C C^dag)^2] == Tr[(C^dag C)^2]
    g = c @ ch if c.shape[-2] <= c.shape[-1] else ch @ c
    p = np.einsum("...ij,...ji->...", g, g).real
    return float(p) if p.ndim == 0 else p


def reduced_purity_other(state: StateLike):
    """Purity of subsystem 2, ``Tr[(C^T C^*)^2]``, computed without shortcuts."""
    c = _coefficients(state)
    g = np.swapaxes(c, -1, -2) @ c.conj()
    p = np.einsum("...ij,...ji->...", g, g).real
    return float(p) if p.ndim == 0 else p


def q_purity(state: StateLike):
    """Reference oracle ``Q = 1 - Tr rho_1^2``."""
    return 1.0 - reduced_purity(state)


def witness_overlaps(psi: np.ndarray, n1: int, n2: int) -> np.ndarray:
    """Overlaps ``<Psi_w|psi>`` for the witnesses built from ``psi`` itself."""
    psi = np.asarray(psi, dtype=complex)
    return witness_matrix(psi.reshape(n1, n2)).conj() @ psi
