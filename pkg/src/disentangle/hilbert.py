"""Bipartite pure states stored as coefficient matrices.

A state of an ``n1 x n2`` system is kept as the matrix ``C`` with
``|psi> = sum C[k1, k2] |k1>|k2>``. The flat state vector is the row-major
ravel of ``C`` (``k1`` major), so for two spins the flat order is
``(--, -+, +-, ++)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10


class NotNormalizedError(ValueError):
    pass


@dataclass(frozen=True)
class BipartiteState:
    """Pure state of a bipartite system.

    Attributes
    ----------
    c : ndarray, shape (n1, n2)
        Complex amplitude matrix. Copied and made read-only on construction.
    """

    c: np.ndarray

    def __post_init__(self):
        c = np.array(self.c, dtype=complex)
        if c.ndim != 2:
            raise ValueError(f"coefficient matrix must be 2-D, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def n1(self) -> int:
        return self.c.shape[0]

    @property
    def n2(self) -> int:
        return self.c.shape[1]

    @property
    def dims(self) -> tuple[int, int]:
        return self.c.shape

    @property
    def vector(self) -> np.ndarray:
        return flatten(self.c)

    def norm(self) -> float:
        return float(np.linalg.norm(self.c))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(float(np.sum(np.abs(self.c) ** 2)) - 1.0) <= tol

    def normalized(self) -> "BipartiteState":
        nrm = self.norm()
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero state")
        return BipartiteState(self.c / nrm)

    @classmethod
    def from_vector(cls, vec, n1: int, n2: int) -> "BipartiteState":
        return cls(unflatten(vec, n1, n2))


def flatten(c: np.ndarray) -> np.ndarray:
    """Row-major flat amplitude vector of ``c`` (works on stacked matrices)."""
    c = np.asarray(c)
    return c.reshape(c.shape[:-2] + (c.shape[-2] * c.shape[-1],))


def unflatten(vec, n1: int, n2: int) -> np.ndarray:
    vec = np.asarray(vec, dtype=complex)
    if vec.shape[-1] != n1 * n2:
        raise ValueError(f"vector length {vec.shape[-1]} does not match {n1}x{n2}")
    return vec.reshape(vec.shape[:-1] + (n1, n2))


def require_normalized(state: BipartiteState, tol: float = NORM_TOL) -> None:
    if not state.is_normalized(tol):
        raise NotNormalizedError(
            f"state is not normalized: |<psi|psi> - 1| = "
            f"{abs(state.norm() ** 2 - 1.0):.3e} > {tol:g}"
        )


def product_state(u, v) -> BipartiteState:
    """Normalized product state ``u (x) v``.

    Raises
    ------
    ValueError
        If either factor is the zero vector ("degenerate factor").
    """
    u = np.asarray(u, dtype=complex).ravel()
    v = np.asarray(v, dtype=complex).ravel()
    for name, f in (("u", u), ("v", v)):
        if f.size == 0 or np.linalg.norm(f) == 0.0:
            raise ValueError(f"degenerate factor: {name} is the zero vector")
    u = u / np.linalg.norm(u)
    v = v / np.linalg.norm(v)
    return BipartiteState(np.outer(u, v))


def random_state(n1: int, n2: int, seed=None) -> BipartiteState:
    """Haar-random normalized pure state.

    Entries are i.i.d. standard complex Gaussians, then the matrix is
    normalized. ``seed`` may be an int or an existing ``numpy.random.Generator``.
    """
    if n1 < 2 or n2 < 2:
        raise ValueError(f"need n1, n2 >= 2, got ({n1}, {n2})")
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((n1, n2)) + 1j * rng.standard_normal((n1, n2))
    return BipartiteState(c / np.linalg.norm(c))


def random_unitary(n: int, seed=None) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def unitary_deviation(u: np.ndarray) -> float:
    u = np.asarray(u)
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]), ord=2))


def apply_local(state: BipartiteState, u1=None, u2=None) -> BipartiteState:
    """Apply ``u1 (x) u2`` to ``state``; ``None`` means identity.

    In matrix form this is ``C -> u1 @ C @ u2.T``.
    """
    c = state.c
    for name, u, n in (("u1", u1, state.n1), ("u2", u2, state.n2)):
        if u is None:
            continue
        u = np.asarray(u)
        if u.shape != (n, n):
            raise ValueError(f"{name} has shape {u.shape}, expected ({n}, {n})")
        dev = unitary_deviation(u)
        if dev > UNITARY_TOL:
            raise ValueError(f"{name} is not unitary: ||u^dag u - 1|| = {dev:.3e}")
    if u1 is not None:
        c = np.asarray(u1) @ c
    if u2 is not None:
        c = c @ np.asarray(u2).T
    return BipartiteState(c)


def kron_local(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Full-space matrix of ``u1 (x) u2`` consistent with :func:`flatten`."""
    return np.kron(u1, u2)
