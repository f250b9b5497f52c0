"""Nonlinear disentangling generator and the modified Schroedinger right-hand side.

For a witness ket ``Psi`` with projector ``P = |Psi><Psi| / <Psi|Psi>`` the
generator is ``M_D = -sqrt(<Psi|Psi> / (1 - <P>)) (P - <P>)``. ``hbar`` is 1
throughout; Hamiltonians are angular-frequency matrices.
"""

from __future__ import annotations

import logging
import warnings
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .entanglement import Witness, witness_matrix

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10

Hamiltonian = Union[np.ndarray, Callable[[float], np.ndarray]]


class DegenerateWitnessError(ValueError):
    pass


class NonHermitianError(ValueError):
    pass


class DegenerateDirectionWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class DisentanglerConfig:
    gamma_d: float = 0.0
    eps_witness: float = 1e-14
    eps_parallel: float = 1e-12

    def __post_init__(self):
        if not self.gamma_d >= 0.0:
            raise ValueError(f"gamma_d must be >= 0, got {self.gamma_d}")
        for name in ("eps_witness", "eps_parallel"):
            eps = getattr(self, name)
            if not 0.0 < eps < 1e-6:
                raise ValueError(f"{name} must lie in (0, 1e-6), got {eps}")


def _witness_vec(witness) -> np.ndarray:
    return witness.vec if isinstance(witness, Witness) else np.asarray(witness, dtype=complex)


def expected_projection(psi, witness) -> float:
    """``<P> = |<Psi|psi>|^2 / (<Psi|Psi> <psi|psi>)``."""
    psi = np.asarray(psi, dtype=complex)
    w = _witness_vec(witness)
    nw = np.vdot(w, w).real
    if nw <= 0.0:
        raise DegenerateWitnessError("degenerate witness: <Psi|Psi> = 0")
    return float(abs(np.vdot(w, psi)) ** 2 / (nw * np.vdot(psi, psi).real))


def m_d_terms(psi: np.ndarray, witnesses: np.ndarray, config: DisentanglerConfig,
              counter: Optional[Counter] = None) -> np.ndarray:
    """``M_D|psi>`` for each witness row, via the parallel/perpendicular split.

    With ``psi = psi_par + psi_perp`` relative to ``Psi``::

        M_D psi = -sqrt(<Psi|Psi>) [sqrt(1-p) psi_par - p / sqrt(1-p) psi_perp]

    Rows whose witness norm is below ``eps_witness`` are zero. Rows with
    ``1 - p < eps_parallel`` are zeroed and counted under
    ``"degenerate_direction"``.
    """
    psi = np.asarray(psi, dtype=complex)
    w = np.atleast_2d(np.asarray(witnesses, dtype=complex))
    out = np.zeros_like(w)
    nw = np.einsum("wn,wn->w", w.conj(), w).real
    live = nw > config.eps_witness
    if not np.any(live):
        return out
    w, nw = w[live], nw[live]
    nrm = np.vdot(psi, psi).real
    ov = w.conj() @ psi
    par = (ov / nw)[:, None] * w
    perp = psi[None, :] - par
    # 1 - p from the perpendicular part directly; avoids cancellation near p = 1
    q = np.einsum("wn,wn->w", perp.conj(), perp).real / nrm
    p = np.abs(ov) ** 2 / (nw * nrm)
    ok = q >= config.eps_parallel
    n_bad = int(np.count_nonzero(~ok))
    if n_bad:
        if counter is None:
            warnings.warn(f"{n_bad} witness term(s) near-parallel to psi; term set to zero",
                          DegenerateDirectionWarning, stacklevel=2)
        else:
            counter["degenerate_direction"] += n_bad
        logger.debug("degenerate direction fallback on %d term(s)", n_bad)
    sq = np.sqrt(np.where(ok, q, 1.0))
    terms = -np.sqrt(nw)[:, None] * (sq[:, None] * par - (p / sq)[:, None] * perp)
    terms[~ok] = 0.0
    out[np.flatnonzero(live)] = terms
    return out


def apply_m_d(psi, witness, config: DisentanglerConfig,
              counter: Optional[Counter] = None) -> np.ndarray:
    """``M_D|psi>`` for a single witness."""
    w = _witness_vec(witness)
    if np.vdot(w, w).real <= config.eps_witness:
        raise DegenerateWitnessError(
            f"degenerate witness: <Psi|Psi> = {np.vdot(w, w).real:.3e} <= {config.eps_witness:g}")
    return m_d_terms(psi, w[None, :], config, counter)[0]


def m_d_matrix(psi, witness, config: DisentanglerConfig) -> np.ndarray:
    """Explicit operator ``M_D`` evaluated at ``psi`` (naive closed form)."""
    psi = np.asarray(psi, dtype=complex)
    w = _witness_vec(witness)
    nw = np.vdot(w, w).real
    if nw <= config.eps_witness:
        raise DegenerateWitnessError("degenerate witness")
    p = expected_projection(psi, w)
    proj = np.outer(w, w.conj()) / nw
    return -np.sqrt(nw / (1.0 - p)) * (proj - p * np.eye(len(psi)))


def total_generator(psi, dims: tuple[int, int], config: DisentanglerConfig,
                    counter: Optional[Counter] = None) -> np.ndarray:
    """Sum of ``M_D|psi>`` over every witness built from ``psi``.

    Each witness carries the same rate; terms are summed in lexicographic
    witness order.
    """
    psi = np.asarray(psi, dtype=complex)
    n1, n2 = dims
    terms = m_d_terms(psi, witness_matrix(psi.reshape(n1, n2)), config, counter)
    return terms.sum(axis=0)


def total_generator_matrix(psi, dims: tuple[int, int], config: DisentanglerConfig) -> np.ndarray:
    """Operator sum of ``M_D`` over the non-degenerate witnesses of ``psi``."""
    psi = np.asarray(psi, dtype=complex)
    n1, n2 = dims
    out = np.zeros((len(psi), len(psi)), dtype=complex)
    for w in witness_matrix(psi.reshape(n1, n2)):
        if np.vdot(w, w).real > config.eps_witness:
            out += m_d_matrix(psi, w, config)
    return out


def check_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    dev = float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0
    if dev > tol:
        raise NonHermitianError(f"Hamiltonian is not Hermitian: max |H - H^dag| = {dev:.3e}")


def hamiltonian_at(h: Hamiltonian, t: float) -> np.ndarray:
    return np.asarray(h(t) if callable(h) else h, dtype=complex)


def rhs(psi, h: Hamiltonian, t: float, config: DisentanglerConfig,
        dims: tuple[int, int], counter: Optional[Counter] = None,
        check: bool = True) -> np.ndarray:
    """``dpsi/dt = -i H(t) psi + gamma_d * sum_w M_D psi``."""
    psi = np.asarray(psi, dtype=complex)
    hm = hamiltonian_at(h, t)
    if check:
        check_hermitian(hm)
    out = -1j * (hm @ psi)
    if config.gamma_d:
        out = out + config.gamma_d * total_generator(psi, dims, config, counter)
    return out
