"""Time evolution under the modified Schroedinger equation and its checks."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .disentangler import (
    DisentanglerConfig,
    Hamiltonian,
    check_hermitian,
    hamiltonian_at,
    rhs,
    total_generator_matrix,
)
from .entanglement import q_witness, witness_matrix
from .hilbert import BipartiteState
from .integrator import IntegrationError, integrate, record_grid

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "DecayCheck",
    "IntegrationError",
    "evolve",
    "heisenberg_check",
    "heisenberg_residuals",
    "projection_decay_check",
    "max_expected_projection",
]


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-9
    atol: float = 1e-12
    dt_init: Optional[float] = None
    t_final: float = 1.0
    renormalize: bool = True
    record_every: float = 1e-2

    def __post_init__(self):
        if not 0.0 < self.rtol < 1e-3:
            raise ValueError(f"rtol must lie in (0, 1e-3), got {self.rtol}")
        if not self.atol > 0.0:
            raise ValueError(f"atol must be positive, got {self.atol}")
        if not self.t_final > 0.0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        if not self.record_every > 0.0:
            raise ValueError(f"record_every must be positive, got {self.record_every}")
        if self.dt_init is not None and not self.dt_init > 0.0:
            raise ValueError(f"dt_init must be positive, got {self.dt_init}")

    def grid(self) -> np.ndarray:
        return record_grid(self.t_final, self.record_every)


@dataclass
class Trajectory:
    """Sampled solution.

    ``states`` holds one flat state vector per row. When the run was
    renormalized these rows have unit norm and ``norms`` keeps the norm
    before rescaling.
    """

    times: np.ndarray
    states: np.ndarray
    norms: np.ndarray
    q_values: np.ndarray
    exp_p: np.ndarray
    dims: tuple[int, int]
    warnings: Counter = field(default_factory=Counter)

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> BipartiteState:
        return BipartiteState.from_vector(self.states[i], *self.dims)

    def unit_states(self) -> np.ndarray:
        return self.states / np.linalg.norm(self.states, axis=1)[:, None]


def max_expected_projection(states: np.ndarray, dims: tuple[int, int],
                            eps_witness: float = 1e-14) -> np.ndarray:
    """Largest ``<P>`` over the non-degenerate self-witnesses of each row."""
    n1, n2 = dims
    states = np.atleast_2d(states)
    w = witness_matrix(states.reshape(-1, n1, n2))
    nw = np.sum(np.abs(w) ** 2, axis=-1)
    ov = np.einsum("twn,tn->tw", w.conj(), states)
    nrm = np.sum(np.abs(states) ** 2, axis=-1)[:, None]
    p = np.where(nw > eps_witness, np.abs(ov) ** 2 / np.where(nw > 0, nw, 1.0) / nrm, 0.0)
    return p.max(axis=-1)


def evolve(initial, h: Hamiltonian, config: DisentanglerConfig, icfg: IntegratorConfig,
           dims: Optional[tuple[int, int]] = None) -> Trajectory:
    """Integrate ``dpsi/dt = -i H(t) psi + gamma_d sum_w M_D psi``.

    Parameters
    ----------
    initial : BipartiteState or array_like
        Normalized initial state. A flat vector needs ``dims``.
    h : ndarray or callable
        Hermitian matrix, or ``t -> matrix`` for time-dependent problems.
    """
    if isinstance(initial, BipartiteState):
        dims = initial.dims
        psi0 = initial.vector
    else:
        if dims is None:
            raise ValueError("dims is required for a flat initial vector")
        psi0 = np.asarray(initial, dtype=complex).ravel()
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-12:
        raise ValueError(f"initial state is not normalized (norm {np.linalg.norm(psi0)!r})")

    n = dims[0] * dims[1]
    if callable(h):
        check = True
    else:
        h = np.asarray(h, dtype=complex)
        if h.shape != (n, n):
            raise ValueError(f"Hamiltonian shape {h.shape} does not match state dimension {n}")
        check_hermitian(h)
        check = False

    counter: Counter = Counter()

    def f(t, y):
        return rhs(y, h, t, config, dims, counter, check=check)

    res = integrate(f, psi0, icfg.t_final, icfg.grid(), rtol=icfg.rtol, atol=icfg.atol,
                    first_step=icfg.dt_init, renormalize=icfg.renormalize)
    counter["step_rejections"] += res.stats["n_rejected"]
    unit = res.ys / np.linalg.norm(res.ys, axis=1)[:, None]
    q = q_witness(unit.reshape(-1, *dims))
    return Trajectory(
        times=res.times,
        states=res.ys,
        norms=res.norms,
        q_values=np.atleast_1d(q),
        exp_p=max_expected_projection(unit, dims, config.eps_witness),
        dims=tuple(dims),
        warnings=counter,
    )


def _fd_weights(t: np.ndarray, t0: float) -> np.ndarray:
    """First-derivative weights at ``t0`` for the sample times ``t`` (exact for polynomials)."""
    h = np.max(np.abs(t - t0))
    s = (t - t0) / h
    m = len(t)
    vander = np.vander(s, m, increasing=True).T
    rhs_ = np.zeros(m)
    rhs_[1] = 1.0
    return np.linalg.solve(vander, rhs_) / h


def _stencils(times: np.ndarray):
    """Yield ``(i, idx, weights)`` for every interior sample.

    Five-point windows, centred where possible and shifted inwards next to
    the ends; three points when fewer than five samples exist.
    """
    n = len(times)
    width = min(5, n)
    for i in range(1, n - 1):
        lo = min(max(i - width // 2, 0), n - width)
        idx = np.arange(lo, lo + width)
        yield i, idx, _fd_weights(times[idx], times[i])


def _expect(op: np.ndarray, psi: np.ndarray) -> complex:
    return np.vdot(psi, op @ psi)


def heisenberg_residuals(traj: Trajectory, observable: np.ndarray, h: Hamiltonian,
                         config: DisentanglerConfig) -> np.ndarray:
    """``|finite-difference d<O>/dt - (<[O,H]>/i + gamma_d <{O, M_D}>)|`` per interior sample."""
    if len(traj) < 3:
        raise ValueError("need at least 3 samples for central differences")
    o = np.asarray(observable, dtype=complex)
    psis = traj.unit_states()
    vals = np.einsum("tn,nm,tm->t", psis.conj(), o, psis).real
    out = []
    for i, idx, wts in _stencils(traj.times):
        psi = psis[i]
        hm = hamiltonian_at(h, traj.times[i])
        analytic = (_expect(o @ hm - hm @ o, psi) / 1j).real
        if config.gamma_d:
            m = total_generator_matrix(psi, traj.dims, config)
            analytic += config.gamma_d * _expect(o @ m + m @ o, psi).real
        out.append(abs(wts @ vals[idx] - analytic))
    return np.array(out)


def heisenberg_check(traj: Trajectory, observable: np.ndarray, h: Hamiltonian,
                     config: DisentanglerConfig) -> float:
    """Max residual of the modified Heisenberg equation along ``traj``."""
    return float(np.max(heisenberg_residuals(traj, observable, h, config)))


@dataclass(frozen=True)
class DecayCheck:
    max_residual: float
    max_bound_excess: float
    projections: np.ndarray
    n_checked: int


def projection_decay_check(traj: Trajectory, h: Hamiltonian,
                           config: DisentanglerConfig) -> DecayCheck:
    """Check the decay law of ``|<Psi|psi>|^2 / <Psi|Psi>`` on a 2x2 trajectory.

    At each interior sample the witness ``Psi_i`` is frozen at its value
    built from ``psi(t_i)``; the derivative of ``<psi(t)|P_i|psi(t)>`` is
    taken by central differences over neighbouring samples and compared
    with ``<[P_i, H]>/i - 2 gamma_d sqrt(N_i (1 - <P_i>)) <P_i>``. This
    separates the rotation of ``psi`` from the drift of ``Psi`` through
    ``psi``.

    Also returns the largest excess of ``|<[P, H]>|`` over ``sqrt(Var H)``
    at every sample (non-positive when the uncertainty bound holds).
    """
    if tuple(traj.dims) != (2, 2):
        raise ValueError("decay check needs a 2x2 system (single witness)")
    if len(traj) < 3:
        raise ValueError("need at least 3 samples for central differences")
    psis = traj.unit_states()
    wvecs = witness_matrix(psis.reshape(-1, 2, 2))[:, 0, :]
    nws = np.sum(np.abs(wvecs) ** 2, axis=1)
    live = nws > config.eps_witness
    proj_vals = np.where(live, np.abs(np.einsum("tn,tn->t", wvecs.conj(), psis)) ** 2
                         / np.where(live, nws, 1.0), 0.0)

    excess = -np.inf
    for i, psi in enumerate(psis):
        if not live[i]:
            continue
        hm = hamiltonian_at(h, traj.times[i])
        proj = np.outer(wvecs[i], wvecs[i].conj()) / nws[i]
        comm = abs(_expect(proj @ hm - hm @ proj, psi))
        e_h = _expect(hm, psi).real
        var_h = max(_expect(hm @ hm, psi).real - e_h ** 2, 0.0)
        excess = max(excess, comm - np.sqrt(var_h))

    worst = 0.0
    n_checked = 0
    for i, idx, wts in _stencils(traj.times):
        if not live[i]:
            continue
        w, nw = wvecs[i], nws[i]
        f = np.abs(psis[idx] @ w.conj()) ** 2 / nw
        hm = hamiltonian_at(h, traj.times[i])
        proj = np.outer(w, w.conj()) / nw
        p = proj_vals[i]
        analytic = (_expect(proj @ hm - hm @ proj, psis[i]) / 1j).real
        analytic -= 2 * config.gamma_d * np.sqrt(nw * max(1.0 - p, 0.0)) * p
        worst = max(worst, abs(wts @ f - analytic))
        n_checked += 1
    return DecayCheck(float(worst), float(excess), proj_vals, n_checked)
