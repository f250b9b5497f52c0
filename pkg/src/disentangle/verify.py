"""Invariant battery behind ``disentangle verify``.

Each check returns the largest residual it saw and the tolerance it was
held to. Generator calls go through the ``disentangler`` module attribute
so a patched ``apply_m_d`` is what gets checked.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import disentangler
from .disentangler import DisentanglerConfig
from .entanglement import q_purity, q_witness, witness_matrix
from .evolve import IntegratorConfig, evolve
from .hilbert import apply_local, product_state, random_state, random_unitary
from .twospin import TwoSpinParams, bloch_evolve, hamiltonian, to_frame


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_residual) and self.max_residual <= self.tolerance)

    def as_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def _dims(quick: bool):
    top = 4 if quick else 6
    return [(a, b) for a in range(2, top + 1) for b in range(2, top + 1)]


def _pairs(rng, quick: bool):
    """Random (psi, witness) pairs: self-witnesses and arbitrary external kets."""
    n_each = 20 if quick else 100
    for n1, n2 in _dims(True):
        for _ in range(n_each):
            psi = random_state(n1, n2, rng).vector
            ws = witness_matrix(psi.reshape(n1, n2))
            yield psi, ws[rng.integers(len(ws))]
            ext = rng.standard_normal(n1 * n2) + 1j * rng.standard_normal(n1 * n2)
            yield psi, ext


def check_q_oracle(rng, quick):
    worst = 0.0
    for n1, n2 in _dims(quick):
        c = np.stack([random_state(n1, n2, rng).c for _ in range(50 if quick else 200)])
        worst = max(worst, float(np.max(np.abs(q_witness(c) - q_purity(c)))))
    return worst, 1e-12


def check_orthogonality(rng, quick):
    cfg = DisentanglerConfig(1.0)
    worst = 0.0
    for psi, w in _pairs(rng, quick):
        worst = max(worst, abs(np.vdot(psi, disentangler.apply_m_d(psi, w, cfg))))
    return worst, 1e-13


def check_witness_overlap(rng, quick):
    cfg = DisentanglerConfig(1.0)
    worst = 0.0
    for psi, w in _pairs(rng, quick):
        nw = np.vdot(w, w).real
        p = disentangler.expected_projection(psi, w)
        lhs = np.vdot(w, disentangler.apply_m_d(psi, w, cfg))
        worst = max(worst, abs(lhs + np.sqrt(nw * (1 - p)) * np.vdot(w, psi)))
    return worst, 1e-12


def check_norm_identity(rng, quick):
    cfg = DisentanglerConfig(1.0)
    worst = 0.0
    for psi, w in _pairs(rng, quick):
        md = disentangler.apply_m_d(psi, w, cfg)
        worst = max(worst, abs(np.vdot(md, md).real - abs(np.vdot(w, psi)) ** 2))
    return worst, 1e-12


def check_stabilized_vs_naive(rng, quick):
    cfg = DisentanglerConfig(1.0)
    worst = 0.0
    for psi, w in _pairs(rng, quick):
        if 1 - disentangler.expected_projection(psi, w) <= 1e-6:
            continue
        naive = disentangler.m_d_matrix(psi, w, cfg) @ psi
        worst = max(worst, float(np.max(np.abs(disentangler.apply_m_d(psi, w, cfg) - naive))))
    return worst, 1e-10


def check_product_annihilation(rng, quick):
    cfg = DisentanglerConfig(1.0)
    worst = 0.0
    for n1, n2 in _dims(quick):
        for _ in range(20 if quick else 100):
            u = rng.standard_normal(n1) + 1j * rng.standard_normal(n1)
            v = rng.standard_normal(n2) + 1j * rng.standard_normal(n2)
            psi = product_state(u, v).vector
            worst = max(worst, float(np.linalg.norm(
                disentangler.total_generator(psi, (n1, n2), cfg))))
    return worst, 1e-13


def check_local_unitary(rng, quick):
    worst = 0.0
    for n1, n2 in _dims(quick):
        for _ in range(10 if quick else 50):
            s = random_state(n1, n2, rng)
            s2 = apply_local(s, random_unitary(n1, rng), random_unitary(n2, rng))
            worst = max(worst, abs(q_witness(s2) - q_witness(s)))
    return worst, 1e-12


def _random_params(rng):
    return TwoSpinParams(omega_a=rng.uniform(0.5, 2), omega_b=rng.uniform(3, 6),
                         omega_1=rng.uniform(0.3, 1.5), delta=rng.uniform(-1, 1),
                         g=rng.uniform(0.1, 0.6))


def check_frame_consistency(rng, quick):
    worst = 0.0
    icfg = IntegratorConfig(rtol=1e-11, atol=1e-13, t_final=2.0 if quick else 10.0,
                            record_every=1.0)
    cfg = DisentanglerConfig(0.0)
    for _ in range(2 if quick else 10):
        params = _random_params(rng)
        psi_lab = random_state(2, 2, rng).vector
        t_end = icfg.t_final
        runs = {}
        for frame in ("lab", "rotating", "double"):
            psi0 = to_frame(psi_lab, "lab", frame, 0.0, params)
            runs[frame] = evolve(psi0, hamiltonian(frame, params), cfg, icfg, dims=(2, 2))
        ref = runs["lab"].states[-1]
        for frame in ("rotating", "double"):
            back = to_frame(runs[frame].states[-1], frame, "lab", t_end, params)
            worst = max(worst, float(np.max(np.abs(back - ref))))
    return worst, 1e-8


def check_sphere(rng, quick):
    worst = 0.0
    # no renormalization: the flow itself must keep |P| = 1
    icfg = IntegratorConfig(rtol=1e-10, t_final=5.0, record_every=0.05, renormalize=False)
    for _ in range(3 if quick else 20):
        w = np.array([rng.normal(), 0.0, rng.normal()])
        p0 = rng.normal(size=3)
        traj = bloch_evolve(p0 / np.linalg.norm(p0), w, rng.uniform(0, 3), icfg)
        worst = max(worst, float(np.max(np.abs(np.linalg.norm(traj.p, axis=1) - 1))))
    return worst, 1e-7


CHECKS = {
    "q_oracle_equivalence": check_q_oracle,
    "m_d_orthogonal_to_psi": check_orthogonality,
    "m_d_witness_overlap": check_witness_overlap,
    "m_d_norm_identity": check_norm_identity,
    "stabilized_matches_naive": check_stabilized_vs_naive,
    "product_state_annihilation": check_product_annihilation,
    "local_unitary_invariance": check_local_unitary,
    "frame_consistency": check_frame_consistency,
    "sphere_preservation": check_sphere,
}


def run_checks(seed: int = 0, quick: bool = False, names=None) -> list[CheckResult]:
    out = []
    for name, fn in CHECKS.items():
        if names is not None and name not in names:
            continue
        # one generator per check so the battery is order-independent
        rng = np.random.default_rng([seed, len(out)])
        res, tol = fn(rng, quick)
        out.append(CheckResult(name, float(res), tol))
    return out
