"""Driven two-spin system near the Hartmann-Hahn resonance.

Basis order is ``(--, -+, +-, ++)`` with spin a first. Three frames are
available: ``lab`` (time-dependent drive), ``rotating`` (spin b rotated at
the drive frequency) and ``double`` (rotating frame further rotated so the
driven spin b is diagonal). Near ``omega_a = omega_R`` the double-frame
problem is truncated to the ``(--, ++)`` subspace, where it reduces to a
Bloch vector ``P`` precessing about ``2 omega`` with the disentangling
drift ``gamma_d (P_z P - z)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .evolve import IntegratorConfig
from .integrator import integrate

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)
Z_HAT = np.array([0.0, 0.0, 1.0])

FRAMES = ("lab", "rotating", "double")


@dataclass(frozen=True)
class TwoSpinParams:
    """Physical parameters (angular frequencies, ``hbar = 1``).

    The drive frequency is ``omega_p = omega_b + delta``.
    """

    omega_a: float
    omega_b: float
    omega_1: float
    delta: float
    g: float
    gamma_d: float = 0.0

    def __post_init__(self):
        if not self.gamma_d >= 0.0:
            raise ValueError(f"gamma_d must be >= 0, got {self.gamma_d}")

    @property
    def omega_p(self) -> float:
        return self.omega_b + self.delta


def rabi_frequency(params: TwoSpinParams) -> float:
    return math.hypot(params.omega_1, params.delta)


def omega_lab(t: float, params: TwoSpinParams) -> np.ndarray:
    """Lab-frame Hamiltonian matrix (angular frequency units) at time ``t``."""
    wa, wb, w1, g = params.omega_a, params.omega_b, params.omega_1, params.g
    drive = 0.5 * w1 * np.exp(1j * params.omega_p * t)
    return np.array([
        [(-wa - wb) / 2, drive, -g / 2, 0],
        [np.conj(drive), (-wa + wb) / 2, 0, g / 2],
        [-g / 2, 0, (wa - wb) / 2, drive],
        [0, g / 2, np.conj(drive), (wa + wb) / 2],
    ], dtype=complex)


def omega_rotating(params: TwoSpinParams) -> np.ndarray:
    """Hamiltonian after rotating spin b at the drive frequency."""
    wa, w1, d, g = params.omega_a, params.omega_1, params.delta, params.g
    return np.array([
        [(-wa + d) / 2, w1 / 2, -g / 2, 0],
        [w1 / 2, (-wa - d) / 2, 0, g / 2],
        [-g / 2, 0, (wa + d) / 2, w1 / 2],
        [0, g / 2, w1 / 2, (wa - d) / 2],
    ])


def rotation_angle(params: TwoSpinParams) -> float:
    """Angle with ``tan(theta) = -omega_1 / delta``, branch ``atan2(-omega_1, delta)``."""
    if params.omega_1 == 0.0 and params.delta == 0.0:
        raise ValueError("rotation angle undefined: omega_1 = delta = 0")
    return math.atan2(-params.omega_1, params.delta)


def omega_double(params: TwoSpinParams) -> np.ndarray:
    """Hamiltonian in the doubly rotated frame."""
    rotation_angle(params)
    wa, w1, d, g = params.omega_a, params.omega_1, params.delta, params.g
    wr = rabi_frequency(params)
    gd = g * d / (2 * wr)
    g1 = g * w1 / (2 * wr)
    return np.array([
        [(-wa + wr) / 2, 0, -gd, g1],
        [0, (-wa - wr) / 2, g1, gd],
        [-gd, g1, (wa + wr) / 2, 0],
        [g1, gd, 0, (wa - wr) / 2],
    ])


def u_b1(t: float, params: TwoSpinParams) -> np.ndarray:
    ph = 0.5 * params.omega_p * t
    return np.diag([np.exp(1j * ph), np.exp(-1j * ph)])


def u_b2(params: TwoSpinParams) -> np.ndarray:
    th = rotation_angle(params)
    c, s = math.cos(th / 2), math.sin(th / 2)
    return np.array([[c, s], [-s, c]], dtype=complex)


def frame_unitary(kind: str, params: TwoSpinParams, t: float = 0.0) -> np.ndarray:
    """Full-space ``1_a (x) u_b`` for ``kind`` in ``{"b1", "b2"}``."""
    u = u_b1(t, params) if kind == "b1" else u_b2(params)
    return np.kron(np.eye(2), u)


def to_frame(psi, src: str, dst: str, t: float, params: TwoSpinParams) -> np.ndarray:
    """Map a state vector between frames; ``psi_lab = U1 psi_rot``, ``psi_rot = U2 psi_double``."""
    order = {f: i for i, f in enumerate(FRAMES)}
    psi = np.asarray(psi, dtype=complex)
    i, j = order[src], order[dst]
    while i < j:
        u = frame_unitary("b1" if i == 0 else "b2", params, t)
        psi = u.conj().T @ psi
        i += 1
    while i > j:
        u = frame_unitary("b1" if i == 1 else "b2", params, t)
        psi = u @ psi
        i -= 1
    return psi


def hamiltonian(frame: str, params: TwoSpinParams):
    """Matrix (``rotating``, ``double``) or ``t -> matrix`` callable (``lab``)."""
    if frame == "lab":
        return lambda t: omega_lab(t, params)
    if frame == "rotating":
        return omega_rotating(params)
    if frame == "double":
        return omega_double(params)
    raise ValueError(f"unknown frame {frame!r}; expected one of {FRAMES}")


def truncated_model(params: TwoSpinParams) -> tuple[np.ndarray, np.ndarray]:
    """Truncated ``(--, ++)`` Hamiltonian and its field vector ``omega``.

    Returns ``(omega_T, omega_vec)`` with ``omega_T = omega_vec . sigma``.
    """
    rotation_angle(params)
    wr = rabi_frequency(params)
    vec = np.array([params.g * params.omega_1 / (2 * wr), 0.0, (wr - params.omega_a) / 2])
    return sum(c * s for c, s in zip(vec, PAULI)).real, vec


# -- truncated amplitudes ---------------------------------------------------------

def embed_truncated(a: complex, d: complex) -> np.ndarray:
    return np.array([a, 0.0, 0.0, d], dtype=complex)


def restrict_truncated(psi, tol: float = 1e-12) -> tuple[complex, complex]:
    """``(a, d)`` of a 4-vector, refusing states with ``b, c`` populated."""
    psi = np.asarray(psi, dtype=complex)
    leak = max(abs(psi[1]), abs(psi[2]))
    if leak > tol:
        raise ValueError(f"state leaves the truncated subspace: max(|b|, |c|) = {leak:.3e}")
    return complex(psi[0]), complex(psi[3])


def m_dt(a: complex, d: complex) -> np.ndarray:
    """Truncated disentangling generator ``diag(-|d|^2, |a|^2)``."""
    n = abs(a) ** 2 + abs(d) ** 2
    if abs(n - 1.0) > 1e-10:
        raise ValueError(f"amplitudes not normalized: |a|^2 + |d|^2 = {n!r}")
    return np.diag([-abs(d) ** 2, abs(a) ** 2])


def _m_dt_field(psi: np.ndarray) -> np.ndarray:
    # M_D psi for the witness (conj(d), 0); the 1/|psi| factor keeps it exact off the unit sphere
    a, d = psi
    n = abs(a) ** 2 + abs(d) ** 2
    return np.array([-abs(d) ** 2 * a, abs(a) ** 2 * d]) / math.sqrt(n)


def polarization(amplitudes) -> np.ndarray:
    """Bloch vector ``(<sx>, <sy>, <sz>)`` of ``(a, d)``; also accepts a stack ``(..., 2)``."""
    amp = np.asarray(amplitudes, dtype=complex)
    a, d = amp[..., 0], amp[..., 1]
    cross = np.conj(d) * a
    return np.stack([2 * cross.real, -2 * cross.imag, np.abs(a) ** 2 - np.abs(d) ** 2], axis=-1)


def amplitudes_from_polarization(p) -> np.ndarray:
    """Unit ``(a, d)`` with real ``a >= 0`` whose Bloch vector is ``p``."""
    px, py, pz = np.asarray(p, dtype=float) / np.linalg.norm(p)
    theta = math.atan2(math.hypot(px, py), pz)
    phi = math.atan2(py, px)
    return np.array([math.cos(theta / 2), math.sin(theta / 2) * np.exp(1j * phi)])


@dataclass
class TruncatedTrajectory:
    times: np.ndarray
    amplitudes: np.ndarray
    norms: np.ndarray
    stats: dict = field(default_factory=dict)

    @property
    def q_values(self) -> np.ndarray:
        amp = self.amplitudes / np.linalg.norm(self.amplitudes, axis=1)[:, None]
        return 2 * np.abs(amp[:, 0] * amp[:, 1]) ** 2

    def polarization(self) -> np.ndarray:
        amp = self.amplitudes / np.linalg.norm(self.amplitudes, axis=1)[:, None]
        return polarization(amp)


def truncated_evolve(a0: complex, d0: complex, omega_vec, gamma_d: float,
                     icfg: IntegratorConfig) -> TruncatedTrajectory:
    """Integrate ``(a, d)`` under ``-i omega.sigma + gamma_d M_DT``."""
    psi0 = np.array([a0, d0], dtype=complex)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError("initial amplitudes are not normalized")
    omega_t = sum(c * s for c, s in zip(np.asarray(omega_vec, dtype=float), PAULI))

    def f(t, y):
        out = -1j * (omega_t @ y)
        if gamma_d:
            out = out + gamma_d * _m_dt_field(y)
        return out

    res = integrate(f, psi0, icfg.t_final, icfg.grid(), rtol=icfg.rtol, atol=icfg.atol,
                    first_step=icfg.dt_init, renormalize=icfg.renormalize)
    return TruncatedTrajectory(res.times, res.ys, res.norms, dict(res.stats))


# -- Bloch dynamics ---------------------------------------------------------------

def v_d(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return p[..., 2:3] * p - Z_HAT


def _bloch_field(p, omega_vec, gamma_d) -> np.ndarray:
    return 2 * np.cross(omega_vec, p) + gamma_d * v_d(p)


def bloch_rhs(p, omega_vec, gamma_d: float) -> np.ndarray:
    """``dP/dt = 2 omega x P + gamma_d (P_z P - z)``; ``P`` must be a unit vector."""
    p = np.asarray(p, dtype=float)
    if abs(np.linalg.norm(p) - 1.0) > 1e-8:
        raise ValueError(f"Bloch vector is not on the unit sphere (|P| = {np.linalg.norm(p)!r})")
    return _bloch_field(p, np.asarray(omega_vec, dtype=float), gamma_d)


def bloch_jacobian(p, omega_vec, gamma_d: float) -> np.ndarray:
    """Analytic Jacobian of the Bloch field in 3-D."""
    wx, wy, wz = omega_vec
    cross = np.array([[0, -wz, wy], [wz, 0, -wx], [-wy, wx, 0]], dtype=float)
    p = np.asarray(p, dtype=float)
    return 2 * cross + gamma_d * (p[2] * np.eye(3) + np.outer(p, Z_HAT))


@dataclass
class BlochTrajectory:
    times: np.ndarray
    p: np.ndarray
    norms: np.ndarray
    stats: dict = field(default_factory=dict)

    @property
    def q_values(self) -> np.ndarray:
        pz = self.p[:, 2] / np.linalg.norm(self.p, axis=1)
        return 0.5 * (1.0 - pz ** 2)


def bloch_evolve(p0, omega_vec, gamma_d: float, icfg: IntegratorConfig) -> BlochTrajectory:
    """Integrate the Bloch equation; renormalization keeps ``P`` on the sphere."""
    p0 = np.asarray(p0, dtype=float)
    if abs(np.linalg.norm(p0) - 1.0) > 1e-10:
        raise ValueError("initial Bloch vector must have unit length")
    w = np.asarray(omega_vec, dtype=float)
    res = integrate(lambda t, y: _bloch_field(y, w, gamma_d), p0, icfg.t_final, icfg.grid(),
                    rtol=icfg.rtol, atol=icfg.atol, first_step=icfg.dt_init,
                    renormalize=icfg.renormalize)
    return BlochTrajectory(res.times, res.ys, res.norms, dict(res.stats))


# -- fixed points -----------------------------------------------------------------

class Stability(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"


@dataclass(frozen=True)
class BlochFixedPoint:
    theta: float
    phi: float
    p: np.ndarray
    residual: float
    angle_residual: float
    stability: Stability
    eigenvalues: np.ndarray


def theta_h(omega_vec) -> float:
    """Polar angle of the field vector ``omega`` (in ``[0, pi]``)."""
    wx, wy, wz = omega_vec
    return math.atan2(math.hypot(wx, wy), wz)


def angle_residual(theta, omega_vec, gamma_d: float):
    """Fixed-point angle condition with denominators cleared.

    ``gamma^2 / (4 |omega|^2) sin^2 cos^2 - sin(th_H - th) sin(th_H + th)``;
    zero exactly at the polar angles of the fixed points, including the poles.
    """
    wx, _, wz = omega_vec
    w2 = wx ** 2 + wz ** 2
    th_h = theta_h(omega_vec)
    theta = np.asarray(theta, dtype=float)
    s, c = np.sin(theta), np.cos(theta)
    return gamma_d ** 2 / (4 * w2) * (s * c) ** 2 - np.sin(th_h - theta) * np.sin(th_h + theta)


def _quadratic_roots(a: float, b: float, c: float) -> list[float]:
    """Real roots of ``a x^2 + b x + c`` without cancellation."""
    if a == 0.0:
        return [-c / b] if b else []
    disc = b * b - 4 * a * c
    if disc < 0.0:
        return []
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    return [q / a, c / q] if q else [0.0, 0.0]


def angle_roots(omega_vec, gamma_d: float) -> np.ndarray:
    """Polar angles solving the fixed-point angle condition, in closed form.

    With ``v = cos^2(theta)`` and ``u = sin^2(theta) = 1 - v`` the condition
    becomes ``(g^2/4) v^2 + (|omega|^2 - g^2/4) v - omega_z^2 = 0`` (equivalently
    ``(g^2/4) u^2 - (g^2/4 + |omega|^2) u + omega_x^2 = 0``). The roots in ``v``
    multiply to ``-4 omega_z^2 / g^2``, so there is one admissible root unless
    ``omega_z = 0``; then ``v = 0`` (the equator) appears but the field vanishes
    there only if ``gamma <= 2 |omega_x|``. Each root gives ``theta`` and
    ``pi - theta``; ``theta`` is taken from whichever of ``u``, ``v`` is small so
    both the equator and the poles stay well conditioned.
    """
    wx, _, wz = omega_vec
    w2 = wx ** 2 + wz ** 2
    a = gamma_d ** 2 / 4
    vs = _quadratic_roots(a, w2 - a, -wz ** 2)
    us = _quadratic_roots(a, -(a + w2), wx ** 2)
    thetas = []
    for v in vs:
        if not 0.0 <= v <= 1.0 + 1e-15:
            continue
        if v == 0.0 and gamma_d > 2 * abs(wx):
            continue
        if v <= 0.5:
            th = math.acos(math.sqrt(v))
        else:
            u = min(us, key=lambda x: abs(x - (1.0 - v))) if us else 1.0 - v
            th = math.asin(math.sqrt(min(max(u, 0.0), 1.0)))
        thetas.extend([th, math.pi - th])
    return np.unique(np.round(thetas, 15))


def _numerical_jacobian(p, omega_vec, gamma_d, h: float = 1e-6) -> np.ndarray:
    jac = np.empty((3, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        jac[:, k] = (_bloch_field(p + e, omega_vec, gamma_d)
                     - _bloch_field(p - e, omega_vec, gamma_d)) / (2 * h)
    return jac


def _tangent_basis(p) -> np.ndarray:
    helper = Z_HAT if abs(p[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(p, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(p, e1)
    return np.stack([e1, e2], axis=1)


def classify(p, omega_vec, gamma_d: float) -> tuple[Stability, np.ndarray]:
    """Stability from eigenvalues of the differenced Jacobian on the tangent plane."""
    w = np.asarray(omega_vec, dtype=float)
    basis = _tangent_basis(np.asarray(p, dtype=float))
    jt = basis.T @ _numerical_jacobian(p, w, gamma_d) @ basis
    eig = np.linalg.eigvals(jt)
    tol = 1e-6 * (2 * np.linalg.norm(w) + gamma_d)
    if np.all(eig.real < -tol):
        return Stability.STABLE, eig
    if np.any(eig.real > tol):
        return Stability.UNSTABLE, eig
    return Stability.MARGINAL, eig


def _start_grid(n_theta: int, n_phi: int) -> np.ndarray:
    th = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    ph = np.arange(n_phi) * 2 * np.pi / n_phi
    tt, pp = np.meshgrid(th, ph, indexing="ij")
    starts = np.stack([np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=-1)
    return np.concatenate([starts.reshape(-1, 3), [Z_HAT, -Z_HAT]])


def _newton_batch(p, omega_vec, gamma_d, iters: int) -> np.ndarray:
    """Damped Gauss-Newton on ``[f(P), (|P|^2 - 1)/2] = 0`` for a stack of starts."""
    w = np.asarray(omega_vec, dtype=float)
    wx, wy, wz = w
    cross = 2 * np.array([[0, -wz, wy], [wz, 0, -wx], [-wy, wx, 0]])
    scale = 2 * np.linalg.norm(w) + gamma_d
    eye = np.eye(3)
    for _ in range(iters):
        f = _bloch_field(p, w, gamma_d)
        resid = np.concatenate([f, 0.5 * (np.sum(p * p, axis=1) - 1)[:, None]], axis=1)
        jf = cross[None] + gamma_d * (p[:, 2, None, None] * eye[None]
                                      + p[:, :, None] * Z_HAT[None, None, :])
        jac = np.concatenate([jf, p[:, None, :]], axis=1)
        jt = np.swapaxes(jac, 1, 2)
        normal = jt @ jac + (1e-14 * scale ** 2) * eye
        step = np.linalg.solve(normal, np.einsum("nij,nj->ni", jt, resid)[..., None])[..., 0]
        # cap the step so far-away starts do not jump across the sphere
        size = np.linalg.norm(step, axis=1, keepdims=True)
        p = p - step * np.minimum(1.0, 0.5 / np.maximum(size, 1e-300))
        p = p / np.linalg.norm(p, axis=1, keepdims=True)
        if size.max() < 1e-15:
            break
    return p


def fixed_points(omega_vec, gamma_d: float, *, n_theta: int = 6, n_phi: int = 8,
                 tol: float = 1e-10) -> list[BlochFixedPoint]:
    """All fixed points of the Bloch equation on the unit sphere.

    Solves the full 3-component system by batched Gauss-Newton from a grid
    of spherical starts, deduplicates, and checks each root against the
    scalar angle condition (:func:`angle_residual`). Sorted by ``(theta, phi)``.

    Raises
    ------
    ValueError
        If ``omega`` has no x or z component.
    RuntimeError
        If no root converges, or a root violates the angle condition.
    """
    w = np.asarray(omega_vec, dtype=float)
    if w[0] ** 2 + w[2] ** 2 <= 0.0:
        raise ValueError("need omega_x^2 + omega_z^2 > 0")
    p = _newton_batch(_start_grid(n_theta, n_phi), w, gamma_d, iters=40)
    res = np.linalg.norm(_bloch_field(p, w, gamma_d), axis=1)
    good = p[res <= 1e3 * tol]
    if len(good) == 0:
        raise RuntimeError(
            f"no fixed point converged (omega={w.tolist()}, gamma_d={gamma_d}, "
            f"best residual {res.min():.3e})")

    roots: list[np.ndarray] = []
    for q in good:
        if all(np.linalg.norm(q - r) > 1e-6 for r in roots):
            roots.append(q)
    roots = list(_newton_batch(np.array(roots), w, gamma_d, iters=5))

    out = []
    for q in roots:
        r = float(np.linalg.norm(_bloch_field(q, w, gamma_d)))
        if r > tol:
            continue
        theta = math.acos(max(-1.0, min(1.0, q[2])))
        phi = math.atan2(q[1], q[0]) % (2 * math.pi)
        e_ang = float(abs(angle_residual(theta, w, gamma_d)))
        if e_ang > 1e-8:
            raise RuntimeError(
                f"fixed point theta={theta!r} violates the angle condition (residual {e_ang:.3e})")
        stab, eig = classify(q, w, gamma_d)
        out.append(BlochFixedPoint(theta, phi, q, r, e_ang, stab, eig))
    if not out:
        raise RuntimeError("no fixed point reached the residual tolerance")
    out.sort(key=lambda fp: (round(fp.theta, 9), round(fp.phi, 9)))
    return out


# -- Hartmann-Hahn sweep ----------------------------------------------------------

@dataclass
class SweepRow:
    delta: float
    omega1: float
    omega_r: float
    omega_x: float
    omega_z: float
    theta_h: float
    fixed_points: list = field(default_factory=list)
    q_asymptotic: Optional[float] = None
    error: Optional[str] = None


def _sweep_point(args) -> SweepRow:
    base, delta, omega1, q_time = args
    params = TwoSpinParams(base.omega_a, base.omega_b, omega1, delta, base.g, base.gamma_d)
    try:
        _, w = truncated_model(params)
    except ValueError as exc:
        return SweepRow(delta, omega1, rabi_frequency(params), math.nan, math.nan, math.nan,
                        error=str(exc))
    row = SweepRow(delta, omega1, rabi_frequency(params), float(w[0]), float(w[2]), theta_h(w))
    try:
        row.fixed_points = fixed_points(w, params.gamma_d)
        if q_time:
            icfg = IntegratorConfig(t_final=q_time, record_every=q_time)
            # start from the |-x> equator point: maximally entangled in the truncated picture
            traj = bloch_evolve(np.array([-1.0, 0.0, 0.0]), w, params.gamma_d, icfg)
            row.q_asymptotic = float(traj.q_values[-1])
    except (RuntimeError, ValueError) as exc:
        row.error = str(exc)
    return row


def hh_sweep(params: TwoSpinParams, delta_values: Sequence[float],
             omega1_values: Sequence[float], *, q_time: Optional[float] = None,
             workers: int = 1, chunksize: int = 8):
    """Scan the truncated model over a ``(delta, omega_1)`` grid.

    Yields one :class:`SweepRow` per grid point in row-major order (``delta``
    outer). ``q_time`` adds the entanglement of a Bloch run from the ``-x``
    equator point at that time. ``workers > 1`` evaluates points in a process
    pool; ordering is unchanged.
    """
    delta_values = list(delta_values)
    omega1_values = list(omega1_values)
    if len(delta_values) < 2 or len(omega1_values) < 2:
        raise ValueError("grid must be at least 2x2")
    jobs = [(params, float(d), float(w1), q_time) for d in delta_values for w1 in omega1_values]
    if workers <= 1:
        yield from map(_sweep_point, jobs)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(_sweep_point, jobs, chunksize=chunksize)
