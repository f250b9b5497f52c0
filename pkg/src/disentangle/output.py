"""CSV writers. Every file starts with ``#`` comment lines carrying the
package version and the SHA-256 of the canonical config."""

from __future__ import annotations

from typing import IO, Iterable, Optional

import numpy as np

from . import __version__
from .twospin import BlochFixedPoint, SweepRow


def fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def write_header(fh: IO[str], kind: str, cfg_hash: Optional[str]) -> None:
    fh.write(f"# disentangle {__version__} {kind}\n")
    if cfg_hash is not None:
        fh.write(f"# config-sha256 {cfg_hash}\n")


def trajectory_columns(dims: tuple[int, int]) -> list[str]:
    cols = ["t", "norm", "Q", "expP"]
    for k1 in range(dims[0]):
        for k2 in range(dims[1]):
            cols += [f"re_c{k1}{k2}", f"im_c{k1}{k2}"]
    return cols


def write_trajectory(fh: IO[str], traj, cfg_hash: Optional[str] = None) -> None:
    write_header(fh, "trajectory", cfg_hash)
    fh.write(",".join(trajectory_columns(traj.dims)) + "\n")
    for i, t in enumerate(traj.times):
        amps = np.column_stack([traj.states[i].real, traj.states[i].imag]).ravel()
        row = [t, traj.norms[i], traj.q_values[i], traj.exp_p[i], *amps]
        fh.write(",".join(fmt(x) for x in row) + "\n")


def write_bloch(fh: IO[str], traj, cfg_hash: Optional[str] = None) -> None:
    write_header(fh, "bloch", cfg_hash)
    fh.write("t,Px,Py,Pz,Q\n")
    for t, p, q in zip(traj.times, traj.p, traj.q_values):
        fh.write(",".join(fmt(x) for x in (t, *p, q)) + "\n")


def sweep_columns(max_roots: int, with_q: bool = False) -> list[str]:
    cols = ["delta", "omega1", "omega_r", "omega_x", "omega_z", "theta_h", "n_fixed"]
    for k in range(1, max_roots + 1):
        cols += [f"theta_{k}", f"phi_{k}", f"stab_{k}"]
    if with_q:
        cols.append("q_asym")
    return cols


def sweep_row(row: SweepRow, max_roots: int, with_q: bool = False) -> str:
    cells = [fmt(x) for x in (row.delta, row.omega1, row.omega_r, row.omega_x,
                               row.omega_z, row.theta_h)]
    cells.append(str(len(row.fixed_points)))
    for fp in row.fixed_points[:max_roots]:
        cells += [fmt(fp.theta), fmt(fp.phi), fp.stability.value]
    cells += [""] * (3 * (max_roots - min(len(row.fixed_points), max_roots)))
    if with_q:
        cells.append(fmt(row.q_asymptotic))
    return ",".join(cells)


def write_sweep(fh: IO[str], rows: Iterable[SweepRow], max_roots: int,
                cfg_hash: Optional[str] = None, with_q: bool = False) -> list[SweepRow]:
    """Stream rows as they arrive; returns the rows written."""
    write_header(fh, "sweep", cfg_hash)
    fh.write(",".join(sweep_columns(max_roots, with_q)) + "\n")
    written = []
    for row in rows:
        if row.error:
            fh.write(f"# error at delta={fmt(row.delta)} omega1={fmt(row.omega1)}: {row.error}\n")
        fh.write(sweep_row(row, max_roots, with_q) + "\n")
        fh.flush()
        written.append(row)
    return written


def write_fixed_points(fh: IO[str], points: list[BlochFixedPoint], omega_vec, gamma_d: float,
                       cfg_hash: Optional[str] = None) -> None:
    write_header(fh, "fixed-points", cfg_hash)
    fh.write(f"# omega_x {fmt(omega_vec[0])} omega_z {fmt(omega_vec[2])} gamma_d {fmt(gamma_d)}\n")
    fh.write("theta,phi,Px,Py,Pz,residual,angle_residual,stability\n")
    for fp in points:
        cells = [fmt(x) for x in (fp.theta, fp.phi, *fp.p, fp.residual, fp.angle_residual)]
        fh.write(",".join(cells + [fp.stability.value]) + "\n")
