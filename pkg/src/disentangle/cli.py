"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 config error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import output
from .config import (ConfigError, GenericSystem, _section, config_hash, load_json,
                     parse_disentangler, parse_run_config, parse_twospin_params)
from .evolve import evolve
from .integrator import IntegrationError
from .twospin import (bloch_evolve, fixed_points, hamiltonian, hh_sweep, polarization,
                      truncated_model)

log = logging.getLogger("disentangle")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def worker_count() -> int:
    n = os.cpu_count() or 1
    env = os.environ.get("DISENT_THREADS")
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            log.warning("ignoring DISENT_THREADS=%r", env)
    return n


@contextlib.contextmanager
def _open_out(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            yield fh


def cmd_simulate(args) -> int:
    cfg, doc = parse_run_config(args.config)
    chash = config_hash(doc)
    out_path = args.output or cfg.output_path
    if cfg.system == "twospin-truncated":
        _, w = truncated_model(cfg.params)
        p0 = polarization(cfg.initial_state)
        traj = bloch_evolve(p0, w, cfg.disentangler.gamma_d, cfg.integrator)
        with _open_out(out_path) as fh:
            output.write_bloch(fh, traj, chash)
        return EXIT_OK
    if isinstance(cfg.params, GenericSystem):
        h, dims = cfg.params.hamiltonian, (cfg.params.n1, cfg.params.n2)
    else:
        h, dims = hamiltonian(cfg.frame, cfg.params), (2, 2)
    traj = evolve(cfg.initial_state, h, cfg.disentangler, cfg.integrator, dims=dims)
    for key, n in sorted(traj.warnings.items()):
        if n:
            log.info("%s: %d", key, n)
    with _open_out(out_path) as fh:
        output.write_trajectory(fh, traj, chash)
    return EXIT_OK


def _axis(src, sec: dict, key: str) -> np.ndarray:
    axis = sec.get(key)
    if isinstance(axis, list):
        vals = np.array(axis, dtype=float)
    elif isinstance(axis, dict):
        try:
            vals = np.linspace(float(axis["start"]), float(axis["stop"]), int(axis["num"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise src.error(f"sweep.{key}", f"need start, stop, num ({exc})") from exc
    else:
        raise src.error(f"sweep.{key}", "expected a list or {start, stop, num}")
    if len(vals) < 2 or not np.all(np.isfinite(vals)):
        raise src.error(f"sweep.{key}", "need at least 2 finite values")
    return vals


def cmd_sweep(args) -> int:
    doc, src = load_json(args.config)
    dis = parse_disentangler(doc, src)
    params = parse_twospin_params(doc, src, dis.gamma_d)
    sec = _section(src, doc, "sweep")
    deltas, omegas = _axis(src, sec, "delta"), _axis(src, sec, "omega1")
    q_time = sec.get("q_time")
    if q_time is not None and (isinstance(q_time, bool) or not isinstance(q_time, (int, float))
                               or q_time <= 0):
        raise src.error("sweep.q_time", "expected a positive number")
    max_roots = int(sec.get("max_roots", 4))
    workers = worker_count() if args.workers is None else max(1, args.workers)
    rows = hh_sweep(params, deltas, omegas, q_time=q_time, workers=workers)
    with _open_out(args.output or doc.get("output_path")) as fh:
        written = output.write_sweep(fh, rows, max_roots, config_hash(doc), q_time is not None)
    failed = sum(1 for r in written if r.error)
    if failed:
        log.error("%d of %d grid points failed", failed, len(written))
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_fixed_points(args) -> int:
    doc, src = load_json(args.config)
    dis = parse_disentangler(doc, src)
    if "omega_vec" in doc:
        w = doc["omega_vec"]
        if not (isinstance(w, list) and len(w) == 3
                and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in w)):
            raise src.error("omega_vec", "expected three numbers")
        w = np.array(w, dtype=float)
    else:
        _, w = truncated_model(parse_twospin_params(doc, src, dis.gamma_d))
    try:
        pts = fixed_points(w, dis.gamma_d)
    except ValueError as exc:
        raise src.error("omega_vec" if "omega_vec" in doc else "params", str(exc)) from exc
    with _open_out(args.output or doc.get("output_path")) as fh:
        output.write_fixed_points(fh, pts, w, dis.gamma_d, config_hash(doc))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_checks

    results = run_checks(seed=args.seed, quick=args.quick)
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.name:<{width}}  max_residual={r.max_residual:.3e}  "
              f"tol={r.tolerance:.0e}")
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    if args.json:
        report = {"version": __version__, "seed": args.seed, "quick": args.quick,
                  "passed": ok, "checks": [r.as_dict() for r in results]}
        Path(args.json).write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK if ok else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="disent", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate one trajectory")
    p.add_argument("--config", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="fixed-point map over (delta, omega_1)")
    p.add_argument("--config", required=True)
    p.add_argument("--output")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fixed-points", help="fixed points of the Bloch equation")
    p.add_argument("--config", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_fixed_points)

    p = sub.add_parser("verify", help="run the invariant battery")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true")
    p.add_argument("--json", help="also write a JSON report here")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, RuntimeError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # validation errors raised below the config layer
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
