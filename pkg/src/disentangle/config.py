"""JSON run configuration for the command-line drivers."""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from .disentangler import DisentanglerConfig
from .evolve import IntegratorConfig
from .hilbert import BipartiteState, product_state, random_state
from .twospin import TwoSpinParams

logger = logging.getLogger(__name__)

SYSTEMS = ("generic", "twospin", "twospin-truncated")
FRAMES = ("lab", "rotating", "double")
RENORM_WARN = 1e-6


class ConfigError(ValueError):
    """Invalid configuration; ``line`` points into the source file when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class GenericSystem:
    n1: int
    n2: int
    hamiltonian: np.ndarray


@dataclass(frozen=True)
class RunConfig:
    system: str
    frame: Optional[str]
    params: Union[TwoSpinParams, GenericSystem]
    initial_state: np.ndarray
    disentangler: DisentanglerConfig
    integrator: IntegratorConfig
    seed: int
    output_path: Optional[str]


class _Source:
    """Raw config text plus a helper that maps a key to its line number."""

    def __init__(self, text: str, base: Path):
        self.text = text
        self.base = base

    def line_of(self, key: str) -> Optional[int]:
        m = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        return self.text.count("\n", 0, m.start()) + 1 if m else None

    def error(self, key: str, message: str) -> ConfigError:
        return ConfigError(f"{key}: {message}", self.line_of(key.split(".")[-1]))


def load_json(path) -> tuple[dict, _Source]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno) from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object", 1)
    return doc, _Source(text, path.parent)


def config_hash(doc: dict) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _number(src: _Source, section: dict, key: str, prefix: str, default=None, *, required=True):
    if key not in section:
        if default is not None or not required:
            return default
        raise src.error(f"{prefix}.{key}", "missing required field")
    val = section[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise src.error(f"{prefix}.{key}", f"expected a number, got {val!r}")
    return float(val)


def _section(src: _Source, doc: dict, key: str, required: bool = True) -> dict:
    sec = doc.get(key)
    if sec is None:
        if required:
            raise src.error(key, "missing required section")
        return {}
    if not isinstance(sec, dict):
        raise src.error(key, "expected an object")
    return sec


def _build(src: _Source, key: str, factory, **kwargs):
    try:
        return factory(**kwargs)
    except (TypeError, ValueError) as exc:
        raise src.error(key, str(exc)) from exc


def parse_disentangler(doc: dict, src: _Source) -> DisentanglerConfig:
    sec = _section(src, doc, "disentangler", required=False)
    unknown = set(sec) - {"gamma_d", "eps_witness", "eps_parallel"}
    if unknown:
        raise src.error(f"disentangler.{sorted(unknown)[0]}", "unknown field")
    kw = {k: _number(src, sec, k, "disentangler", required=False) for k in sec}
    return _build(src, "disentangler", DisentanglerConfig, **kw)


def parse_integrator(doc: dict, src: _Source) -> IntegratorConfig:
    sec = _section(src, doc, "integrator", required=False)
    fields = {"rtol", "atol", "dt_init", "t_final", "renormalize", "record_every"}
    unknown = set(sec) - fields
    if unknown:
        raise src.error(f"integrator.{sorted(unknown)[0]}", "unknown field")
    kw: dict[str, Any] = {}
    for k, v in sec.items():
        if k == "renormalize":
            if not isinstance(v, bool):
                raise src.error("integrator.renormalize", "expected true or false")
            kw[k] = v
        elif k == "dt_init" and v is None:
            kw[k] = None
        else:
            kw[k] = _number(src, sec, k, "integrator")
    return _build(src, "integrator", IntegratorConfig, **kw)


def parse_twospin_params(doc: dict, src: _Source, gamma_d: float) -> TwoSpinParams:
    sec = _section(src, doc, "params")
    names = ("omega_a", "omega_b", "omega_1", "delta", "g")
    unknown = set(sec) - set(names) - {"gamma_d"}
    if unknown:
        raise src.error(f"params.{sorted(unknown)[0]}", "unknown field")
    if "gamma_d" in sec and _number(src, sec, "gamma_d", "params") != gamma_d:
        raise src.error("params.gamma_d", "conflicts with disentangler.gamma_d")
    kw = {k: _number(src, sec, k, "params") for k in names}
    return _build(src, "params", TwoSpinParams, gamma_d=gamma_d, **kw)


def _complex_matrix(src: _Source, obj, key: str) -> np.ndarray:
    try:
        if isinstance(obj, dict):
            re_ = np.asarray(obj["real"], dtype=float)
            im_ = np.asarray(obj.get("imag", np.zeros_like(re_)), dtype=float)
            return re_ + 1j * im_
        return np.asarray(obj, dtype=float).astype(complex)
    except (KeyError, TypeError, ValueError) as exc:
        raise src.error(key, f"cannot read matrix ({exc})") from exc


def parse_generic(doc: dict, src: _Source) -> GenericSystem:
    sec = _section(src, doc, "params")
    n1, n2 = sec.get("n1"), sec.get("n2")
    for k, n in (("n1", n1), ("n2", n2)):
        if not isinstance(n, int) or isinstance(n, bool) or n < 2:
            raise src.error(f"params.{k}", f"expected an integer >= 2, got {n!r}")
    if "hamiltonian_file" in sec:
        path = src.base / sec["hamiltonian_file"]
        try:
            if path.suffix == ".npy":
                h = np.load(path).astype(complex)
            else:
                h = _complex_matrix(src, json.loads(path.read_text()), "params.hamiltonian_file")
        except (OSError, ValueError) as exc:
            raise src.error("params.hamiltonian_file", f"cannot load {path}: {exc}") from exc
    elif "hamiltonian" in sec:
        h = _complex_matrix(src, sec["hamiltonian"], "params.hamiltonian")
    else:
        raise src.error("params", "generic system needs hamiltonian_file or hamiltonian")
    n = n1 * n2
    if h.shape != (n, n):
        raise src.error("params.n1", f"Hamiltonian has shape {h.shape}, expected ({n}, {n})")
    if np.max(np.abs(h - h.conj().T)) > 1e-10:
        raise src.error("params", "Hamiltonian is not Hermitian")
    return GenericSystem(n1, n2, h)


def _amplitudes(src: _Source, entry) -> np.ndarray:
    out = []
    for x in entry:
        if isinstance(x, (int, float)) and not isinstance(x, bool):
            out.append(complex(x))
        elif isinstance(x, list) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x):
            out.append(complex(x[0], x[1]))
        else:
            raise src.error("initial_state", f"cannot read amplitude {x!r}")
    return np.array(out)


def initial_vector(entry, system: str, dims: tuple[int, int], seed: int,
                   src: Optional[_Source] = None) -> np.ndarray:
    """Resolve a preset name or amplitude list to a normalized flat vector."""
    src = src or _Source("", Path("."))
    n1, n2 = dims if system != "twospin-truncated" else (2, 2)
    if isinstance(entry, str):
        if entry == "bell":
            k = min(n1, n2)
            c = np.zeros((n1, n2), dtype=complex)
            c[np.arange(k), np.arange(k)] = 1 / np.sqrt(k)
            vec = c.ravel()
        elif entry == "plus-x":
            if system == "twospin-truncated":
                vec = np.array([1, 0, 0, 1]) / np.sqrt(2)
            else:
                vec = product_state(np.ones(n1), np.ones(n2)).vector
        elif entry == "random":
            vec = random_state(n1, n2, seed).vector
        elif m := re.fullmatch(r"product:(\d)(\d)", entry):
            k1, k2 = int(m.group(1)), int(m.group(2))
            if k1 >= n1 or k2 >= n2:
                raise src.error("initial_state", f"basis index out of range in {entry!r}")
            vec = BipartiteState(np.eye(n1)[:, [k1]] @ np.eye(n2)[[k2], :]).vector
        else:
            raise src.error("initial_state", f"unknown preset {entry!r}")
        vec = np.asarray(vec, dtype=complex)
    elif isinstance(entry, list):
        vec = _amplitudes(src, entry)
        if system == "twospin-truncated" and len(vec) == 2:
            vec = np.array([vec[0], 0, 0, vec[1]])
        if len(vec) != n1 * n2:
            raise src.error("initial_state", f"expected {n1 * n2} amplitudes, got {len(vec)}")
        nrm = np.linalg.norm(vec)
        if nrm == 0:
            raise src.error("initial_state", "zero state")
        if abs(nrm - 1.0) > RENORM_WARN:
            logger.warning("initial amplitudes renormalized (norm was %.6g)", nrm)
        vec = vec / nrm
    else:
        raise src.error("initial_state", "expected a preset name or an amplitude list")
    if system == "twospin-truncated":
        leak = max(abs(vec[1]), abs(vec[2]))
        if leak > 1e-12:
            raise src.error("initial_state", "truncated model needs b = c = 0")
        vec = vec[[0, 3]]
    return vec


def parse_run_config(path) -> tuple[RunConfig, dict]:
    doc, src = load_json(path)
    known = {"system", "frame", "params", "initial_state", "disentangler", "integrator",
             "seed", "output_path"}
    unknown = set(doc) - known
    if unknown:
        raise src.error(sorted(unknown)[0], "unknown field")
    system = doc.get("system")
    if system not in SYSTEMS:
        raise src.error("system", f"expected one of {SYSTEMS}, got {system!r}")
    frame = doc.get("frame")
    if system == "twospin":
        frame = frame or "double"
        if frame not in FRAMES:
            raise src.error("frame", f"expected one of {FRAMES}, got {frame!r}")
    elif frame is not None and not (system == "twospin-truncated" and frame == "double"):
        raise src.error("frame", f"frame does not apply to system {system!r}")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise src.error("seed", f"expected an unsigned integer, got {seed!r}")
    dis = parse_disentangler(doc, src)
    integ = parse_integrator(doc, src)
    if system == "generic":
        params: Union[TwoSpinParams, GenericSystem] = parse_generic(doc, src)
        dims = (params.n1, params.n2)
    else:
        params = parse_twospin_params(doc, src, dis.gamma_d)
        dims = (2, 2)
    if "initial_state" not in doc:
        raise src.error("initial_state", "missing required field")
    psi0 = initial_vector(doc["initial_state"], system, dims, seed, src)
    out = doc.get("output_path")
    if out is not None and not isinstance(out, str):
        raise src.error("output_path", "expected a string")
    return RunConfig(system, frame, params, psi0, dis, integ, seed, out), doc
