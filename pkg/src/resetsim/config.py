"""
System configuration documents.

A document is a JSON object holding exactly one of

* ``raw``: ``{"A", "C", "n_r"}``, a reset system given directly;
* ``structured``: ``{"plant": {"A_p", "B_p", "C_p"}, "compensator": {"A_r",
  "B_r", "C_r", "D_r", "n_rho", "series"?}, "exosystems": {"reference"?,
  "disturbance"?, "noise"?}}``, a closed loop to assemble;

plus optional ``initial_state``, ``numeric_options`` (:class:`SimOptions`
fields), ``name``, ``description`` and ``expected``. Matrices are row-major
nested arrays; vectors are flat arrays. A ``noise`` exosystem is kept apart
from the loop and only used by the noise experiment; it may be given as
``{"A", "C", "w0"?}`` or ``{"sinusoids": [frequencies]}``.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import (
    ClosedLoop,
    Compensator,
    Exosystem,
    ModelError,
    Plant,
    ResetSystem,
    SeriesForm,
    assemble_closed_loop,
    build_reset_system,
)
from .numerics import NumericalError
from .simulate import SimOptions

__all__ = ["ConfigError", "SystemConfig", "parse_config", "load_config", "config_hash", "canonical_json"]


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


@dataclass
class SystemConfig:
    name: str
    description: str
    system: ResetSystem
    closed_loop: ClosedLoop | None
    noise: Exosystem | None
    initial_state: np.ndarray | None
    options: SimOptions
    expected: dict = field(default_factory=dict)
    document: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return config_hash(self.document)


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def config_hash(doc: dict) -> str:
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()


def _number(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(v).__name__}")
    if not np.isfinite(v):
        raise ConfigError(path, "must be finite")
    return float(v)


def _vector(v, path: str, size: int | None = None) -> np.ndarray:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list):
        raise ConfigError(path, f"expected an array of numbers, got {type(v).__name__}")
    x = np.array([_number(a, f"{path}[{i}]") for i, a in enumerate(v)], dtype=float)
    if size is not None and x.size != size:
        raise ConfigError(path, f"expected {size} entries, got {x.size}")
    return x


def _matrix(v, path: str, shape: tuple | None = None) -> np.ndarray:
    if not isinstance(v, list) or not v:
        raise ConfigError(path, "expected a non-empty nested array")
    if not all(isinstance(r, list) for r in v):
        raise ConfigError(path, "expected a nested array of rows")
    rows = [_vector(r, f"{path}[{i}]") for i, r in enumerate(v)]
    widths = {r.size for r in rows}
    if len(widths) != 1:
        raise ConfigError(path, f"rows have unequal lengths {sorted(widths)}")
    M = np.vstack(rows)
    if shape is not None:
        want = tuple(M.shape[i] if s is None else s for i, s in enumerate(shape))
        if M.shape != want:
            raise ConfigError(path, f"expected shape {want}, got {M.shape}")
    return M


def _square(v, path: str) -> np.ndarray:
    M = _matrix(v, path)
    if M.shape[0] != M.shape[1]:
        raise ConfigError(path, f"must be square, got {M.shape}")
    return M


def _obj(doc, path: str) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError(path, f"expected an object, got {type(doc).__name__}")
    return doc


def _get(doc: dict, key: str, path: str):
    if key not in doc:
        raise ConfigError(f"{path}.{key}" if path else key, "missing")
    return doc[key]


def _check_keys(doc: dict, allowed: set, path: str) -> None:
    extra = set(doc) - allowed
    if extra:
        raise ConfigError(f"{path}.{sorted(extra)[0]}" if path else sorted(extra)[0], "unknown field")


def _int(v, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(path, "expected an integer")
    return int(v)


def _ss_block(doc, path: str, keys=("A", "B", "C")) -> tuple:
    doc = _obj(doc, path)
    A = _square(_get(doc, keys[0], path), f"{path}.{keys[0]}")
    n = A.shape[0]
    B = _vector(_get(doc, keys[1], path), f"{path}.{keys[1]}", n)
    C = _vector(_get(doc, keys[2], path), f"{path}.{keys[2]}", n)
    return A, B, C


def _exosystem(doc, path: str) -> Exosystem:
    doc = _obj(doc, path)
    _check_keys(doc, {"A", "C", "w0"}, path)
    A = _square(_get(doc, "A", path), f"{path}.A")
    n = A.shape[0]
    C = _vector(_get(doc, "C", path), f"{path}.C", n)
    w0 = _vector(doc["w0"], f"{path}.w0", n) if "w0" in doc else None
    return Exosystem(A, C, w0)


def _noise(doc, path: str) -> Exosystem:
    from .analysis import sinusoid_noise

    doc = _obj(doc, path)
    if "sinusoids" in doc:
        _check_keys(doc, {"sinusoids", "magnitude", "direction"}, path)
        freqs = _vector(doc["sinusoids"], f"{path}.sinusoids")
        if freqs.size == 0 or np.any(freqs <= 0):
            raise ConfigError(f"{path}.sinusoids", "frequencies must be positive")
        mag = _number(doc.get("magnitude", 0.0), f"{path}.magnitude")
        direction = _vector(doc["direction"], f"{path}.direction", 2 * freqs.size) if "direction" in doc else None
        return sinusoid_noise(freqs, mag, direction)
    return _exosystem(doc, path)


def _structured(doc, tol):
    path = "structured"
    doc = _obj(doc, path)
    _check_keys(doc, {"plant", "compensator", "exosystems"}, path)
    Ap, Bp, Cp = _ss_block(_get(doc, "plant", path), f"{path}.plant", ("A_p", "B_p", "C_p"))
    cpath = f"{path}.compensator"
    cdoc = _obj(_get(doc, "compensator", path), cpath)
    _check_keys(cdoc, {"A_r", "B_r", "C_r", "D_r", "n_rho", "series"}, cpath)
    Ar, Br, Cr = _ss_block(cdoc, cpath, ("A_r", "B_r", "C_r"))
    Dr = _number(cdoc.get("D_r", 0.0), f"{cpath}.D_r")
    n_rho = _int(_get(cdoc, "n_rho", cpath), f"{cpath}.n_rho")
    if not 1 <= n_rho <= Ar.shape[0]:
        raise ConfigError(f"{cpath}.n_rho", f"must be in [1, {Ar.shape[0]}], got {n_rho}")
    series = None
    if "series" in cdoc:
        spath = f"{cpath}.series"
        sdoc = _obj(cdoc["series"], spath)
        A1, B1, C1 = _ss_block(_get(sdoc, "G1", spath), f"{spath}.G1")
        A2, B2, C2 = _ss_block(_get(sdoc, "R2", spath), f"{spath}.R2")
        series = SeriesForm(A1, B1, C1, A2, B2, C2)
        if A2.shape[0] != n_rho:
            raise ConfigError(f"{spath}.R2.A", f"order {A2.shape[0]} differs from n_rho = {n_rho}")
        R = np.block([[A1, np.zeros((A1.shape[0], A2.shape[0]))], [np.outer(B2, C1), A2]])
        if R.shape != Ar.shape or not np.allclose(R, Ar):
            raise ConfigError(f"{spath}", "series blocks do not reproduce A_r")
    edoc = _obj(doc.get("exosystems", {}), f"{path}.exosystems")
    _check_keys(edoc, {"reference", "disturbance", "noise"}, f"{path}.exosystems")
    exo = {k: _exosystem(edoc[k], f"{path}.exosystems.{k}") for k in ("reference", "disturbance") if k in edoc}
    noise = _noise(edoc["noise"], f"{path}.exosystems.noise") if "noise" in edoc else None
    try:
        plant = Plant(Ap, Bp, Cp)
        comp = Compensator(Ar, Br, Cr, Dr, n_rho, series)
        cl = assemble_closed_loop(plant, comp, exo.get("reference"), exo.get("disturbance"), None, tol)
    except (ModelError, NumericalError) as e:
        raise ConfigError(path, str(e)) from e
    return cl, noise


def _options(doc) -> SimOptions:
    path = "numeric_options"
    doc = _obj(doc, path)
    names = {f.name: f for f in dataclasses.fields(SimOptions)}
    kw = {}
    for k, v in doc.items():
        if k not in names:
            raise ConfigError(f"{path}.{k}", "unknown option")
        if v is None:
            kw[k] = None
        elif k == "max_events":
            kw[k] = _int(v, f"{path}.{k}")
        else:
            kw[k] = _number(v, f"{path}.{k}")
            if kw[k] <= 0:
                raise ConfigError(f"{path}.{k}", "must be positive")
    return SimOptions(**kw)


def parse_config(doc: dict, tol: float | None = None) -> SystemConfig:
    """
    Validate a configuration document and build the system it describes.

    Raises
    ------
    ConfigError
        With the path of the offending field.
    """
    doc = _obj(doc, "<document>")
    _check_keys(
        doc,
        {"name", "description", "raw", "structured", "initial_state", "numeric_options", "expected", "blocks"},
        "",
    )
    if ("raw" in doc) == ("structured" in doc):
        raise ConfigError("raw/structured", "exactly one of 'raw' and 'structured' must be present")
    cl, noise = None, None
    if "raw" in doc:
        rdoc = _obj(doc["raw"], "raw")
        _check_keys(rdoc, {"A", "C", "n_r"}, "raw")
        A = _square(_get(rdoc, "A", "raw"), "raw.A")
        C = _vector(_get(rdoc, "C", "raw"), "raw.C", A.shape[0])
        n_r = _int(_get(rdoc, "n_r", "raw"), "raw.n_r")
        if not 1 <= n_r <= A.shape[0]:
            raise ConfigError("raw.n_r", f"must be in [1, {A.shape[0]}], got {n_r}")
        try:
            system = build_reset_system(A, C, n_r, tol)
        except (ModelError, NumericalError) as e:
            raise ConfigError("raw", str(e)) from e
    else:
        cl, noise = _structured(doc["structured"], tol)
        system = cl.system
    x0 = None
    if "initial_state" in doc:
        x0 = _vector(doc["initial_state"], "initial_state", system.n)
    opts = _options(doc.get("numeric_options", {}))
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise ConfigError("name", "expected a string")
    return SystemConfig(
        name=name,
        description=str(doc.get("description", "")),
        system=system,
        closed_loop=cl,
        noise=noise,
        initial_state=x0,
        options=opts,
        expected=dict(doc.get("expected", {})),
        document=doc,
    )


def load_config(path, tol: float | None = None) -> SystemConfig:
    """Read and parse a JSON configuration file; syntax errors report line and column."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}", e.msg) from e
    return parse_config(doc, tol)
