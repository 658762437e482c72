"""Model files, sampled-field files and result serialization.

A model file is TOML::

    name = "bilayer"
    length = 1.0
    gamma = "0"                 # "0", "inf" or a positive real

    [section]
    kind = "square"             # square | rectangle | disk | file
    half_width = 1.0

    [[slice]]
    x1_end = 1.0
    phases = [[0.5, 1.0, 1.0], [0.5, 1.0, 2.0]]   # (fraction, lambda, mu) along y
    [slice.prestrain]
    kind = "bilayer"
    theta = 0.5

Prestrain kinds: ``none``, ``bilayer`` (theta), ``splay_bend`` / ``twist``
(theta, rbar), ``halfdisk`` (theta, alpha), ``affine`` (K = [K12, K13, K23],
a) and ``file`` (path).  A slice may give ``material_file`` instead of
``phases``.  Sampled fields are ``.npz`` archives with ``y_edges`` and either
``B`` (n_y_intervals, n_quad, 6) or ``C`` (n_y_intervals, n_quad, 6, 6),
Mandel ordered and keyed to the quadrature points of the section mesh.
"""
from __future__ import annotations

import copy
import csv
import io
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .microstructure import (
    AffinePrestrain,
    BilayerPrestrain,
    HalfDiskPrestrain,
    LayeredMaterial,
    MicrostructureModel,
    ModelError,
    NematicPrestrain,
    NoPrestrain,
    SampledMaterial,
    SampledPrestrain,
    Slice,
    parse_gamma,
)
from .tensors import Skew3


def bundled_models() -> list:
    root = resources.files("rodhom") / "models"
    return sorted(p.name[:-6] for p in root.iterdir() if p.name.endswith(".model"))


def resolve_model_path(name_or_path) -> Path:
    """A file path, or the name of a bundled model (``bilayer`` or ``bilayer.model``)."""
    p = Path(name_or_path)
    if p.is_file():
        return p
    stem = p.name[:-6] if p.name.endswith(".model") else p.name
    if p.parent == Path(".") and stem in bundled_models():
        return Path(str(resources.files("rodhom") / "models" / f"{stem}.model"))
    raise ModelError(f"model file not found: {name_or_path}")


def read_config(name_or_path) -> tuple[dict, Path]:
    path = resolve_model_path(name_or_path)
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ModelError(f"{path}: {exc}") from exc
    return cfg, path.parent


def _num(d: dict, key: str, where: str, default=None) -> float:
    if key not in d:
        if default is None:
            raise ModelError(f"{where}: missing field '{key}'")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ModelError(f"{where}: field '{key}' must be a number")
    return float(v)


def _readable(path: Path, where: str) -> Path:
    if not path.is_file():
        raise ModelError(f"{where}: file not found: {path}")
    return path


def _load_npz(path: Path, keys, where: str) -> dict:
    try:
        with np.load(path) as data:
            out = {k: np.array(data[k]) for k in keys}
    except KeyError as exc:
        raise ModelError(f"{where}: {path} lacks array {exc}") from exc
    except (OSError, ValueError) as exc:
        raise ModelError(f"{where}: cannot read {path}: {exc}") from exc
    return out


def prestrain_from_dict(d: dict, where: str, base: Path, section: dict):
    kind = str(d.get("kind", "none")).lower()
    if kind == "none":
        return NoPrestrain()
    if kind == "bilayer":
        return BilayerPrestrain(_num(d, "theta", where))
    if kind in ("splay_bend", "twist"):
        return NematicPrestrain(kind, _num(d, "theta", where), _num(d, "rbar", where, 1.0))
    if kind == "halfdisk":
        if section.get("kind") != "disk" or float(section.get("radius", 1.0)) != 1.0:
            raise ModelError(f"{where}: halfdisk prestrain requires the unit-disk section")
        return HalfDiskPrestrain(_num(d, "theta", where), _num(d, "alpha", where, 0.0))
    if kind == "affine":
        K = d.get("K", [0.0, 0.0, 0.0])
        if len(K) != 3:
            raise ModelError(f"{where}: affine K needs [K12, K13, K23]")
        return AffinePrestrain(Skew3(*map(float, K)), _num(d, "a", where, 0.0))
    if kind == "file":
        path = _readable(base / str(d.get("path", "")), where)
        arr = _load_npz(path, ("y_edges", "B"), where)
        return SampledPrestrain(arr["y_edges"], arr["B"])
    raise ModelError(f"{where}: unknown prestrain kind {kind!r}")


def material_from_dict(d: dict, where: str, base: Path):
    if "material_file" in d:
        path = _readable(base / str(d["material_file"]), where)
        arr = _load_npz(path, ("y_edges", "C"), where)
        return SampledMaterial(arr["y_edges"], arr["C"])
    phases = d.get("phases")
    if not phases:
        raise ModelError(f"{where}: missing field 'phases' (rows of fraction, lambda, mu)")
    try:
        ph = np.array(phases, dtype=float)
    except (TypeError, ValueError):
        raise ModelError(f"{where}: 'phases' must be rows of three numbers") from None
    if ph.ndim != 2 or ph.shape[1] != 3:
        raise ModelError(f"{where}: 'phases' must be rows of three numbers")
    try:
        return LayeredMaterial.from_phases(ph)
    except ModelError as exc:
        raise ModelError(f"{where}: {exc}") from exc


def section_from_dict(d: dict, base: Path) -> dict:
    sec = dict(d or {"kind": "square"})
    kind = sec.get("kind")
    if kind not in ("square", "rectangle", "disk", "file"):
        raise ModelError(f"section: unknown kind {kind!r}")
    if kind == "file":
        sec["path"] = str(_readable(base / str(sec.get("path", "")), "section"))
    if kind == "rectangle":
        for key in ("width", "height"):
            _num(sec, key, "section")
    return sec


def model_from_config(cfg: dict, base: Path = Path(".")) -> MicrostructureModel:
    length = _num(cfg, "length", "model", 1.0)
    if "gamma" not in cfg:
        raise ModelError("model: missing field 'gamma'")
    gamma = parse_gamma(cfg["gamma"])
    section = section_from_dict(cfg.get("section"), base)
    raw = cfg.get("slice")
    if not raw:
        raise ModelError("model: at least one [[slice]] is required")
    slices, x0 = [], 0.0
    for i, d in enumerate(raw):
        where = f"slice {i}"
        x1 = _num(d, "x1_end", where, length if i == len(raw) - 1 else None)
        mat = material_from_dict(d, where, base)
        pre = prestrain_from_dict(d.get("prestrain", {}), where, base, section)
        slices.append(Slice(x0, x1, mat, pre))
        x0 = x1
    return MicrostructureModel(length, gamma, section, tuple(slices), str(cfg.get("name", "model")))


def load_model(name_or_path) -> tuple[MicrostructureModel, dict]:
    cfg, base = read_config(name_or_path)
    return model_from_config(cfg, base), cfg


def set_parameter(cfg: dict, name: str, value: float) -> dict:
    """Copy of a config with a sweep parameter replaced.

    ``theta`` sets every prestrain theta (and the phase fractions of
    two-phase bilayer slices), ``gamma`` the scale ratio, ``lambda`` every
    phase's lambda, ``mu1``/``mu2`` the shear modulus of phase 1/2.
    """
    out = copy.deepcopy(cfg)
    if name == "gamma":
        out["gamma"] = "inf" if math.isinf(value) else float(value)
        return out
    if name not in ("theta", "lambda", "mu1", "mu2"):
        raise ModelError(f"sweep: unknown parameter {name!r} (theta, gamma, lambda, mu1, mu2)")
    for i, sl in enumerate(out.get("slice", [])):
        phases = sl.get("phases")
        pre = sl.setdefault("prestrain", {})
        if name == "theta":
            if pre.get("kind", "none") == "none":
                raise ModelError(f"sweep: slice {i} has no prestrain parameter theta")
            pre["theta"] = float(value)
            if pre.get("kind") == "bilayer" and phases and len(phases) == 2:
                phases[0][0], phases[1][0] = float(value), 1.0 - float(value)
        elif phases is None:
            raise ModelError(f"sweep: slice {i} has no isotropic phases")
        elif name == "lambda":
            for row in phases:
                row[1] = float(value)
        else:
            j = 0 if name == "mu1" else 1
            if j >= len(phases):
                raise ModelError(f"sweep: slice {i} has no phase {j + 1}")
            phases[j][2] = float(value)
    return out


# ----------------------------------------------------------------------------
# serialization


def fmt(x) -> str:
    """17 significant digits; non-finite values as inf/-inf/nan."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def to_json(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written at 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        s = fmt(obj)
        return s if s not in ("nan", "inf", "-inf") else f'"{s}"'
    if isinstance(obj, str):
        return _json_str(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json_str(str(k))}: {to_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in seq):
            return "[" + ", ".join(to_json(v) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent, _level + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _json_str(s: str) -> str:
    import json

    return json.dumps(s)


def write_csv(rows, header, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_csv(path_or_text) -> tuple[list, list]:
    """Header and rows; numeric cells become floats."""
    text = path_or_text
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        text = Path(path_or_text).read_text()
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = []
    for raw in reader:
        row = []
        for cell in raw:
            try:
                row.append(float(cell))
            except ValueError:
                row.append(cell)
        rows.append(row)
    return header, rows
