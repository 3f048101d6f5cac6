"""File formats: configuration CSV, JSON reports and two-column plot data."""
from __future__ import annotations

import json
import math
import re
from pathlib import Path

import numpy as np

from .energy import ParticleConfiguration

__all__ = [
    "MalformedFile",
    "write_configuration",
    "read_configuration",
    "format_configuration",
    "write_json",
    "read_json",
    "write_columns",
    "read_columns",
    "report_schema",
]

_HEADER = re.compile(r"^#\s*dim=(\d+)\s+n=(\d+)\s*$")


class MalformedFile(ValueError):
    pass


def _g17(x: float) -> str:
    return "%.17g" % x


def format_configuration(config: ParticleConfiguration) -> str:
    lines = [f"# dim={config.dim} n={config.n}"]
    if config.seed is not None or config.recipe:
        lines.append(f"# seed={config.seed} recipe={config.recipe}")
    for x, m in zip(config.positions, config.masses):
        lines.append(",".join([_g17(v) for v in x] + [_g17(m)]))
    return "\n".join(lines) + "\n"


def write_configuration(config: ParticleConfiguration, path) -> Path:
    """Write ``# dim=N n=n`` then one ``x[,y[,z]],mass`` row per particle."""
    path = Path(path)
    path.write_text(format_configuration(config))
    return path


def read_configuration(path) -> ParticleConfiguration:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise MalformedFile(f"{path}: empty file")
    mt = _HEADER.match(lines[0])
    if not mt:
        raise MalformedFile(f"{path}:1: expected '# dim=<N> n=<n>' header")
    dim, n = int(mt.group(1)), int(mt.group(2))
    seed, recipe = None, ""
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            prov = re.match(r"^#\s*seed=(\S+)\s+recipe=(.*)$", s)
            if prov:
                seed = None if prov.group(1) == "None" else int(prov.group(1))
                recipe = prov.group(2)
            continue
        parts = s.split(",")
        if len(parts) != dim + 1:
            raise MalformedFile(f"{path}:{lineno}: expected {dim + 1} fields, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise MalformedFile(f"{path}:{lineno}: {exc}") from None
    if len(rows) != n:
        raise MalformedFile(f"{path}: header says n={n} but found {len(rows)} rows")
    arr = np.array(rows, dtype=np.float64).reshape(n, dim + 1)
    try:
        return ParticleConfiguration(arr[:, :dim], arr[:, dim], seed=seed, recipe=recipe)
    except ValueError as exc:
        raise MalformedFile(f"{path}: {exc}") from None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if hasattr(obj, "value") and not isinstance(obj, (str, int)):
        return obj.value
    return obj


def write_json(obj, path) -> Path:
    # json writes floats with repr(), which round-trips doubles exactly
    path = Path(path)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def write_columns(path, columns, header: str | None = None) -> Path:
    """Whitespace-separated plot data, one row per sample."""
    path = Path(path)
    cols = [np.asarray(c) for c in columns]
    lines = [f"# {header}"] if header else []
    for row in zip(*cols):
        lines.append(" ".join(_g17(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_columns(path) -> np.ndarray:
    return np.loadtxt(path, comments="#", ndmin=2)


def report_schema() -> dict:
    """JSON schema that every ``report.json`` validates against."""
    from importlib.resources import files
    return json.loads(files("swarmdim").joinpath("schemas/report.schema.json").read_text())
