"""Command-line interface.

Usage::

    swarmdim minimize run.ini [--potential.alpha=2.5 ...]
    swarmdim diagnose diag.ini
    swarmdim sweep sweep.ini [--threads 4]
    swarmdim potential-table table.ini

Configuration files are INI style, ``key = value`` under ``[section]``
headers. Any key can be overridden on the command line as
``--section.key=value``. Output goes to ``[output] directory``, resolved
against ``$SWARMDIM_OUTPUT_ROOT`` when relative.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import math
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import classify_dimension, euler_lagrange_check
from .energy import SingularPair
from .io import (MalformedFile, read_configuration, write_configuration, write_json,
                 write_columns)
from .minimize import (MinimizerSettings, NumericalFailure, Termination, init_configuration,
                       minimize)
from .potentials import (InvalidPotential, PotentialSpec, classify_repulsion, eval_laplacian,
                         eval_w, eval_w_prime, validate)
from .sweep import emit_diagram, run_sweep

logger = logging.getLogger("swarmdim")

OUTPUT_ROOT_ENV = "SWARMDIM_OUTPUT_ROOT"
COMMANDS = ("minimize", "diagnose", "sweep", "potential-table")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class ConfigError(ValueError):
    """Bad configuration; the message names the offending line when known."""


# key -> converter, per section
_INT, _FLOAT, _STR = "int", "float", "str"
SCHEMA = {
    "potential": {"potential": _STR, "alpha": _FLOAT, "gamma": _FLOAT, "coeff_a": _FLOAT,
                  "coeff_g": _FLOAT, "p": _FLOAT, "a": _FLOAT, "b": _FLOAT},
    "particles": {"n": _INT, "dim": _INT, "radius": _FLOAT, "seed": _INT, "masses": _STR},
    "solver": {"scheme": _STR, "dt_init": _FLOAT, "grow": _FLOAT, "shrink": _FLOAT,
               "dt_min": _FLOAT, "max_iters": _INT, "grad_tol": _FLOAT, "energy_tol": _FLOAT},
    "output": {"directory": _STR, "snapshot_every": _INT, "formats": _STR},
    "diagnostics": {"off_samples": _INT, "off_seed": _INT, "tol": _FLOAT, "bins": _INT},
    "input": {"path": _STR},
    "sweep": {"gammas": _STR, "alphas": _STR, "seeds": _STR, "n": _INT, "dim": _INT,
              "run_timeout": _FLOAT},
    "table": {"r_min": _FLOAT, "r_max": _FLOAT, "points": _INT, "dim": _INT},
}
REQUIRED = {
    "minimize": ("potential", "particles"),
    "diagnose": ("input",),
    "sweep": ("sweep",),
    "potential-table": ("potential",),
}
FORMATS = ("csv", "json", "dat")


@dataclass
class RunConfig:
    command: str
    sections: dict = field(default_factory=dict)  # section -> {key: typed value}
    lines: dict = field(default_factory=dict)  # (section, key) -> line number

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def has(self, section: str) -> bool:
        return section in self.sections

    def _where(self, section, key):
        ln = self.lines.get((section, key))
        return f"line {ln}: " if ln else ""

    def potential_spec(self) -> PotentialSpec:
        s = self.sections.get("potential", {})
        variant = s.get("potential", "powerlaw")
        try:
            if variant == "powerlaw":
                return PotentialSpec.powerlaw(s["alpha"], s["gamma"], s.get("coeff_a", 1.0),
                                              s.get("coeff_g", 1.0))
            if variant == "cosine":
                return PotentialSpec.cosine(s["alpha"], s["gamma"], s["p"])
            if variant == "tanh":
                return PotentialSpec.tanh(s.get("a", 5.0), s.get("b", 0.5))
        except KeyError as exc:
            raise ConfigError(f"[potential] {variant} needs key {exc.args[0]!r}") from None
        raise ConfigError(f"{self._where('potential', 'potential')}unknown potential "
                          f"{variant!r} (expected powerlaw, cosine or tanh)")

    def settings(self) -> MinimizerSettings:
        s = dict(self.sections.get("solver", {}))
        try:
            return MinimizerSettings(**s)
        except ValueError as exc:
            raise ConfigError(f"[solver] {exc}") from None

    def masses(self, n: int):
        raw = self.get("particles", "masses", "equal")
        if raw.strip() == "equal":
            return None
        try:
            m = np.array([float(v) for v in raw.split(",")])
        except ValueError:
            raise ConfigError(f"{self._where('particles', 'masses')}masses must be 'equal' "
                              "or a comma-separated list") from None
        if m.size != n:
            raise ConfigError(f"{self._where('particles', 'masses')}expected {n} masses, "
                              f"got {m.size}")
        return m

    def output_dir(self) -> Path:
        d = Path(self.get("output", "directory", self.command))
        if not d.is_absolute():
            d = Path(os.environ.get(OUTPUT_ROOT_ENV, ".")) / d
        return d

    def formats(self) -> set:
        raw = self.get("output", "formats", ",".join(FORMATS))
        fm = {f.strip() for f in raw.split(",") if f.strip()}
        bad = fm - set(FORMATS)
        if bad:
            raise ConfigError(f"{self._where('output', 'formats')}unknown formats {sorted(bad)}")
        return fm


def parse_range(text: str) -> list[float]:
    """``start:stop:step`` (stop included when hit) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = map(float, parts)
        if step <= 0 or stop < start:
            raise ValueError(f"empty or backwards range {text!r}")
        k = int(math.floor((stop - start) / step + 1e-9))
        # round away the accumulated step error so 0.1 steps print as 0.1
        return [float(round(start + i * step, 12)) for i in range(k + 1)]
    return [float(v) for v in text.split(",") if v.strip()]


def _line_index(text: str) -> dict:
    idx, section = {}, None
    for ln, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        mt = re.match(r"^\[([^\]]+)\]$", s)
        if mt:
            section = mt.group(1).strip()
        elif section and s and s[0] not in "#;":
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
            idx.setdefault((section, key), ln)
    return idx


def _convert(kind, value):
    if kind == _INT:
        f = float(value)
        if not f.is_integer():
            raise ValueError(f"expected an integer, got {value!r}")
        return int(f)
    if kind == _FLOAT:
        return float(value)
    return value


def parse_config(text: str, command: str = "minimize", overrides=None) -> RunConfig:
    """Parse INI text into a :class:`RunConfig`.

    ``overrides`` maps ``"section.key"`` to raw string values and replaces
    (or adds) the file's entries. Unknown sections or keys, duplicate keys,
    unparsable numbers and missing sections for ``command`` raise
    :class:`ConfigError` naming the line.
    """
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    cp = configparser.ConfigParser(strict=True, interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",))
    try:
        cp.read_string(text, source="<config>")
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"line {exc.lineno}: duplicate key {exc.option!r} in [{exc.section}]") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"line {exc.lineno}: duplicate section [{exc.section}]") from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: key outside any [section]") from None
    except configparser.ParsingError as exc:
        ln = exc.errors[0][0] if exc.errors else "?"
        raise ConfigError(f"line {ln}: syntax error, expected 'key = value'") from None
    lines = _line_index(text)
    raw = {sec: dict(cp.items(sec)) for sec in cp.sections()}
    for dotted, value in (overrides or {}).items():
        if "." not in dotted:
            raise ConfigError(f"override --{dotted} must look like --section.key=value")
        sec, key = dotted.split(".", 1)
        raw.setdefault(sec, {})[key.lower()] = value
        lines.pop((sec, key.lower()), None)

    sections = {}
    for sec, items in raw.items():
        if sec not in SCHEMA:
            ln = next((v for (s, _), v in lines.items() if s == sec), None)
            where = f"line {ln}: " if ln else ""
            raise ConfigError(f"{where}unknown section [{sec}]")
        typed = {}
        for key, value in items.items():
            ln = lines.get((sec, key))
            where = f"line {ln}: " if ln else f"--{sec}.{key}: "
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{where}unknown key {key!r} in [{sec}]")
            try:
                typed[key] = _convert(SCHEMA[sec][key], value.strip())
            except ValueError as exc:
                raise ConfigError(f"{where}bad value for {key!r}: {exc}") from None
        sections[sec] = typed
    for sec in REQUIRED[command]:
        if sec not in sections:
            raise ConfigError(f"command {command!r} needs a [{sec}] section")
    if command == "sweep" and not {"gammas", "alphas"} <= set(sections["sweep"]):
        raise ConfigError("[sweep] needs 'gammas' and 'alphas'")
    if command == "minimize" and "n" not in sections["particles"]:
        raise ConfigError("[particles] needs 'n'")
    return RunConfig(command, sections, lines)


# ---------------------------------------------------------------- commands


def _check_spec(spec, dim):
    problems = validate(spec, dim)
    if problems:
        raise InvalidPotential("; ".join(problems))


def _diagnostics_kwargs(cfg: RunConfig) -> dict:
    d = cfg.sections.get("diagnostics", {})
    kw = {"n_off_samples": d.get("off_samples", 2000), "seed": d.get("off_seed", 0)}
    if "tol" in d:
        kw["tol"] = d["tol"]
    return kw


def _write_hist(path, dim_report):
    h = np.asarray(dim_report.radial_histogram)
    write_columns(path, [h[:, 0], h[:, 1]], header="bin_center count")


def cmd_minimize(cfg: RunConfig) -> int:
    spec = cfg.potential_spec()
    p = cfg.sections["particles"]
    n, dim = p["n"], p.get("dim", 2)
    _check_spec(spec, dim)
    settings = cfg.settings()
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    every = cfg.get("output", "snapshot_every", 0)
    if every:
        settings.snapshot_every = every
        settings.snapshot_dir = str(out / "snapshots")
    fm = cfg.formats()
    config = init_configuration(n, dim, p.get("radius", 1.0), p.get("seed", 0), cfg.masses(n))
    final, report = minimize(config, spec, settings)
    logger.info("wall time %.3f s", report.wall_seconds)
    bins = cfg.get("diagnostics", "bins", 40)
    dim_report = classify_dimension(final, spec, bins)
    el = euler_lagrange_check(final, spec, **_diagnostics_kwargs(cfg))
    run = report.to_dict()
    run.pop("wall_seconds")  # keeps reruns byte-identical
    run.pop("energy_trace")
    doc = {
        "command": "minimize",
        "potential": spec.to_dict(),
        "repulsion": classify_repulsion(spec, dim).to_dict(),
        "particles": {"n": n, "dim": dim, "radius": p.get("radius", 1.0),
                      "seed": p.get("seed", 0), "recipe": config.recipe},
        "settings": _settings_dict(settings),
        "run": run,
        "dimension": dim_report.to_dict(),
        "euler_lagrange": el.to_dict(),
    }
    if "csv" in fm:
        write_configuration(final, out / "final.csv")
    if "json" in fm:
        write_json(doc, out / "report.json")
    if "dat" in fm:
        tr = np.asarray(report.energy_trace, dtype=float).reshape(-1, 2)
        write_columns(out / "energy_trace.dat", [tr[:, 0], tr[:, 1]], header="iteration energy")
        _write_hist(out / "radial_hist.dat", dim_report)
    print(f"{report.termination.value}: {report.iterations} iterations, E={report.final_energy:.12g}, "
          f"classified_dim={dim_report.classified_dim} -> {out}")
    if report.termination is Termination.STEP_UNDERFLOW:
        print("numerical failure: step size underflow", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _settings_dict(s: MinimizerSettings) -> dict:
    return {"scheme": s.scheme.value, "dt_init": s.dt_init, "grow": s.grow, "shrink": s.shrink,
            "dt_min": s.dt_min, "max_iters": s.max_iters, "grad_tol": s.grad_tol,
            "energy_tol": s.energy_tol}


def cmd_diagnose(cfg: RunConfig) -> int:
    path = Path(cfg.get("input", "path"))
    config = read_configuration(path)
    spec = cfg.potential_spec() if cfg.has("potential") else None
    if spec is not None:
        _check_spec(spec, config.dim)
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    dim_report = classify_dimension(config, spec, cfg.get("diagnostics", "bins", 40))
    doc = {"command": "diagnose", "input": str(path), "dimension": dim_report.to_dict()}
    if spec is not None:
        doc["potential"] = spec.to_dict()
        doc["repulsion"] = classify_repulsion(spec, config.dim).to_dict()
        doc["euler_lagrange"] = euler_lagrange_check(config, spec, **_diagnostics_kwargs(cfg)).to_dict()
    write_json(doc, out / "report.json")
    _write_hist(out / "radial_hist.dat", dim_report)
    if dim_report.refused:
        print(dim_report.note)
    else:
        print(f"classified_dim={dim_report.classified_dim} corr_dim={dim_report.corr_dim:.3f} "
              f"clusters={dim_report.cluster_count} -> {out}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, workers: int = 1) -> int:
    s = cfg.sections["sweep"]
    try:
        gammas = parse_range(s["gammas"])
        alphas = parse_range(s["alphas"])
        seeds = [int(v) for v in parse_range(s.get("seeds", "0,1,2"))]
    except ValueError as exc:
        raise ConfigError(f"[sweep] {exc}") from None
    dim = s.get("dim", 2)
    n = s.get("n", 600 if dim == 2 else 400)
    template = None
    if cfg.has("potential"):
        pot = dict(cfg.sections["potential"])
        pot.setdefault("alpha", 0.5)
        pot.setdefault("gamma", 5.0)
        template = RunConfig("sweep", {"potential": pot}).potential_spec()
    settings = cfg.settings()
    out = cfg.output_dir()

    def progress(cell):
        print(f"gamma={cell.gamma:g} alpha={cell.alpha:g}: dim {cell.majority_dim} "
              f"(agreement {cell.agreement:.2f}){' ANOMALOUS' if cell.anomalous else ''}", flush=True)

    diagram = run_sweep(gammas, alphas, dim, n, seeds, settings, template,
                        cfg.get("particles", "radius", 1.0), workers,
                        s.get("run_timeout"), progress)
    emit_diagram(diagram, out)
    print(f"{sum(c.valid for c in diagram.cells)} valid cells -> {out}")
    return EXIT_OK


def cmd_potential_table(cfg: RunConfig) -> int:
    spec = cfg.potential_spec()
    t = cfg.sections.get("table", {})
    dim = t.get("dim", cfg.get("particles", "dim", 2))
    _check_spec(spec, dim)
    r = np.linspace(t.get("r_min", 0.05), t.get("r_max", 3.0), t.get("points", 60))
    if r[0] <= 0:
        raise ConfigError("[table] r_min must be positive")
    w = eval_w(spec, r)
    wp = eval_w_prime(spec, r)
    e1 = np.zeros(dim)
    e1[0] = 1.0
    lap = np.array([eval_laplacian(spec, ri * e1) for ri in r])
    rc = classify_repulsion(spec, dim)
    print(f"# {spec.variant} {spec.to_dict()} N={dim}")
    print(f"# {rc.describe()}")
    if rc.note:
        print(f"# {rc.note}")
    print(f"{'r':>12} {'w':>16} {'w_prime':>16} {'laplacian':>16}")
    for row in zip(r, w, wp, lap):
        print(" ".join(f"{v:16.8g}" for v in row))
    out = cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    write_columns(out / "w.dat", [r, w], header="r w")
    write_columns(out / "w_prime.dat", [r, wp], header="r w_prime")
    write_columns(out / "laplacian.dat", [r, lap], header="r laplacian")
    write_json({"command": "potential-table", "potential": spec.to_dict(),
                "ambient_dim": dim, "repulsion": rc.to_dict(),
                "description": rc.describe()}, out / "repulsion.json")
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def _split_overrides(extra):
    over, rest = {}, list(extra)
    i = 0
    while i < len(rest):
        tok = rest[i]
        if not tok.startswith("--") or "." not in tok.split("=", 1)[0]:
            raise ConfigError(f"unrecognised argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            if i + 1 >= len(rest):
                raise ConfigError(f"override {tok} needs a value")
            i += 1
            value = rest[i]
        over[key] = value
        i += 1
    return over


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="swarmdim",
                                 description="Local minimizers of pairwise interaction energies "
                                             "and the dimension of their support.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", help="INI configuration file")
    ap.add_argument("--threads", type=int, default=1,
                    help="worker processes for sweeps (default 1)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args, extra = ap.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = _split_overrides(extra)
        text = Path(args.config).read_text()
        cfg = parse_config(text, args.command, overrides)
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.command == "minimize":
            return cmd_minimize(cfg)
        if args.command == "diagnose":
            return cmd_diagnose(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.threads)
        return cmd_potential_table(cfg)
    except (ConfigError, InvalidPotential, MalformedFile) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularPair, NumericalFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
