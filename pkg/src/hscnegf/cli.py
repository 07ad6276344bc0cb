"""Batch front-end: ``hscnegf solve|bench|partition --config cfg.json --out dir``.

Exit status is 0 on success, 2 for configuration errors and 3 for
numerical failures. Every output file is a deterministic function of the
config and seed (bench wall-clock timing is off unless requested).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path

import jsonschema
import numpy as np

from .device import (Device, GrapheneSpec, SuperlatticeSpec, SyntheticSpec,
                     build_graphene_hamiltonian, build_superlattice_hamiltonian,
                     build_synthetic_device)
from .errors import ConfigError, HscNegfError, NumericalError
from .observables import EnergyGrid, electron_density, ldos, line_density_y
from .partition import DEFAULT_MAX_LEAF, rgf_chain_partition, validate_partition
from .simulate import SOLVERS, Conditions, bench_point, device_tree, solve_energy

#: environment variable overriding the worker count
THREADS_ENV = "HSCNEGF_THREADS"
#: default dense-storage cap for ``bench`` (MiB)
DEFAULT_MEMORY_CAP_MB = 4096.0

_NUM = {"type": "number"}
_INT = {"type": "integer", "minimum": 1}
_POS = {"type": "number", "exclusiveMinimum": 0}

_DEVICE_SCHEMAS = {
    "superlattice": {
        "Nx": _INT, "Ny": _INT, "dx": _POS, "dy": _POS, "n_barriers": {"type": "integer", "minimum": 0},
        "barrier_width": _POS, "well_width": _POS, "barrier_height": _NUM,
        "left_flat": _POS, "right_flat": _POS, "effective_mass": _POS,
        "fermi_energy": _NUM, "temperature": _POS,
    },
    "graphene": {
        "Nx": _INT, "Ny": _INT, "onsite": _NUM, "hopping": _NUM, "fermi_energy": _NUM,
        "temperature": _POS, "bond_length": _POS,
    },
    "synthetic-random": {
        "Nx": _INT, "Ny": _INT, "coupling": _NUM, "fermi_energy": _NUM, "temperature": _POS,
        "broadening": {"type": "array", "items": {"type": "number", "minimum": 0},
                       "minItems": 2, "maxItems": 2},
    },
}


def _device_schema(kind: str) -> dict:
    props = {"kind": {"const": kind}, **_DEVICE_SCHEMAS[kind]}
    return {"type": "object", "properties": props, "required": ["kind"],
            "additionalProperties": False}


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["device"],
    "properties": {
        "device": {"oneOf": [_device_schema(k) for k in _DEVICE_SCHEMAS]},
        "solver": {"enum": list(SOLVERS)},
        "contact_model": {"enum": ["diagonal", "dense-lead", "fixed"]},
        "eta": {"type": "number", "minimum": 0},
        "eta_phonon": {"type": "number", "minimum": 0},
        "bias": _NUM,
        "energy_grid": {
            "oneOf": [
                {"type": "object", "additionalProperties": False,
                 "required": ["start", "stop", "count"],
                 "properties": {"start": _NUM, "stop": _NUM, "count": _INT}},
                {"type": "object", "additionalProperties": False, "required": ["points"],
                 "properties": {"points": {"type": "array", "items": _NUM, "minItems": 1}}},
            ]
        },
        "partition": {
            "type": "object", "additionalProperties": False,
            "properties": {"max_leaf": _INT,
                           "mode": {"enum": ["nested-dissection", "rgf-chain"]}},
        },
        "bench": {
            "type": "object", "additionalProperties": False, "required": ["sizes"],
            "properties": {
                "solvers": {"type": "array", "items": {"enum": ["rgf", "hsc", "dense"]},
                            "minItems": 1},
                "sizes": {"type": "array", "minItems": 1,
                          "items": {"type": "array", "items": _INT, "minItems": 2, "maxItems": 2}},
                "timing": {"enum": ["wall", "off"]},
                "memory_cap_mb": _POS,
                "energy": _NUM,
            },
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}


# ---------------------------------------------------------------------------
# config loading

def _line_of(text: str, path) -> int | None:
    """Best-effort source line of a JSON path (keys are searched in order)."""
    pos = 0
    found = None
    for part in path:
        if not isinstance(part, str):
            continue
        k = text.find(json.dumps(part), pos)
        if k < 0:
            break
        pos = k
        found = text.count("\n", 0, k) + 1
    return found


def load_config(path) -> dict:
    """Read and validate a JSON config.

    Raises
    ------
    ConfigError
        With the offending line number where one can be located.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        where = list(err.absolute_path)
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            where = where + extra[:1]
        if err.validator == "oneOf" and where == ["device"]:
            kind = cfg["device"].get("kind") if isinstance(cfg["device"], dict) else None
            if kind in _DEVICE_SCHEMAS:
                sub = list(jsonschema.Draft202012Validator(_device_schema(kind))
                           .iter_errors(cfg["device"]))
                if sub:
                    err = jsonschema.exceptions.best_match(sub)
                    where = ["device"] + list(err.absolute_path)
                    if err.validator == "additionalProperties":
                        extra = sorted(set(err.instance) - set(err.schema["properties"]))
                        where += extra[:1]
            else:
                err.message = f"unknown device kind {kind!r}"
                where = ["device", "kind"]
        loc = "/".join(map(str, where)) or "<root>"
        raise ConfigError(f"{loc}: {err.message}", line=_line_of(text, where))
    return cfg


def _spec_from(cls, data: dict, **override):
    names = {f.name for f in fields(cls)}
    kw = {k: v for k, v in data.items() if k in names}
    kw.update({k: v for k, v in override.items() if k in names})
    return cls(**kw)


def build_device(cfg: dict, seed: int = 0) -> tuple[Device, object]:
    """Device and its spec object from the ``device`` section."""
    d = dict(cfg["device"])
    kind = d.pop("kind")
    if kind == "superlattice":
        spec = _spec_from(SuperlatticeSpec, d)
        return build_superlattice_hamiltonian(spec), spec
    if kind == "graphene":
        spec = _spec_from(GrapheneSpec, d)
        return build_graphene_hamiltonian(spec), spec
    if "broadening" in d:
        d["broadening"] = tuple(d["broadening"])
    spec = _spec_from(SyntheticSpec, d, seed=seed)
    return build_synthetic_device(spec), spec


def energy_grid(cfg: dict, spec) -> EnergyGrid:
    g = cfg.get("energy_grid")
    try:
        if g is None:
            return EnergyGrid(spec.energies)
        if "points" in g:
            return EnergyGrid(g["points"])
        return EnergyGrid.uniform(g["start"], g["stop"], g["count"])
    except ValueError as exc:
        raise ConfigError(f"energy_grid: {exc}") from None


def conditions(cfg: dict, device: Device, spec) -> Conditions:
    default_model = "fixed" if device.extra.get("kind") == "synthetic-random" else "dense-lead"
    model = cfg.get("contact_model", default_model)
    if model == "fixed" and "sigma_left" not in device.extra:
        raise ConfigError("contact_model 'fixed' is only available for synthetic-random devices")
    if model == "dense-lead" and device.lead_left is None:
        raise ConfigError("device has no lead cells; use contact_model 'diagonal'")
    bias = float(cfg.get("bias", 0.0))
    return Conditions(contact_model=model, eta=float(cfg.get("eta", 1e-6)),
                      eta_phonon=float(cfg.get("eta_phonon", 0.0)),
                      mu_left=spec.fermi_energy, mu_right=spec.fermi_energy - bias,
                      temperature=spec.temperature)


def _tree(cfg: dict, device: Device):
    part = cfg.get("partition", {})
    if part.get("mode", "nested-dissection") == "rgf-chain":
        return rgf_chain_partition(device.layers)
    return device_tree(device, part.get("max_leaf", DEFAULT_MAX_LEAF))


def resolve_threads(flag: int | None) -> int:
    """Worker count: ``HSCNEGF_THREADS`` overrides the flag; default 1."""
    env = os.environ.get(THREADS_ENV)
    if env is not None and env.strip():
        try:
            k = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    else:
        k = 1 if flag is None else flag
    if k < 1:
        raise ConfigError("thread count must be at least 1")
    return k


# ---------------------------------------------------------------------------
# output

def _fmt(x: float) -> str:
    return repr(float(x)) if not math.isfinite(x) else format(float(x), ".17g")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# ---------------------------------------------------------------------------
# commands

def cmd_solve(cfg: dict, out: Path, threads: int = 1, seed: int = 0) -> dict:
    """Solve over the energy grid; write density, LDOS and line density CSVs."""
    device, spec = build_device(cfg, seed)
    grid = energy_grid(cfg, spec)
    cond = conditions(cfg, device, spec)
    solver = cfg.get("solver", "hsc")
    tree = _tree(cfg, device) if solver == "hsc" else None

    def one(e):
        try:
            return solve_energy(device, float(e), solver, cond, tree=tree)
        except NumericalError as exc:
            raise type(exc)(f"at E = {float(e):.17g} eV: {exc}") from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, grid.energies))
    else:
        results = [one(e) for e in grid.energies]

    dmap = electron_density([r.gless_diag for r in results], grid, device.shape)
    nx, ny = device.shape
    out.mkdir(parents=True, exist_ok=True)
    dens = dmap.grid()
    _write_csv(out / "density.csv", ["x_index", "y_index", "density"],
               ((x, y, _fmt(dens[x, y])) for y in range(ny) for x in range(nx)))

    def ldos_rows():
        for r in results:
            d = ldos(r.gr_diag)
            ef = _fmt(r.energy)
            for y in range(ny):
                for x in range(nx):
                    yield x, y, ef, _fmt(d[x + nx * y])

    _write_csv(out / "ldos.csv", ["x_index", "y_index", "energy_eV", "ldos"], ldos_rows())
    line = line_density_y(dmap)
    _write_csv(out / "line_density.csv", ["y_index", "density"],
               ((y, _fmt(v)) for y, v in enumerate(line)))
    return {"density": dmap, "results": results, "line": line}


def _storage_estimate_mb(solver: str, nx: int, ny: int, max_leaf: int) -> float:
    """Rough dense-block storage of one solve (complex entries, MiB)."""
    n = nx * ny
    if solver == "dense":
        entries = 3 * n * n
    elif solver == "rgf":
        entries = 6 * ny * nx * nx
    else:
        # every cluster keeps G, N and P blocks against its ancestors, whose
        # widths sum to a few separator lengths
        side = max(nx, ny)
        entries = 3 * n * 4 * side + 3 * n * max_leaf
    return entries * 16 / 2 ** 20


def cmd_bench(cfg: dict, out: Path, threads: int = 1, seed: int = 0) -> list:
    """Ledger counts per (solver, size) on synthetic five-point devices."""
    b = cfg.get("bench")
    if not b:
        raise ConfigError("bench command needs a 'bench' section with a size sweep")
    solvers = b.get("solvers", ["rgf", "hsc"])
    timing = b.get("timing", "off")
    cap = float(b.get("memory_cap_mb", DEFAULT_MEMORY_CAP_MB))
    energy = float(b.get("energy", 0.0))
    max_leaf = cfg.get("partition", {}).get("max_leaf", DEFAULT_MAX_LEAF)
    jobs = [(s, nx, ny) for nx, ny in b["sizes"] for s in solvers]

    def one(job):
        s, nx, ny = job
        if _storage_estimate_mb(s, nx, ny, max_leaf) > cap:
            return (s, nx, ny, None)
        return (s, nx, ny, bench_point(s, nx, ny, seed=seed, max_leaf=max_leaf, energy=energy))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            done = list(pool.map(one, jobs))
    else:
        done = [one(j) for j in jobs]
    rows = []
    for s, nx, ny, r in done:
        if r is None:
            rows.append([s, nx, ny, "skipped", "skipped", "skipped"])
        else:
            wall = _fmt(r.wall_seconds) if timing == "wall" else "nan"
            rows.append([s, nx, ny, r.multiply_ops, r.inverse_ops, wall])
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "bench.csv",
               ["solver", "Nx", "Ny", "multiply_ops", "inverse_ops", "wall_seconds"], rows)
    return [r for *_, r in done]


def cmd_partition(cfg: dict, out: Path, threads: int = 1, seed: int = 0):
    """Write the separator tree and its validation report."""
    device, _ = build_device(cfg, seed)
    tree = _tree(cfg, device)
    report = validate_partition(tree, device.adjacency)
    out.mkdir(parents=True, exist_ok=True)
    (out / "tree.json").write_text(tree.to_json() + "\n", encoding="ascii")
    (out / "validation.txt").write_text(report.to_text(), encoding="ascii")
    return tree, report


COMMANDS = {"solve": cmd_solve, "bench": cmd_bench, "partition": cmd_partition}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hscnegf",
                                description="NEGF Green's function diagonals with RGF and HSC solvers.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=None,
                   help=f"energy-point workers (env {THREADS_ENV} overrides)")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        if seed < 0:
            raise ConfigError("seed must be non-negative")
        threads = resolve_threads(args.threads)
        COMMANDS[args.command](cfg, Path(args.out), threads=threads, seed=seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except HscNegfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    print(f"{args.command}: wrote {args.out} in {time.perf_counter() - t0:.2f} s", file=sys.stderr)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
