"""Command-line front end: ``mmjc <spectrum|dynamics|phase-diagram|validate>``.

A run is described by one flat JSON document. Model keys are shared by all
commands (``n_modes``, ``g``, ``omega_modes``, and one of ``delta`` or
``omega_atom``); scalar ``g``/``omega_modes`` are broadcast to every mode.
An optional ``runs`` list holds override dicts (each with a ``name``) for
producing several outputs from one config, e.g. the 3- and 4-mode panels.
A ``recipe`` key (or ``--recipe``) starts from a built-in figure recipe;
file values override it and command-line flags override both.

Every run writes its CSV files plus ``<command>.json``, a provenance
sidecar holding the resolved config, the package version and the list of
values that are defaults rather than figure-stated choices.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import sys
import warnings
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from mmjc import __version__
from mmjc import dynamics as dyn
from mmjc import meanfield as mf
from mmjc import validation
from mmjc.core import ManifoldIndex, ModelParams, ParameterError
from mmjc.spectrum import eigenspectrum_sweep

log = logging.getLogger("mmjc")

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4
COMMANDS = ("spectrum", "dynamics", "phase-diagram", "validate")


class ConfigError(ValueError):
    pass


RECIPES: dict[str, dict[str, Any]] = {
    "fig1": {
        "command": "spectrum",
        "n_modes": 3, "g": 1.0, "omega_modes": 10.0, "delta": 0.0,
        "manifolds": [[5, 0, 0], [10, 0, 0], [15, 0, 0]],
        "delta_over_g_min": -10.0, "delta_over_g_max": 10.0, "delta_over_g_points": 401,
    },
    "fig2": {
        "command": "dynamics",
        "n_modes": 3, "g": 1.0, "omega_modes": 10.0, "delta": 0.0, "nbar": 20.0,
        "gt_min": 0.0, "gt_max": 50.0, "gt_points": 20001, "sampler": "exact",
        "runs": [
            {"name": "n3_ground", "n_modes": 3, "atom_init": "ground"},
            {"name": "n4_ground", "n_modes": 4, "atom_init": "ground"},
            {"name": "n3_excited", "n_modes": 3, "atom_init": "excited"},
            {"name": "n4_excited", "n_modes": 4, "atom_init": "excited"},
        ],
    },
    "fig3": {
        "command": "phase-diagram",
        "n_modes": 3, "g": 1.0, "omega_modes": 10.0, "delta": 0.0,
        "z": 3, "kappa": 1.0 / 900.0, "hopping_mode": 0,
        "delta_bar_min": -1500.0, "delta_bar_max": 1500.0, "delta_bar_points": 200,
        "mu_bar_min": 2600.0, "mu_bar_max": 2950.0, "mu_bar_points": 200,
        "fillings": [0, 1, 2, 3],
        "runs": [{"name": "n3", "n_modes": 3}, {"name": "n4", "n_modes": 4}],
    },
}

# Values the figures do not state; echoed in the sidecar as defaults.
RECIPE_DEFAULTS = {
    "fig1": ["g", "omega_modes", "manifolds[spectators]", "delta_over_g_points"],
    "fig2": ["g", "omega_modes", "delta", "gt_max", "gt_points", "atom_init"],
    "fig3": ["g", "omega_modes", "kappa", "hopping_mode", "spectator_occupations",
             "delta_bar_range", "mu_bar_range", "fillings"],
}

DEFAULTS: dict[str, Any] = {
    "atom_init": "ground", "sampler": "auto", "samples": 10**6,
    "cutoff_sigmas": 6.0, "tail_mass_bound": 1e-10,
    "z": 3, "hopping_mode": 0, "spectator_occupations": None, "fillings": [0, 1, 2, 3],
    "max_filling": 64, "tolerance_scale": 1.0, "quick": False,
}


def fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------- config


def load_config(path: str | None, recipe: str | None) -> dict[str, Any]:
    cfg: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(cfg, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
    recipe = recipe or cfg.get("recipe")
    if recipe is None:
        return cfg
    if recipe not in RECIPES:
        raise ConfigError(f"unknown recipe {recipe!r}; choose from {sorted(RECIPES)}")
    merged = copy.deepcopy(RECIPES[recipe])
    merged.update(cfg)
    merged["recipe"] = recipe
    return merged


def _need(cfg, key):
    if key not in cfg:
        raise ConfigError(f"missing config key {key!r}")
    return cfg[key]


def _per_mode(value, n: int, key: str) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),) * n
    if isinstance(value, list) and len(value) == n:
        return tuple(float(v) for v in value)
    raise ConfigError(f"{key!r} must be a number or a list of {n} numbers")


def model_from(cfg) -> ModelParams:
    n = _need(cfg, "n_modes")
    if not isinstance(n, int) or isinstance(n, bool):
        raise ConfigError("'n_modes' must be an integer")
    g = _per_mode(_need(cfg, "g"), n, "g")
    om = _per_mode(_need(cfg, "omega_modes"), n, "omega_modes")
    if ("delta" in cfg) == ("omega_atom" in cfg):
        raise ConfigError("give exactly one of 'delta' and 'omega_atom'")
    omega = float(cfg["omega_atom"]) if "omega_atom" in cfg else float(sum(om) + float(cfg["delta"]))
    return ModelParams(n, g, om, omega)


def grid_from(cfg, stem: str) -> np.ndarray:
    if stem + "_grid" in cfg:
        return np.asarray(cfg[stem + "_grid"], dtype=float)
    lo, hi, k = (_need(cfg, f"{stem}_{s}") for s in ("min", "max", "points"))
    if not isinstance(k, int) or k < 0:
        raise ConfigError(f"'{stem}_points' must be a non-negative integer")
    if k == 1:
        return np.array([float(lo)])
    return np.linspace(float(lo), float(hi), k)


def resolve_runs(cfg) -> list[tuple[str, dict]]:
    runs = cfg.get("runs")
    base = {k: v for k, v in cfg.items() if k != "runs"}
    if not runs:
        return [("", base)]
    out = []
    for r in runs:
        if not isinstance(r, dict) or not isinstance(r.get("name"), str):
            raise ConfigError("every entry of 'runs' needs a string 'name'")
        merged = dict(base)
        merged.update(r)
        out.append((r["name"], merged))
    return out


def _opt(cfg, key):
    return cfg.get(key, DEFAULTS[key])


# ---------------------------------------------------------------- output


def _open_csv(out: Path, name: str):
    fh = open(out / name, "w", encoding="utf-8", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def _suffix(name: str) -> str:
    return f"_{name}" if name else ""


def run_spectrum(cfg, out: Path) -> list[str]:
    files = []
    for name, c in resolve_runs(cfg):
        p = model_from(c)
        manifolds = [ManifoldIndex(tuple(m)) for m in _need(c, "manifolds")]
        rows = eigenspectrum_sweep(p, manifolds, grid_from(c, "delta_over_g"))
        fname = f"spectrum{_suffix(name)}.csv"
        fh, w = _open_csv(out, fname)
        with fh:
            w.writerow(["delta_over_g", *(f"n{i + 1}" for i in range(p.n_modes)), "E_plus", "E_minus"])
            for r in rows:
                w.writerow([fmt(r.delta_over_g), *r.occupations, fmt(r.E_plus), fmt(r.E_minus)])
        files.append(fname)
    return files


def field_from(c, n: int):
    if "fock_occupations" in c:
        occ = c["fock_occupations"]
        return dyn.FockField(tuple(int(x) for x in (occ if isinstance(occ, list) else [occ] * n)))
    nbar = _per_mode(_need(c, "nbar"), n, "nbar")
    return dyn.CoherentField(nbar, float(_opt(c, "cutoff_sigmas")), float(_opt(c, "tail_mass_bound")))


def run_dynamics(cfg, out: Path, seed: int) -> list[str]:
    files = []
    for name, c in resolve_runs(cfg):
        p = model_from(c)
        atom = _opt(c, "atom_init")
        if atom not in (dyn.GROUND, dyn.EXCITED):
            raise ConfigError(f"'atom_init' must be 'ground' or 'excited', got {atom!r}")
        s = dyn.AtomFieldState(atom, field_from(c, p.n_modes))
        tab = dyn.dynamics_sweep(p, s, grid_from(c, "gt"), sampler=_opt(c, "sampler"),
                                 samples=int(_opt(c, "samples")), seed=seed)
        fname = f"dynamics{_suffix(name)}.csv"
        fh, w = _open_csv(out, fname)
        with fh:
            head = ["gt", "P1", *(f"n_mean_{i + 1}" for i in range(p.n_modes)), "g_n"]
            w.writerow(head + (["stderr"] if tab.stderr is not None else []))
            for j in range(tab.gt.size):
                row = [fmt(tab.gt[j]), fmt(tab.P1[j]), *map(fmt, tab.n_mean[j]), fmt(tab.g_n[j])]
                if tab.stderr is not None:
                    row.append(fmt(tab.stderr[j]))
                w.writerow(row)
        files.append(fname)
    return files


def phase_params_from(c, n: int) -> mf.ScaledPhaseParams:
    spect = _opt(c, "spectator_occupations")
    return mf.ScaledPhaseParams(int(_opt(c, "z")), float(_need(c, "kappa")), int(_opt(c, "hopping_mode")),
                                tuple(spect) if spect is not None else ())


def run_phase_diagram(cfg, out: Path) -> tuple[list[str], dict]:
    files, stats = [], {}
    for name, c in resolve_runs(cfg):
        p = model_from(c)
        sp = phase_params_from(c, p.n_modes)
        pd = mf.phase_diagram(sp, p, grid_from(c, "delta_bar"), grid_from(c, "mu_bar"),
                              fillings=tuple(_opt(c, "fillings")), max_filling=int(_opt(c, "max_filling")))
        grid_name, bound_name = f"phase_diagram{_suffix(name)}.csv", f"boundaries{_suffix(name)}.csv"
        fh, w = _open_csv(out, grid_name)
        with fh:
            w.writerow(["delta_bar", "mu_bar", "label"])
            for i, d in enumerate(pd.delta_bar):
                for j, mu in enumerate(pd.mu_bar):
                    w.writerow([fmt(d), fmt(mu), pd.labels[i][j]])
        fh, w = _open_csv(out, bound_name)
        with fh:
            w.writerow(["m_k", "delta_bar", "mu_plus", "mu_minus"])
            for m, d, up, lo in pd.boundaries:
                w.writerow([m, fmt(d), fmt(up), fmt(lo)])
        poles = sum(row.count(mf.POLE) for row in pd.labels)
        stats[name or "run"] = {"pole_cells": poles, "formula_mismatches": pd.formula_mismatches}
        files += [grid_name, bound_name]
    return files, stats


def run_validate(cfg) -> tuple[list[validation.CheckResult], bool]:
    results = validation.run_all(float(_opt(cfg, "tolerance_scale")), bool(_opt(cfg, "quick")),
                                 cfg.get("tolerances"))
    for r in results:
        print(r.line())
    return results, all(r.passed for r in results)


def write_sidecar(out: Path, command: str, cfg: dict, extra: dict) -> None:
    recipe = cfg.get("recipe")
    doc = {
        "command": command,
        "version": __version__,
        "config": cfg,
        "defaults_not_stated_in_figures": RECIPE_DEFAULTS.get(recipe, []),
        **extra,
    }
    with open(out / f"{command}.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mmjc", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="flat JSON config file")
    ap.add_argument("--recipe", choices=sorted(RECIPES), help="start from a built-in figure recipe")
    ap.add_argument("--out", default=".", help="output directory (default: current)")
    ap.add_argument("--seed", type=int, help="Monte Carlo seed (default 0)")
    ap.add_argument("--threads", type=int, help="BLAS thread count (fallback: $MMJC_THREADS)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _threads(arg: int | None) -> int | None:
    if arg is not None:
        return arg
    env = os.environ.get("MMJC_THREADS")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"MMJC_THREADS must be an integer, got {env!r}") from exc
    return None


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        cfg = load_config(args.config, args.recipe)
        if cfg.get("command", args.command) != args.command:
            raise ConfigError(f"config is for {cfg['command']!r}, not {args.command!r}")
        cfg["command"] = args.command
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        if seed < 0 or seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        cfg["seed"] = seed
        threads = _threads(args.threads)
        if threads is not None:
            if threads < 1:
                raise ConfigError("thread count must be >= 1")
            cfg["threads"] = threads
        out.mkdir(parents=True, exist_ok=True)
        extra: dict[str, Any] = {}
        with threadpool_limits(limits=threads), warnings.catch_warnings():
            warnings.simplefilter("default")
            if args.command == "spectrum":
                extra["outputs"] = run_spectrum(cfg, out)
            elif args.command == "dynamics":
                extra["outputs"] = run_dynamics(cfg, out, seed)
            elif args.command == "phase-diagram":
                extra["outputs"], extra["diagnostics"] = run_phase_diagram(cfg, out)
            else:
                results, ok = run_validate(cfg)
                extra["checks"] = [{"name": r.name, "max_deviation": r.max_deviation,
                                    "tolerance": r.tolerance, "cases": r.cases, "passed": r.passed}
                                   for r in results]
        write_sidecar(out, args.command, cfg, extra)
    except (ConfigError, ParameterError, KeyError, TypeError) as exc:
        print(f"mmjc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"mmjc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"mmjc: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"mmjc: IO error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.command == "validate" and not ok:
        failed = [r.name for r in results if not r.passed]
        print(f"mmjc: validation failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
