"""Experiment runner: ``nds-lab <subcommand> --config <path> [--out <dir>]``.

Configs are JSON, validated against a schema and then against the
preconditions of the objects they describe before anything is computed.
Exit codes: 0 success, 2 invalid input, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import ConfigError, NdsError
from .systems import CircleMap, NdsSequence

SCHEMA_VERSION = "1"
SUBCOMMANDS = ("entropy", "pressure", "memoryloss", "conjugacy", "expansivity", "frink", "volume")
TWO_PI = 2.0 * math.pi

log = logging.getLogger("nds_lab")

MAP_SCHEMA = {
    "type": "object",
    "properties": {
        "family": {"enum": ["linear", "perturbed-trig", "identity"]},
        "degree": {"type": "integer"},
        "amplitude": {"type": "number"},
        "lam": {"type": "number"},
        "gamma": {"type": "number"},
    },
    "required": ["family", "degree"],
    "additionalProperties": False,
}

SYSTEM_SCHEMA = {
    "type": "object",
    "oneOf": [
        {
            "properties": {
                "prefix": {"type": "array", "items": MAP_SCHEMA},
                "repeat": {"type": "integer", "minimum": 1},
                "tail": MAP_SCHEMA,
            },
            "required": ["tail"],
            "additionalProperties": False,
        },
        {
            "properties": {
                "generator": {"const": "alternating_blocks"},
                "blocks": {"type": "integer", "minimum": 1},
                "map": MAP_SCHEMA,
            },
            "required": ["generator", "blocks", "map"],
            "additionalProperties": False,
        },
        {
            "properties": {
                "generator": {"const": "growing_degree"},
                "terms": {"type": "integer", "minimum": 1},
            },
            "required": ["generator", "terms"],
            "additionalProperties": False,
        },
    ],
}

FUNCTION_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["uniform", "zero", "constant", "cos", "one_plus_cos", "one_plus_sin2",
                          "exp_cos", "exp_sin", "neg_log_derivative"]},
        "amp": {"type": "number"},
        "shift": {"type": "number"},
        "value": {"type": "number"},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

NUM = {"type": "number"}
INT = {"type": "integer"}
POS = {"type": "number", "exclusiveMinimum": 0}
POW2 = {"type": "integer", "minimum": 128}

PARAMS = {
    "entropy": {
        "n_max": {"type": "integer", "minimum": 2},
        "eps_list": {"type": "array", "items": POS, "minItems": 1},
        "resolution": {"type": "integer", "minimum": 2},
        "quad_points": POW2,
        "partition_arcs": {"type": "integer", "minimum": 1},
        "density": FUNCTION_SCHEMA,
        "density_grid": POW2,
        "cell_budget": {"type": "integer", "minimum": 1},
        "window_fraction": POS,
    },
    "pressure": {
        "n_max": {"type": "integer", "minimum": 2},
        "eps": POS,
        "resolution": {"type": "integer", "minimum": 2},
        "potential_grid": {"type": "integer", "minimum": 2},
        "density": FUNCTION_SCHEMA,
        "density_grid": POW2,
        "partition_arcs": {"type": "integer", "minimum": 1},
        "spanning": {"type": "boolean"},
        "window_fraction": POS,
    },
    "memoryloss": {
        "n_max": {"type": "integer", "minimum": 8},
        "grid": POW2,
        "phi": FUNCTION_SCHEMA,
        "psi": FUNCTION_SCHEMA,
        "floor": POS,
        "branch_tol": POS,
        "lipschitz_eps": POS,
        "mass_defect_sizes": {"type": "array", "items": POW2, "minItems": 2},
        "duality_grid": POW2,
    },
    "conjugacy": {
        "target": MAP_SCHEMA,
        "T": {"type": "integer", "minimum": 1},
        "tol": POS,
        "max_iter": {"type": "integer", "minimum": 1},
        "grid": POW2,
        "samples": {"type": "integer", "minimum": 1},
        "csv_points": {"type": "integer", "minimum": 2},
        "oscillation_deltas": {"type": "array", "items": POS},
        "entropy_check": {
            "type": "object",
            "properties": {"n_max": INT, "eps": POS, "resolution": INT},
            "required": ["n_max", "eps", "resolution"],
            "additionalProperties": False,
        },
    },
    "expansivity": {
        "sue": {
            "type": "object",
            "properties": {"delta": POS, "eps": POS, "N_max": INT, "time_window": INT, "net_size": INT},
            "required": ["delta", "eps", "N_max"],
            "additionalProperties": False,
        },
        "witness": {
            "type": "object",
            "properties": {"delta": POS, "n_max": INT},
            "required": ["delta", "n_max"],
            "additionalProperties": False,
        },
        "generator_entropy": {
            "type": "object",
            "properties": {"delta": POS, "n_max": INT},
            "required": ["delta", "n_max"],
            "additionalProperties": False,
        },
        "total_boundedness": {
            "type": "object",
            "properties": {"eps": POS, "times": INT},
            "required": ["eps"],
            "additionalProperties": False,
        },
    },
    "frink": {
        "delta": POS,
        "K": {"type": "integer", "minimum": 1},
        "N": {"type": "integer", "minimum": 1},
        "net_size": {"type": "integer", "minimum": 2},
        "cluster_offset": POS,
        "cluster_every": {"type": "integer", "minimum": 1},
        "base_time": {"type": "integer", "minimum": 0},
        "threshold": POS,
        "pushed": {"type": "boolean"},
        "N_max": {"type": "integer", "minimum": 1},
    },
    "volume": {
        "eps": POS,
        "n_max": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "triples": {"type": "integer", "minimum": 0},
        "triangle_order": {"type": "integer", "minimum": 0},
    },
}

DEFAULTS = {
    "entropy": {"n_max": 14, "eps_list": [0.01], "resolution": 1 << 23, "quad_points": 4096,
                "partition_arcs": 2, "density": {"kind": "uniform"}, "density_grid": 4096,
                "cell_budget": 1 << 22, "window_fraction": 1 / 3},
    "pressure": {"n_max": 12, "eps": 0.01, "resolution": 1 << 22, "potential_grid": 4096,
                 "density": {"kind": "uniform"}, "density_grid": 4096, "partition_arcs": 2,
                 "spanning": False, "window_fraction": 1 / 3},
    "memoryloss": {"n_max": 20, "grid": 4096, "floor": 1e-12, "branch_tol": 1e-12, "lipschitz_eps": 0.1,
                   "mass_defect_sizes": [512, 1024, 2048, 4096], "duality_grid": 4096},
    "conjugacy": {"T": 8, "tol": 1e-10, "grid": 8192, "samples": 4096, "csv_points": 257,
                  "oscillation_deltas": [0.01, 0.05]},
    "expansivity": {},
    "frink": {"delta": 0.2, "K": 6, "net_size": 256, "base_time": 0, "threshold": 1 / 32,
              "pushed": False, "N_max": 16},
    "volume": {"eps": 0.01, "n_max": 12, "samples": 256, "triples": 10000, "triangle_order": 6},
}


def config_schema(command: str) -> dict:
    system_keys = {"system": SYSTEM_SCHEMA}
    if command == "pressure":
        system_keys = {
            "system": SYSTEM_SCHEMA,
            "systems": {"type": "object", "additionalProperties": SYSTEM_SCHEMA, "minProperties": 1},
            "potential": FUNCTION_SCHEMA,
            "potentials": {"type": "object", "additionalProperties": FUNCTION_SCHEMA, "minProperties": 1},
        }
    return {
        "type": "object",
        "properties": {
            "name": {"type": "string"},
            "command": {"enum": list(SUBCOMMANDS)},
            "description": {"type": "string"},
            "criteria": {"type": "array", "items": {"type": "integer"}},
            "expect_exit": {"type": "integer"},
            "seed": {"type": "integer", "minimum": 0},
            "params": {"type": "object", "properties": PARAMS[command], "additionalProperties": False},
            **system_keys,
        },
        "additionalProperties": False,
    }


def _map(desc: dict) -> CircleMap:
    return CircleMap(desc["family"], desc["degree"], desc.get("amplitude", 0.0),
                     desc.get("lam"), desc.get("gamma"))


def build_system(desc: dict) -> NdsSequence:
    from .expansivity import alternating_blocks, growing_degree

    gen = desc.get("generator")
    if gen == "alternating_blocks":
        return alternating_blocks(_map(desc["map"]), desc["blocks"])
    if gen == "growing_degree":
        return growing_degree(desc["terms"])
    prefix = tuple(_map(m) for m in desc.get("prefix", [])) * desc.get("repeat", 1)
    return NdsSequence(prefix, _map(desc["tail"]))


def function_values(desc: dict, x: np.ndarray, seq: NdsSequence | None = None, n: int = 0) -> np.ndarray:
    kind = desc["kind"]
    amp = desc.get("amp", 1.0)
    shift = desc.get("shift", 0.0)
    t = TWO_PI * (x - shift)
    if kind in ("uniform",):
        return np.ones_like(x)
    if kind == "zero":
        return np.zeros_like(x)
    if kind == "constant":
        return np.full_like(x, desc.get("value", 0.0))
    if kind == "cos":
        return amp * np.cos(t)
    if kind == "one_plus_cos":
        return 1.0 + amp * np.cos(t)
    if kind == "one_plus_sin2":
        return 1.0 + amp * np.sin(t) ** 2
    if kind == "exp_cos":
        return np.exp(amp * np.cos(t))
    if kind == "exp_sin":
        return np.exp(amp * np.sin(t))
    if kind == "neg_log_derivative":
        return -np.log(seq.map_at(n).derivative(x))
    raise ConfigError(f"unknown function kind {kind!r}")


def build_density(desc: dict, N: int):
    from .transfer import GridDensity

    if desc["kind"] in ("zero", "constant", "cos", "neg_log_derivative"):
        raise ConfigError(f"{desc['kind']!r} is not a density")
    values = function_values(desc, np.arange(N) / N)
    if np.any(values <= 0):
        raise ConfigError("densities must be strictly positive")
    return GridDensity.from_values(values)


def build_potential(desc: dict, seq: NdsSequence, N: int):
    from .pressure import PotentialSequence

    if desc["kind"] == "neg_log_derivative":
        return PotentialSequence.neg_log_derivative(seq, N)
    return PotentialSequence((), function_values(desc, np.arange(N) / N))


def _partitions(arcs: int):
    from .entropy import IntervalPartition, PartitionSequence

    return PartitionSequence.constant(IntervalPartition.equal(arcs))


def load_config(path: str, command: str) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(raw, config_schema(command))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc
    if raw.get("command", command) != command:
        raise ConfigError(f"config is for {raw['command']!r}, not {command!r}")
    cfg = dict(raw)
    cfg["params"] = {**DEFAULTS[command], **raw.get("params", {})}
    cfg.setdefault("seed", 0)
    return cfg


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_json(path: Path, payload: dict):
    with open(path, "w") as fh:
        json.dump(_jsonable({"schema_version": SCHEMA_VERSION, **payload}), fh, indent=2, sort_keys=True)
        fh.write("\n")


# runners: each validates by building objects first, then computes and writes


def run_entropy(cfg: dict, out: Path) -> dict:
    from .entropy import (metric_entropy_estimate, metric_entropy_formula,
                          top_entropy_formula, top_entropy_separated, volume_gate)

    p = cfg["params"]
    seq = build_system(cfg["system"])
    phi = build_density(p["density"], p["density_grid"])
    parts = _partitions(p["partition_arcs"])
    wf = p["window_fraction"]
    metric_est = metric_entropy_estimate(seq, parts, phi, p["n_max"], wf, p["cell_budget"])
    sep = top_entropy_separated(seq, p["eps_list"], p["n_max"], p["resolution"], wf)
    top_f = top_entropy_formula(seq, p["n_max"], p["quad_points"], wf)
    met_f = metric_entropy_formula(seq, p["n_max"], p["quad_points"], wf)
    write_csv(out / "entropy_table.csv", ["n", "eps", "count", "rate_raw", "rate"], sep.rows)
    write_csv(out / "entropy_traces.csv", ["n", "top_formula", "metric_formula", "metric_estimate"],
              [(n, a, b, c) for (n, a), (_, b), (_, c) in zip(top_f.trace, met_f.trace, metric_est.trace)])
    summary = {
        "top_entropy_separated": sep.estimate,
        "separated_by_eps": {str(e): est.value for e, est in sep.estimates.items()},
        "monotone_in_eps": sep.monotone_ok,
        "top_entropy_formula": top_f.value,
        "metric_entropy_formula": met_f.value,
        "metric_entropy_estimate": metric_est.value,
        "partition_volume_gate": volume_gate(parts, p["n_max"]),
    }
    write_json(out / "summary.json", summary)
    return summary


def run_pressure(cfg: dict, out: Path) -> dict:
    from .pressure import metric_pressure, top_pressure_estimate

    p = cfg["params"]
    systems = cfg.get("systems") or {"main": cfg.get("system")}
    potentials = cfg.get("potentials") or {"main": cfg.get("potential", {"kind": "zero"})}
    if any(s is None for s in systems.values()):
        raise ConfigError("pressure needs 'system' or 'systems'")
    built = {name: build_system(desc) for name, desc in systems.items()}
    pots = {(s, q): build_potential(desc, built[s], p["potential_grid"])
            for s in built for q, desc in potentials.items()}
    phi = build_density(p["density"], p["density_grid"])
    parts = _partitions(p["partition_arcs"])
    rows, table_rows, cells = [], [], {}
    for (s, q), pot in pots.items():
        seq = built[s]
        top = top_pressure_estimate(seq, pot, [p["eps"]], p["n_max"], p["resolution"],
                                    p["window_fraction"], p["spanning"])
        met = metric_pressure(seq, pot, phi, parts, p["n_max"], p["window_fraction"])
        gap = top.estimate - met.value
        rows.append((s, q, top.estimate, met.value, gap))
        table_rows += [(s, q) + tuple(r) for r in top.rows]
        cells[f"{s}/{q}"] = {"P_top_est": top.estimate, "P_metric_est": met.value, "gap": gap,
                             "metric_lower_bound": met.lower_bound}
    write_csv(out / "pressure_table.csv", ["system", "potential", "n", "eps", "logS", "logR", "rate_raw", "rate"],
              table_rows)
    write_csv(out / "variational.csv", ["system", "potential", "P_top_est", "P_metric_est", "gap"], rows)
    summary = {"cells": cells, "min_gap": min(r[4] for r in rows)}
    write_json(out / "summary.json", summary)
    return summary


def run_memoryloss(cfg: dict, out: Path) -> dict:
    from .transfer import duality_gap, loss_of_memory, mass_defect_study

    p = cfg["params"]
    seq = build_system(cfg["system"])
    if "phi" not in p or "psi" not in p:
        raise ConfigError("memoryloss needs params.phi and params.psi")
    phi = build_density(p["phi"], p["grid"])
    psi = build_density(p["psi"], p["grid"])
    rep = loss_of_memory(seq, phi, psi, p["n_max"], p["floor"], p["branch_tol"],
                         lipschitz_eps=p["lipschitz_eps"])
    noise = rep["noise_trace"] or [float("nan")] * len(rep["l1_trace"])
    write_csv(out / "l1_trace.csv", ["n", "l1", "noise"], [(n, d, e) for (n, d), e in zip(rep["l1_trace"], noise)])
    ds = [d for _, d in rep["l1_trace"]]
    m0 = seq.map_at(0)
    phi_fn = lambda x: function_values(p["phi"], x)
    defect = mass_defect_study(m0, phi_fn, tuple(p["mass_defect_sizes"]))
    dual = duality_gap(m0, build_density(p["phi"], p["duality_grid"]), lambda x: np.cos(TWO_PI * x))
    summary = {
        "rate": rep["rate"], "r2": rep["r2"], "slope": rep["slope"], "window": rep["window"],
        "degenerate": rep["degenerate"],
        "monotone": all(b <= a + 1e-10 for a, b in zip(ds, ds[1:])),
        "kappa": rep["kappa"], "max_mass_defect": rep["max_mass_defect"],
        "mass_defect": defect, "duality_gap": dual,
        "lipschitz_trace": rep["lipschitz_trace"],
    }
    write_json(out / "summary.json", summary)
    return summary


def run_conjugacy(cfg: dict, out: Path) -> dict:
    from .conjugacy import oscillation_bound, oscillation_table, solve_equiconjugacy
    from .entropy import top_entropy_separated

    p = cfg["params"]
    seq = build_system(cfg["system"])
    if "target" not in p:
        raise ConfigError("conjugacy needs params.target")
    f = _map(p["target"])
    pis, rep = solve_equiconjugacy(seq, f, p["T"], p["tol"], p.get("max_iter"), p["grid"],
                                   samples=p["samples"], seed=cfg["seed"])
    xs = np.linspace(0.0, 1.0, p["csv_points"], endpoint=False)
    write_csv(out / "pi.csv", ["x"] + [f"pi_{k}" for k in range(len(pis))],
              zip(xs, *[h(xs) for h in pis]))
    deltas = p["oscillation_deltas"]
    table = oscillation_table(pis, deltas)
    write_csv(out / "oscillation.csv", ["k"] + [f"delta_{d}" for d in deltas],
              [(k, *row) for k, row in enumerate(table)])
    summary = {
        "iterations": rep["iterations"], "budget": rep["budget"], "residual": rep["residual"],
        "node_residual": rep["node_residual"], "contraction_trace": rep["contraction_trace"], "grid": rep["grid"],
        "oscillation_max": [max(row[j] for row in table) for j in range(len(deltas))],
        "oscillation_bound": [oscillation_bound(pis, seq, f, d) for d in deltas],
    }
    if "entropy_check" in p:
        e = p["entropy_check"]
        summary["entropy_after_conjugacy"] = top_entropy_separated(seq, [e["eps"]], e["n_max"], e["resolution"]).estimate
        summary["log_degree"] = math.log(f.degree)
    write_json(out / "summary.json", summary)
    return summary


def run_expansivity(cfg: dict, out: Path) -> dict:
    from .expansivity import (Failure, generator_entropy, sue_horizon,
                              time_expansivity_witness, uniform_total_boundedness)

    p = cfg["params"]
    seq = build_system(cfg["system"])
    summary = {}
    if "sue" in p:
        s = p["sue"]
        res = sue_horizon(seq, s["delta"], s["eps"], s["N_max"], s.get("time_window", 0), s.get("net_size", 256))
        summary["sue"] = {"failure": res.to_dict()} if isinstance(res, Failure) else {"horizon": res}
    if "witness" in p:
        summary["witness"] = time_expansivity_witness(seq, p["witness"]["delta"], p["witness"]["n_max"])
    if "generator_entropy" in p:
        g = p["generator_entropy"]
        summary["generator_entropy"] = generator_entropy(seq, g["delta"], g["n_max"])
    if "total_boundedness" in p:
        t = p["total_boundedness"]
        summary["total_boundedness"] = uniform_total_boundedness(t["eps"], t.get("times", 1))
    write_json(out / "summary.json", summary)
    return summary


def frink_net(p: dict) -> np.ndarray:
    from .expansivity import uniform_net

    net = uniform_net(p["net_size"])
    if "cluster_offset" in p:
        net = np.unique(np.concatenate((net, net[:: p.get("cluster_every", 1)] + p["cluster_offset"])))
    return net


def run_frink(cfg: dict, out: Path) -> dict:
    from .expansivity import (Failure, adapted_metric, build_frink_family, expansion_check,
                              frink_sandwich, metric_violations, sue_horizon)

    p = cfg["params"]
    seq = build_system(cfg["system"])
    delta = p["delta"]
    N = p.get("N")
    if N is None:
        N = sue_horizon(seq, delta, delta / 3.0, p["N_max"], p["base_time"])
        if isinstance(N, Failure):
            raise ConfigError(f"no s.u.e. horizon up to {p['N_max']}: {N.to_dict()}")
    fam = build_frink_family(seq, p["base_time"], frink_net(p), delta, p["K"], N, pushed=p["pushed"])
    r0 = adapted_metric(fam, 0)
    rep = expansion_check(fam, p["threshold"])
    base = fam.frink[0]
    header = ["x"] + [repr(float(v)) for v in base.points]
    write_csv(out / "rho.csv", header, [(x, *row) for x, row in zip(base.points, base.rho)])
    write_csv(out / "rho_adapted.csv", header, [(x, *row) for x, row in zip(base.points, r0)])
    summary = {
        "N": N, "K": p["K"], "mu": fam.mu, "net_sizes": [fr.points.size for fr in fam.frink],
        "sandwich_violations": sum(len(frink_sandwich(fr.levels, fr.rho)["violations"]) for fr in fam.frink),
        "metric_violations": sum(metric_violations(fr.rho) for fr in fam.frink),
        "adapted_metric_violations": metric_violations(r0),
        "expansion": rep,
    }
    write_json(out / "summary.json", summary)
    return summary


def run_volume(cfg: dict, out: Path) -> dict:
    from .metrics import triangle_violations, volume_lemma_check

    p = cfg["params"]
    seq = build_system(cfg["system"])
    rep = volume_lemma_check(seq, p["eps"], p["n_max"], p["samples"], cfg["seed"])
    write_csv(out / "volume.csv", ["n", "eps", "count", "product_min", "product_max"],
              [(r["n"], r["eps"], r["count"], r["product_min"], r["product_max"]) for r in rep["rows"]])
    summary = {k: v for k, v in rep.items() if k != "rows"}
    summary["spread"] = rep["max_product"] - rep["min_product"]
    if p["triples"]:
        summary["triangle_violations"] = triangle_violations(seq, 0, p["triangle_order"], p["triples"], cfg["seed"])
    write_json(out / "summary.json", summary)
    return summary


RUNNERS = {
    "entropy": run_entropy, "pressure": run_pressure, "memoryloss": run_memoryloss,
    "conjugacy": run_conjugacy, "expansivity": run_expansivity, "frink": run_frink,
    "volume": run_volume,
}


def preset_dir() -> Path:
    return Path(str(resources.files("nds_lab") / "presets"))


def list_presets() -> list[dict]:
    rows = []
    for path in sorted(preset_dir().glob("*.json")):
        with open(path) as fh:
            cfg = json.load(fh)
        rows.append({"name": path.stem, "command": cfg.get("command", ""), "criteria": cfg.get("criteria", []),
                     "expect_exit": cfg.get("expect_exit", 0), "path": str(path),
                     "description": cfg.get("description", "")})
    return rows


def _limit_threads():
    value = os.environ.get("NDS_LAB_THREADS")
    if not value:
        return
    try:
        import numba

        numba.set_num_threads(max(1, min(int(value), numba.config.NUMBA_NUM_THREADS)))
    except ValueError:
        log.warning("ignoring NDS_LAB_THREADS=%r", value)


def run(command: str, config: str, out: str | None = None) -> int:
    out_dir = Path(out) if out else Path("nds_lab_out") / command
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        cfg = load_config(config, command)
        write_json(out_dir / "config_echo.json", {"command": command, "config": cfg, "version": __version__})
        summary = RUNNERS[command](cfg, out_dir)
    except NdsError as exc:
        payload = exc.to_dict()
        payload["exit_code"] = exc.exit_code
        write_json(out_dir / "error.json", payload)
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    print(json.dumps(_jsonable(summary), sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nds-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out")
    sub.add_parser("presets", help="list shipped configs")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    _limit_threads()
    if args.command == "presets":
        for row in list_presets():
            crit = ",".join(str(c) for c in row["criteria"]) or "-"
            print(f"{row['name']:<32} {row['command']:<12} criteria={crit:<8} exit={row['expect_exit']}  {row['path']}")
        return 0
    return run(args.command, args.config, args.out)


if __name__ == "__main__":
    sys.exit(main())
