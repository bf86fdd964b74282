"""Command-line front end: scenario reports, sweeps and the built-in checks.

Scenario files are TOML with flat top-level keys and two optional tables::

    model = "arthurs_kelly"
    backend = "both"
    dims = [12, 14, 14]
    seed = 0
    pointer_squeeze = 1.0

    [box]
    x0 = 0.0
    p0 = 0.0
    L = 4.0
    P = 4.0
    sigma = 1.0
    tau = 1.0

    [sweep]
    parameter = "pointer_squeeze"
    values = [0.25, 0.5, 1.0, 2.0, 4.0]

A sweep parameter is either a model parameter or ``box.<field>``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errlab import (
    RangeBox,
    constrained_maximal_rms,
    error_forms,
    error_report,
    maximal_rms,
)
from .exceptions import ConfigError, InvalidDimensionError, InvalidModelError, JointMeasError
from .models import CATALOG, ModeState, build_model, swap_rotation_model
from .verify import (
    appendix_variance_identity_check,
    check_commutator_identities,
    check_seven_inequalities,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
IDENTITY_TOL = 1e-8

_TOP_KEYS = {"model", "backend", "dims", "seed", "hbar", "out", "box", "sweep"}
_BOX_KEYS = ("x0", "p0", "L", "P", "sigma", "tau")


@dataclass(frozen=True)
class ScenarioConfig:
    """One scenario: a model, where to evaluate it and what to vary."""

    model: str
    params: dict = field(default_factory=dict)
    backend: str = "both"
    dims: tuple[int, int, int] = (12, 12, 12)
    hbar: float = 1.0
    seed: int = 0
    box: dict | None = None
    sweep_parameter: str | None = None
    sweep_values: tuple = ()
    out: str = "out"

    def backends(self) -> list[str]:
        return ["gaussian", "fock"] if self.backend == "both" else [self.backend]


def _dims(value) -> tuple[int, int, int]:
    if isinstance(value, bool):
        raise ConfigError("dims must be an integer or a list of three integers")
    if isinstance(value, int):
        value = [value] * 3
    if not isinstance(value, list) or len(value) != 3 or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise ConfigError("dims must be an integer or a list of three integers")
    if min(value) < 2:
        raise ConfigError(f"all dims must be >= 2, got {value}")
    return tuple(value)


def parse_config(data: dict) -> ScenarioConfig:
    """Validate a decoded TOML document."""
    if "model" not in data or not isinstance(data["model"], str):
        raise ConfigError("config needs a string 'model' key")
    if data["model"] not in CATALOG:
        raise ConfigError(f"unknown model {data['model']!r}; known: {', '.join(CATALOG)}")
    backend = data.get("backend", "both")
    if backend not in ("fock", "gaussian", "both"):
        raise ConfigError(f"backend must be fock, gaussian or both, got {backend!r}")
    params = {k: v for k, v in data.items() if k not in _TOP_KEYS}
    for k, v in params.items():
        if isinstance(v, (dict, list)) or isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"model parameter {k!r} must be a number")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    hbar = data.get("hbar", 1.0)
    if not isinstance(hbar, (int, float)) or isinstance(hbar, bool) or hbar <= 0:
        raise ConfigError("hbar must be a positive number")
    box = data.get("box")
    if box is not None:
        if not isinstance(box, dict) or set(box) - set(_BOX_KEYS):
            raise ConfigError(f"[box] accepts only {', '.join(_BOX_KEYS)}")
        missing = {"L", "P"} - set(box)
        if missing:
            raise ConfigError(f"[box] is missing {sorted(missing)}")
        box = {"x0": 0.0, "p0": 0.0, "sigma": 1.0, "tau": 1.0} | {k: float(v) for k, v in box.items()}
    sweep = data.get("sweep")
    parameter, values = None, ()
    if sweep is not None:
        if not isinstance(sweep, dict) or "parameter" not in sweep:
            raise ConfigError("[sweep] needs a 'parameter' key")
        parameter = sweep["parameter"]
        values = sweep.get("values", [])
        if not isinstance(values, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
            raise ConfigError("[sweep] values must be a list of numbers")
        if parameter.startswith("box."):
            if box is None or parameter[4:] not in _BOX_KEYS:
                raise ConfigError(f"sweep parameter {parameter!r} needs a [box] table with that field")
        values = tuple(float(v) for v in values)
    cfg = ScenarioConfig(
        model=data["model"],
        params=params,
        backend=backend,
        dims=_dims(data.get("dims", 12)),
        hbar=float(hbar),
        seed=seed,
        box=box,
        sweep_parameter=parameter,
        sweep_values=values,
        out=str(data.get("out", "out")),
    )
    try:
        _model_for(cfg)
        if box is not None:
            _box_for(cfg)
        if parameter and not parameter.startswith("box."):
            for v in values:
                _model_for(replace(cfg, params=cfg.params | {parameter: v}))
    except (InvalidModelError, InvalidDimensionError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(data)


def _model_for(cfg: ScenarioConfig):
    return build_model(cfg.model, dims=cfg.dims, hbar=cfg.hbar, backend="both", **cfg.params)


def _box_for(cfg: ScenarioConfig) -> RangeBox:
    return RangeBox(hbar=cfg.hbar, **cfg.box)


def _point_configs(cfg: ScenarioConfig) -> list[tuple[float | None, ScenarioConfig]]:
    if not cfg.sweep_parameter or not cfg.sweep_values:
        return [(None, cfg)]
    out = []
    for v in cfg.sweep_values:
        if cfg.sweep_parameter.startswith("box."):
            out.append((v, replace(cfg, box=cfg.box | {cfg.sweep_parameter[4:]: v})))
        else:
            out.append((v, replace(cfg, params=cfg.params | {cfg.sweep_parameter: v})))
    return out


def evaluate_point(cfg: ScenarioConfig, backend: str) -> dict[str, Any]:
    """Flat record of deltas, primed deltas, defects and margins for one backend."""
    m = _model_for(cfg)
    box = _box_for(cfg) if cfg.box is not None else None
    rep = error_report(m, backend, box, seed=cfg.seed)
    ms = check_seven_inequalities(m, box, backend, seed=cfg.seed)
    row: dict[str, Any] = {}
    for name, v in rep.deltas.items():
        row[name] = v.value
    if rep.constrained is not None:
        for name, c in rep.constrained.items():
            row[name + "_primed"] = c.value
        certs = {c.certified for c in rep.constrained.values()}
        row["primed_certified"] = "lower_bound" if "lower_bound" in certs else "exact"
    row.update(rep.defects.as_dict())
    for name in ms.margins:
        row[name + "_margin"] = ms.margins[name]
        row[name + "_flag"] = ms.flags[name]
    return row


def run_scenario(cfg: ScenarioConfig) -> tuple[dict, list[dict]]:
    """Evaluate every sweep point on every selected backend.

    Returns the hierarchical report and the flat CSV rows, both in sweep order.
    """
    points, rows = [], []
    for value, pcfg in _point_configs(cfg):
        results = {b: evaluate_point(pcfg, b) for b in cfg.backends()}
        point = {"model": cfg.model, "params": dict(pcfg.params), "backends": results}
        if pcfg.box is not None:
            point["box"] = dict(pcfg.box)
        row = {}
        if cfg.sweep_parameter:
            point["sweep_value"] = value
            row[cfg.sweep_parameter] = value if value is not None else float("nan")
        for b, res in results.items():
            for k, v in res.items():
                row[f"{b}.{k}"] = v
        points.append(point)
        rows.append(row)
    report = {
        "config": {
            "model": cfg.model,
            "params": dict(cfg.params),
            "backend": cfg.backend,
            "dims": list(cfg.dims),
            "hbar": cfg.hbar,
            "seed": cfg.seed,
            "box": cfg.box,
            "sweep": {"parameter": cfg.sweep_parameter, "values": list(cfg.sweep_values)} if cfg.sweep_parameter else None,
        },
        "semantics": {
            "primed": "range-constrained suprema; lower bounds on the fock backend, exact on the gaussian backend",
            "undefined_0_times_inf": "product of a zero and an unbounded rms value; no margin is assigned",
        },
        "points": points,
    }
    return report, rows


# output ------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def format_value(v) -> str:
    if isinstance(v, (float, int, np.floating, np.integer)) and not isinstance(v, bool):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return format(f, ".17g")
    return str(v)


def render_json(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def render_csv(rows: list[dict]) -> str:
    columns = list(rows[0]) if rows else []
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row[c]) for c in columns])
    return buf.getvalue()


def _write(out_dir: Path, files: dict[str, str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        with open(out_dir / name, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# subcommands ---------------------------------------------------------------------


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.dims is not None:
        cfg = replace(cfg, dims=_dims(args.dims))
    if args.backend is not None:
        cfg = replace(cfg, backend=args.backend)
    if args.out is not None:
        cfg = replace(cfg, out=args.out)
    return cfg


def _config_from_args(args) -> ScenarioConfig:
    path = args.config_path or args.config
    if not path:
        raise ConfigError("a config file is required")
    return _apply_overrides(load_config(path), args)


def cmd_report(args, sweep: bool) -> int:
    cfg = _config_from_args(args)
    if not sweep:
        cfg = replace(cfg, sweep_parameter=None, sweep_values=())
    report, rows = run_scenario(cfg)
    stem = "sweep" if sweep else "report"
    _write(Path(cfg.out), {f"{stem}.json": render_json(report), f"{stem}.csv": render_csv(rows)})
    print(f"wrote {stem}.json and {stem}.csv ({len(rows)} row{'s' if len(rows) != 1 else ''}) to {cfg.out}")
    return EXIT_OK


def cmd_verify_commutators(args) -> int:
    cfg = _config_from_args(args)
    m = _model_for(cfg)
    res = check_commutator_identities(m)
    ok = True
    table = {}
    print(f"{'identity':<14} {'raw':>12} {'interior':>12}")
    for name, r in res.items():
        table[name] = {"raw": r.raw, "interior": r.interior, "pass": r.interior < IDENTITY_TOL}
        ok &= r.interior < IDENTITY_TOL
        print(f"{name:<14} {r.raw:12.3e} {r.interior:12.3e}")
    _write(Path(cfg.out), {"commutators.json": render_json({"model": cfg.model, "dims": list(cfg.dims), "identities": table})})
    return EXIT_OK if ok else EXIT_NUMERIC


def counterexample_report(seed: int = 0, hbar: float = 1.0) -> dict:
    """Reproduce the swap-process counterexample end to end."""
    m = swap_rotation_model((12, 12, 12), hbar)
    forms = error_forms(m)
    out: dict[str, Any] = {
        "eps_Xi_coefficients": [float(c) for c in forms.eps_Xi.linear] + [forms.eps_Xi.constant],
        "delta_ei_x_gaussian": maximal_rms("eps_Xi", m, "gaussian").value,
        "delta_ei_x_fock": maximal_rms("eps_Xi", m, "fock").value,
    }
    growth = maximal_rms("eps_Pi", m.resized((8, 12, 12)), "fock", (8, 12, 16))
    out["delta_ei_p_fock_samples"] = [[d, v] for d, v in growth.samples]
    out["delta_ei_p_infinite"] = growth.infinite
    ms = check_seven_inequalities(m, None, "gaussian")
    out["eq21_flag"] = ms.flags["eq21"]
    stuck = appendix_variance_identity_check(ModeState(0.0, 0.0, 2.0, hbar), 0.0, 0.001, "gaussian")
    out["stuck_needle_eps_Pi_sq"] = stuck.lhs
    out["stuck_needle_product"] = 0.0 * stuck.lhs
    bounds = {}
    for P in (2.0, 4.0, 8.0):
        box = RangeBox(0.0, 0.0, 1.0, P, 1.0, 1.0, hbar)
        res = constrained_maximal_rms("eps_Pi", m, box, "fock", seed=seed)
        bounds[format_value(P)] = {"value": res.value, "half_P": P / 2, "holds": res.value >= P / 2 - 1e-6}
    out["finite_range_eps_Pi"] = bounds
    return out


def cmd_counterexample(args) -> int:
    rep = counterexample_report(seed=args.seed or 0)
    text = render_json(rep)
    if args.out:
        _write(Path(args.out), {"counterexample.json": text})
    sys.stdout.write(text)
    ok = rep["delta_ei_x_fock"] == 0 and rep["delta_ei_p_infinite"] and rep["eq21_flag"] == "undefined_0_times_inf"
    ok &= all(b["holds"] for b in rep["finite_range_eps_Pi"].values())
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (alternative to the positional argument)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="random seed for the multi-start search")
    common.add_argument("--dims", type=int, help="truncation dimension for every mode")
    common.add_argument("--backend", choices=["fock", "gaussian", "both"])

    parser = argparse.ArgumentParser(prog="jointmeas", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("verify-commutators", "check the commutator identities on the Fock backend"),
        ("report", "evaluate one scenario"),
        ("sweep", "evaluate every point of the scenario sweep"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("config_path", nargs="?", metavar="config")
    sub.add_parser("counterexample", parents=[common], help="reproduce the swap-process counterexample")
    sub.add_parser("selftest", parents=[common], help="run the built-in invariant checks")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            return cmd_report(args, sweep=False)
        if args.command == "sweep":
            return cmd_report(args, sweep=True)
        if args.command == "verify-commutators":
            return cmd_verify_commutators(args)
        if args.command == "counterexample":
            return cmd_counterexample(args)
        return cmd_selftest(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (JointMeasError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
