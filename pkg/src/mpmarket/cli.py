"""Command-line front end.

Exit codes: 0 ran and the property holds (or the instance is feasible),
1 ran but an audit failed / no desirable mechanism exists, 2 usage or
config error.

A config file is a JSON object; flags override its values::

    {
      "model": {"family": "linear", "alpha": [[1, -0.2], [0.3, 1]]},
      "quality": {"name": "sigmoid"},
      "mechanism": "mep+efficient-linear",
      "grid": {"upper": 1, "step": 0.25},
      "tol": 1e-9,
      "properties": ["ic", "ir"],
      "types": [0.5, 0.5],
      "reports": [0.5, null],
      "experiment": {"experiment": "scaling", "seed": 0, "samples": 50},
      "cap": 500,
      "format": "json",
      "output": "out.json",
      "threads": 1
    }

``null`` in ``reports`` means the agent does not participate.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields

import numpy as np

from . import auditors
from .core import EMPTY, GridSpec, QualityFunction, quality_function
from .existence import desirable_exists, disparity_boundary
from .experiments import (ExperimentConfig, default_threads, rows_to_csv, run_experiment,
                          vcg_counterexample_report)
from .mechanisms import MECHANISMS, best_model_rule, build_mechanism, efficient_linear_rule, run_mechanism
from .valuations import LinearExternalityModel, build_model

CONFIG_KEYS = {"model", "quality", "mechanism", "grid", "tol", "properties", "types",
               "reports", "experiment", "cap", "n", "format", "output", "threads", "seed",
               "quad_step"}
PROPERTIES = ("ic", "ir", "wbb", "efficiency", "desirable", "necessary", "sufficient")


class ConfigError(Exception):
    pass


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = sorted(set(cfg) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s): {', '.join(unknown)}")
    return cfg


def _parse_grid(text: str) -> dict:
    out = {}
    for part in text.split(","):
        key, _, val = part.partition("=")
        key = key.strip().lower()
        if key not in ("d", "upper", "eps", "step", "epsilon"):
            raise ConfigError(f"--grid: unknown field {key!r} (use D=..,eps=..)")
        try:
            num = float(val)
        except ValueError:
            raise ConfigError(f"--grid: {key} needs a number, got {val!r}") from None
        if key in ("d", "upper"):
            out["upper"] = num
        else:
            out["step"] = num
    return out


def _floats(text: str) -> list:
    out = []
    for v in text.split(","):
        if v.strip().lower() in ("", "none", "null", "empty", "∅"):
            out.append(None)
            continue
        try:
            out.append(float(v))
        except ValueError:
            raise ConfigError(f"not a number: {v!r}") from None
    return out


def _merge(args, cfg: dict) -> dict:
    """Apply command-line overrides on top of the config document."""
    cfg = dict(cfg)
    model = dict(cfg.get("model", {}))
    family = getattr(args, "model", None)
    if family:
        if model.get("family") not in (None, family):
            model = {}
        model["family"] = family
    if getattr(args, "alpha", None) is not None:
        model["growth"] = args.alpha
    if getattr(args, "alpha_matrix", None):
        model["alpha"] = json.loads(args.alpha_matrix)
    if model:
        cfg["model"] = model
    grid = dict(cfg.get("grid", {}))
    if getattr(args, "grid", None):
        grid.update(_parse_grid(args.grid))
    if getattr(args, "D", None) is not None:
        grid["upper"] = args.D
    if getattr(args, "eps", None) is not None:
        grid["step"] = args.eps
    if grid:
        cfg["grid"] = grid
    for key in ("mechanism", "tol", "cap", "n", "format", "output", "threads", "seed",
                "quad_step"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "quality", None):
        cfg["quality"] = {"name": args.quality}
    if getattr(args, "property", None):
        cfg["properties"] = args.property.split(",")
    if getattr(args, "types", None):
        cfg["types"] = _floats(args.types)
    if getattr(args, "reports", None):
        cfg["reports"] = _floats(args.reports)
    return cfg


def _agent_count(cfg: dict) -> int:
    model = cfg.get("model", {})
    if "alpha" in model:
        return len(model["alpha"])
    if "types" in cfg:
        return len(cfg["types"])
    return int(cfg.get("n", model.get("n", 2)))


def _grid(cfg: dict) -> GridSpec:
    g = cfg.get("grid")
    if not g or "upper" not in g or "step" not in g:
        raise ConfigError("grid needs both upper (D) and step (eps)")
    try:
        return GridSpec.from_dict(g)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"grid: {exc}") from exc


def _model(cfg: dict, n: int):
    spec = dict(cfg.get("model") or {})
    if "family" not in spec:
        raise ConfigError("model.family is required")
    if spec["family"] == "linear" and "alpha" not in spec:
        # seeded instance with a positive diagonal
        rng = np.random.default_rng(int(cfg.get("seed", 0)))
        alpha = rng.uniform(-1, 1, (n, n))
        np.fill_diagonal(alpha, np.abs(np.diag(alpha)))
        spec["alpha"] = alpha.tolist()
    if spec["family"] in ("power-market", "proportional"):
        spec.setdefault("n", n)
    try:
        return build_model(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from exc


def _quality(cfg: dict, n: int, span: float) -> QualityFunction:
    spec = dict(cfg.get("quality") or {"name": "auto"})
    name = spec.pop("name", "auto")
    if name == "auto":
        # identity rescaled so pooled data never exceeds quality 1
        return QualityFunction.linear(n * span)
    try:
        return quality_function(name, **spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"quality: {exc}") from exc


def _emit(text: str, cfg: dict) -> None:
    out = cfg.get("output")
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def cmd_audit(cfg: dict) -> int:
    n = _agent_count(cfg)
    grid = _grid(cfg)
    model = _model(cfg, n)
    Q = _quality(cfg, n, grid.upper)
    name = cfg.get("mechanism", "mep+best-model")
    try:
        mech = build_mechanism(name, model, Q, n)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"mechanism: {exc}") from exc
    tol = float(cfg.get("tol", 1e-9))
    reports = []
    for prop in cfg.get("properties", ["ic", "ir"]):
        prop = prop.strip().lower()
        if prop == "ic":
            rep = auditors.audit_ic(mech, model, Q, grid, tol)
        elif prop == "ir":
            rep = auditors.audit_ir(mech, model, Q, grid, tol)
        elif prop == "wbb":
            rep = auditors.audit_wbb(mech, grid, tol)
        elif prop == "efficiency":
            rep = auditors.audit_efficiency(mech, model, Q, grid, None, tol)
        elif prop == "desirable":
            rep = auditors.audit_desirable(mech, model, Q, grid, None, tol)
        elif prop in ("necessary", "sufficient"):
            fn = auditors.check_necessary_conditions if prop == "necessary" \
                else auditors.check_sufficient_conditions
            rep = fn(mech, model, Q, grid, float(cfg.get("quad_step", 1e-3)),
                     float(cfg.get("tol", 1e-6)))
        else:
            raise ConfigError(f"unknown property {prop!r}; choose from {', '.join(PROPERTIES)}")
        reports.append(rep)
    _emit(_json({"mechanism": mech.label, "reports": [r.to_dict() for r in reports]}), cfg)
    return 0 if all(r.passed for r in reports) else 1


def cmd_mep(cfg: dict) -> int:
    if "types" not in cfg:
        raise ConfigError("mep needs types")
    types = cfg["types"]
    n = len(types)
    model = _model(cfg, n)
    Q = _quality(cfg, n, max(types) or 1.0)
    if isinstance(model, LinearExternalityModel):
        mech = build_mechanism(cfg.get("mechanism", "mep+efficient-linear"), model, Q, n)
    else:
        mech = build_mechanism(cfg.get("mechanism", "mep+best-model"), model, Q, n)
    reports = [EMPTY if r is None else r for r in cfg.get("reports", types)]
    try:
        out = run_mechanism(mech, model, Q, types, reports)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _emit(_json({"mechanism": mech.label, "allocation": out.allocation.tolist(),
                 "payments": out.payments.tolist(),
                 "effective_qualities": out.effective_qualities.tolist(),
                 "values": out.values.tolist(), "utilities": out.utilities.tolist(),
                 "revenue": out.revenue, "welfare": out.welfare}), cfg)
    return 0


def cmd_vcg_example(cfg: dict) -> int:
    report = vcg_counterexample_report()
    _emit(_json(report), cfg)
    return 1 if report["ic_violated"] else 0


def cmd_existence(cfg: dict) -> int:
    n = _agent_count(cfg)
    grid = _grid(cfg)
    model = _model(cfg, n)
    Q = _quality(cfg, n, grid.upper)
    if isinstance(model, LinearExternalityModel):
        alloc = efficient_linear_rule(model.alpha, Q)
    else:
        alloc = best_model_rule(Q)
    table = desirable_exists(model, Q, alloc, n, grid, float(cfg.get("tol", 1e-9)))
    if cfg.get("format") == "csv":
        _emit(table.to_csv(), cfg)
    else:
        _emit(_json({"feasible": table.feasible, "witness": table.witness,
                     "min_budget": table.min_budget, "grid": grid.to_dict(), "n": n}), cfg)
    return 0 if table.feasible else 1


def cmd_boundary(cfg: dict) -> int:
    growth = cfg.get("model", {}).get("growth")
    if growth is None:
        raise ConfigError("boundary needs --alpha (market growth rate)")
    res = disparity_boundary(float(growth), int(cfg.get("cap", 500)), int(cfg.get("n", 2)))
    if cfg.get("format") == "csv":
        _emit(f"alpha,boundary,open_above\n{float(growth)!r},{res.boundary},"
              f"{'true' if res.open_above else 'false'}\n", cfg)
    else:
        _emit(_json({"alpha": res.growth, "boundary": res.boundary,
                     "open_above": res.open_above, "monotone": res.monotone}), cfg)
    return 0


def cmd_sweep(cfg: dict, args) -> int:
    exp = dict(cfg.get("experiment", {}))
    if args.experiment:
        exp["experiment"] = args.experiment
    for key in ("seed", "threads", "cap"):
        if key in cfg:
            exp[key] = cfg[key]
    if args.samples is not None:
        exp["samples"] = args.samples
    exp.setdefault("threads", default_threads())
    allowed = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(exp) - allowed)
    if unknown:
        raise ConfigError(f"experiment: unknown key(s): {', '.join(unknown)}")
    for key in ("n_range", "type_range", "alpha_range"):
        if key in exp:
            exp[key] = tuple(exp[key])
    try:
        ecfg = ExperimentConfig(**exp)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"experiment: {exc}") from exc
    _emit(rows_to_csv(ecfg.experiment, run_experiment(ecfg)), cfg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpmarket", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config document")
        p.add_argument("--output", help="write here instead of stdout")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--threads", type=int)
        p.add_argument("--seed", type=int)
        return p

    def modelled(p):
        p.add_argument("--model", choices=("linear", "power-market", "proportional"))
        p.add_argument("--alpha", type=float, help="market growth rate (power-market)")
        p.add_argument("--alpha-matrix", help="JSON externality matrix (linear)")
        p.add_argument("--quality", choices=("auto", "identity", "linear", "sigmoid"))
        p.add_argument("--n", type=int)
        return p

    def gridded(p):
        p.add_argument("--grid", help="D=<upper>,eps=<step>")
        p.add_argument("--D", type=float)
        p.add_argument("--eps", type=float)
        p.add_argument("--tol", type=float)
        return p

    p = gridded(modelled(common(sub.add_parser("audit", help="audit mechanism properties"))))
    p.add_argument("--mechanism", choices=MECHANISMS)
    p.add_argument("--property", help=f"comma list of {', '.join(PROPERTIES)}")
    p.add_argument("--quad-step", dest="quad_step", type=float)

    p = modelled(common(sub.add_parser("mep", help="run a mechanism on one type profile")))
    p.add_argument("--mechanism", choices=MECHANISMS)
    p.add_argument("--types", help="comma-separated true types")
    p.add_argument("--reports", help="comma-separated reports; 'empty' to abstain")

    common(sub.add_parser("vcg-example", help="fixed-market VCG counterexample"))
    gridded(modelled(common(sub.add_parser("existence", help="decide desirable-mechanism existence"))))

    p = modelled(common(sub.add_parser("boundary", help="disparity boundary for one growth rate")))
    p.add_argument("--cap", type=int)

    p = common(sub.add_parser("sweep", help="run an experiment and write CSV"))
    p.add_argument("--experiment", choices=("scaling", "type-sweep", "boundary"))
    p.add_argument("--samples", type=int)
    p.add_argument("--cap", type=int)
    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge(args, load_config(args.config))
        if args.command == "audit":
            return cmd_audit(cfg)
        if args.command == "mep":
            return cmd_mep(cfg)
        if args.command == "vcg-example":
            return cmd_vcg_example(cfg)
        if args.command == "existence":
            return cmd_existence(cfg)
        if args.command == "boundary":
            return cmd_boundary(cfg)
        return cmd_sweep(cfg, args)
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"mpmarket: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
