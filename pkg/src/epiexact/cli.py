"""Command-line front end.

    epiexact [--config FILE|-] [--out DIR] [--tol-root X] [--tol-constraint X]
             [--tol-verify X] {spectrum,build,verify,sweep,equilibrium}

Exit codes: 0 success, 1 invalid input, 2 degenerate spectrum,
3 constraint or verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import jsonschema

from . import jsonio
from .errors import (
    DuplicateMu,
    EpiExactError,
    GuardViolation,
    HorizonOverflow,
    NotARoot,
    NotEquilibriumParameterization,
    SingularDenominator,
    StepUnderflow,
    ZeroPolynomial,
)
from .integrate import verify_modeset
from .model import PARAM_KEYS, ModelParameters
from .search import FREE_NAMES, sweep_constraint
from .solutions import (
    DEFAULT_WEIGHTS,
    ModeSet,
    build_modes,
    constraint_residuals,
    equilibrium,
    equilibrium_residual,
    weighted_amplitudes,
)
from .spectrum import quartic_residual, sign_pattern, solve_quartic, spectrum_for

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE, EXIT_FAILED = 0, 1, 2, 3

_number = {"type": "number"}
_cnumber = {"oneOf": [_number, {"type": "array", "items": _number, "minItems": 2, "maxItems": 2}]}
_params = {
    "type": "object",
    "properties": {k: _cnumber for k in PARAM_KEYS},
    "additionalProperties": False,
}
_index = {"type": "integer", "minimum": 0, "maximum": 3}
_modes = {
    "parameters": _params,
    "K": {"type": "integer", "minimum": 1, "maximum": 4},
    "roots": {"type": "array", "items": _index, "minItems": 1, "maxItems": 4},
    "amplitudes": {"type": "array", "items": _cnumber, "minItems": 1, "maxItems": 4},
    "weights": {"type": "array", "items": _number, "minItems": 1, "maxItems": 4},
}


def _schema(props, required):
    return {"type": "object", "properties": props, "required": required,
            "additionalProperties": False}


SCHEMAS = {
    "spectrum": _schema({
        "parameters": _params,
        "coefficients": {"type": "array", "items": _cnumber, "minItems": 5, "maxItems": 5},
    }, []),
    "build": _schema(dict(_modes), ["parameters", "K"]),
    "verify": _schema({
        **_modes,
        "t_end": {"type": "number", "minimum": 0},
        "perturbation": _schema({
            "mode": _index,
            "component": _index,
            "relative": _number,
        }, ["mode", "component", "relative"]),
    }, ["parameters", "K"]),
    "sweep": _schema({
        "parameters": _params,
        "free": {"enum": list(FREE_NAMES)},
        "range": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
        "grid_n": {"type": "integer", "minimum": 8},
        "K": {"type": "integer", "minimum": 1, "maximum": 4},
        "pair": {"type": "array", "items": _index, "minItems": 1, "maxItems": 4},
    }, ["parameters", "free", "range"]),
    "equilibrium": _schema({
        "parameters": _params,
        "x4bar": _cnumber,
        "pin_kD_to_root": _index,
    }, ["parameters"]),
}


class ConfigError(Exception):
    pass


def _load_config(path, command):
    try:
        if path == "-":
            cfg = json.load(sys.stdin)
        else:
            with open(path, encoding="utf-8") as fh:
                cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        jsonschema.validate(cfg, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from None
    return cfg


def _cplx(v):
    return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def _params(cfg):
    try:
        return ModelParameters.from_json(cfg["parameters"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _modeset(cfg, args) -> ModeSet:
    p = _params(cfg)
    K = cfg["K"]
    roots = cfg.get("roots", list(range(K)))
    if len(roots) != K:
        raise ConfigError(f"K={K} needs {K} root indices")
    spec = spectrum_for(p)
    if any(i >= len(spec.roots) for i in roots):
        raise ConfigError(f"root index out of range (spectrum has {len(spec.roots)} roots)")
    if len(set(roots)) != len(roots):
        raise DuplicateMu(f"duplicate root indices {roots}")
    mus = [spec.roots[i] for i in roots]
    if "amplitudes" in cfg:
        a4 = [_cplx(v) for v in cfg["amplitudes"]]
        if len(a4) != K:
            raise ConfigError(f"K={K} needs {K} amplitudes")
    else:
        a4 = weighted_amplitudes(p, mus, cfg.get("weights", DEFAULT_WEIGHTS))
    return build_modes(p, mus, a4, root_tol=args.tol_root)


def cmd_spectrum(cfg, args):
    if "coefficients" in cfg:
        c = [_cplx(v) for v in cfg["coefficients"]]
        spec = solve_quartic(c)
    elif "parameters" in cfg:
        p = _params(cfg)
        spec = spectrum_for(p)
    else:
        raise ConfigError("spectrum needs parameters or coefficients")
    out = spec.to_json()
    if "coefficients" not in cfg:
        out["sign_patterns"] = [sign_pattern(p, z) for z in spec.roots]
    jsonio.write(os.path.join(args.out, "spectrum.json"), out)
    return EXIT_DEGENERATE if spec.degenerate_flag else EXIT_OK


def cmd_build(cfg, args):
    ms = _modeset(cfg, args)
    rep = constraint_residuals(ms.params, ms.mus, tol=args.tol_constraint)
    jsonio.write(os.path.join(args.out, "modeset.json"), ms.to_json())
    jsonio.write(os.path.join(args.out, "constraint_report.json"), rep.to_json())
    return EXIT_OK if rep.satisfied else EXIT_FAILED


def cmd_verify(cfg, args):
    ms = _modeset(cfg, args)
    if "perturbation" in cfg:
        pt = cfg["perturbation"]
        if pt["mode"] >= ms.K:
            raise ConfigError("perturbation mode index out of range")
        amps = [list(m.a) for m in ms.modes]
        amps[pt["mode"]][pt["component"]] *= 1 + pt["relative"]
        ms = ms.with_amplitudes(amps)
    out = {"K": ms.K, "mus": list(ms.mus)}
    try:
        rep = verify_modeset(ms, t_end=cfg.get("t_end"), deviation_tol=args.tol_verify)
    except (SingularDenominator, StepUnderflow, HorizonOverflow) as exc:
        out.update({"passed": False, "error": type(exc).__name__, "message": str(exc)})
        jsonio.write(os.path.join(args.out, "verification.json"), out)
        return EXIT_FAILED
    out.update(rep.to_json())
    jsonio.write(os.path.join(args.out, "verification.json"), out)
    with open(os.path.join(args.out, "trajectory.csv"), "w", encoding="utf-8", newline="") as fh:
        rep.trajectory.write_csv(fh)
    return EXIT_OK if rep.passed else EXIT_FAILED


def cmd_sweep(cfg, args):
    p = _params(cfg)
    K = cfg.get("K", 2)
    pair = tuple(cfg.get("pair", list(range(K))))
    lo, hi = cfg["range"]
    try:
        res = sweep_constraint(p, cfg["free"], lo, hi, cfg.get("grid_n", 64), K, pair,
                               tol=args.tol_constraint)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    with open(os.path.join(args.out, "sweep.csv"), "w", encoding="utf-8", newline="") as fh:
        res.write_csv(fh)
    jsonio.write(os.path.join(args.out, "solutions.json"), res.to_json())
    return EXIT_OK


def cmd_equilibrium(cfg, args):
    p = _params(cfg)
    if "pin_kD_to_root" in cfg:
        spec = spectrum_for(p)
        if cfg["pin_kD_to_root"] >= len(spec.roots):
            raise ConfigError("pin_kD_to_root index out of range")
        p = p.with_(kD=spec.roots[cfg["pin_kD_to_root"]])
    x4bar = _cplx(cfg.get("x4bar", 1.0))
    out = {"kD": p.kD, "quartic_residual": quartic_residual(p, p.kD)}
    try:
        xbar = equilibrium(p, x4bar, root_tol=args.tol_root)
    except NotEquilibriumParameterization as exc:
        out.update({"ok": False, "error": "NotEquilibriumParameterization", "message": str(exc)})
        jsonio.write(os.path.join(args.out, "equilibrium.json"), out)
        return EXIT_FAILED
    except SingularDenominator as exc:
        out.update({"ok": False, "error": "SingularDenominator", "message": str(exc)})
        jsonio.write(os.path.join(args.out, "equilibrium.json"), out)
        return EXIT_FAILED
    out.update({"ok": True, "xbar": list(xbar.x), "rhs_residual": equilibrium_residual(p, xbar),
                "parameters": p.to_json()})
    jsonio.write(os.path.join(args.out, "equilibrium.json"), out)
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "build": cmd_build,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "equilibrium": cmd_equilibrium,
}


def _add_globals(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d("-"), help="JSON config path, or - for stdin")
    parser.add_argument("--out", default=d("."), help="output directory")
    parser.add_argument("--tol-root", type=float, default=d(1e-9))
    parser.add_argument("--tol-constraint", type=float, default=d(1e-9))
    parser.add_argument("--tol-verify", type=float, default=d(1e-6))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epiexact", description=__doc__.splitlines()[0])
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _add_globals(sub.add_parser(name), suppress=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = _load_config(args.config, args.command)
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, DuplicateMu, GuardViolation, NotARoot, ZeroPolynomial) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (EpiExactError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
