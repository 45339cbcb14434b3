"""Command-line interface.

    msis theory   --poles 0.8:0.1 --d 0.4 [--q 50 --r 48 --tau-max 50] [-o table.csv]
    msis estimate --input series.txt --mode earfi [-o result.json]
    msis simulate --poles 0.8:0.1 --d 0.4 --n 300 --reps 100 --seed 1 --out DIR
    msis study    --config grid.yaml --out DIR
    msis replay   FILE            # re-run the command recorded in FILE's manifest

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
import warnings
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import DataError, NumericalError
from .estimation import FitConfig, Mode, d_significance, fit
from .fracdiff import DEFAULT_Q, ArfiModel, poles_to_ar
from .io import (
    STUDY_COLUMNS,
    THEORY_COLUMNS,
    RunManifest,
    atomic_write,
    format_series,
    format_table,
    json_safe,
    read_manifest,
    read_series,
)
from .simulate import SimSpec, StudyConfig, cell_name, generate_replicate, parse_poles, run_cell
from .statespace import DEFAULT_R, multiscale_storage

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    text = text.strip()
    return [float(t) for t in text.split(",") if t.strip()] if text else []


def _model_from_args(ns) -> ArfiModel:
    if (ns.poles is None) == (ns.ar is None):
        raise UsageError("give exactly one of --poles or --ar")
    if ns.poles is not None:
        a = poles_to_ar(parse_poles(ns.poles)).b
    else:
        a = np.array(_float_list(ns.ar))
    return ArfiModel(a, ns.d, ns.sigma2)


def _emit(text: str, output: str | None) -> None:
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write(output, text)


def _profile(model: ArfiModel, q: int, r: int, tau_max: int):
    if tau_max < 1:
        raise UsageError("--tau-max must be >= 1")
    return multiscale_storage(model, q, r, range(1, tau_max + 1))


def _profile_columns(prof) -> dict:
    return {"tau": prof.tau, "f_tau": prof.f_tau, "S": prof.S,
            "sigma2_x": prof.sigma2_x, "sigma2_e": prof.sigma2_e}


# --------------------------------------------------------------------------
# commands

def cmd_theory(ns) -> int:
    model = _model_from_args(ns)
    prof = _profile(model, ns.q, ns.r, ns.tau_max)
    manifest = RunManifest.create("theory", _params(ns))
    cols = _profile_columns(prof)
    assert tuple(cols) == THEORY_COLUMNS
    _emit(format_table(cols, manifest), ns.output)
    return EXIT_OK


def cmd_estimate(ns) -> int:
    x = read_series(ns.input)
    if x.size < 64:
        raise DataError(f"{ns.input}: need at least 64 samples, got {x.size}")
    cfg = FitConfig(Mode.parse(ns.mode), ns.q, ns.pmin, ns.pmax)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = fit(x, cfg)
    q_eff = ns.q if res.model.d != 0.0 else 0
    prof = _profile(res.model, q_eff, ns.r, ns.tau_max)
    if res.mode is Mode.EAR:
        significance = None
    else:
        lo, hi, sig = d_significance(res.d_hat, res.d_stderr, 0.05)
        significance = {"level": 0.05, "lo": lo, "hi": hi, "significant": sig}
    doc = {
        "manifest": RunManifest.create("estimate", _params(ns)).to_dict(),
        "fit": {
            "mode": res.mode.value,
            "n": int(x.size),
            "d_hat": res.d_hat,
            "d_stderr": res.d_stderr,
            "d_significance": significance,
            "p_selected": res.p_selected,
            "ar_coefficients": res.model.a,
            "sigma2": res.model.sigma2_e,
            "model_d": res.model.d,
            "bic_curve": {str(k): v for k, v in res.bic_curve.items()},
            "warnings": list(res.warnings),
        },
        "table": {"columns": list(THEORY_COLUMNS),
                  "rows": [list(r) for r in zip(*_profile_columns(prof).values())]},
    }
    _emit(json.dumps(json_safe(doc), indent=2, sort_keys=True) + "\n", ns.output)
    return EXIT_OK


def cmd_simulate(ns) -> int:
    model = _model_from_args(ns)
    spec = SimSpec(model, ns.n, ns.q, ns.reps, ns.seed, ns.burnin)
    out = Path(ns.out)
    manifest = RunManifest.create("simulate", _params(ns))
    try:
        out.mkdir(parents=True, exist_ok=True)
        width = max(4, len(str(ns.reps - 1)))
        for i in range(ns.reps):
            atomic_write(out / f"series_{i:0{width}d}.txt",
                         format_series(generate_replicate(spec, i), manifest))
        atomic_write(out / "manifest.json",
                     json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise DataError(f"cannot write to {out}: {exc}") from None
    return EXIT_OK


STUDY_KEYS = {
    "poles", "d", "n", "reps", "seed", "estimators", "tau_max", "q", "r",
    "pmin", "pmax", "sigma2", "burnin", "sampen_m", "sampen_r",
}


def load_study_config(path) -> StudyConfig:
    """Read a YAML (or JSON) study grid; errors name the offending field."""
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise UsageError(f"config {path}: not valid YAML/JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise UsageError(f"config {path}: expected a mapping of keys to values")
    unknown = sorted(set(raw) - STUDY_KEYS)
    if unknown:
        raise UsageError(f"config field {unknown[0]!r}: unknown key")
    kwargs = {}
    for key, value in raw.items():
        try:
            if key == "poles":
                sets = value if isinstance(value, list) else [value]
                kwargs[key] = [parse_poles(s) if isinstance(s, str) else [tuple(p) for p in s]
                               for s in sets]
            elif key in ("d", "n", "estimators"):
                kwargs[key] = value if isinstance(value, list) else [value]
                kwargs[key] = [str(v) if key == "estimators" else (int(v) if key == "n" else float(v))
                               for v in kwargs[key]]
            elif key in ("sigma2", "sampen_r"):
                kwargs[key] = float(value)
            elif value is None and key == "burnin":
                kwargs[key] = None
            else:
                if isinstance(value, bool) or int(value) != value:
                    raise ValueError("expected an integer")
                kwargs[key] = int(value)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"config field {key!r}: {exc}") from None
    try:
        return StudyConfig(**kwargs)
    except ValueError as exc:
        raise UsageError(f"config: {exc}") from None


def cmd_study(ns) -> int:
    cfg = load_study_config(ns.config)
    out = Path(ns.out)
    params = _params(ns)
    params["grid"] = json_safe({k: getattr(cfg, k) for k in sorted(STUDY_KEYS)})
    manifest = RunManifest.create("study", params)
    failures = 0
    index = []
    for pi, poles in enumerate(cfg.poles):
        for d in cfg.d:
            for n in cfg.n:
                for cell in run_cell(cfg, poles, d, n, max_workers=ns.workers):
                    name = cell_name(cell, pi) + ".csv"
                    try:
                        atomic_write(out / name, format_table(cell.table(), manifest))
                    except OSError as exc:
                        raise DataError(f"cannot write to {out}: {exc}") from None
                    failures += len(cell.errors)
                    index.append({"file": name, "poles": cell.poles, "d": cell.d, "n": cell.n,
                                  "estimator": cell.estimator, "failed_replicates": len(cell.errors),
                                  "errors": cell.errors[:10]})
    atomic_write(out / "manifest.json", json.dumps(
        json_safe({"manifest": manifest.to_dict(), "cells": index}), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_replay(ns) -> int:
    manifest = read_manifest(ns.file)
    params = dict(manifest.params)
    if ns.output is not None:
        key = "out" if manifest.command in ("simulate", "study") else "output"
        params[key] = ns.output
    argv = [manifest.command]
    for key, value in params.items():
        if key in ("command", "grid") or value is None or value is False:
            continue
        flag = "--" + key.replace("_", "-")
        argv.append(flag if value is True else f"{flag}={value}")
    return main(argv)


# --------------------------------------------------------------------------

_REPLAYABLE = {
    "theory": ("poles", "ar", "d", "sigma2", "q", "r", "tau_max", "output"),
    "estimate": ("input", "mode", "q", "r", "tau_max", "pmin", "pmax", "output"),
    "simulate": ("poles", "ar", "d", "sigma2", "q", "n", "reps", "seed", "burnin", "out"),
    "study": ("config", "out", "workers"),
}


def _params(ns) -> dict:
    return {k: getattr(ns, k) for k in _REPLAYABLE[ns.command]}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="msis", description="Multiscale information storage of ARFI processes.")
    parser.add_argument("--version", action="version", version=f"msis {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_flags(p):
        p.add_argument("--poles", help="conjugate pole pairs 'rho:f,rho:f'")
        p.add_argument("--ar", help="AR coefficients 'a1,a2,...'")
        p.add_argument("--d", type=float, default=0.0, help="fractional differencing parameter")
        p.add_argument("--sigma2", type=float, default=1.0, help="innovation variance")
        p.add_argument("--q", type=int, default=DEFAULT_Q, help="truncation lag (default 50)")

    p = sub.add_parser("theory", help="exact storage profile of a given ARFI model")
    model_flags(p)
    p.add_argument("--r", type=int, default=DEFAULT_R, help="FIR order (default 48)")
    p.add_argument("--tau-max", type=int, default=50)
    p.add_argument("-o", "--output", help="table path (default stdout)")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("estimate", help="fit a series and compute its storage profile")
    p.add_argument("--input", required=True, help="one sample per line, '#' comments")
    p.add_argument("--mode", default="earfi", choices=[m.value for m in Mode])
    p.add_argument("--q", type=int, default=DEFAULT_Q)
    p.add_argument("--r", type=int, default=DEFAULT_R)
    p.add_argument("--tau-max", type=int, default=50)
    p.add_argument("--pmin", type=int, default=2)
    p.add_argument("--pmax", type=int, default=16)
    p.add_argument("-o", "--output", help="JSON result path (default stdout)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="write seeded ARFI realizations")
    model_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burnin", type=int, default=None, help="default 1000 + q")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("study", help="finite-sample study over a configured grid")
    p.add_argument("--config", required=True, help="YAML/JSON grid file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=None, help="replicate processes")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("replay", help="re-run the command recorded in a result file")
    p.add_argument("file")
    p.add_argument("-o", "--output", help="write elsewhere than the recorded path")
    p.set_defaults(func=cmd_replay)
    return parser


_LIST_FLAGS = ("--ar", "--poles")
_NUMERIC_LIST = re.compile(r"^-[\d.]")


def _join_negative_lists(argv: list[str]) -> list[str]:
    # argparse reads "--ar -0.5,0.2" as two options; glue such values to their flag
    out: list[str] = []
    it = iter(range(len(argv)))
    for i in it:
        if argv[i] in _LIST_FLAGS and i + 1 < len(argv) and _NUMERIC_LIST.match(argv[i + 1]):
            out.append(f"{argv[i]}={argv[i + 1]}")
            next(it, None)
        else:
            out.append(argv[i])
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    ns = parser.parse_args(_join_negative_lists(argv))
    try:
        return ns.func(ns)
    except UsageError as exc:
        print(f"msis {ns.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"msis {ns.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataError as exc:
        print(f"msis {ns.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"msis {ns.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"msis {ns.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
