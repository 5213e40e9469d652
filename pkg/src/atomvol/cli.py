"""``atomvol`` command-line interface.

Every command writes a data table (CSV or JSON) to ``--out`` or stdout.
Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure,
4 arbitrage or domain violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from typing import Any, Sequence

import numpy as np

from atomvol import __version__
from atomvol.asymptotics import J2, J3, expansion_terms, gulisashvili_iv, normalized_smile
from atomvol.bs import implied_vol
from atomvol.config import COMMANDS, ConfigError, GridSpec, McSpec, RunConfig, parse_param
from atomvol.errors import (
    ArbitrageError,
    DivergenceWarning,
    DomainError,
    NumericalError,
    UnsupportedModelError,
)
from atomvol.estimators import TABLE1_MONEYNESS, TABLE_COLUMNS, table1
from atomvol.models import MODELS, AtomDistribution, Merton, model_from_dict
from atomvol.montecarlo import McConfig, mc_price
from atomvol.specfun import norm_cdf_inv
from atomvol.symmetry import SWAP_KINDS, swap_strike
from atomvol.validation import FAMILIES, validate

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_DOMAIN = 0, 2, 3, 4

TABLE1_PARAMS = {"sigma": 0.3, "lam": 0.15, "spot": 100.0, "maturity": 0.5}
CEV_COMPARE_PARAMS = {"sigma": 0.1, "beta": -0.4, "spot": 0.1, "maturity": 6.13}
DEFAULT_GRIDS = {
    "smile": GridSpec(-30.0, -0.5, 60),
    "compare-expansions": GridSpec(-30.0, -0.5, 200),
    "validate": GridSpec(-10.0, -0.01, 100),
    # cutoffs in units of the forward
    "swap": GridSpec(1e-10, 1e-4, 7, "log"),
}
SMILE_COLUMNS = ("x", "K", "put", "iv", "J", "J2", "J3", "gulisashvili_iv", "d2")
MC_COLUMNS = ("put_mc", "put_mc_se", "iv_mc", "iv_mc_lo", "iv_mc_hi")
COMPARE_COLUMNS = (
    "x", "K", "iv", "order3", "gulisashvili_full", "gulisashvili_2term",
    "err_order3", "err_gulisashvili_full", "err_gulisashvili_2term",
)


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def _fmt(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _json_clean(obj):
    if isinstance(obj, dict):
        return {k: _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def render_table(columns: Sequence[str], rows: list[Sequence[Any]], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_json_clean([dict(zip(columns, r)) for r in rows]), indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def render_doc(doc: dict) -> str:
    return json.dumps(_json_clean(doc), indent=2) + "\n"


# --------------------------------------------------------------------------
# model construction
# --------------------------------------------------------------------------


def build_model(name: str | None, params: dict) -> AtomDistribution:
    if name is None:
        raise ConfigError("this command needs --model")
    if name not in MODELS:
        raise ConfigError(f"unknown model {name!r}; choose from {sorted(MODELS)}")
    params = dict(params)
    p_star = params.pop("p_star", None)
    try:
        model = model_from_dict({"model": name, "params": params})
    except DomainError as exc:
        raise ConfigError(f"bad parameters for {name}: {exc}") from None
    if p_star is not None:
        object.__setattr__(model, "p_star", float(p_star))
    return model


def _nan_on_error(fun, *args, **kw):
    try:
        return float(fun(*args, **kw))
    except (DomainError, NumericalError, ArbitrageError):
        return math.nan


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_smile(cfg: RunConfig) -> str:
    model = build_model(cfg.model, cfg.params)
    x = (cfg.grid or DEFAULT_GRIDS["smile"]).values()
    T = model.maturity
    p = model.mass_at_zero
    K = np.atleast_1d(model.strike(x))
    put = np.atleast_1d(model.put(K))
    iv = np.atleast_1d(model.implied_vol(x))
    has_atom = 0.0 < p < 1.0
    rows = []
    for xi, Ki, Pi, vi in zip(x, K, put, iv):
        left = xi < 0.0
        J = float(normalized_smile(xi, T, vi)) if left else math.nan
        j2 = float(J2(xi, T, p)) if left and has_atom else math.nan
        j3 = float(J3(xi, T, p)) if left and has_atom else math.nan
        g = _nan_on_error(gulisashvili_iv, xi, T, p) if left and has_atom else math.nan
        d2 = -xi / (vi * math.sqrt(T)) - 0.5 * vi * math.sqrt(T) if vi > 0.0 else math.nan
        rows.append([xi, Ki, Pi, vi, J, j2, j3, g, d2])
    columns = list(SMILE_COLUMNS)
    if cfg.mc is not None:
        res = mc_price(model, K, McConfig(seed=cfg.seed, n_paths=cfg.mc.paths, n_steps=cfg.mc.steps, n_workers=cfg.mc.workers))
        F = model.forward
        for row, xi, pm, se in zip(rows, x, res.put, res.stderr):
            ivs = [_nan_on_error(implied_vol, v / F, xi, T, kind="put") for v in (pm, pm - 1.96 * se, pm + 1.96 * se)]
            row.extend([pm, se, *ivs])
        columns += MC_COLUMNS
    return render_table(columns, rows, cfg.format)


def cmd_mass(cfg: RunConfig) -> str:
    model = build_model(cfg.model, cfg.params)
    p = model.mass_at_zero
    doc: dict[str, Any] = {
        "model": model.to_dict(),
        "mass_at_zero": p,
        "q": float(norm_cdf_inv(p)),
    }
    if cfg.mc is not None:
        res = mc_price(model, [model.forward], McConfig(seed=cfg.seed, n_paths=cfg.mc.paths, n_steps=cfg.mc.steps, n_workers=cfg.mc.workers))
        doc["mc"] = {
            "seed": cfg.seed,
            "paths": cfg.mc.paths,
            "steps": cfg.mc.steps,
            "absorbed_fraction": res.absorbed_fraction,
            "absorbed_stderr": res.absorbed_stderr,
        }
    if cfg.format == "csv":
        cols = ["mass_at_zero", "q"] + (["absorbed_fraction", "absorbed_stderr"] if "mc" in doc else [])
        vals = [doc["mass_at_zero"], doc["q"]] + ([doc["mc"]["absorbed_fraction"], doc["mc"]["absorbed_stderr"]] if "mc" in doc else [])
        return render_table(cols, [vals], "csv")
    return render_doc(doc)


def cmd_survival_table(cfg: RunConfig) -> str:
    name = cfg.model or "merton"
    if name != "merton":
        raise ConfigError("survival-table is defined for the Merton model")
    params = {**TABLE1_PARAMS, **cfg.params}
    if "p" in cfg.params:
        params.pop("lam")
    model = build_model("merton", params)
    assert isinstance(model, Merton)
    moneyness = cfg.options.get("moneyness", TABLE1_MONEYNESS)
    rows = [r.as_tuple() for r in table1(model, moneyness)]
    return render_table(TABLE_COLUMNS, rows, cfg.format)


def cmd_swap(cfg: RunConfig) -> str:
    model = build_model(cfg.model, cfg.params)
    kind = cfg.options.get("kind", "log_variance")
    if kind not in SWAP_KINDS:
        raise ConfigError(f"swap kind must be one of {SWAP_KINDS}")
    if kind != "log_variance":
        q = swap_strike(model, kind)
        return render_doc({"model": model.to_dict(), "quotes": [q.to_dict()]})
    eps = (cfg.grid or DEFAULT_GRIDS["swap"]).values() * model.forward
    quotes = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DivergenceWarning)
        for e in eps:
            quotes.append(swap_strike(model, kind, float(e)))
    vals = np.array([q.value for q in quotes])
    logs = np.log(1.0 / eps)
    slopes = np.diff(vals) / np.diff(logs) if len(eps) > 1 else np.array([])
    doc = {
        "model": model.to_dict(),
        "quotes": [q.to_dict() for q in quotes],
        "slope_vs_log_inverse_cutoff": slopes,
        "expected_slope": 2.0 * model.mass_at_zero / model.maturity,
        "diverges": bool(model.mass_at_zero > 0.0),
    }
    return render_doc(doc)


def cmd_validate(cfg: RunConfig) -> str:
    family = cfg.model or "sigma-gamma"
    if family not in FAMILIES:
        raise ConfigError(f"unknown smile family {family!r}; choose from {FAMILIES}")
    params = dict(cfg.params)
    need = {"flat": ("sigma",), "sigma-gamma": ("gamma",), "guo": ("alpha", "sigma")}[family]
    missing = [k for k in need if k not in params]
    if missing:
        raise ConfigError(f"family {family} needs --param {', '.join(missing)}")
    grid = (cfg.grid or DEFAULT_GRIDS["validate"]).values()
    report = validate(family, params, grid)
    if cfg.format == "csv":
        rows = list(zip(report.grid, report.margins, [int(v) for v in report.verdicts]))
        return render_table(("x", "roper", "valid"), rows, "csv")
    return render_doc(report.to_dict())


def cmd_compare_expansions(cfg: RunConfig) -> str:
    name = cfg.model or "cev"
    params = cfg.params if cfg.model else CEV_COMPARE_PARAMS
    model = build_model(name, params)
    x = (cfg.grid or DEFAULT_GRIDS["compare-expansions"]).values()
    if np.any(x >= 0.0):
        raise ConfigError("compare-expansions needs a grid with x < 0")
    rows = compare_expansions(model, x)
    return render_table(COMPARE_COLUMNS, rows, cfg.format)


def compare_expansions(model: AtomDistribution, x: np.ndarray) -> list[list[float]]:
    """Rows of :data:`COMPARE_COLUMNS` on a left-wing grid."""
    T = model.maturity
    p = model.mass_at_zero
    iv = np.atleast_1d(model.implied_vol(x))
    o3 = np.atleast_1d(expansion_terms(x, T, p)[2])
    rows = []
    for xi, vi, ai in zip(x, iv, o3):
        g3 = _nan_on_error(gulisashvili_iv, xi, T, p)
        g2 = _nan_on_error(gulisashvili_iv, xi, T, p, terms=2)
        rows.append([xi, float(model.strike(xi)), vi, ai, g3, g2, abs(vi - ai), abs(vi - g3), abs(vi - g2)])
    return rows


HANDLERS = {
    "smile": cmd_smile,
    "mass": cmd_mass,
    "survival-table": cmd_survival_table,
    "swap": cmd_swap,
    "validate": cmd_validate,
    "compare-expansions": cmd_compare_expansions,
}


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 2 with a one-line message
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def make_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="atomvol", description="Smiles, masses and diagnostics for laws with an atom at zero.")
    ap.add_argument("--version", action="version", version=f"atomvol {__version__}")
    ap.add_argument("command", nargs="?", choices=COMMANDS)
    ap.add_argument("--config", help="JSON run configuration (replaces the other options)")
    ap.add_argument("--model", help=f"model name {sorted(MODELS)} or smile family {FAMILIES} for validate")
    ap.add_argument("--param", action="append", default=[], metavar="K=V", help="model parameter, repeatable")
    ap.add_argument("--lambda", dest="lam", type=float, help="Merton default intensity (alias for --param lam=...)")
    ap.add_argument("--grid", help="lo:hi:n[:log] (log-moneyness; cutoffs over the forward for swap)")
    ap.add_argument("--out", help="output path (default stdout)")
    ap.add_argument("--format", choices=("csv", "json"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--mc", help="paths=N,steps=M[,workers=W]: add Monte Carlo columns")
    ap.add_argument("--kind", choices=SWAP_KINDS, help="swap kind")
    ap.add_argument("--moneyness", help="comma-separated K/S0 values for survival-table")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                cfg = RunConfig.from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        if ns.command and ns.command != cfg.command:
            raise ConfigError("command on the command line disagrees with the config file")
        return cfg
    if not ns.command:
        raise ConfigError("a command is required")
    params = dict(parse_param(t) for t in ns.param)
    if ns.lam is not None:
        params["lam"] = ns.lam
    options: dict[str, Any] = {}
    if ns.kind:
        options["kind"] = ns.kind
    if ns.moneyness:
        try:
            options["moneyness"] = [float(v) for v in ns.moneyness.split(",")]
        except ValueError:
            raise ConfigError("--moneyness expects comma-separated numbers") from None
    fmt = ns.format or ("json" if ns.command in ("mass", "swap", "validate") else "csv")
    return RunConfig(
        command=ns.command,
        model=ns.model,
        params=params,
        grid=GridSpec.parse(ns.grid) if ns.grid else None,
        out=ns.out,
        format=fmt,
        seed=ns.seed,
        mc=McSpec.parse(ns.mc) if ns.mc else None,
        options=options,
    )


def run(cfg: RunConfig) -> str:
    return HANDLERS[cfg.command](cfg)


def _attach_values(argv: Sequence[str]) -> list[str]:
    """Glue ``--grid -3:-1:5`` into ``--grid=-3:-1:5`` so argparse accepts the leading minus."""
    out: list[str] = []
    it = iter(argv)
    for tok in it:
        if tok == "--grid":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"--grid={nxt}")
        else:
            out.append(tok)
    return out


def main(argv: Sequence[str] | None = None) -> int:
    argv = _attach_values(sys.argv[1:] if argv is None else argv)
    try:
        ns = make_parser().parse_args(argv)
        cfg = config_from_args(ns)
        text = run(cfg)
    except ConfigError as exc:
        print(f"atomvol: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"atomvol: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ArbitrageError, DomainError, UnsupportedModelError) as exc:
        print(f"atomvol: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
