"""Command line front end.

Three subcommand families: ``exact`` prints closed-form tables,
``sim`` runs and exports a single replication, ``mc`` runs a
replicated experiment and reports estimates against oracles.

Every output starts with a metadata header (version, the effective
configuration after merging flags, config file and defaults, and the
seed).  Flags override config-file entries; the environment variable
``FPP_SEED`` supplies a default seed when neither gives one.  ``--jobs``
changes scheduling only, never numbers, so it is not part of the echoed
configuration.

Exit codes: 0 success (and experiment verdict pass), 1 experiment
verdict fail, 2 usage or validation error, 3 runtime error (vertex cap,
precision loss, insufficient surviving data).
"""

import argparse
import json
import os
import sys

from fpp_recovery import __version__
from fpp_recovery.offspring import OffspringError, parse_offspring
from fpp_recovery.engine import (
    RunConfig,
    ValidationError,
    VertexCapError,
    OutOfHorizonError,
    run_replication,
    snapshot,
    jump_chain,
)
from fpp_recovery import exact
from fpp_recovery.exact import PrecisionError, DomainError
from fpp_recovery import experiments

_REQUIRED = object()


# ---------------------------------------------------------------------------
# value parsing and formatting


def _coerce_int(text):
    try:
        return int(text)
    except (TypeError, ValueError):
        raise ValidationError("expected an integer, got %r" % (text,))


def _coerce_float(text):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ValidationError("expected a number, got %r" % (text,))


def _coerce_bool(text):
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValidationError("expected a boolean, got %r" % (text,))


def _coerce_floats(text):
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    parts = [p for p in str(text).split(",") if p.strip()]
    if not parts:
        raise ValidationError("expected a comma-separated list of numbers")
    return tuple(_coerce_float(p) for p in parts)


def _coerce_ints(text):
    return tuple(_coerce_int(p) for p in str(text).split(",") if p.strip())


def _fmt(value):
    # shortest round-trip decimals for reals, plain text otherwise
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v) for v in value)
    return str(value)


def _read_config_file(path):
    values = {}
    try:
        with open(path, "r") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValidationError(
                        "%s:%d: expected key=value" % (path, lineno))
                key, _, val = line.partition("=")
                values[key.strip()] = val.strip()
    except OSError as exc:
        raise ValidationError("cannot read config file: %s" % exc)
    return values


# ---------------------------------------------------------------------------
# parameter resolution: flag > config file > environment > default

_PARAMS = {
    "gamma": _coerce_float,
    "graph": str,
    "n": _coerce_int,
    "m": _coerce_int,
    "m_max": _coerce_int,
    "l": _coerce_int,
    "t": _coerce_float,
    "t_max": _coerce_float,
    "n_max": _coerce_int,
    "reps": _coerce_int,
    "seed": _coerce_int,
    "jobs": _coerce_int,
    "delta": _coerce_int,
    "p": _coerce_float,
    "depth": _coerce_int,
    "eps": _coerce_float,
    "slack": _coerce_float,
    "c_scale": _coerce_float,
    "c_bar": _coerce_float,
    "mean": _coerce_float,
    "r": _coerce_float,
    "q": str,
    "which": str,
    "points": _coerce_floats,
    "n_grid": _coerce_ints,
    "t_grid": _coerce_floats,
    "min_obs": _coerce_int,
    "high_precision": _coerce_bool,
}


def _resolve(args, file_values, wanted):
    """Merge one operation's parameters from all sources.

    ``wanted`` maps parameter name to its default (``_REQUIRED`` marks
    a mandatory one).  Returns the effective dict, coerced.
    """
    out = {}
    for name, default in wanted.items():
        coerce = _PARAMS[name]
        flag_val = getattr(args, name, None)
        if flag_val is not None:
            out[name] = coerce(flag_val)
        elif name in file_values:
            out[name] = coerce(file_values[name])
        elif name == "seed" and os.environ.get("FPP_SEED") is not None:
            out[name] = _coerce_int(os.environ["FPP_SEED"])
        elif default is _REQUIRED:
            raise ValidationError("missing required parameter --%s"
                                  % name.replace("_", "-"))
        elif default is not None:
            out[name] = default
    return out


# ---------------------------------------------------------------------------
# output emission


def _header_lines(command, config, seed):
    pairs = " ".join("%s=%s" % (k, _fmt(v)) for k, v in sorted(config.items()))
    return ["# version: %s" % __version__,
            "# command: %s" % command,
            "# config: %s" % pairs,
            "# seed: %d" % seed]


def _emit(text, out_path):
    if out_path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out_path, "w", newline="\n") as fh:
            fh.write(text)


def _emit_table(command, config, seed, columns, rows, fmt, out_path,
                extra=()):
    if fmt == "json":
        doc = {"meta": {"version": __version__, "command": command,
                        "config": {k: _fmt(v) for k, v in config.items()},
                        "seed": seed},
               "table": {"columns": list(columns),
                         "rows": [list(r) for r in rows]}}
        for key, val in extra:
            doc[key] = val
        text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    else:
        lines = _header_lines(command, config, seed)
        lines += ["# %s: %s" % (k, _fmt(v)) for k, v in extra]
        lines.append(",".join(columns))
        lines += [",".join(_fmt(v) for v in row) for row in rows]
        text = "\n".join(lines) + "\n"
    _emit(text, out_path)
    return 0


def _emit_report(command, config, seed, report, fmt, out_path):
    if fmt == "json":
        doc = {"meta": {"version": __version__, "command": command,
                        "config": {k: _fmt(v) for k, v in config.items()},
                        "seed": seed},
               "report": json.loads(report.to_json())}
        text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    else:
        lines = _header_lines(command, config, seed)
        text = "\n".join(lines) + "\n" + report.to_csv()
        if not text.endswith("\n"):
            text += "\n"
    _emit(text, out_path)
    return 0 if report.verdict else 1


# ---------------------------------------------------------------------------
# exact subcommands


def _op_exact_pi(cfg):
    rows = []
    for m in range(1, cfg["m_max"] + 1):
        val = exact.pi_tail(m, cfg["gamma"])
        rows.append((m, val.value, val.log_value))
    return ("m", "pi", "log_pi"), rows, ()


def _op_exact_nu(cfg):
    table = exact.nu_table(cfg["n"], cfg["gamma"],
                           high_precision=cfg["high_precision"])
    rows = [(i + 1, v.value, v.condition_number)
            for i, v in enumerate(table)]
    return ("n", "nu", "cond"), rows, ()


def _op_exact_sell(cfg):
    ls = [cfg["l"]] if cfg.get("l") is not None else range(cfg["n"] + 1)
    rows = []
    for l in ls:
        val = exact.s_ell(l, cfg["n"], cfg["gamma"])
        rows.append((l, val.value, val.log_value))
    return ("l", "s", "log_s"), rows, ()


def _op_exact_constants(cfg):
    p, kappa = exact.percolation_constants(cfg["gamma"], cfg["delta"])
    rows = [("p", p), ("kappa", kappa),
            ("nu_limit", exact.nu_limit(cfg["gamma"]))]
    c_bar = cfg.get("c_bar")
    if cfg.get("mean") is not None:
        ct = exact.c_tilde(cfg["mean"])
        rows.append(("c_tilde", ct))
        if c_bar is None:
            c_bar = ct
    if cfg.get("eps") is not None:
        if c_bar is None:
            raise ValidationError("gamma_c needs --c-bar or --mean")
        rows.append(("gamma_c",
                     exact.gamma_c(cfg["delta"], cfg["eps"], c_bar)))
    return ("name", "value"), rows, ()


def _op_exact_curves(cfg):
    kappa = None
    if cfg.get("p") is not None and cfg.get("delta") is not None:
        kappa = exact.percolation_kappa(cfg["p"], cfg["delta"])
    elif cfg.get("gamma") is not None and cfg.get("delta") is not None:
        kappa = exact.percolation_constants(cfg["gamma"], cfg["delta"])[1]
    rows = []
    for x in cfg["points"]:
        y = exact.reference_curves(x, cfg["which"], alpha=cfg.get("mean"),
                                   r=cfg.get("r"), c_bar=cfg.get("c_bar"),
                                   delta=cfg.get("delta"), kappa=kappa)
        rows.append((x, y))
    return ("x", "value"), rows, ()


# ---------------------------------------------------------------------------
# sim subcommands


def _sim_config(cfg):
    return RunConfig(graph=cfg["graph"], gamma=cfg["gamma"],
                     t_max=cfg.get("t_max"), n_max=cfg.get("n_max"),
                     seed=cfg["seed"])


def _op_sim_run(cfg):
    log = run_replication(_sim_config(cfg))
    rows = [(i, int(log.parent[i]), int(log.depth[i]),
             float(log.tau[i]), float(log.recovery[i]))
            for i in range(log.parent.size)]
    extra = (("extinct", bool(log.extinct)),
             ("final_time", float(log.final_time)))
    return ("id", "parent", "depth", "tau", "recovery_duration"), rows, extra


def _op_sim_snapshot(cfg):
    if cfg.get("t_max") is None:
        raise ValidationError("snapshot needs --t-max")
    log = run_replication(_sim_config(cfg))
    times = cfg.get("points") or (cfg["t_max"],)
    rows = []
    for t in times:
        snap = snapshot(log, float(t))
        rows.append((float(t), int(snap.occupied.size), int(snap.red.size),
                     int(snap.boundary_size), int(snap.h),
                     int(snap.m_cluster)))
    return ("t", "occupied", "red", "boundary", "H", "M"), rows, ()


def _op_sim_wchain(cfg):
    chain = jump_chain(run_replication(_sim_config(cfg)))
    rows = [(float(chain.sigma[i]), int(chain.w[i]))
            for i in range(chain.sigma.size)]
    return ("sigma", "w"), rows, ()


# ---------------------------------------------------------------------------
# mc subcommands


def _op_mc_tail(cfg):
    return experiments.estimate_tail_law(cfg["gamma"], cfg["n"],
                                         cfg["m_max"], cfg["reps"],
                                         cfg["seed"], jobs=cfg["jobs"])


def _op_mc_nu(cfg):
    return experiments.estimate_complete_recovery(cfg["gamma"], cfg["n"],
                                                  cfg["reps"], cfg["seed"],
                                                  jobs=cfg["jobs"])


def _op_mc_eta(cfg):
    # the query time 1 - T never exceeds 1, so the horizon is fixed
    config = RunConfig(graph=cfg["graph"], gamma=cfg["gamma"], t_max=1.0)
    return experiments.estimate_eta(config, m=cfg.get("m"), reps=cfg["reps"],
                                    seed=cfg["seed"], q=cfg["q"],
                                    x_grid=cfg.get("points", ()),
                                    r=cfg["r"], jobs=cfg["jobs"])


def _op_mc_boundary(cfg):
    config = RunConfig(graph=cfg["graph"], gamma=cfg["gamma"],
                       t_max=cfg["t"])
    return experiments.check_boundary_inequality(
        config, cfg["t"], cfg["m"], cfg["n"], cfg["reps"], cfg["seed"],
        q=cfg["q"], jobs=cfg["jobs"])


def _op_mc_growth(cfg):
    config = RunConfig(graph=cfg["graph"], gamma=cfg["gamma"],
                       t_max=max(cfg["t_grid"]))
    return experiments.growth_report(config, cfg["n_grid"], cfg["t_grid"],
                                     cfg["reps"], cfg["seed"],
                                     jobs=cfg["jobs"])


def _op_mc_trend(cfg):
    config = RunConfig(graph=cfg["graph"], gamma=cfg["gamma"],
                       t_max=max(cfg["t_grid"]))
    return experiments.liminf_trend(config, cfg["t_grid"], cfg["reps"],
                                    cfg["seed"], slack=cfg["slack"],
                                    jobs=cfg["jobs"])


def _op_mc_containment(cfg):
    config = RunConfig(graph=cfg["graph"], gamma=cfg["gamma"],
                       t_max=cfg["t_max"])
    return experiments.containment_check(config, cfg["reps"], cfg["seed"],
                                         c_scale=cfg["c_scale"],
                                         jobs=cfg["jobs"])


def _op_mc_percolation(cfg):
    return experiments.percolation_cluster(cfg["delta"], cfg["p"],
                                           cfg["depth"], cfg["reps"],
                                           cfg["seed"], jobs=cfg["jobs"])


def _op_mc_wchain(cfg):
    return experiments.wchain_transition_check(cfg["gamma"], cfg["n"],
                                               cfg["reps"], cfg["seed"],
                                               min_obs=cfg["min_obs"],
                                               jobs=cfg["jobs"])


# name -> (handler, parameter table); None defaults mean truly optional
_OPS = {
    ("exact", "pi"): (_op_exact_pi, {
        "gamma": _REQUIRED, "m_max": _REQUIRED, "seed": 0}),
    ("exact", "nu"): (_op_exact_nu, {
        "gamma": _REQUIRED, "n": _REQUIRED, "high_precision": False,
        "seed": 0}),
    ("exact", "sell"): (_op_exact_sell, {
        "gamma": _REQUIRED, "n": _REQUIRED, "l": None, "seed": 0}),
    ("exact", "constants"): (_op_exact_constants, {
        "gamma": _REQUIRED, "delta": _REQUIRED, "mean": None, "eps": None,
        "c_bar": None, "seed": 0}),
    ("exact", "curves"): (_op_exact_curves, {
        "which": _REQUIRED, "points": _REQUIRED, "mean": None, "r": None,
        "c_bar": None, "delta": None, "p": None, "gamma": None, "seed": 0}),
    ("sim", "run"): (_op_sim_run, {
        "graph": _REQUIRED, "gamma": _REQUIRED, "t_max": None, "n_max": None,
        "seed": 0}),
    ("sim", "snapshot"): (_op_sim_snapshot, {
        "graph": _REQUIRED, "gamma": _REQUIRED, "t_max": None, "n_max": None,
        "points": None, "seed": 0}),
    ("sim", "wchain"): (_op_sim_wchain, {
        "graph": _REQUIRED, "gamma": _REQUIRED, "t_max": None, "n_max": None,
        "seed": 0}),
    ("mc", "tail"): (_op_mc_tail, {
        "gamma": _REQUIRED, "n": _REQUIRED, "m_max": _REQUIRED,
        "reps": _REQUIRED, "seed": 0, "jobs": None}),
    ("mc", "nu"): (_op_mc_nu, {
        "gamma": _REQUIRED, "n": _REQUIRED, "reps": _REQUIRED, "seed": 0,
        "jobs": None}),
    ("mc", "eta"): (_op_mc_eta, {
        "graph": _REQUIRED, "gamma": _REQUIRED, "m": None,
        "reps": _REQUIRED, "q": "H", "points": (), "r": 0.5, "seed": 0,
        "jobs": None}),
    ("mc", "boundary"): (_op_mc_boundary, {
        "graph": _REQUIRED, "gamma": _REQUIRED, "t": _REQUIRED,
        "m": _REQUIRED, "n": _REQUIRED, "reps": _REQUIRED, "q": "H",
        "seed": 0, "jobs": None}),
    ("mc", "growth"): (_op_mc_growth, {
        "graph": _REQUIRED, "gamma": _REQUIRED, "n_grid": _REQUIRED,
        "t_grid": _REQUIRED, "reps": _REQUIRED, "seed": 0, "jobs": None}),
    ("mc", "trend"): (_op_mc_trend, {
        "graph": _REQUIRED, "gamma": _REQUIRED, "t_grid": _REQUIRED,
        "reps": _REQUIRED, "slack": 0.5, "seed": 0, "jobs": None}),
    ("mc", "containment"): (_op_mc_containment, {
        "graph": _REQUIRED, "gamma": _REQUIRED, "t_max": _REQUIRED,
        "reps": _REQUIRED, "c_scale": 1.0, "seed": 0, "jobs": None}),
    ("mc", "percolation"): (_op_mc_percolation, {
        "delta": _REQUIRED, "p": _REQUIRED, "depth": _REQUIRED,
        "reps": _REQUIRED, "seed": 0, "jobs": None}),
    ("mc", "wchain"): (_op_mc_wchain, {
        "gamma": _REQUIRED, "n": _REQUIRED, "reps": _REQUIRED,
        "min_obs": 1000, "seed": 0, "jobs": None}),
}


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("parameters")
    g.add_argument("--gamma", metavar="G")
    g.add_argument("--graph", metavar="SPEC")
    g.add_argument("--n", metavar="N")
    g.add_argument("--m", metavar="M")
    g.add_argument("--m-max", dest="m_max", metavar="M")
    g.add_argument("--l", metavar="L")
    g.add_argument("--t", metavar="T")
    g.add_argument("--t-max", dest="t_max", metavar="T")
    g.add_argument("--n-max", dest="n_max", metavar="N")
    g.add_argument("--reps", metavar="R")
    g.add_argument("--seed", metavar="S")
    g.add_argument("--jobs", metavar="J")
    g.add_argument("--delta", metavar="D")
    g.add_argument("--p", metavar="P")
    g.add_argument("--depth", metavar="K")
    g.add_argument("--eps", metavar="E")
    g.add_argument("--slack", metavar="X")
    g.add_argument("--c-scale", dest="c_scale", metavar="C")
    g.add_argument("--c-bar", dest="c_bar", metavar="C")
    g.add_argument("--mean", metavar="MU")
    g.add_argument("--r", metavar="R")
    g.add_argument("--q", metavar="{H,M}")
    g.add_argument("--which", metavar="CURVE")
    g.add_argument("--points", metavar="X1,X2,...")
    g.add_argument("--n-grid", dest="n_grid", metavar="N1,N2,...")
    g.add_argument("--t-grid", dest="t_grid", metavar="T1,T2,...")
    g.add_argument("--min-obs", dest="min_obs", metavar="K")
    g.add_argument("--high-precision", dest="high_precision",
                   action="store_const", const="true")
    io = common.add_argument_group("output")
    io.add_argument("--format", choices=("csv", "json"), default=None)
    io.add_argument("--out", metavar="PATH")
    io.add_argument("--config", metavar="FILE")

    parser = argparse.ArgumentParser(
        prog="fppr",
        description="First passage percolation with recovery: exact tables, "
                    "single runs and Monte Carlo experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="subcommand", required=True)
    for sub, ops in (("exact", ("pi", "nu", "sell", "constants", "curves")),
                     ("sim", ("run", "snapshot", "wchain")),
                     ("mc", ("tail", "nu", "eta", "boundary", "growth",
                             "trend", "containment", "percolation",
                             "wchain"))):
        sp = subs.add_parser(sub, parents=[common])
        sp.add_argument("operation", choices=ops)
    return parser


def dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        file_values = (_read_config_file(args.config)
                       if args.config is not None else {})
        fmt = args.format or file_values.get("format") or "csv"
        if fmt not in ("csv", "json"):
            raise ValidationError("format must be csv or json")
        out_path = args.out or file_values.get("out")
        handler, wanted = _OPS[(args.subcommand, args.operation)]
        cfg = _resolve(args, file_values, wanted)
        if "jobs" in wanted and cfg.get("jobs") is None:
            cfg["jobs"] = max(1, os.cpu_count() or 1)
        if not 0 <= cfg["seed"] < 2 ** 64:
            raise ValidationError("seed must fit in 64 bits")
        if "graph" in cfg:
            # canonical text so the header is source-independent
            cfg["graph"] = parse_offspring(cfg["graph"]).text()
        command = "%s %s" % (args.subcommand, args.operation)
        echo = {k: v for k, v in cfg.items()
                if k not in ("jobs", "seed") and v is not None}
        if args.subcommand == "mc":
            report = handler(cfg)
            return _emit_report(command, echo, cfg["seed"], report, fmt,
                                out_path)
        columns, rows, extra = handler(cfg)
        return _emit_table(command, echo, cfg["seed"], columns, rows, fmt,
                           out_path, extra=extra)
    except (ValidationError, OffspringError, DomainError,
            OutOfHorizonError) as exc:
        print("fppr: error: %s" % exc, file=sys.stderr)
        return 2
    except (VertexCapError, PrecisionError,
            experiments.InsufficientDataError) as exc:
        print("fppr: runtime error: %s" % exc, file=sys.stderr)
        return 3
    except OSError as exc:
        print("fppr: runtime error: %s" % exc, file=sys.stderr)
        return 3


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
