"""Command-line front end.

Every run resolves its configuration from ``--config`` (a JSON file, possibly a
previous summary) overridden by flags, validates it against a schema, executes
one pipeline and writes ``summary.json`` plus CSV tables into ``--out`` (or
prints the summary when no output directory is given).

Exit codes: 0 success, 1 failed reproduction check, 2 model error, 3 numeric
failure, 4 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from typing import Callable

import jsonschema
import numpy as np

from . import __version__
from .errors import ArgumentError, ConfigError, DavisLabError, DomainError, ModelError, NumericError

EXIT_OK, EXIT_REPRODUCE, EXIT_MODEL, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2, 3, 4
CSV_HEADER = "# davis-lab schema v1\n"
COMMANDS = ("solve", "dual", "superrep", "davis", "sweep", "mc", "corrector", "reproduce")
EXAMPLES = ("ThreeState", "CSW", "Example1", "Example2", "Corrector")
PAYOFFS = ("tanh", "bump", "zero")
ENVELOPES = ("kinked", "smooth")

_NUM_ARRAY = {"type": "array", "items": {"type": "number"}}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["command"],
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "market": {"type": ["string", "object", "null"]},
        "family": {"type": ["string", "null"]},
        "level": {"type": "integer", "minimum": 2},
        "mode": {"enum": ["renormalize", "cemetery"]},
        "utility": {"enum": ["log", "power"]},
        "gamma": {"type": ["number", "null"]},
        "claim": {"oneOf": [_NUM_ARRAY, {"enum": list(PAYOFFS)}, {"type": "null"}]},
        "endowment": {"oneOf": [_NUM_ARRAY, {"enum": list(ENVELOPES)}, {"type": "null"}]},
        "payoff": {"enum": list(PAYOFFS)},
        "levels": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
        "paths": {"type": "integer", "minimum": 2},
        "n_paths": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0, "maximum": 18446744073709551615},
        "eps": _NUM_ARRAY,
        "eps_list": _NUM_ARRAY,
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "out": {"type": ["string", "null"]},
        "example": {"enum": list(EXAMPLES)},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["constant", "ds_stopped"]},
                "lam": {"type": "number"},
                "sigma": {"type": "number", "exclusiveMinimum": 0},
                "T": {"type": "number", "exclusiveMinimum": 0},
                "n_steps": {"type": "integer", "minimum": 1},
                "s_max": {"type": "number", "exclusiveMinimum": 0},
                "nu": {"enum": ["zero", "nu0"]},
                "bridge": {"type": "boolean"},
            },
        },
    },
}

DEFAULTS = {
    "utility": "log",
    "gamma": None,
    "levels": [200, 500, 1000],
    "paths": 100_000,
    "seed": 0,
    "eps": [0.1, 0.05, 0.025],
    "tol": 1e-9,
    "out": None,
    "mode": "renormalize",
}


# ------------------------------------------------------------------ config


def _csv_ints(s: str) -> list[int]:
    try:
        return [int(x) for x in s.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from exc


def _csv_reals(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated reals, got {s!r}") from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="davis-lab", description="Davis prices, utility duality and superreplication.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        src = s.add_mutually_exclusive_group()
        src.add_argument("--market", help="market JSON file")
        src.add_argument("--family", help="registered countable family, e.g. csw")
        s.add_argument("--level", type=int, help="truncation level for --family")
        s.add_argument("--utility", choices=["log", "power"])
        s.add_argument("--gamma", type=float)
        s.add_argument("--levels", type=_csv_ints)
        s.add_argument("--paths", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--eps", type=_csv_reals)
        s.add_argument("--out", help="output directory")
        s.add_argument("--tol", type=float)
        s.add_argument("--config", help="JSON config; flags override its entries")
        if name == "reproduce":
            s.add_argument("example", nargs="?", choices=EXAMPLES)
    return p


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    # summaries written by this tool embed the resolved config
    if "config" in doc and isinstance(doc["config"], dict):
        doc = doc["config"]
    return doc


def resolve_config(args: argparse.Namespace) -> dict:
    cfg: dict = {}
    if getattr(args, "config", None):
        cfg.update(_load_config_file(args.config))
    for key in ("market", "family", "level", "utility", "gamma", "levels", "paths", "seed", "eps", "out", "tol"):
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if getattr(args, "example", None):
        cfg["example"] = args.example
    if args.command:
        cfg["command"] = args.command
    if "command" not in cfg:
        raise ConfigError("no command given")
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc.message}") from exc
    if "n_paths" in cfg:
        cfg["paths"] = cfg.pop("n_paths")
    if "eps_list" in cfg:
        cfg["eps"] = cfg.pop("eps_list")
    for k, v in DEFAULTS.items():
        cfg.setdefault(k, v)
    if cfg["utility"] == "power" and cfg.get("gamma") is None:
        raise ConfigError("--gamma is required for power utility")
    if cfg["command"] == "reproduce" and "example" not in cfg:
        raise ConfigError("reproduce needs an example name")
    return cfg


# ------------------------------------------------------------------ output


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if np.isfinite(x) else repr(x)
    if hasattr(x, "value") and isinstance(getattr(x, "value"), str):
        return x.value
    return x


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(path)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def table_csv(columns, rows) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def emit(cfg: dict, result: dict, tables: dict[str, str], stdout) -> None:
    summary = {"tool": "davis-lab", "version": __version__, "config": cfg, "result": result}
    text = json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n"
    out = cfg.get("out")
    if out is None:
        stdout.write(text)
        return
    os.makedirs(out, exist_ok=True)
    for name, body in tables.items():
        _atomic_write(os.path.join(out, name), body)
    _atomic_write(os.path.join(out, "summary.json"), text)


# ------------------------------------------------------------------ pipelines


def _utility(cfg):
    from .utility import utility_from_spec

    return utility_from_spec(cfg["utility"], cfg.get("gamma"))


def _market(cfg):
    from .market import get_family, load_market, market_from_dict, truncate

    if cfg.get("family"):
        return truncate(get_family(cfg["family"]), cfg.get("level", 200), cfg.get("mode", "renormalize"))
    src = cfg.get("market")
    if src is None:
        raise ConfigError("a market is required (--market PATH or --family NAME)")
    m = market_from_dict(src) if isinstance(src, dict) else load_market(src)
    if isinstance(cfg.get("endowment"), list):
        m = m.with_endowment(cfg["endowment"])
    if isinstance(cfg.get("claim"), list):
        m = m.with_claim(cfg["claim"])
    return m


def _claim(m):
    if m.claim is None:
        raise ConfigError("this command needs a claim: add \"claim\" to the market file or config")
    return m.claim


def _state_table(m, **cols):
    names = ["n", "prob", "dS", "endowment", *cols]
    rows = [[i, m.probs[i], m.dS[i], m.endowment[i], *[c[i] for c in cols.values()]] for i in range(m.n_states)]
    return table_csv(names, rows)


def run_solve(cfg):
    from .optim import solve_primal

    m, u = _market(cfg), _utility(cfg)
    p = solve_primal(m, u)
    res = {"pi_hat": p.pi_hat, "value": p.value, "foc_residual": p.foc_residual, "X_hat": p.X_hat,
           "utility": u.describe()}
    return res, {"states.csv": _state_table(m, X_hat=p.X_hat)}


def run_dual(cfg):
    from .optim import duality_gap, solve_dual, solve_primal

    m, u = _market(cfg), _utility(cfg)
    d = solve_dual(m, u)
    p = solve_primal(m, u, check_arbitrage=False)
    res = {"eta": d.eta, "total_mass": d.total_mass, "value": d.value, "kkt_residual": d.kkt_residual,
           "density": d.density, "duality_gap": duality_gap(p, d), "utility": u.describe()}
    return res, {"states.csv": _state_table(m, density=d.density)}


def run_superrep(cfg):
    from .superrep import superreplicate

    m = _market(cfg)
    r = superreplicate(m, _claim(m), tol=cfg["tol"])
    return r.to_dict(), {"states.csv": _state_table(m, claim=m.claim, superrep_payoff=r.superrep_payoff)}


def run_davis(cfg):
    from .davis import davis_interval_fd, davis_interval_finite, interval_via_supergradient

    m, u = _market(cfg), _utility(cfg)
    phi = _claim(m)
    main = davis_interval_finite(m, u, None, phi)
    sg = interval_via_supergradient(m, phi, u=u)
    fd = davis_interval_fd(m, u, None, phi)
    res = {"interval": main.to_dict(), "cross_checks": {"supergradient": sg.to_dict(), "finite_difference": fd.to_dict()}}
    rows = [[iv.method.value, iv.p_low, iv.p_high, iv.y_B] for iv in (main, sg, fd)]
    return res, {"davis.csv": table_csv(["method", "p_low", "p_high", "y_B"], rows)}


def run_sweep(cfg):
    from .davis import csw_sweep, find_oscillating_test_function
    from .market import get_family

    fam = get_family(cfg.get("family") or "csw")
    levels = cfg["levels"]
    H = find_oscillating_test_function(fam, levels)
    rep = csw_sweep(levels, family=fam, test_function=H)
    res = rep.to_dict()
    res["candidates"] = H.candidates
    return res, {"sweep.csv": rep.to_csv()}


def _payoff_fn(name):
    return {"tanh": np.tanh, "bump": lambda a: 1.0 / (1.0 + np.asarray(a) ** 2),
            "zero": lambda a: np.zeros_like(np.asarray(a, dtype=float))}[name]


def _path_model(cfg, **defaults):
    from .brownian import PathModel

    spec = {**defaults, **(cfg.get("model") or {})}
    return PathModel(seed=cfg["seed"], **spec)


def run_mc(cfg):
    from .brownian import example1_interval, simulate_paths, simulate_stochastic_exponential

    model = _path_model(cfg)
    sample = simulate_paths(model, cfg["paths"])
    stats = simulate_stochastic_exponential(model, sample=sample)
    payoff = cfg.get("payoff") or (cfg["claim"] if isinstance(cfg.get("claim"), str) else "tanh")
    iv = example1_interval(model, _payoff_fn(payoff), sample=sample)
    res = {"model": model.to_dict(), "deflator": stats.to_dict(), "example1": iv.to_dict()}
    rows = [["E_YT", stats.E_YT, stats.ci_halfwidth], ["p_low", iv.p_low, iv.diagnostics["ci_low"]],
            ["p_high", iv.p_high, iv.diagnostics["ci_high"]]]
    snaps = stats.extras.get("snapshots", {})
    rows += [[f"E_Y_{t}", v, ""] for t, v in snaps.items()]
    return res, {"mc.csv": table_csv(["quantity", "estimate", "ci_halfwidth"], rows)}


def run_corrector(cfg):
    from .brownian import corrector_check, kinked_envelope, smooth_envelope

    model = _path_model(cfg, kind="constant", lam=0.4, sigma=0.2)
    if model.kind.value != "constant":
        raise ConfigError("the corrector runs in the constant-coefficient model")
    env = {"kinked": kinked_envelope, "smooth": smooth_envelope}[
        cfg["endowment"] if isinstance(cfg.get("endowment"), str) else "kinked"]()
    rep = corrector_check(model, env, cfg["eps"], n_paths=cfg["paths"], u=_utility(cfg))
    rows = list(zip(rep.eps, rep.residual, rep.ratio))
    return {"model": model.to_dict(), **rep.to_dict()}, {"corrector.csv": table_csv(["eps", "residual", "ratio"], rows)}


PIPELINES: dict[str, Callable] = {
    "solve": run_solve,
    "dual": run_dual,
    "superrep": run_superrep,
    "davis": run_davis,
    "sweep": run_sweep,
    "mc": run_mc,
    "corrector": run_corrector,
}


# ------------------------------------------------------------------ reproduce


def _check(name, ok, detail) -> dict:
    return {"criterion": name, "passed": bool(ok), "detail": detail}


def _reproduce(cfg) -> list[dict]:
    ex = cfg["example"]
    out = []
    if ex == "ThreeState":
        from .market import FiniteMarket
        from .superrep import Uniqueness, superreplicate

        m = FiniteMarket([1 / 3] * 3, [1.0, 0.0, -1.0], [1.0] * 3)
        r = superreplicate(m, [-1.0, 0.0, -1.0])
        out.append(_check("three-state claim is not uniquely superreplicable",
                          r.unique is Uniqueness.NOT_UNIQUE, {"unique": r.unique.value, "price": r.price}))
        r2 = superreplicate(m, [1.0, 0.0, -1.0])
        out.append(_check("replicable perturbation flips the verdict", r2.unique is Uniqueness.REPLICABLE,
                          {"unique": r2.unique.value}))
    elif ex == "CSW":
        from .davis import csw_sweep

        rep = csw_sweep(cfg["levels"] if len(cfg["levels"]) >= 3 else [200, 500, 1000])
        out.append(_check("derivative gap exceeds 3x its error bound at every level", rep.gap_positive,
                          {"gaps": rep.gaps.tolist(), "errors": rep.gap_errors}))
        out.append(_check("gap stable within 10% across levels", rep.relative_spread < 0.10,
                          {"relative_spread": rep.relative_spread}))
    elif ex == "Example1":
        from .brownian import PathModel, example1_interval, simulate_stochastic_exponential

        model = PathModel(seed=cfg["seed"])
        ref = simulate_stochastic_exponential(PathModel(seed=cfg["seed"] + 1), cfg["paths"])
        iv = example1_interval(model, np.tanh, cfg["paths"], reference=ref)
        out.append(_check("deflator CI lies below 1", ref.E_YT + ref.ci_halfwidth < ref.Y0, ref.to_dict()))
        out.append(_check("assembled width matches the closed-form width", iv.diagnostics["width_consistent"],
                          iv.to_dict()))
    elif ex == "Example2":
        from .brownian import PathModel, envelope_derivatives, example2_interval, kinked_envelope, simulate_paths

        env = kinked_envelope()
        d = envelope_derivatives(env)
        out.append(_check("kinked envelope slopes are -1 and +1", abs(d.plus + 1) < 1e-3 and abs(d.minus - 1) < 1e-3,
                          d.to_dict()))
        model = PathModel(seed=cfg["seed"])
        iv = example2_interval(model, env, simulate_paths(model, cfg["paths"]), derivs=d)
        need = iv.diagnostics["kink_width"] - iv.diagnostics["ci_low"] - iv.diagnostics["ci_high"]
        out.append(_check("interval width reflects the envelope kink", iv.width >= need, iv.to_dict()))
    elif ex == "Corrector":
        from .brownian import PathModel, corrector_check, kinked_envelope

        model = PathModel(kind="constant", lam=0.4, sigma=0.2, seed=cfg["seed"])
        rep = corrector_check(model, kinked_envelope(), cfg["eps"], n_paths=cfg["paths"])
        out.append(_check("r(eps)/eps decreases", rep.decreasing, rep.to_dict()))
        out.append(_check("final ratio below half the first", rep.halved, {"ratio": rep.ratio}))
    return out


def run(cfg: dict, stdout=None) -> int:
    stdout = stdout or sys.stdout
    if cfg["command"] == "reproduce":
        checks = _reproduce(cfg)
        for c in checks:
            print(f"{'PASS' if c['passed'] else 'FAIL'}  {cfg['example']}: {c['criterion']}", file=sys.stderr)
        result = {"example": cfg["example"], "checks": checks, "passed": all(c["passed"] for c in checks)}
        emit(cfg, result, {}, stdout)
        if not result["passed"]:
            for c in checks:
                if not c["passed"]:
                    print(f"  differing values: {json.dumps(_jsonable(c['detail']))[:2000]}", file=sys.stderr)
            return EXIT_REPRODUCE
        return EXIT_OK
    result, tables = PIPELINES[cfg["command"]](cfg)
    emit(cfg, result, tables, stdout)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None and not getattr(args, "config", None):
            build_parser().print_help(sys.stderr)
            return EXIT_CONFIG
        cfg = resolve_config(args)
        return run(cfg)
    except (ConfigError, ArgumentError) as exc:
        print(f"davis-lab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModelError, DomainError) as exc:
        print(f"davis-lab: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except NumericError as exc:
        print(f"davis-lab: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DavisLabError as exc:
        print(f"davis-lab: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
