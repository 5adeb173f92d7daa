"""Command-line front end: ``parext <command> [subcommand] [--key value ...]``.

Settings come from an optional flat ``key = value`` file (``--config``)
overridden by flags.  Every run emits a JSON report::

    {"schema_version", "command", "config", "results", "ok", "environment"}

Exit codes: 0 success, 2 a mathematical check failed, 1 an error (the
error is also written as JSON to stderr).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import ConfigError, MissingRequired, ParextError, RangeViolation, UnknownKey

SCHEMA_VERSION = 1

# -- configuration -------------------------------------------------------------------


def _pow2(v):
    return v >= 8 and (v & (v - 1)) == 0


# key -> (parser, validator or None, message)
KEYS = {
    "L": (float, lambda v: v > 0, "L must be positive"),
    "N": (int, _pow2, "N must be a power of two"),
    "t_max": (float, lambda v: v > 0, "t_max must be positive"),
    "n_t": (int, lambda v: v >= 16, "n_t must be at least 16"),
    "rule": (str, lambda v: v in ("midpoint", "simpson"), "rule must be midpoint or simpson"),
    "adjoint": (str, lambda v: v in ("exact", "independent"), "adjoint must be exact or independent"),
    "max_steps": (int, lambda v: v >= 1, "max_steps must be >= 1"),
    "stop_tol": (float, lambda v: v > 0, "stop_tol must be positive"),
    "seed": (int, None, ""),
    "profile": (str, lambda v: v in ("ball_indicator", "gaussian"), "profile must be ball_indicator or gaussian"),
    "renorm": (str, lambda v: v in ("none", "p0", "p0+center", "p0+center+scale"), "unknown renorm mode"),
    "threads": (int, lambda v: v >= 1, "threads must be >= 1"),
    "trials": (int, lambda v: v >= 1, "trials must be >= 1"),
    "pairs": (int, lambda v: v >= 1, "pairs must be >= 1"),
    "t": (float, lambda v: 0 <= v <= 0.95, "t must lie in [0, 0.95]"),
    "alpha": (float, lambda v: v >= 0, "alpha must be nonnegative"),
    "beta": (float, lambda v: 0 <= v <= 0.95, "beta must lie in [0, 0.95]"),
    "theta": (float, lambda v: 0 <= v <= 1, "theta must lie in [0, 1]"),
    "rho": (float, lambda v: v >= 0, "rho must be nonnegative"),
    "varrho": (float, lambda v: v >= 0, "varrho must be nonnegative"),
    "eps": (float, lambda v: 0 < v < 1, "eps must lie in (0, 1)"),
    "band": (float, lambda v: v > 0, "band must be positive"),
    "K": (int, lambda v: v >= 0, "K must be nonnegative"),
    "steps": (int, lambda v: v >= 2 and v % 2 == 0 and v <= 6, "steps must be even and at most 6"),
    "floor": (float, lambda v: v >= 0, "floor must be nonnegative"),
    "p": (float, lambda v: v > 1, "p must exceed 1"),
    "weight": (str, None, ""),
    "family": (str, lambda v: v in ("standard", "axis"), "family must be standard or axis"),
    "r_min": (float, lambda v: v > 0, "r_min must be positive"),
    "space": (str, lambda v: v in ("X", "Xstar", "Y", "Ystar"), "space must be X, Xstar, Y or Ystar"),
    "op": (str, lambda v: v in ("T", "Tstar", "S"), "op must be T, Tstar or S"),
    "kind": (str, lambda v: v in ("absd", "dlambda", "p", "q", "r", "riesz"), "unknown multiplier kind"),
    "s": (float, None, ""),
    "lam": (float, lambda v: v >= 0, "lam must be nonnegative"),
    "k": (int, None, ""),
    "j": (int, lambda v: v in (1, 2), "j must be 1 or 2"),
    "in": (str, None, ""),
    "out": (str, None, ""),
    "csv": (str, None, ""),
}

GRID = {"L": 16.0, "N": 128, "t_max": None, "n_t": 512, "rule": "midpoint", "adjoint": "exact"}

# command -> (defaults, required keys)
COMMANDS = {
    "apply": ({**GRID, "op": "T", "rho": None, "out": None}, ("in",)),
    "norm": ({"space": "X", "t": 0.0}, ("in",)),
    "multiplier": ({"kind": "dlambda", "s": 0.5, "lam": 16.0, "k": 0, "j": 1, "out": None}, ("in",)),
    "ap": ({"p": 2.0, "family": "standard", "r_min": None, "K": None}, ("weight",)),
    "extremize": ({**GRID, "max_steps": 200, "stop_tol": 1e-6, "seed": 0, "profile": "ball_indicator",
                   "renorm": "p0+center", "out": None, "csv": None}, ()),
    "verify adjoint": ({**GRID, "seed": 0, "trials": 100}, ()),
    "verify symmetry": ({"N": 256}, ()),
    "verify key-lemma": ({**GRID}, ()),
    "verify weighted": ({**GRID, "t": None, "trials": 100, "seed": 0}, ()),
    "verify vecs-holder": ({**GRID, "n_t": 64, "seed": 0, "trials": 100}, ()),
    "verify holder-xt": ({"L": 16.0, "N": 128, "seed": 0, "trials": 1000, "t": 0.1}, ()),
    "verify log-convexity": ({"L": 16.0, "N": 128, "seed": 0, "trials": 1000,
                              "alpha": 0.0, "beta": 0.5, "theta": 0.3}, ()),
    "verify corollary": ({**GRID, "steps": 4}, ()),
    "verify lp-partition": ({"L": math.pi, "N": 256, "K": 5, "seed": 0}, ()),
    "verify leibniz": ({"L": math.pi, "N": 256, "K": 5, "seed": 0, "band": 48.0}, ()),
    "probe smoothing": ({**GRID, "N": 256, "alpha": 0.4, "rho": 1.0, "band": None, "trials": 20, "seed": 0}, ()),
    "probe contraction": ({**GRID, "eps": 0.05, "t": 0.02, "pairs": 100, "seed": 0,
                           "max_steps": 200, "in": None}, ()),
    "probe decay": ({**GRID, "floor": None, "max_steps": 200, "in": None, "csv": None}, ()),
    "probe regularity": ({**GRID, "rho": 0.05, "varrho": 0.0, "max_steps": 200, "in": None}, ()),
}

VERIFY = sorted(c.split()[1] for c in COMMANDS if c.startswith("verify "))
PROBE = sorted(c.split()[1] for c in COMMANDS if c.startswith("probe "))


@dataclass
class RunConfig:
    command: str
    params: dict
    threads: int = 1
    report: str | None = None


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, quotes are optional."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value.strip("\"'")
    return out


def _coerce(key, value):
    if key not in KEYS:
        raise UnknownKey(f"unknown key {key!r}", key)
    if value is None:
        return None
    conv, check, msg = KEYS[key]
    try:
        v = conv(value)
        if conv is float and not math.isfinite(v):
            raise ValueError
    except (TypeError, ValueError):
        raise RangeViolation(f"{key}: cannot read {value!r} as {conv.__name__}", key) from None
    if check is not None and not check(v):
        raise RangeViolation(msg, key)
    return v


def parse_config(command: str, file_values: dict | None = None, flags: dict | None = None) -> RunConfig:
    """Merge defaults, file values and flags (flags win) for ``command``."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}", "command")
    defaults, required = COMMANDS[command]
    params = dict(defaults)
    threads = 1
    for source in (file_values or {}, flags or {}):
        for key, value in source.items():
            if value is None:
                continue
            if command == "extremize" and key == "steps":
                key = "max_steps"  # documented alias
            v = _coerce(key, value)
            if key == "threads":
                threads = v
            elif key in params or key in required:
                params[key] = v
            else:
                raise UnknownKey(f"key {key!r} does not apply to {command!r}", key)
    for key in required:
        if params.get(key) is None:
            raise MissingRequired(f"{command!r} needs {key!r}", key)
    env = os.environ.get("PAREXT_THREADS")
    if env:
        threads = _coerce("threads", env)
    return RunConfig(command, params, threads)


# -- reports ------------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass
class RunReport:
    command: str
    config: dict
    results: dict
    ok: bool = True
    environment: dict = field(default_factory=dict)

    def results_bytes(self) -> bytes:
        return json.dumps(_jsonable(self.results), sort_keys=True).encode()

    def as_dict(self):
        return _jsonable({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": self.config,
            "results": self.results,
            "ok": self.ok,
            "environment": self.environment,
        })


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


# -- dispatch -------------------------------------------------------------------------------


def _operator(p):
    from .grid import make_grid
    from .operators import make_operator

    return make_operator(make_grid(p["L"], p["N"]), p["t_max"], p["n_t"], p["rule"], p["adjoint"])


def _operator_for(p, grid):
    from .operators import make_operator

    return make_operator(grid, p.get("t_max"), p.get("n_t", 512), p.get("rule", "midpoint"),
                         p.get("adjoint", "exact"))


def _extremizer(p):
    """Field from ``in`` or a fresh EL run on the configured grid."""
    from .extremize import IterationConfig, el_iterate
    from .grid import load_pext

    if p.get("in"):
        f = load_pext(p["in"])
        return _operator_for(p, f.grid), f
    h = _operator(p)
    _, f = el_iterate(IterationConfig(max_steps=p["max_steps"], holder_check_every=0), h)
    return h, f


def _run_apply(p):
    from .grid import load_pext, lp_norm, save_pext
    from .operators import apply_S, apply_T, apply_T_rho, apply_T_star, apply_T_star_rho

    f = load_pext(p["in"])
    h = _operator_for(p, f.grid)
    if p["op"] == "S":
        g = apply_S(h, f)
    elif p["rho"] is not None:
        g = (apply_T_rho if p["op"] == "T" else apply_T_star_rho)(h, f, p["rho"])
    else:
        g = (apply_T if p["op"] == "T" else apply_T_star)(h, f)
    if p["out"]:
        save_pext(g, p["out"])
    return {"op": p["op"], "L": f.grid.L, "N": f.grid.N, "max_abs": g.max_abs(), "l2": lp_norm(g, 2)}, True


def _run_norm(p):
    from .grid import load_pext
    from .spaces import exponents, x_norm, x_star_norm, y_norm, y_star_norm

    f = load_pext(p["in"])
    idx = exponents(2, p["t"])
    fn = {"X": x_norm, "Xstar": x_star_norm, "Y": y_norm, "Ystar": y_star_norm}[p["space"]]
    return {"space": p["space"], "t": p["t"], "p": idx.p, "q": idx.q, "value": fn(f, idx)}, True


def _run_multiplier(p):
    from .grid import load_pext, lp_norm, save_pext
    from .spectral import MultiplierSpec, apply_multiplier

    f = load_pext(p["in"])
    spec = MultiplierSpec(p["kind"], s=p["s"], lam=p["lam"], k=p["k"], j=p["j"])
    g = apply_multiplier(spec, f)
    if p["out"]:
        save_pext(g, p["out"])
    return {"kind": p["kind"], "l2_in": lp_norm(f, 2), "l2_out": lp_norm(g, 2)}, True


def _run_ap(p):
    from .weights import WeightSpec, ap_constant, axis_family, standard_family

    spec = WeightSpec.parse(p["weight"])
    if p["family"] == "axis":
        fam = axis_family(p["r_min"] or 1.0, 6 if p["K"] is None else p["K"])
    else:
        fam = standard_family()
    r = ap_constant(spec, p["p"], fam)
    return {"weight": spec.label(), "p": p["p"], "family": p["family"], **r.as_dict()}, True


def _run_extremize(p):
    from .extremize import IterationConfig, el_iterate, el_residual, lambda_of
    from .grid import save_pext

    h = _operator(p)
    cfg = IterationConfig(max_steps=p["max_steps"], stop_tol=p["stop_tol"], renorm=p["renorm"],
                          seed_profile=p["profile"])
    trace, f = el_iterate(cfg, h)
    if p["out"]:
        save_pext(f, p["out"])
    if p["csv"]:
        rows = ["step,rayleigh,lambda,residual,shift1,shift2,scale"]
        rows += [f"{s.step},{s.rayleigh!r},{s.lam!r},{s.residual!r},{s.shift[0]},{s.shift[1]},{s.scale!r}"
                 for s in trace.steps]
        atomic_write_text(p["csv"], "\n".join(rows) + "\n")
    final = {"phi": trace.final.rayleigh, "lambda": lambda_of(h, f), "residual": el_residual(h, f)}
    return {"trace": trace.as_dicts(), "final": final, "converged": trace.converged,
            "decreasing_steps": trace.decreasing_steps()}, True


def _run_verify(name, p):
    from . import checks
    from .extremize import corollary_iteration, gaussian_mixture, key_lemma_ratio, vecs_holder_slack, weighted_ineq_probe
    from .grid import SampledField, make_grid
    from .spaces import holder_product_check, log_convexity_check
    from .spectral import band_limit, leibniz_decomposition, littlewood_paley_partition

    if name == "adjoint":
        rep = checks.check_adjoint(p["seed"], p["trials"], p["N"])
        return rep.as_dict(), rep.ok
    if name == "symmetry":
        rep = checks.check_symmetry(N=p["N"])
        return rep.as_dict(), rep.ok
    if name == "key-lemma":
        r = key_lemma_ratio(_operator(p))
        gap = abs(r["C"] - r["C_mirror"]) / r["C"]
        return {**r, "mirror_gap": gap}, bool(r["finite"] and gap <= 0.02)
    if name == "weighted":
        ts = [p["t"]] if p["t"] is not None else [0.0, 0.25, 0.5, 0.75]
        r = weighted_ineq_probe(_operator(p), ts, p["trials"], p["seed"])
        res = {str(t): {"max_ratio": v["max_ratio"], "max_mirror_ratio": v["max_mirror_ratio"]} for t, v in r.items()}
        ok = all(math.isfinite(v["max_ratio"]) and math.isfinite(v["max_mirror_ratio"]) for v in r.values())
        return res, ok
    if name == "vecs-holder":
        h = _operator(p)
        worst = 0.0
        for k in range(p["trials"]):
            rng = np.random.default_rng(p["seed"] + k)
            fs = [[checks._signed_mixture(h.grid, rng) for _ in range(2)] for _ in range(2)]
            worst = max(worst, vecs_holder_slack(h, fs))
        slack = max(0.0, worst - 1.0)
        return {"max_ratio": worst, "max_slack": slack}, slack <= 1e-12
    if name == "holder-xt":
        g = make_grid(p["L"], p["N"])
        t = p["t"]
        if 4 * t > 0.95:
            raise RangeViolation("t must be at most 0.2375 so that 4t stays in range", "t")
        worst = 0.0
        for k in range(p["trials"]):
            rng = np.random.default_rng(p["seed"] + k)
            fs = [SampledField(g, np.abs(rng.standard_normal((g.N, g.N)))) for _ in range(4)]
            r = holder_product_check(fs, [0.25] * 4, [4 * t, 0, 0, 0], t)
            worst = max(worst, r["lhs"] / r["rhs"])
        return {"max_ratio": worst, "max_slack": max(0.0, worst - 1)}, worst <= 1 + 1e-12
    if name == "log-convexity":
        g = make_grid(p["L"], p["N"])
        worst = 0.0
        for k in range(p["trials"]):
            rng = np.random.default_rng(p["seed"] + k)
            r = log_convexity_check(gaussian_mixture(g, rng), p["alpha"], p["beta"], p["theta"])
            worst = max(worst, r["lhs"] / r["rhs"])
        return {"max_ratio": worst, "max_slack": max(0.0, worst - 1)}, worst <= 1 + 1e-12
    if name == "corollary":
        r = corollary_iteration(_operator(p), p["steps"])
        r.pop("fields")
        ok = r["f0_below_weight"] and r["nonnegative"] and all(r["homogeneity_bound_ok"].values())
        return r, ok
    if name == "lp-partition":
        g = make_grid(p["L"], p["N"])
        f = SampledField(g, np.random.default_rng(p["seed"]).standard_normal((g.N, g.N)))
        parts = littlewood_paley_partition(f, p["K"])
        res = float(np.linalg.norm(sum(q.values for q in parts) - f.values) / np.linalg.norm(f.values))
        return {"relative_residual": res, "pieces": len(parts)}, res <= 1e-12
    if name == "leibniz":
        g = make_grid(p["L"], p["N"])
        rng = np.random.default_rng(p["seed"])
        a = band_limit(SampledField(g, rng.standard_normal((g.N, g.N))), p["band"])
        b = band_limit(SampledField(g, rng.standard_normal((g.N, g.N))), p["band"])
        d = leibniz_decomposition(a, b, p["K"])
        res = {"residual": d["residual"], "max_leakage": d["max_leakage"], "certificates": d["certificates"]}
        return res, d["residual"] == 0 and d["max_leakage"] <= 1e-10
    raise ConfigError(f"unknown verify target {name!r}", "command")


def _run_probe(name, p):
    from .extremize import contraction_probe, decay_report, regularity_report, smoothing_probe

    if name == "smoothing":
        h = _operator(p)
        band = p["band"] if p["band"] is not None else p["N"] / 8
        r = smoothing_probe(h, p["alpha"], p["rho"], band, p["trials"], p["seed"])
        return r, True
    if name == "contraction":
        h, f = _extremizer(p)
        r = contraction_probe(h, f, p["eps"], p["t"], p["pairs"], p["seed"])
        return r, True
    if name == "decay":
        _, f = _extremizer(p)
        floor = p["floor"] if p["floor"] is not None else 1e-6 * f.max_abs()
        r = decay_report(f, floor)
        r.pop("ratio")
        if p["csv"]:
            rows = ["curve,x1,x2,ratio"]
            for curve, table in r["profiles"].items():
                rows += [f"{curve},{a!r},{b!r},{c!r}" for a, b, c in table]
            atomic_write_text(p["csv"], "\n".join(rows) + "\n")
        return r, True
    if name == "regularity":
        _, f = _extremizer(p)
        return regularity_report(f, p["rho"], p["varrho"]), True
    raise ConfigError(f"unknown probe {name!r}", "command")


def set_threads(n: int) -> int:
    import numba

    n = max(1, min(int(n), numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def execute(cfg: RunConfig) -> RunReport:
    threads = set_threads(cfg.threads)
    start = time.perf_counter()
    parts = cfg.command.split()
    p = cfg.params
    if parts[0] == "verify":
        results, ok = _run_verify(parts[1], p)
    elif parts[0] == "probe":
        results, ok = _run_probe(parts[1], p)
    elif parts[0] == "check":
        from .checks import run_check

        rep = run_check(parts[1])
        results, ok = rep.as_dict(), rep.ok
    else:
        results, ok = globals()[f"_run_{parts[0]}"](p)
    env = {"version": __version__, "threads": threads,
           "wall_ms": round(1000 * (time.perf_counter() - start), 3)}
    return RunReport(cfg.command, dict(p), results, bool(ok), env)


# -- argument parsing --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="parext", description="Parabolic convolution extremizer toolkit")
    ap.add_argument("--version", action="version", version=f"parext {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(parser, keys):
        parser.add_argument("--config", help="flat key = value settings file")
        parser.add_argument("--report", help="write the JSON report here instead of stdout")
        parser.add_argument("--threads", type=str)
        for key in sorted(keys):
            flag = "--" + key.replace("_", "-")
            dest = "lam" if key == "lam" else key
            parser.add_argument(flag, dest=dest, type=str, default=None)
            if key == "lam":
                parser.add_argument("--lambda", dest="lam", type=str, default=None)

    for cmd, (defaults, required) in COMMANDS.items():
        if " " in cmd:
            continue
        add(sub.add_parser(cmd), set(defaults) | set(required))
    for group, names in (("verify", VERIFY), ("probe", PROBE)):
        gp = sub.add_parser(group).add_subparsers(dest="target", required=True)
        for name in names:
            defaults, required = COMMANDS[f"{group} {name}"]
            add(gp.add_parser(name), set(defaults) | set(required))
    from .checks import CHECKS

    ck = sub.add_parser("check", help="run a named end-to-end acceptance study")
    ck.add_argument("target", choices=sorted(CHECKS))
    ck.add_argument("--report")
    ck.add_argument("--threads", type=str)
    ck.add_argument("--config")
    return ap


_META = {"command", "target", "config", "report", "threads"}


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    command = ns.command if getattr(ns, "target", None) is None else f"{ns.command} {ns.target}"
    flags = {k: v for k, v in vars(ns).items() if k not in _META and v is not None}
    file_values = read_config_file(ns.config) if getattr(ns, "config", None) else {}
    if ns.command == "check":
        if file_values:
            raise UnknownKey("check takes no settings", next(iter(file_values)))
        cfg = RunConfig(command, {})
        if ns.threads:
            cfg.threads = _coerce("threads", ns.threads)
        env = os.environ.get("PAREXT_THREADS")
        if env:
            cfg.threads = _coerce("threads", env)
    else:
        if ns.threads:
            flags["threads"] = ns.threads
        cfg = parse_config(command, file_values, flags)
    cfg.report = getattr(ns, "report", None)
    return cfg


def run_command(argv, threads: int | None = None) -> RunReport:
    """Parse ``argv`` and execute in-process (no output written)."""
    cfg = config_from_args(build_parser().parse_args(argv))
    if threads is not None:
        cfg.threads = threads
    return execute(cfg)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        print(json.dumps({"schema_version": SCHEMA_VERSION, "error": "UsageError",
                          "message": "invalid command line"}), file=sys.stderr)
        return 1
    try:
        cfg = config_from_args(ns)
        report = execute(cfg)
    except (ParextError, OSError, ValueError, ArithmeticError) as exc:
        err = {"schema_version": SCHEMA_VERSION, "error": type(exc).__name__, "message": str(exc)}
        key = getattr(exc, "key", None)
        if key is not None:
            err["key"] = key
        print(json.dumps(err), file=sys.stderr)
        return 1
    text = json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n"
    if cfg.report:
        atomic_write_text(cfg.report, text)
    else:
        sys.stdout.write(text)
    return 0 if report.ok else 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
