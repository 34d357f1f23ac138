"""Config-driven experiment driver.

One JSON document describes an environment and a command; the driver
runs the requested computations and writes plot-ready artifacts into
an output directory:

* ``conditions.json``: standing-assumption and drift classification report
* ``curve.csv``: survival/mass curve with normalizing constants
* ``constants.json``: limit constants and their stabilization verdicts
* ``diagnostics/<name>.csv`` and ``diagnostics/summary.json``: one file
  per limit diagnostic plus a digest
* ``simulation.csv``: Monte Carlo survival counts with intervals

Exit codes: 0 success, 1 computational error, 2 configuration error,
3 verification failure (some flagged invariant was violated; artifacts
are still written so the failure can be inspected).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import asymcheck, cfrac, extinct, mcsim
from .seqtools import limit_estimate
from .env import (
    EnvError,
    EnvFamily,
    classify_ratio_drift,
    degeneracy_flag,
    dtilde_sign_profile,
    excluded_tau_roots,
    fixture,
    limits,
    variation_partial_sum,
    variation_total_bound,
)

EXIT_OK = 0
EXIT_COMPUTE = 1
EXIT_CONFIG = 2
EXIT_VERIFY = 3

COMMANDS = ("conditions", "exact", "cfrac", "verify", "simulate", "all")
FORMATS = ("csv", "json", "both")

_TOP_KEYS = {"env", "command", "horizons", "nmax", "seed", "replicates",
             "threads", "out", "format", "tolerances"}
_ENV_KEYS = {"fixture", "kind", "base", "delta", "rate", "exponent",
             "table", "extend", "name"}
_TOLERANCE_KEYS = {"survival_cross_check", "bridge_residual"}


class ConfigError(ValueError):
    """Configuration rejected; the message names the offending key."""


@dataclass(frozen=True)
class RunConfig:
    env: EnvFamily
    command: str = "all"
    horizons: tuple[int, ...] = (1, 2, 5, 10)
    nmax: int = 200
    seed: int = 20260815
    replicates: int = 100_000
    threads: int = 4
    out: Path = Path("out")
    format: str = "both"
    tolerances: dict = field(default_factory=lambda: {
        "survival_cross_check": 1e-9, "bridge_residual": 1e-12})

    @property
    def write_csv(self) -> bool:
        return self.format in ("csv", "both")

    @property
    def write_json(self) -> bool:
        return self.format in ("json", "both")


# ---------------------------------------------------------------------
# config ingestion
# ---------------------------------------------------------------------

def build_env(doc: dict) -> EnvFamily:
    """Environment from the ``env`` block: a named fixture or a kind."""
    if not isinstance(doc, dict):
        raise ConfigError("env must be an object")
    unknown = set(doc) - _ENV_KEYS
    if unknown:
        raise ConfigError(f"unknown env key {sorted(unknown)[0]!r}")
    try:
        if "fixture" in doc:
            extra = set(doc) - {"fixture"}
            if extra:
                raise ConfigError(
                    f"env key {sorted(extra)[0]!r} not allowed beside 'fixture'")
            return fixture(doc["fixture"])
        kind = doc.get("kind")
        if kind is None:
            raise ConfigError("env needs either 'fixture' or 'kind'")
        name = doc.get("name", "")
        if kind == "constant":
            base = doc.get("base")
            if base is None:
                raise ConfigError("constant env needs 'base'")
            return EnvFamily.constant(*base, name=name)
        if kind == "geometric":
            return EnvFamily.geometric(doc.get("base"), doc.get("delta"),
                                       doc.get("rate"), name=name)
        if kind == "power":
            return EnvFamily.power(doc.get("base"), doc.get("delta"),
                                   doc.get("exponent"), name=name)
        if kind == "table":
            rows = doc.get("table")
            if rows is None:
                raise ConfigError("table env needs 'table'")
            base = doc.get("base")
            if "extend" in doc:
                want = doc["extend"]
                if not isinstance(want, bool):
                    raise ConfigError("extend must be a boolean")
                if want and base is None:
                    raise ConfigError(
                        "extend=true needs 'base' for the continuation")
                if not want and base is not None:
                    raise ConfigError("extend=false conflicts with 'base'")
            return EnvFamily.from_table(rows, base=base, name=name)
        raise ConfigError(f"unknown env kind {kind!r}")
    except ConfigError:
        raise
    except (EnvError, TypeError, KeyError) as exc:
        raise ConfigError(f"invalid environment: {exc}") from exc


def validate_config(doc: dict) -> RunConfig:
    """Validate a parsed JSON document into a RunConfig.

    Unknown keys anywhere in the document are rejected by name;
    horizons must be strictly increasing nonnegative integers;
    tolerances must be positive reals drawn from the known set.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config key {sorted(unknown)[0]!r}")
    if "env" not in doc:
        raise ConfigError("missing required key 'env'")
    env = build_env(doc["env"])

    command = doc.get("command", "all")
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; "
                          f"expected one of {', '.join(COMMANDS)}")
    fmt = doc.get("format", "both")
    if fmt not in FORMATS:
        raise ConfigError(f"unknown format {fmt!r}")

    horizons = doc.get("horizons", [1, 2, 5, 10])
    if (not isinstance(horizons, (list, tuple)) or not horizons
            or any(not isinstance(h, int) or isinstance(h, bool) or h < 0
                   for h in horizons)
            or list(horizons) != sorted(set(horizons))):
        raise ConfigError("horizons must be strictly increasing "
                          "nonnegative integers")

    def _positive_int(key, default, minimum=1):
        v = doc.get(key, default)
        if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
            raise ConfigError(f"{key} must be an integer >= {minimum}")
        return v

    nmax = _positive_int("nmax", 200, minimum=2)
    seed = _positive_int("seed", 20260815, minimum=0)
    replicates = _positive_int("replicates", 100_000)
    threads = _positive_int("threads", 4)

    tolerances = {"survival_cross_check": 1e-9, "bridge_residual": 1e-12}
    user_tol = doc.get("tolerances", {})
    if not isinstance(user_tol, dict):
        raise ConfigError("tolerances must be an object")
    for key, value in user_tol.items():
        if key not in _TOLERANCE_KEYS:
            raise ConfigError(f"unknown tolerance key {key!r}")
        if not isinstance(value, (int, float)) or isinstance(value, bool) \
                or not value > 0:
            raise ConfigError(f"tolerance {key!r} must be positive")
        tolerances[key] = float(value)

    out = doc.get("out", "out")
    if not isinstance(out, str) or not out:
        raise ConfigError("out must be a nonempty path string")

    return RunConfig(env=env, command=command, horizons=tuple(horizons),
                     nmax=nmax, seed=seed, replicates=replicates,
                     threads=threads, out=Path(out), format=fmt,
                     tolerances=tolerances)


def parse_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {p}: {exc}") from exc
    return validate_config(doc)


# ---------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17e")


def _jsonable(obj):
    """Recursively convert report objects into strict-JSON values."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header, rows) -> None:
    """Rows of floats/ints; floats rendered with 17 significant digits."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([str(v) if isinstance(v, (int, np.integer))
                        else _fmt(v) for v in row])


def _diag_csv(cfg: RunConfig, diag) -> None:
    if cfg.write_csv:
        write_csv(cfg.out / "diagnostics" / f"{diag.name}.csv",
                  ("index", "value"), zip(diag.index, diag.values))


def _diag_summary(cfg: RunConfig, diag) -> dict:
    entry = diag.summary()
    if cfg.write_json and not cfg.write_csv:
        entry["index"] = _jsonable(diag.index)
        entry["values"] = _jsonable(diag.values)
    return entry


# ---------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------

def cmd_conditions(cfg: RunConfig) -> tuple[dict, int]:
    env = cfg.env
    lim = limits(env)
    drift = classify_ratio_drift(env, K=max(cfg.nmax, 50))
    try:
        deg = degeneracy_flag(env)
        deg_out = {"flag": bool(deg), "candidate": deg.candidate,
                   "shortcut": deg.shortcut, "diagnostic": deg.diagnostic}
    except EnvError as exc:
        deg_out = {"flag": None, "candidate": None, "shortcut": None,
                   "diagnostic": str(exc)}
    try:
        roots = list(excluded_tau_roots(env))
    except EnvError:
        roots = None
    report = {
        "environment": env.describe(),
        "limits": {"a": lim.a, "b": lim.b, "d": lim.d, "theta": lim.theta,
                   "rho": lim.rho, "rho1": lim.rho1},
        "variation_partial_sum": variation_partial_sum(env, max(cfg.nmax, 50)),
        "variation_total_bound": variation_total_bound(env),
        "drift_class": drift.drift_class,
        "tau": drift.tau,
        "drift_estimates": drift.estimates,
        "excluded_tau_roots": roots,
        "dtilde_sign_profile": dtilde_sign_profile(env),
        "degenerate": deg_out,
        "notes": list(drift.notes),
    }
    write_json(cfg.out / "conditions.json", report)
    return report, 0


def cmd_exact(cfg: RunConfig) -> tuple[dict, int]:
    env, nmax = cfg.env, cfg.nmax
    curve = extinct.extinction_curve(env, nmax)
    write_csv(cfg.out / "curve.csv", curve.header,
              ([int(row[0])] + list(row[1:]) for row in curve.rows))

    failures = 0
    worst = 0.0
    for n in sorted({1, 2, nmax // 2, nmax}):
        if n < 1:
            continue
        s1, s2 = extinct.survival_backward(env, n)
        row = curve.rows[n - 1]
        m1, m2 = float(row[1]), float(row[2])
        worst = max(worst,
                    abs(s1 - m1) / max(s1, 1e-300),
                    abs(s2 - m2) / max(s2, 1e-300))
    if worst > cfg.tolerances["survival_cross_check"]:
        failures += 1

    cons = extinct.estimate_constants(env, nmax)
    gs = extinct.g_sequences(env, min(nmax, 400))
    deg = cons.degenerate
    report = {
        "environment": env.describe(),
        "nmax": nmax,
        "survival_cross_check": {"worst_rel": worst,
                                 "tol": cfg.tolerances["survival_cross_check"],
                                 "passed": failures == 0},
        "kappa": {"limit": list(cons.kappa_limit),
                  "stabilized": list(cons.kappa_stabilized),
                  "final": [cons.kappa[-1, 0], cons.kappa[-1, 1]]},
        "varkappa": {"limit": list(cons.varkappa_limit),
                     "stabilized": list(cons.varkappa_stabilized),
                     "final": [cons.varkappa[-1, 0], cons.varkappa[-1, 1]]},
        "degenerate": {"flag": deg.degenerate, "candidate": deg.candidate,
                       "shortcut": deg.shortcut, "diagnostic": deg.diagnostic},
        "varkappa_trend_to_zero": cons.varkappa_trend_to_zero,
        "g_limit": gs.g_limit,
        "g_final": [gs.g1_recursion[-1], gs.g2_recursion[-1]],
        "h_limit": gs.h_lim,
        "f_limit": gs.f_lim,
        "l_hat": gs.l_hat,
        "l_stabilized": gs.l_stabilized,
        "notes": list(cons.notes),
    }
    write_json(cfg.out / "constants.json", report)
    return report, failures


def cmd_cfrac(cfg: RunConfig) -> tuple[dict, int, list]:
    env = cfg.env
    kmax = min(cfg.nmax, 200)
    ks = np.arange(1, kmax + 1)

    diags = []
    for prov in ("step_ratio", "row_ratio"):
        coeffs = cfrac.coeffs_for(env, prov)
        tails = cfrac.tails_block(coeffs, kmax, env=env)
        est, stable = limit_estimate(tails)
        diags.append(asymcheck.LimitDiagnostic(
            f"{prov}_tails", ks, tails, est, stable))
    col = cfrac.coeffs_for(env, "column_ratio")
    vals = np.array([cfrac.column_value(col, k) for k in ks])
    est, stable = limit_estimate(vals)
    diags.append(asymcheck.LimitDiagnostic(
        "column_descending_values", ks, vals, est, stable))

    # consistency gate: independent matrix evaluation of the same
    # objects must agree with the stepwise one at sampled depths;
    # the column family runs downward, so its counterpart is the
    # forward value rather than the ascending approximant
    worst_bridge = 0.0
    for prov in ("step_ratio", "row_ratio", "column_ratio"):
        coeffs = cfrac.coeffs_for(env, prov)
        for k, n in ((1, 40), (3, 60), (10, 80)):
            if prov == "column_ratio":
                direct = cfrac.column_value(coeffs, k)
            else:
                direct = cfrac.approximant(coeffs, k, n)
            via_matrix = cfrac.matrix_bridge(env, prov, k, n)
            worst_bridge = max(worst_bridge, abs(direct - via_matrix))
    failures = int(worst_bridge > cfg.tolerances["bridge_residual"])

    fl = cfrac.fluctuations(env, K=min(max(cfg.nmax, 64), 400))
    for name, seq in (("eps_f", fl.eps_f), ("eps_xi", fl.eps_xi),
                      ("delta_f", fl.delta_f), ("delta_xi", fl.delta_xi)):
        est, stable = limit_estimate(seq)
        diags.append(asymcheck.LimitDiagnostic(
            name, np.arange(1, seq.size + 1), seq, est, stable))

    entries = []
    for d in diags:
        _diag_csv(cfg, d)
        entries.append(_diag_summary(cfg, d))

    report = {
        "environment": env.describe(),
        "bridge_residual": {"worst": worst_bridge,
                            "tol": cfg.tolerances["bridge_residual"],
                            "passed": failures == 0},
        "decay_estimates": {"q_hat_eps_f": fl.q_hat_eps_f,
                            "q_hat_eps_xi": fl.q_hat_eps_xi,
                            "q_hat_delta_f": fl.q_hat_delta_f,
                            "q_hat_delta_xi": fl.q_hat_delta_xi,
                            "eps_f_alt_ratio": fl.eps_f_alt_ratio},
        "notes": list(fl.notes),
    }
    return report, failures, entries


def cmd_verify(cfg: RunConfig) -> tuple[dict, int, list]:
    suite = asymcheck.run_suite(cfg.env, nmax=max(cfg.nmax, 400),
                                threads=cfg.threads)
    entries = []
    for d in suite.all_diagnostics():
        _diag_csv(cfg, d)
        entries.append(_diag_summary(cfg, d))
    digest = suite.summary()
    # the per-diagnostic digests live in the flat list next to the
    # cfrac entries; keep only the names here
    digest["diagnostics"] = [d.name for d in suite.all_diagnostics()]
    return digest, suite.verification_failures, entries


def cmd_simulate(cfg: RunConfig) -> tuple[dict, int]:
    rows = []
    summary = {"environment": cfg.env.describe(), "results": []}
    for start_type in (1, 2):
        res = mcsim.run(cfg.env, start_type, cfg.horizons, cfg.replicates,
                        cfg.seed, threads=cfg.threads)
        rows.extend(res.rows())
        summary["results"].append({
            "start_type": start_type,
            "survivors": _jsonable(res.survivors),
            "exploded": res.exploded,
            "offspring_mean": list(res.offspring_mean),
            "offspring_stderr": list(res.offspring_stderr),
        })
    header = ("horizon", "start_type", "survivors", "replicates",
              "p_hat", "ci_low", "ci_high", "seed")
    write_csv(cfg.out / "simulation.csv", header,
              [[r[h] for h in header] for r in rows])
    return summary, 0


def dispatch(cfg: RunConfig) -> int:
    """Run the configured command; returns the exit code.

    ``conditions`` and ``exact`` own their artifacts
    (``conditions.json``, ``curve.csv`` + ``constants.json``);
    the digests of ``cfrac``, ``verify`` and ``simulate`` are merged
    into ``diagnostics/summary.json``.
    """
    cfg.out.mkdir(parents=True, exist_ok=True)
    failures = 0
    diag_entries: list = []
    summary: dict = {}

    steps = (COMMANDS[:-1] if cfg.command == "all" else (cfg.command,))
    for step in steps:
        if step == "conditions":
            _, f = cmd_conditions(cfg)
        elif step == "exact":
            _, f = cmd_exact(cfg)
        elif step == "cfrac":
            summary["cfrac"], f, entries = cmd_cfrac(cfg)
            diag_entries.extend(entries)
        elif step == "verify":
            summary["verify"], f, entries = cmd_verify(cfg)
            diag_entries.extend(entries)
        elif step == "simulate":
            summary["simulation"], f = cmd_simulate(cfg)
        failures += f

    if summary:
        summary["diagnostics"] = diag_entries
        summary["verification_failures"] = failures
        write_json(cfg.out / "diagnostics" / "summary.json", summary)

    return EXIT_VERIFY if failures else EXIT_OK


# ---------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------

def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bpve",
        description="Extinction-time laboratory for two-type "
                    "linear-fractional branching processes.")
    parser.add_argument("--config", required=True, help="path to JSON config")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--threads", type=int, help="worker threads (overrides config)")
    parser.add_argument("--format", choices=FORMATS, dest="fmt",
                        help="artifact format (overrides config)")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config)
        if args.out is not None:
            cfg = replace(cfg, out=Path(args.out))
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be a nonnegative integer")
            cfg = replace(cfg, seed=args.seed)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("threads must be a positive integer")
            cfg = replace(cfg, threads=args.threads)
        if args.fmt is not None:
            cfg = replace(cfg, format=args.fmt)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return dispatch(cfg)
    except (mcsim.InvalidLawError, mcsim.ExplosionGuardError,
            cfrac.SingularApproximantError, cfrac.TailNotConvergedError,
            asymcheck.PreconditionError, EnvError, ValueError,
            ArithmeticError, RuntimeError) as exc:
        print(f"computational error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    raise SystemExit(main())
