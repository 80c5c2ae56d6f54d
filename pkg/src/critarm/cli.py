"""The `critical-arm` command line: exact-verification suites, Monte Carlo
estimation campaigns, critical-coupling scans, and exponent reports, all
driven by JSON config files.

Exit codes: 0 success, 2 config/validation error, 3 acceptance-gate failure
(only with --gate).
"""

from __future__ import annotations

import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import click

from . import analysis

SCHEMA_VERSION = 1
EXIT_VALIDATION = 2
EXIT_GATE = 3


class ValidationError(ValueError):
    pass


def _load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config: {exc}")
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    if cfg.get("schema-version") != SCHEMA_VERSION:
        raise ValidationError(
            f"config must declare \"schema-version\": {SCHEMA_VERSION}")
    return cfg


def _require(cfg, key, kind, positive=False):
    if key not in cfg:
        raise ValidationError(f"missing config field {key!r}")
    val = cfg[key]
    if kind is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, kind):
        raise ValidationError(f"config field {key!r} must be {kind}")
    if positive and (isinstance(val, (int, float)) and val <= 0):
        raise ValidationError(f"config field {key!r} must be positive")
    return val


def _positive_int(cfg, key, default=None):
    val = cfg.get(key, default)
    if not isinstance(val, int) or isinstance(val, bool) or val <= 0:
        raise ValidationError(f"config field {key!r} must be a positive "
                              "integer")
    return val


def _beta(cfg, d):
    """A numeric beta, or the cached critical estimate via "betac"."""
    val = cfg.get("beta", "betac")
    if val == "betac":
        return analysis.load_beta_c(d)
    if not isinstance(val, (int, float)) or val < 0:
        raise ValidationError("beta must be nonnegative or \"betac\"")
    return float(val)


def _pool_map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _gate_slope(points, target, tol, label):
    """Fit log-log slope over (x, Estimate) points; returns (ok, message)."""
    try:
        fit = analysis.fit_log_slope_auto(points)
    except ValueError as exc:
        return False, f"{label}: slope unavailable ({exc}) -> FAIL"
    ok = abs(fit.slope - target) <= tol
    msg = (f"{label}: slope {fit.slope:+.4f} +- {fit.slope_stderr:.4f} "
           f"target {target:+.4f} tol {tol:.3f} -> "
           f"{'pass' if ok else 'FAIL'}")
    return ok, msg


# ---------------------------------------------------------------------------
# command runners (each returns a list of gate (ok, message) results)
# ---------------------------------------------------------------------------

def _run_verify(cfg, seed, threads, out):
    from . import exact_oracle as eo
    names = cfg.get("inequalities", "all")
    if names == "all":
        names = list(eo.INEQUALITY_NAMES)
    unknown = set(names) - set(eo.INEQUALITY_NAMES)
    if unknown:
        raise ValidationError(f"unknown inequalities: {sorted(unknown)}")
    instances = _positive_int(cfg, "instances", 100)
    reports = eo.run_inequality_suite(names, n_instances=instances,
                                      base_seed=seed, csv_path=out)
    failures = [r for r in reports if not r.passed]
    for r in failures:
        click.echo(f"FAIL {r.name} seed={r.instance} margin={r.margin:.3e}")
    click.echo(f"verify: {len(reports) - len(failures)}/{len(reports)} "
               "instances passed")
    return [(not failures, f"verify: {len(failures)} failing instances")]


def _run_onearm(cfg, seed, threads, out):
    from . import spin_fk_mc as smc
    d = _positive_int(cfg, "d")
    ms = _require(cfg, "ms", list)
    if not ms or any(not isinstance(m, int) or m <= 0 for m in ms):
        raise ValidationError("ms must be a list of positive integers")
    bc = cfg.get("bc", "wired")
    if bc not in ("wired", "free"):
        raise ValidationError("bc must be wired or free")
    beta = _beta(cfg, d)
    chains = _positive_int(cfg, "chains", 4)
    sweeps = _positive_int(cfg, "sweeps", 2000)
    N = cfg.get("N")

    def point(m):
        return smc.estimate_one_arm(d, m, beta, N=N, bc=bc, chains=chains,
                                    sweeps=sweeps, seed=seed, csv_path=None)

    ests = _pool_map(point, ms, threads)
    for m, est in zip(ms, ests):
        if out:
            smc.append_csv(out, "one_arm", est)
        click.echo(f"one_arm d={d} bc={bc} m={m}: "
                   f"{est.mean:.5f} +- {est.stderr:.5f}")
    gate = cfg.get("gate")
    if gate:
        return [_gate_slope(list(zip(ms, ests)), float(gate["slope"]),
                            float(gate["tol"]), f"one_arm d={d} {bc}")]
    return []


def _run_magnetisation(cfg, seed, threads, out):
    from . import spin_fk_mc as smc
    d = _positive_int(cfg, "d")
    N = _positive_int(cfg, "N")
    hs = _require(cfg, "hs", list)
    if not hs or any(not isinstance(h, (int, float)) or h <= 0 for h in hs):
        raise ValidationError("hs must be a list of positive fields")
    beta = _beta(cfg, d)
    chains = _positive_int(cfg, "chains", 4)
    sweeps = _positive_int(cfg, "sweeps", 2000)

    def point(h):
        return smc.estimate_magnetisation(d, N, beta, float(h),
                                          chains=chains, sweeps=sweeps,
                                          seed=seed)

    ests = _pool_map(point, hs, threads)
    for h, est in zip(hs, ests):
        if out:
            smc.append_csv(out, "magnetisation_vs_h", est)
        click.echo(f"magnetisation d={d} h={h}: "
                   f"{est.mean:.5f} +- {est.stderr:.5f}")
    gate = cfg.get("gate")
    if gate:
        return [_gate_slope(list(zip(hs, ests)), float(gate["slope"]),
                            float(gate["tol"]), f"magnetisation d={d}")]
    return []


def _run_volume(cfg, seed, threads, out):
    from . import spin_fk_mc as smc
    d = _positive_int(cfg, "d")
    N = _positive_int(cfg, "N")
    thresholds = _require(cfg, "thresholds", list)
    if (not thresholds
            or any(not isinstance(t, int) or t <= 0 for t in thresholds)
            or sorted(thresholds) != thresholds):
        raise ValidationError("thresholds must be ascending positive ints")
    beta = _beta(cfg, d)
    ests = smc.estimate_volume_tail(
        d, N, beta, thresholds, chains=_positive_int(cfg, "chains", 4),
        sweeps=_positive_int(cfg, "sweeps", 2000), seed=seed)
    for t, est in zip(thresholds, ests):
        if out:
            smc.append_csv(out, "volume_tail", est)
        click.echo(f"volume d={d} T={t}: {est.mean:.5f} +- {est.stderr:.5f}")
    return []


def _run_drc(cfg, seed, threads, out):
    from . import current_mc as cmc
    d = _positive_int(cfg, "d")
    N = _positive_int(cfg, "N")
    ms = _require(cfg, "ms", list)
    if not ms or any(not isinstance(m, int) or m <= 0 or m > N for m in ms):
        raise ValidationError("ms must be positive integers <= N")
    beta = _beta(cfg, d)
    chains = _positive_int(cfg, "chains", 2)
    sweeps = _positive_int(cfg, "sweeps", 2000)

    def point(m):
        return cmc.drc_one_arm(d, N, m, beta, chains=chains, sweeps=sweeps,
                               seed=seed)

    ests = _pool_map(point, ms, threads)
    from .spin_fk_mc import append_csv
    for m, est in zip(ms, ests):
        if out:
            append_csv(out, "drc_one_arm", est)
        click.echo(f"drc_one_arm d={d} m={m}: "
                   f"{est.mean:.5f} +- {est.stderr:.5f}")
    gate = cfg.get("gate")
    if gate:
        return [_gate_slope(list(zip(ms, ests)), float(gate["slope"]),
                            float(gate["tol"]), f"drc_one_arm d={d}")]
    return []


def _run_diagrams(cfg, seed, threads, out):
    from . import observables as ob
    from .analysis import Estimate
    from .spin_fk_mc import append_csv
    d = _positive_int(cfg, "d")
    Ns = _require(cfg, "Ns", list)
    if not Ns or any(not isinstance(n, int) or n <= 0 for n in Ns):
        raise ValidationError("Ns must be positive integers")
    beta = _beta(cfg, d)
    for N in Ns:
        bub, tri = ob.diagrams(d, N, beta,
                               chains=_positive_int(cfg, "chains", 4),
                               sweeps=_positive_int(cfg, "sweeps", 2000),
                               seed=seed)
        for res in (bub, tri):
            if out:
                est = Estimate(res.value, res.stderr, 1,
                               params={"d": d, "N": N, "m": 0, "beta": beta,
                                       "h": 0.0, "bc": "free"},
                               seed=seed,
                               extras={"walltime_s":
                                       res.extras.get("walltime_s", 0.0)})
                append_csv(out, res.quantity, est)
            click.echo(f"{res.quantity} d={d} N={N}: "
                       f"{res.value:.5f} +- {res.stderr:.5f}")
    return []


def _run_betac(cfg, seed, threads, out):
    d = _positive_int(cfg, "d")
    sizes = _require(cfg, "sizes", list)
    grid = _require(cfg, "grid", list)
    if len(sizes) < 2 or len(grid) < 3:
        raise ValidationError("need >= 2 sizes and >= 3 grid points")
    bc_hat, half = analysis.estimate_beta_c(
        d, sizes, grid, chains=_positive_int(cfg, "chains", 2),
        sweeps=_positive_int(cfg, "sweeps", 4000), seed=seed,
        refine=_positive_int(cfg, "refine", 1))
    click.echo(f"beta_c(d={d}) = {bc_hat:.6f} +- {half:.6f}")
    if cfg.get("store", False):
        analysis.store_beta_c(
            d, bc_hat, half,
            provenance=f"cli betac scan sizes={sizes} grid={grid} "
                       f"seed={seed}")
    return []


def _run_report(cfg, seed, threads, out):
    path = _require(cfg, "csv", str)
    if not os.path.exists(path):
        raise ValidationError(f"results csv not found: {path}")
    rows = analysis.read_results_csv(path)
    tol = float(cfg.get("tolerance", 0.35))
    report = analysis.exponent_report(rows, tolerance=tol)
    gates = []
    for entry in report:
        click.echo(f"{entry['observable']} d={entry['d']} "
                   f"bc={entry['bc']}: slope {entry['slope']:+.4f} "
                   f"+- {entry['slope_stderr']:.4f} "
                   f"predicted {entry['predicted']} -> "
                   f"{'pass' if entry['pass'] else 'FAIL'}")
        gates.append((bool(entry["pass"]),
                      f"{entry['observable']} d={entry['d']}"))
    if out:
        analysis.write_report(report, out)
    return gates


_RUNNERS = {
    "verify": _run_verify,
    "onearm": _run_onearm,
    "magnetisation": _run_magnetisation,
    "volume": _run_volume,
    "drc": _run_drc,
    "diagrams": _run_diagrams,
    "betac": _run_betac,
    "report": _run_report,
}


@click.command()
@click.argument("command", type=click.Choice(sorted(_RUNNERS)))
@click.option("--config", "config_path", required=True,
              type=click.Path(), help="JSON experiment config.")
@click.option("--gate", is_flag=True,
              help="Exit 3 when a configured acceptance gate fails.")
@click.option("--seed", type=int, default=None,
              help="Master seed (overrides the config).")
@click.option("--threads", type=int, default=None,
              help="Worker threads (default: CRITARM_THREADS or 1).")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Results CSV path (overrides the config).")
def main(command, config_path, gate, seed, threads, out_path):
    """Simulation and verification toolkit for critical spin clusters."""
    try:
        cfg = _load_config(config_path)
        block = cfg.get(command, {})
        if not isinstance(block, dict):
            raise ValidationError(f"config block {command!r} must be an "
                                  "object")
        master_seed = seed if seed is not None else cfg.get("seed", 0)
        if not isinstance(master_seed, int):
            raise ValidationError("seed must be an integer")
        nthreads = threads if threads is not None else int(
            os.environ.get("CRITARM_THREADS", "1"))
        out = out_path or block.get("out") or cfg.get("out")
        gates = _RUNNERS[command](block, master_seed, nthreads, out)
    except ValidationError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    failed = [msg for ok, msg in gates if not ok]
    for ok, msg in gates:
        click.echo(msg)
    if gate and failed:
        sys.exit(EXIT_GATE)
    sys.exit(0)


if __name__ == "__main__":
    main()
