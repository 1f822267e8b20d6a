"""Command-line front end: ``fde-singular <command> key=value ... [--config FILE]``.

Exit status: 0 when every gating diagnostic passes, 1 on a diagnostic
failure, 2 on a configuration error, 3 on a numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import replace
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import COMMANDS, RunConfig, parse_config
from .diagnostics import DiagnosticsReport
from .errors import ConfigError, FDEError, NumericalFailure, RangeError
from .exponents import derive_exponents, validate_asymptotics_mode
from .metrics import WeightedNorm, convergence_to_profile
from .pde import (BoundarySpec, RadialField, SchemeOptions, annulus_grid, simulate,
                  simulate_rescaled, write_trajectory)
from .profile import ProfileOptions, __version__, export_profile, profile_diagnostics, solve_profile
from .selfsimilar import BarenblattSolution, StaticSingular, barenblatt_time_derivative

log = logging.getLogger("fdesingular")

EXIT_OK, EXIT_DIAG, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _write_manifest(out: Path, cfg: RunConfig, extra: dict, report: DiagnosticsReport | None):
    lines = [f"library_version = {__version__}", f"command = {cfg.command}"]
    lines += cfg.manifest_lines()
    lines += [f"{k} = {_fmt(v)}" for k, v in extra.items()]
    if report is not None:
        lines.append(f"diagnostics_passed = {report.passed}")
    (out / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if report is not None:
        (out / "diagnostics.json").write_text(report.to_json() + "\n", encoding="utf-8")


def _profile_options(cfg: RunConfig) -> ProfileOptions:
    return ProfileOptions(eta=cfg["eta"], points_per_decade=cfg["points_per_decade"],
                          plateau_tol=cfg["plateau_tol"], r_max_cap=cfg["r_max_cap"],
                          rtol=cfg["profile_rtol"])


def run_profile(cfg: RunConfig, out: Path):
    e = derive_exponents(cfg["n"], cfg["m"], cfg["gamma"])
    p = solve_profile(cfg["A"], e, _profile_options(cfg))
    rep = profile_diagnostics(p)
    # refinement gate: doubling the grid must move A0 by < 10x the plateau tolerance
    fine = solve_profile(cfg["A"], e, replace(_profile_options(cfg),
                                              points_per_decade=2 * cfg["points_per_decade"]))
    shift = abs(fine.A0 / p.A0 - 1.0)
    rep.add("info_refinement_gate", shift < 10 * cfg["plateau_tol"], shift, 10 * cfg["plateau_tol"])
    export_profile(p, out / "profile.txt")
    (out / "diagnostics.txt").write_text(str(rep) + "\n", encoding="utf-8")
    _write_manifest(out, cfg, {"A0": p.A0, "lambda": p.lam, "D_A": p.D_A,
                               "A0_uncertainty": p.run.far.uncertainty,
                               "r_max": p.run.r_max, "eps": p.run.seed.eps}, rep)
    return rep


def _bump(cfg: RunConfig, y):
    lo, hi = cfg["bump_lo"], cfg["bump_hi"]
    inside = (y > lo) & (y < hi)
    xi = np.where(inside, (y - lo) / (hi - lo), 0.0)
    base = np.sin(np.pi * xi) ** 2
    if cfg["bump_shape"] == "random":
        rng = np.random.default_rng(cfg["seed"])
        c = rng.uniform(0.0, 1.0, 3)
        mod = 1.0 + sum(ck * np.sin((k + 1) * np.pi * xi) ** 2 for k, ck in enumerate(c))
        base = base * mod / np.max(base * mod)
    return np.where(inside, base, 0.0)


def run_simulate(cfg: RunConfig, out: Path):
    e = derive_exponents(cfg["n"], cfg["m"], cfg["gamma"])
    R = cfg["R"]
    rep = DiagnosticsReport(f"simulate oracle={cfg['oracle']}")
    rows = []
    if cfg["oracle"] == "static":
        S = StaticSingular(1.0, e.n, e.m)
        r = annulus_grid(R, cfg["pde_ppd"])
        u0 = RadialField.sample(S, r, 0.0, e)
        bs = BoundarySpec("exact", lambda x, t: S(x), lambda x, t: np.zeros_like(x), "static A=1")
        tr = simulate(u0, bs, (0.0, 1.0), SchemeOptions(rtol=cfg["pde_rtol"]),
                      t_eval=np.linspace(0.0, 1.0, cfg["snapshots"]))
        drift = float(np.max(np.abs(tr.values / u0.values - 1.0)))
        rep.add("static_drift", drift <= 1e-6, drift, 1e-6)
        rows.append((cfg["pde_ppd"], drift, math.nan))
        write_trajectory(tr, out / "trajectory")
    else:
        B = BarenblattSolution(cfg["T"], cfg["k"], e.n, e.m)
        t0, t1 = cfg["t0"], cfg["t1"]
        bs = BoundarySpec("exact", lambda x, t: B(x, t),
                          lambda x, t: barenblatt_time_derivative(B, x, t),
                          f"Barenblatt k={cfg['k']!r} T={cfg['T']!r}")
        errs = []
        for ppd in cfg["refine"]:
            r = annulus_grid(R, ppd)
            u0 = RadialField.sample(lambda x: B(x, t0), r, t0, e)
            tr = simulate(u0, bs, (t0, t1), SchemeOptions(rtol=cfg["pde_rtol"]),
                          t_eval=np.linspace(t0, t1, cfg["snapshots"]))
            exact = np.array([B(r, t) for t in tr.times])
            errs.append(float(np.max(np.abs(tr.values / exact - 1.0))))
        orders = [math.log2(a / b) / math.log2(q / p)
                  for a, b, p, q in zip(errs, errs[1:], cfg["refine"], cfg["refine"][1:])]
        for i, ppd in enumerate(cfg["refine"]):
            rows.append((ppd, errs[i], orders[i - 1] if i else math.nan))
        rep.add("finest_error", errs[-1] <= 1e-3, errs[-1], 1e-3)
        rep.add("spatial_order", min(orders) >= 1.9, min(orders), 1.9)
    with open(out / "refinement.csv", "w", encoding="utf-8") as fh:
        fh.write("points_per_decade,linf_relative_error,observed_order\n")
        for ppd, err, order in rows:
            fh.write(f"{ppd},{err!r},{order!r}\n")
    (out / "diagnostics.txt").write_text(str(rep) + "\n", encoding="utf-8")
    _write_manifest(out, cfg, {}, rep)
    return rep


def run_converge(cfg: RunConfig, out: Path):
    e = derive_exponents(cfg["n"], cfg["m"], cfg["gamma"])
    if not validate_asymptotics_mode(e):
        raise RangeError("convergence study needs gamma < n")
    p1 = solve_profile(1.0, e, _profile_options(cfg))
    target = p1.rescaled(p1.A0)
    r = annulus_grid(cfg["R"], cfg["pde_ppd"])
    f = np.asarray(target.f(r))
    u0 = RadialField(r, f * (1.0 + cfg["bump"] * _bump(cfg, r)), 0.0, e)
    bs = BoundarySpec("profile", lambda x, t: target.f(x), lambda x, t: np.zeros_like(x),
                      f"f_lambda0 with lambda0={target.lam!r}")
    taus = np.linspace(0.0, cfg["tau_end"], cfg["snapshots"])
    rt = simulate_rescaled(u0, bs, (0.0, cfg["tau_end"]), SchemeOptions(rtol=cfg["pde_rtol"]),
                           tau_eval=taus)
    w = WeightedNorm(e.mu1, e.n, r[0], r[-1], cfg["pde_ppd"])
    series = convergence_to_profile(rt, target, w)
    series.to_csv(out / "series.csv")
    rep = DiagnosticsReport("converge")
    d = series.increments
    rep.add("l1_strictly_decreasing", series.strictly_decreasing(), float(np.max(d)), 0.0)
    ds = np.diff(series.sup_compact)
    rep.add("sup_strictly_decreasing", bool(np.all(ds < 0)), float(np.max(ds)), 0.0)
    rep.add("l1_ratio", series.ratio < cfg["ratio_max"], series.ratio, cfg["ratio_max"])
    rep.add("never_exceeds_initial", bool(np.all(series.values <= series.values[0])),
            float(np.max(series.values) / series.values[0]), 1.0)
    (out / "diagnostics.txt").write_text(str(rep) + "\n", encoding="utf-8")
    _write_manifest(out, cfg, {"A0": target.A0, "lambda0": target.lam, "mu": e.mu1,
                               "accepted_steps": rt.scheme["accepted_steps"]}, rep)
    return rep


def _sweep_one(args):
    n, m, gamma, opts = args
    e = derive_exponents(n, m, gamma)
    p = solve_profile(1.0, e, opts)
    return gamma, p.A0, p.run.far.uncertainty, p.run.r_max, profile_diagnostics(p).passed


def run_sweep(cfg: RunConfig, out: Path, workers: int):
    opts = _profile_options(cfg)
    jobs = [(cfg["n"], cfg["m"], g, opts) for g in cfg["gammas"]]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    rep = DiagnosticsReport("sweep")
    with open(out / "sweep.csv", "w", encoding="utf-8") as fh:
        fh.write("gamma,A0,A0_uncertainty,r_max,diagnostics_passed\n")
        for gamma, A0, unc, rmax, ok in results:
            fh.write(f"{gamma!r},{A0!r},{unc!r},{rmax!r},{ok}\n")
            rep.add(f"profile_gamma_{gamma!r}", ok, 0.0, 0.0)
    (out / "diagnostics.txt").write_text(str(rep) + "\n", encoding="utf-8")
    _write_manifest(out, cfg, {}, rep)
    return rep


def _setup_logging():
    level = os.environ.get("FDE_SINGULAR_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fde-singular", description=__doc__.splitlines()[0])
    ap.add_argument("command", nargs="?", choices=COMMANDS)
    ap.add_argument("overrides", nargs="*", metavar="key=value")
    ap.add_argument("--config", type=Path)
    ap.add_argument("--out", type=Path)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--strict", action="store_true",
                    help="make informational (info_*) diagnostics gating as well")
    return ap


def _failure_summary(kind: str, message: str, checks=()):
    return json.dumps({"status": kind, "message": message,
                       "failed_checks": [c.name for c in checks]}, sort_keys=True)


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        overrides = {}
        for tok in args.overrides:
            key, eq, val = tok.partition("=")
            if not eq:
                raise ConfigError(f"expected key=value, got {tok!r}")
            overrides[key.strip()] = val
        if args.command:
            overrides["command"] = args.command
        if args.out is not None:
            overrides["out"] = str(args.out)
        text, src = "", "<none>"
        if args.config is not None:
            try:
                text = args.config.read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from None
            src = str(args.config)
        cfg = parse_config(text, src, overrides)
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        out = Path(cfg["out"])
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output directory not writable: {exc}") from None
    except (ConfigError, RangeError) as exc:
        print(_failure_summary("config_error", str(exc)), file=sys.stderr)
        return EXIT_CONFIG

    try:
        if cfg.command == "profile":
            rep = run_profile(cfg, out)
        elif cfg.command == "simulate":
            rep = run_simulate(cfg, out)
        elif cfg.command == "converge":
            rep = run_converge(cfg, out)
        else:
            rep = run_sweep(cfg, out, args.workers)
    except RangeError as exc:
        print(_failure_summary("config_error", str(exc)), file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, FDEError) as exc:
        print(_failure_summary("numerical_failure", f"{type(exc).__name__}: {exc}"), file=sys.stderr)
        return EXIT_NUMERIC

    print(str(rep))
    failed = [c for c in rep.failures() if args.strict or not c.name.startswith("info_")]
    if failed:
        print(_failure_summary("diagnostic_failure", rep.title, failed), file=sys.stderr)
        return EXIT_DIAG
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
