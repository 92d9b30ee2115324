"""Command-line interface: simulate, verify, sweep, oracle.

Exit codes: 0 success / all checks passed, 1 check failure or construction
rejection, 2 usage or configuration error.  Flags override config-file
values; the effective configuration is echoed into every output's sidecar.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import constructors, oracles, plotting, scenarios
from ._version import __version__
from .brownian import generate, path_to_csv, uniform_grid
from .integrator import SchemeOptions, solution_metadata, write_solution_csv
from .scenarios import SCENARIO_IDS, ScenarioConfig


class ConfigError(Exception):
    pass


_SCHEME_KEYS = {"h": float, "gamma": float, "end_offset": float,
                "explicit_guard": float,
                "implicit_singular": lambda s: s.lower() in ("1", "true", "yes")}
_RUN_KEYS = {"n_seeds": int, "base_seed": int, "workers": int,
             "chunk_size": int, "strict": lambda s: s.lower() in ("1", "true", "yes"),
             "out_dir": str}
_EXTRA_CASTS = {"T": float, "h": float, "probe_h": float, "block_n": int,
                "n_stability": int, "n_duplicate": int, "gamma_alt": float,
                "sweep_seeds": int, "n_scaling_points": int}


def _read_config(path) -> dict:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    out = {"run": {}, "scheme": {}, "scenario": {}}
    for section in parser.sections():
        if section == "run":
            for k, v in parser.items(section):
                if k not in _RUN_KEYS:
                    raise ConfigError(f"unknown [run] key {k!r}")
                out["run"][k] = _RUN_KEYS[k](v)
        elif section == "scheme":
            for k, v in parser.items(section):
                if k not in _SCHEME_KEYS:
                    raise ConfigError(f"unknown [scheme] key {k!r}")
                out["scheme"][k] = _SCHEME_KEYS[k](v)
        elif section.startswith("scenario."):
            name = section.split(".", 1)[1]
            if name not in SCENARIO_IDS:
                raise ConfigError(f"unknown scenario section {name!r}")
            sc = out["scenario"].setdefault(name, {"tolerances": {}, "extra": {}})
            for k, v in parser.items(section):
                if k == "n_seeds":
                    sc["n_seeds"] = int(v)
                elif k.startswith("tol_"):
                    sc["tolerances"][k[4:]] = float(v)
                elif k == "cutoffs":
                    sc["extra"]["cutoffs"] = tuple(float(x) for x in v.split(","))
                elif k in _EXTRA_CASTS:
                    sc["extra"][k] = _EXTRA_CASTS[k](v)
                else:
                    raise ConfigError(f"unknown key {k!r} in [{section}]")
        else:
            raise ConfigError(f"unknown config section [{section}]")
    return out


def _out_dir(args) -> Path:
    out = args.outdir or os.environ.get("SINGDRIFT_OUTDIR") or "singdrift_out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _build_scheme(scenario, file_cfg, args) -> SchemeOptions:
    kw = dataclasses.asdict(scenarios.recommended_scheme(scenario))
    kw.update(file_cfg.get("scheme", {}))
    if getattr(args, "grid_h", None) is not None:
        kw["h"] = args.grid_h
    if getattr(args, "gamma", None) is not None:
        kw["gamma"] = args.gamma
    return SchemeOptions(**kw)


def _build_config(scenario, file_cfg, args) -> ScenarioConfig:
    run = file_cfg.get("run", {})
    sc = file_cfg.get("scenario", {}).get(scenario, {})
    kw = {
        "scenario": scenario,
        "n_seeds": sc.get("n_seeds", run.get("n_seeds", 0)),
        "base_seed": run.get("base_seed", 2024),
        "scheme": _build_scheme(scenario, file_cfg, args),
        "tolerances": dict(sc.get("tolerances", {})),
        "extra": dict(sc.get("extra", {})),
        "workers": run.get("workers", 1),
        "chunk_size": run.get("chunk_size", 500),
        "strict_inconclusive": run.get("strict", False),
    }
    if getattr(args, "n_seeds", None) is not None:
        kw["n_seeds"] = args.n_seeds
    if getattr(args, "base_seed", None) is not None:
        kw["base_seed"] = args.base_seed
    if getattr(args, "workers", None) is not None:
        kw["workers"] = args.workers
    if getattr(args, "strict", False):
        kw["strict_inconclusive"] = True
    try:
        return ScenarioConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _sidecar(fname, payload: dict):
    payload = {"artifact_version": __version__, **payload}
    with open(f"{fname}.meta.json", "w") as fh:
        json.dump(payload, fh, indent=1, default=str)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return str(obj)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _cmd_simulate(args, file_cfg) -> int:
    cfg = _build_config(args.scenario, file_cfg, args)
    opts = cfg.scheme
    out = _out_dir(args)
    seed = args.seed
    stem = out / f"{args.scenario}_seed{seed}"
    written = []

    if args.scenario == "helper_bridge":
        from .brownian import bridge_grid
        from .drifts import helper_field
        from .integrator import integrate
        grid = bridge_grid(1.0, opts.h, opts.gamma, opts.end_offset, 1.0)
        path = generate(1, grid, seed, scenarios._STREAMS["helper_bridge+"])
        sol = integrate(helper_field(), path, 0.0, opts,
                        sign_selection=args.sign)
        write_solution_csv(sol, f"{stem}.csv", brownian=path)
        _sidecar(f"{stem}.csv", {"config": cfg.echo(),
                                 **solution_metadata(sol, path)})
        written.append(f"{stem}.csv")
        if args.plots:
            written.append(plotting.solution_figure(sol, path, f"{stem}.png"))
    elif args.scenario in ("sys2d", "product_block"):
        from .brownian import bridge_grid
        if args.scenario == "sys2d":
            grid = scenarios._grid_02(opts)
            stream = scenarios._STREAMS["sys2d"]
        else:
            n_block = int(cfg.extra.get("block_n", 2))
            lam = 1.0 / (2 * n_block)
            grid = bridge_grid(2 * lam, opts.h, opts.gamma,
                               min(opts.end_offset, lam * 1e-2), pole=lam)
            stream = scenarios._STREAMS["product_block"]
        path = generate(2, grid, seed, stream)
        if args.scenario == "sys2d":
            sol = constructors.build_2d_pathbypath(path, opts)
        else:
            w = path.values.T[None]
            sgn, accepted = constructors.nonadapted_branches(grid, w, lam)
            if not accepted[0]:
                raise constructors.TieError("sign tie at the selection time")
            values = constructors.pbp_2d_values(grid, w, opts, sgn,
                                                bridge_target=float(np.sqrt(lam)),
                                                bridge_pole=lam)[0]
            sol = constructors._as_solution(grid, values, "pbp2d", opts,
                                            (float(sgn[0]), float(-sgn[0])))
        write_solution_csv(sol, f"{stem}.csv", brownian=path)
        _sidecar(f"{stem}.csv", {"config": cfg.echo(),
                                 **solution_metadata(sol, path)})
        written.append(f"{stem}.csv")
        if args.plots:
            written.append(plotting.solution_figure(sol, path, f"{stem}.png"))
    elif args.scenario == "sys3d":
        grid = scenarios._grid_02(opts)
        path = generate(3, grid, seed, scenarios._STREAMS["sys3d"])
        pair = constructors.duplicate_pair(path, opts)
        for tag, sol in pair.solutions.items():
            fname = f"{stem}_{tag}.csv"
            write_solution_csv(sol, fname, brownian=path)
            _sidecar(fname, {"config": cfg.echo(),
                             **solution_metadata(sol, path)})
            written.append(fname)
        feats = pair.features()
        _sidecar(f"{stem}_pair", {"config": cfg.echo(), "features": feats})
        if args.plots:
            written.append(plotting.pair_figure(pair.solutions["strong3d"],
                                                pair.solutions["nonadapted3d"],
                                                f"{stem}_pair.png"))
    elif args.scenario == "nosol_probe":
        h = float(cfg.extra.get("probe_h", 1e-5))
        cutoffs = tuple(cfg.extra.get("cutoffs", (1e-2, 1e-3, 1e-4)))
        grid = uniform_grid(1.0, h)
        path = generate(1, grid, seed, scenarios._STREAMS["nosol_probe"])
        rows = constructors.probe_nosolution(path, cutoffs, opts)
        with open(f"{stem}_probe.json", "w") as fh:
            json.dump({"artifact_version": __version__, "config": cfg.echo(),
                       "rows": rows}, fh, indent=1, default=_json_default)
        path_to_csv(path, f"{stem}_path.csv")
        _sidecar(f"{stem}_path.csv", {"config": cfg.echo()})
        written += [f"{stem}_probe.json", f"{stem}_path.csv"]
    else:
        raise ConfigError(f"scenario {args.scenario!r} has no single-seed "
                          "simulation output")
    for w in written:
        print(w)
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _write_seed_csv(report, out_dir) -> str:
    table = report.seed_table
    keys = list(table)
    cols = []
    for k in keys:
        arr = np.asarray(table[k])
        cols.append(arr.astype(np.float64) if arr.dtype != np.float64 else arr)
    fname = f"{out_dir}/{report.scenario}_seeds.csv"
    np.savetxt(fname, np.column_stack(cols), fmt="%.17g", delimiter=",",
               header=",".join(keys), comments="")
    return fname


def _cmd_verify(args, file_cfg) -> int:
    names = list(scenarios.DEFAULT_SUITE) if args.scenario in (None, "all") \
        else [args.scenario]
    for name in names:
        if name not in SCENARIO_IDS:
            raise ConfigError(f"unknown scenario {name!r}")
    out = _out_dir(args)
    t0 = time.perf_counter()
    reports = []
    for name in names:
        cfg = _build_config(name, file_cfg, args)
        print(f"[verify] {name}: n_seeds={cfg.n_seeds} "
              f"h={cfg.scheme.h:g} workers={cfg.workers}", flush=True)
        rep = scenarios.run(cfg)
        reports.append(rep)
        for c in rep.checks:
            status = {True: "PASS", False: "FAIL", None: "INCONCLUSIVE"}[c.passed]
            print(f"  [{status}] {name}.{c.name} = {c.value:.6g} ({c.threshold})")
        _write_seed_csv(rep, out)
        if args.plots:
            for f in plotting.render_report_figures(rep, out):
                print(f"  figure: {f}")
    failed = sum(len(r.failed) for r in reports)
    inconclusive = sum(len(r.inconclusive) for r in reports)
    strict = any(r.config.get("strict_inconclusive") for r in reports)
    doc = {"schema": "singdrift-report/v1",
           "artifact_version": __version__,
           "suite": [r.to_dict() for r in reports],
           "wall_time_s": time.perf_counter() - t0,
           "n_failed": failed, "n_inconclusive": inconclusive,
           "all_passed": failed == 0}
    report_file = args.out or str(out / "report.json")
    with open(report_file, "w") as fh:
        json.dump(doc, fh, indent=1, default=_json_default)
    print(f"[verify] report: {report_file} "
          f"({failed} failed, {inconclusive} inconclusive)")
    if failed:
        return 1
    if inconclusive and strict:
        return 1
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _cmd_sweep(args, file_cfg) -> int:
    cfg = _build_config(args.scenario or "helper_bridge", file_cfg, args)
    h_values = [float(x) for x in args.h_values.split(",")]
    out = _out_dir(args)
    result = scenarios.sweep(cfg, h_values)
    rows = result["rows"]
    fname = out / f"sweep_{cfg.scenario}.csv"
    keys = list(rows[0])
    with open(fname, "w") as fh:
        fh.write(",".join(keys) + "\n")
        for r in rows:
            fh.write(",".join(f"{r[k]:.17g}" if isinstance(r[k], float)
                              else str(r[k]) for k in keys) + "\n")
    _sidecar(str(fname), {"config": result["config"],
                          "median_nonincreasing": result["median_nonincreasing"]})
    print(f"sweep rows: {fname}")
    for r in rows:
        print(f"  h={r['h']:.3g} median_residual={r['median_residual']:.4g} "
              f"p90={r['p90_residual']:.4g}")
    print(f"median nonincreasing: {result['median_nonincreasing']}")
    if args.plots:
        print(f"  figure: {plotting.sweep_figure(result, out / f'sweep_{cfg.scenario}.png')}")
    return 0


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------

def _cmd_oracle(args, file_cfg) -> int:
    out = _out_dir(args)
    if args.name == "heat_sgn":
        xs = np.arange(args.min, args.max + 0.5 * args.step, args.step)
        ys = oracles.heat_sgn(xs)
        fname = args.out or str(out / "oracle_heat_sgn.csv")
        np.savetxt(fname, np.column_stack([xs, ys]), fmt="%.17g",
                   delimiter=",", header="x,heat_sgn", comments="")
    elif args.name == "bes3_marginal":
        if not 0 < args.t < 1:
            raise ConfigError("--t must lie in (0, 1)")
        law = oracles.bes3_bridge_marginal(args.t)
        rs = np.arange(0.0, args.rmax + 0.5 * args.rstep, args.rstep)
        cdf = law.cdf(rs)
        pdf = law.pdf(rs)
        fname = args.out or str(out / f"oracle_bes3_t{args.t:g}.csv")
        np.savetxt(fname, np.column_stack([rs, cdf, pdf]), fmt="%.17g",
                   delimiter=",", header="r,cdf,pdf", comments="")
    else:
        raise ConfigError(f"unknown oracle {args.name!r}")
    _sidecar(fname, {"oracle": args.name,
                     "args": {k: v for k, v in vars(args).items()
                              if k in ("t", "min", "max", "step", "rmax", "rstep")}})
    print(fname)
    return 0


# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="singdrift",
                                description="Singular-drift SDE simulation "
                                            "and verification")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seeds=True):
        sp.add_argument("--config", help="INI config file")
        sp.add_argument("--outdir", help="output directory "
                                         "(default $SINGDRIFT_OUTDIR or ./singdrift_out)")
        sp.add_argument("--grid-h", type=float, dest="grid_h",
                        help="override the base step size")
        sp.add_argument("--gamma", type=float, help="override the grading factor")
        sp.add_argument("--no-plots", dest="plots", action="store_false",
                        help="skip figure rendering")
        if seeds:
            sp.add_argument("--n-seeds", type=int, dest="n_seeds")
            sp.add_argument("--base-seed", type=int, dest="base_seed")

    sim = sub.add_parser("simulate", help="single-seed construction outputs")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--sign", type=float, default=1.0,
                     help="bridge sign branch for helper_bridge")
    common(sim, seeds=False)

    ver = sub.add_parser("verify", help="run verification scenarios")
    ver.add_argument("--suite", choices=["all"], default=None,
                     help="run every scenario")
    ver.add_argument("--scenario", default=None)
    ver.add_argument("--workers", type=int, default=None)
    ver.add_argument("--strict", action="store_true",
                     help="treat inconclusive checks as failures")
    ver.add_argument("--out", help="report file (default <outdir>/report.json)")
    common(ver)

    sw = sub.add_parser("sweep", help="step-size convergence table")
    sw.add_argument("--scenario", default="helper_bridge")
    sw.add_argument("--h-values", required=True, dest="h_values",
                    help="comma-separated step sizes")
    common(sw)

    orc = sub.add_parser("oracle", help="tabulate a reference law")
    orc.add_argument("name", help="heat_sgn | bes3_marginal")
    orc.add_argument("--t", type=float, default=0.5)
    orc.add_argument("--min", type=float, default=-3.0)
    orc.add_argument("--max", type=float, default=3.0)
    orc.add_argument("--step", type=float, default=0.1)
    orc.add_argument("--rmax", type=float, default=2.5)
    orc.add_argument("--rstep", type=float, default=0.01)
    orc.add_argument("--out")
    common(orc, seeds=False)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        file_cfg = _read_config(args.config) if args.config else {}
        if args.command == "simulate":
            return _cmd_simulate(args, file_cfg)
        if args.command == "verify":
            return _cmd_verify(args, file_cfg)
        if args.command == "sweep":
            return _cmd_sweep(args, file_cfg)
        if args.command == "oracle":
            return _cmd_oracle(args, file_cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except constructors.TieError as exc:
        print(f"construction rejected: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
