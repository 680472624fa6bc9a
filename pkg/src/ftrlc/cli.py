"""Command-line harness: run scenarios, sweep controllers, verify, bench.

Exit codes: 0 success, 1 configuration error, 2 run error, 3 verification
failure.
"""

import argparse
import json
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from . import _kernels
from .controllers import ControllerKind, run_episode
from .environments import builtin_names, get_scenario
from .errors import ConfigError, ControlError
from .hindsight import regret_report
from .verify import run_suites

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUN = 2
EXIT_VERIFY = 3


def _apply_overrides(scenario, args):
    import dataclasses

    changes = {}
    if getattr(args, "kappa_m", None) is not None:
        if args.kappa_m <= 0:
            raise ConfigError("--kappa-m must be positive")
        changes["kappa_M"] = args.kappa_m
    if getattr(args, "p", None) is not None:
        if args.p < 1:
            raise ConfigError("--p must be >= 1")
        changes["p"] = args.p
    if changes:
        scenario = dataclasses.replace(scenario, **changes)
    T = getattr(args, "t", None)
    if T is not None and T < 1:
        raise ConfigError("--t must be >= 1")
    return scenario, T


def _run_one(scenario, controller, seed, T, sigma_override, out_dir, tag=None):
    kind = ControllerKind.parse(controller)
    trace = run_episode(kind, scenario, seed=seed, T=T, sigma_override=sigma_override)
    trace.check()
    report = regret_report(trace, scenario)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        stem = tag or f"{scenario.name}_{kind.value}_seed{seed}"
        trace.to_csv(os.path.join(out_dir, stem + ".trace.csv"))
        with open(os.path.join(out_dir, stem + ".report.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(report, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return trace, report


def cmd_run(args):
    scenario = get_scenario(args.scenario)
    scenario, T = _apply_overrides(scenario, args)
    trace, report = _run_one(scenario, args.controller, args.seed, T,
                             args.sigma, args.out)
    print(f"scenario={scenario.name} controller={args.controller} "
          f"T={trace.T} seed={args.seed}")
    print(f"final cumulative cost: {trace.learner_cost!r}")
    print(f"benchmark cost:        {report['benchmark_cost']!r}")
    print(f"regret:                {report['regret']!r}")
    if report["bound_rhs"] is not None:
        print(f"bound rhs ({report['theorem']}):        {report['bound_rhs']!r} "
              f"satisfied={report['satisfied']}")
    return EXIT_OK


def cmd_sweep(args):
    scenario = get_scenario(args.scenario)
    scenario, T = _apply_overrides(scenario, args)
    controllers = [c.strip() for c in args.controllers.split(",") if c.strip()]
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    if not controllers or not seeds:
        raise ConfigError("sweep needs at least one controller and one seed")
    rows = []
    for ctrl in sorted(controllers):
        for seed in sorted(seeds):
            try:
                trace, report = _run_one(scenario, ctrl, seed, T, None, None)
                rows.append((ctrl, seed, "ok", trace.learner_cost,
                             report["regret"], report["satisfied"]))
            except ControlError as exc:
                rows.append((ctrl, seed, f"failed: {exc}", None, None, None))
    lines = ["controller,seed,status,final_cost,regret,bound_satisfied"]
    for ctrl, seed, status, cost, regret, sat in rows:
        lines.append(",".join([
            ctrl, str(seed), status.split(":")[0],
            "" if cost is None else repr(cost),
            "" if regret is None else repr(regret),
            "" if sat is None else str(sat).lower(),
        ]))
    csv_text = "\n".join(lines) + "\n"
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"{scenario.name}_sweep.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
        print(f"wrote {path}")
    print(csv_text, end="")
    by_ctrl = {}
    for ctrl, seed, status, cost, _, _ in rows:
        if cost is not None:
            by_ctrl.setdefault(ctrl, []).append(cost)
    ranked = sorted(by_ctrl.items(), key=lambda kv: statistics.fmean(kv[1]))
    ranking = " < ".join(f"{c} ({statistics.fmean(v):.1f})" for c, v in ranked)
    print(f"ranking (mean final cost, ascending): {ranking}")
    if any(r[2].startswith("failed") for r in rows):
        return EXIT_RUN
    return EXIT_OK


def cmd_verify(args):
    level = "full" if args.full else "fast"
    results = run_suites(level)
    failed = []
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"[{status}] {res.name} ({res.seconds:.2f}s): {res.detail}")
        if not res.passed:
            failed.append(res.name)
    if failed:
        print(json.dumps({"failed_suites": failed}))
        return EXIT_VERIFY
    print(f"all {len(results)} suites passed ({level})")
    return EXIT_OK


def _time_episode(scenario, controller, repeat, T):
    kind = ControllerKind.parse(controller)
    run_episode(kind, scenario, seed=0, T=T)  # warm-up (JIT compile)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        run_episode(kind, scenario, seed=0, T=T)
        times.append(time.perf_counter() - t0)
    return min(times)


def cmd_bench(args):
    scenario = get_scenario(args.scenario)
    scenario, T = _apply_overrides(scenario, args)
    best = _time_episode(scenario, args.controller, args.repeat, T)
    here = _kernels.backend_name()
    print(f"backend={here}: best of {args.repeat} episodes "
          f"({scenario.name}/{args.controller}): {best * 1e3:.2f} ms")
    if args.compare:
        env = dict(os.environ)
        if _kernels.NUMBA_ACTIVE:
            env["FTRLC_DISABLE_NUMBA"] = "1"
            other = "python"
        else:
            env.pop("FTRLC_DISABLE_NUMBA", None)
            other = "numba"
        code = (
            "import time\n"
            "from ftrlc.cli import _time_episode\n"
            "from ftrlc.environments import get_scenario\n"
            f"sc = get_scenario({args.scenario!r})\n"
            f"print(_time_episode(sc, {args.controller!r}, {args.repeat}, {T!r}))\n"
        )
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True)
        if out.returncode != 0:
            print(f"backend={other}: failed\n{out.stderr}", file=sys.stderr)
            return EXIT_RUN
        other_best = float(out.stdout.strip().splitlines()[-1])
        print(f"backend={other}: best of {args.repeat} episodes: "
              f"{other_best * 1e3:.2f} ms")
        slow, fast = max(best, other_best), min(best, other_best)
        print(f"speedup: {slow / fast:.1f}x")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(
        prog="ftrlc",
        description="Adaptive FTRL controllers for linear systems: run, sweep, "
                    "verify, bench.")
    sub = ap.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario/controller episode")
    run_p.add_argument("--scenario", required=True,
                       help=f"builtin name ({', '.join(builtin_names())}) or JSON path")
    run_p.add_argument("--controller", required=True,
                       help="ftrl | adaftrl | optftrl | gpc | basicftrl")
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--t", type=int, default=None, help="horizon override")
    run_p.add_argument("--kappa-m", type=float, default=None, dest="kappa_m")
    run_p.add_argument("--p", type=int, default=None, help="policy memory override")
    run_p.add_argument("--sigma", type=float, default=None,
                       help="override the theorem-prescribed sigma scale")
    run_p.add_argument("--out", default="runs", help="output directory")
    run_p.set_defaults(fn=cmd_run)

    sweep_p = sub.add_parser("sweep", help="run several controllers and seeds")
    sweep_p.add_argument("--scenario", required=True)
    sweep_p.add_argument("--controllers", required=True,
                         help="comma-separated controller kinds")
    sweep_p.add_argument("--seeds", default="0", help="comma-separated seeds")
    sweep_p.add_argument("--t", type=int, default=None)
    sweep_p.add_argument("--kappa-m", type=float, default=None, dest="kappa_m")
    sweep_p.add_argument("--p", type=int, default=None)
    sweep_p.add_argument("--out", default=None)
    sweep_p.set_defaults(fn=cmd_sweep)

    ver_p = sub.add_parser("verify", help="run the verification suites")
    level = ver_p.add_mutually_exclusive_group()
    level.add_argument("--fast", action="store_true", default=True)
    level.add_argument("--full", action="store_true", default=False)
    ver_p.set_defaults(fn=cmd_verify)

    bench_p = sub.add_parser("bench", help="time the episode kernel")
    bench_p.add_argument("--scenario", default="A")
    bench_p.add_argument("--controller", default="ftrl")
    bench_p.add_argument("--repeat", type=int, default=5)
    bench_p.add_argument("--t", type=int, default=None)
    bench_p.add_argument("--kappa-m", type=float, default=None, dest="kappa_m")
    bench_p.add_argument("--p", type=int, default=None)
    bench_p.add_argument("--compare", action="store_true",
                         help="also time the other backend in a subprocess")
    bench_p.set_defaults(fn=cmd_bench)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ControlError as exc:
        print(f"run error: {exc}", file=sys.stderr)
        return EXIT_RUN
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
