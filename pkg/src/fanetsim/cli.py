"""Command-line entry point: validate scenarios, run them, sweep parameter
grids, and inspect the built-in presets.

Exit codes: 0 success, 2 validation failure, 3 runtime failure, 4 I/O
failure. The default output directory comes from $FANETSIM_OUT (falling
back to ./results); every output embeds the scenario hash, the seed(s) and
the package version so reruns are comparable byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from itertools import product
from pathlib import Path

from . import __version__
from .analysis import sweep_table, write_sweep_csv
from .engine import (
    run,
    run_campaign,
    write_campaign_csv,
    write_final_tables_csv,
    write_route_changes_csv,
    write_run_csv,
)
from .presets import PRESET_NAMES, build_preset
from .scenario import Protocol, Scenario, ScenarioError, load_scenario, save_scenario

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3
EXIT_IO = 4

OUT_DIR_ENV = "FANETSIM_OUT"


def _out_dir(value: str | None) -> Path:
    return Path(value or os.environ.get(OUT_DIR_ENV, "results"))


def _load(source: str, protocol: str | None, knobs: dict | None = None) -> Scenario:
    if source in PRESET_NAMES:
        proto = Protocol(protocol) if protocol else None
        return build_preset(source, protocol=proto, **(knobs or {}))
    sc = load_scenario(source)
    if protocol:
        sc.protocol = Protocol(protocol)
    return sc


def _csv_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        sc = _load(args.scenario, None)
        warnings = sc.validate()
    except (ScenarioError, OSError, KeyError) as exc:
        _print_problems(exc)
        return EXIT_VALIDATION
    print(f"OK: scenario '{sc.name}' (hash {sc.scenario_hash()})")
    print(json.dumps(sc.to_dict(), indent=2, sort_keys=True))
    for w in warnings:
        print(f"warning: {w}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    try:
        sc = _load(args.scenario, args.protocol)
        sc.validate()
    except (ScenarioError, OSError, KeyError) as exc:
        _print_problems(exc)
        return EXIT_VALIDATION
    seed = sc.base_seed if args.seed is None else args.seed
    try:
        result = run(sc, seed)
    except Exception as exc:  # engine failures are runtime errors
        print(f"error: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    out = _out_dir(args.out)
    stem = f"{result.scenario_hash}_{seed}"
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_run_csv(result, str(out / f"{stem}_run.csv"))
        write_route_changes_csv(result, str(out / f"{stem}_routes.csv"))
        write_final_tables_csv(result, str(out / f"{stem}_tables.csv"))
        manifest = {
            "version": __version__,
            "scenario_hash": result.scenario_hash,
            "seed": seed,
            "scenario": sc.to_dict(),
            "outage_time_s": result.outage_time_s,
            "mean_goodput_bps": result.mean_goodput_bps,
            "counters": result.counters,
        }
        with open(out / f"{stem}_manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        print(f"error: cannot write results: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"scenario {result.scenario_hash} seed {seed}: "
          f"outage_time {result.outage_time_s:.0f} s, "
          f"mean goodput {result.mean_goodput_bps / 1e6:.3f} Mbit/s")
    print(f"results in {out}/{stem}_*")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    protocols = [p.strip() for p in args.protocols.split(",") if p.strip()]
    try:
        for p in protocols:
            Protocol(p)
    except ValueError:
        print(f"error: protocols must be olsr|polsr, got {args.protocols!r}", file=sys.stderr)
        return EXIT_VALIDATION
    his = _csv_floats(args.hi)
    alphas = _csv_floats(args.alpha)
    betas = _csv_floats(args.beta)
    gammas = _csv_floats(args.gamma)
    out = _out_dir(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create {out}: {exc}", file=sys.stderr)
        return EXIT_IO

    configs: list[dict] = []
    for proto, hi, alpha in product(protocols, his, alphas):
        if proto == "olsr":
            configs.append({"protocol": proto, "hello_interval": hi, "alpha": alpha,
                            "beta": None, "gamma": None})
        else:
            for beta, gamma in product(betas, gammas):
                configs.append({"protocol": proto, "hello_interval": hi, "alpha": alpha,
                                "beta": beta, "gamma": gamma})

    results: list[dict] = []
    failures: list[str] = []
    for cfg in configs:
        knobs = {"hello_interval": cfg["hello_interval"], "alpha": cfg["alpha"]}
        if cfg["beta"] is not None:
            knobs.update(beta=cfg["beta"], gamma=cfg["gamma"])
        try:
            sc = _load(args.scenario, cfg["protocol"], knobs)
            sc.validate()
            campaign = run_campaign(sc, repetitions=args.reps,
                                    base_seed=args.seed, workers=args.workers)
        except (ScenarioError, KeyError, OSError) as exc:
            _print_problems(exc)
            return EXIT_VALIDATION
        except Exception as exc:
            failures.append(f"{cfg}: {exc}")
            continue
        write_campaign_csv(campaign, str(out / f"campaign_{sc.scenario_hash()}.csv"))
        results.append({**cfg, "mean_outage_s": campaign.mean_outage_s,
                        "mean_goodput_bps": campaign.mean_goodput_bps,
                        "scenario_hash": campaign.scenario_hash})
        print(f"{cfg['protocol']:5s} HI={cfg['hello_interval']:<4} alpha={cfg['alpha']:<4} "
              f"beta={cfg['beta']} gamma={cfg['gamma']}: "
              f"outage {campaign.mean_outage_s:.1f} s, "
              f"goodput {campaign.mean_goodput_bps / 1e6:.3f} Mbit/s")

    rows = sweep_table(results) if results else []
    write_sweep_csv(rows, str(out / "sweep.csv"))
    manifest = {
        "version": __version__,
        "base_scenario": args.scenario,
        "repetitions": args.reps,
        "base_seed": args.seed,
        "configurations": results,
        "failures": failures,
    }
    with open(out / "sweep_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if failures:
        print(f"error: {len(failures)} configuration(s) failed; "
              f"completed subset written to {out}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"sweep of {len(results)} configurations written to {out}/sweep.csv")
    return EXIT_OK


def cmd_presets(args: argparse.Namespace) -> int:
    if args.action == "list":
        for name in PRESET_NAMES:
            print(name)
        return EXIT_OK
    try:
        sc = build_preset(args.name, protocol=Protocol(args.protocol) if args.protocol else None)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.save:
        try:
            save_scenario(sc, args.save)
        except OSError as exc:
            print(f"error: cannot write {args.save}: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"wrote {args.save}")
    else:
        print(json.dumps(sc.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def _print_problems(exc: Exception) -> None:
    if isinstance(exc, ScenarioError):
        for p in exc.problems:
            print(f"error: {p}", file=sys.stderr)
    else:
        print(f"error: {exc}", file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fanetsim",
        description="Deterministic FANET routing simulator (OLSR / P-OLSR).",
    )
    parser.add_argument("--version", action="version", version=f"fanetsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="check a scenario file or preset")
    p_val.add_argument("scenario", help="scenario JSON path or preset name")
    p_val.set_defaults(func=cmd_validate)

    p_run = sub.add_parser("run", help="execute one seeded run")
    p_run.add_argument("scenario", help="scenario JSON path or preset name")
    p_run.add_argument("--protocol", choices=["olsr", "polsr"])
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV} or ./results)")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run campaigns over a parameter grid")
    p_sweep.add_argument("scenario", help="scenario JSON path or preset name")
    p_sweep.add_argument("--hi", default="0.5,1,2", help="hello intervals, comma separated")
    p_sweep.add_argument("--alpha", default="0.2", help="link-quality aging values")
    p_sweep.add_argument("--beta", default="0.2", help="speed-weight values (P-OLSR)")
    p_sweep.add_argument("--gamma", default="0.08", help="speed-aging values (P-OLSR)")
    p_sweep.add_argument("--protocols", default="olsr,polsr")
    p_sweep.add_argument("--reps", type=int, default=10)
    p_sweep.add_argument("--seed", type=int, default=1)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--out")
    p_sweep.set_defaults(func=cmd_sweep)

    p_pre = sub.add_parser("presets", help="list or show built-in scenarios")
    p_pre.add_argument("action", choices=["list", "show"])
    p_pre.add_argument("name", nargs="?", default="")
    p_pre.add_argument("--protocol", choices=["olsr", "polsr"])
    p_pre.add_argument("--save", help="write the preset to a scenario JSON file")
    p_pre.set_defaults(func=cmd_presets)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets" and args.action == "show" and not args.name:
        print("error: presets show requires a name", file=sys.stderr)
        return EXIT_VALIDATION
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
