"""Command-line entry point ``colddipole``."""
from __future__ import annotations

import argparse
from importlib import resources
from pathlib import Path
import sys

from .harness import (
    ConfigError,
    Scenario,
    load_scenario,
    parse_config,
    run_dimer,
    run_ensemble,
    run_theory,
    scenario_from_dict,
)


def preset_names() -> list[str]:
    root = resources.files("colddipole") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def read_preset(name: str) -> str:
    return (resources.files("colddipole") / "presets" / f"{name}.cfg").read_text(encoding="utf-8")


def resolve_config(arg: str) -> Scenario:
    """A path to a scenario file or manifest, or the name of a packaged preset."""
    path = Path(arg)
    if path.exists():
        return load_scenario(path)
    if arg in preset_names():
        return parse_config(read_preset(arg))
    raise ConfigError(f"no such config file or preset: {arg}")


def _overrides(scenario: Scenario, args) -> Scenario:
    return scenario.with_overrides(seed=args.seed, realizations=args.realizations, workers=args.workers)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int)
    p.add_argument("--realizations", type=int)
    p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="colddipole", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ens = sub.add_parser("ensemble", help="Monte Carlo run over disordered clouds")
    ens.add_argument("--config", required=True, help="scenario file, manifest.json, or preset name")
    ens.add_argument("--out", required=True)
    _common(ens)

    dim = sub.add_parser("dimer", help="two-atom fly-by or mode table")
    dim.add_argument("mode", choices=("flyby", "modes"))
    dim.add_argument("--config")
    dim.add_argument("--out", required=True)
    dim.add_argument("--r0", type=float)
    dim.add_argument("--r-m", type=float)
    dim.add_argument("--v-rel", type=float)
    dim.add_argument("--initial", help="longest, shortest, all, or eps/p such as -1/0 (comma separated)")
    dim.add_argument("--transverse", choices=("in-plane", "out-of-plane"))
    dim.add_argument("--dt", type=float)
    dim.add_argument("--t-end", type=float)
    dim.add_argument("--kr", help="comma separated k0 r values for the mode table")
    _common(dim)

    th = sub.add_parser("theory", help="closed-form optical thickness, slab rate and trapping time")
    th.add_argument("--config", required=True)
    th.add_argument("--out", default=".")
    _common(th)

    sub.add_parser("presets", help="list packaged preset names")
    return parser


def _dimer_scenario(args) -> Scenario:
    raw: dict[str, dict[str, str]] = {}
    if args.config:
        raw = {k: dict(v) for k, v in resolve_config(args.config).raw.items()}
    raw.setdefault("scenario", {})["kind"] = f"dimer-{args.mode}"
    d = raw.setdefault("dimer", {})
    for key, value in (("r0", args.r0), ("r_m", args.r_m), ("v_rel", args.v_rel), ("initial_modes", args.initial),
                       ("transverse", args.transverse), ("kr_values", args.kr)):
        if value is not None:
            d[key] = str(value)
    integ = raw.setdefault("integration", {})
    if args.dt is not None:
        integ["dt"] = str(args.dt)
    if args.t_end is not None:
        integ["t_end"] = str(args.t_end)
    return scenario_from_dict(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            print("\n".join(preset_names()))
        elif args.command == "ensemble":
            scenario = _overrides(resolve_config(args.config), args)
            if scenario.kind != "ensemble":
                raise ConfigError(f"{args.config} is a {scenario.kind} scenario")
            for res in run_ensemble(scenario, args.out):
                print(f"N={res.config.n_atoms} v0={res.config.v0:g}: {len(res.realizations) - len(res.excluded)} "
                      f"realizations -> {args.out}")
        elif args.command == "dimer":
            run_dimer(_dimer_scenario(args), args.out, mode=args.mode)
            print(f"dimer {args.mode} -> {args.out}")
        elif args.command == "theory":
            scenario = resolve_config(args.config)
            rows = run_theory(scenario, args.out)
            print(f"{len(rows)} rows -> {Path(args.out) / 'theory.csv'}")
    except (ConfigError, ValueError, RuntimeError) as exc:
        print(f"colddipole: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
