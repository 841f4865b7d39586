"""Command line entry point: ``evshare <verb> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from .config import ConfigError, config_from_dict, demo_config_text, load_config
from .pipeline import USER_ERRORS, Pipeline, StageError, compare_dirs

log = logging.getLogger("evshare")

EXIT_OK, EXIT_USER, EXIT_INTERNAL = 0, 1, 2


def _set_path(d: dict, dotted: str, value):
    *head, last = dotted.split(".")
    for k in head:
        d = d.setdefault(k, {})
        if not isinstance(d, dict):
            raise ConfigError(f"--set {dotted}: {k!r} is not a section")
    d[last] = value


def build_config(args):
    if args.verb == "demo" and args.config is None:
        raw, base = yaml.safe_load(demo_config_text()), None
    elif args.config is not None:
        p = Path(args.config)
        load_config(p)  # validates and reports file errors
        raw, base = yaml.safe_load(p.read_text()) or {}, p.parent
    else:
        raw, base = {}, None
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        _set_path(raw, k.strip(), yaml.safe_load(v))
    for flag, key in (("seed", "seed"), ("horizon", "horizon_hours"), ("jobs", "jobs"), ("out", "out")):
        v = getattr(args, flag)
        if v is not None:
            raw[key] = str(v) if flag == "out" else v
    return config_from_dict(raw, base)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="scenario YAML (default: built-in defaults)")
    common.add_argument("--seed", type=int, metavar="N")
    common.add_argument("--horizon", type=int, metavar="HOURS")
    common.add_argument("--jobs", type=int, metavar="N")
    common.add_argument("--out", metavar="DIR", help="run directory")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config entry, e.g. synth.shared_consumption_scale=0.9")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="evshare", description="Carsharing and BEV charging in a power-sector model.")
    sub = ap.add_subparsers(dest="verb", required=True)
    sub.add_parser("ingest", parents=[common], help="parse or generate diaries and filter trips")
    sub.add_parser("cluster", parents=[common], help="sequences, distances and Ward clustering")
    sub.add_parser("distributions", parents=[common], help="private and shared conditional distributions")
    sub.add_parser("synth", parents=[common], help="5-minute vehicle profiles")
    s = sub.add_parser("solve", parents=[common], help="solve reference and scenario for the configured case")
    s.add_argument("--role", choices=["reference", "scenario", "both"], default="both")
    sub.add_parser("run", parents=[common], help="all stages plus comparison for the configured case")
    c = sub.add_parser("compare", parents=[common], help="delta report between two solved cases")
    c.add_argument("reference", help="solve/<case>/<role> directory of the reference")
    c.add_argument("scenario", help="solve/<case>/<role> directory of the scenario")
    d = sub.add_parser("demo", parents=[common], help="demo study: every strategy and uptake, with and without H2")
    d.add_argument("--no-hydrogen", action="store_true", help="skip the hydrogen sensitivity")
    return ap


def _dispatch(args) -> dict:
    if args.verb == "compare":
        if args.out is None:
            raise ConfigError("compare needs --out DIR")
        k = compare_dirs(args.reference, args.scenario, args.out)
        return {"compare": str(args.out), "delta_cost_eur_per_a": k.delta_cost_eur_per_a,
                "delta_cost_per_car_eur_per_a": k.delta_cost_per_car_eur_per_a}
    cfg = build_config(args)
    p = Pipeline(cfg)
    if args.verb in ("ingest", "cluster", "distributions", "synth"):
        return {args.verb: str(getattr(p, args.verb)())}
    if args.verb == "solve":
        roles = ["reference", "scenario"] if args.role == "both" else [args.role]
        return {role: str(p.solve_case(cfg.power.strategy, cfg.fleet.uptake, role, cfg.power.hydrogen))
                for role in roles}
    if args.verb == "run":
        res = p.run()
    else:
        res = p.study(hydrogen=[False] if args.no_hydrogen else [False, True])
    return {"out": str(p.out), "cases": [
        {"strategy": r.strategy, "uptake": r.uptake, "hydrogen": r.hydrogen,
         "delta_cost_per_car_eur_per_a": r.kpis["delta_cost_per_car_eur_per_a"]} for r in res]}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        out = _dispatch(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER if exc.user_error else EXIT_INTERNAL
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    print(json.dumps(out, indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
