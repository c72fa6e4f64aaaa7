"""Command line: ``affmatch index | match | evaluate | serve``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import snapshot
from .config import AppConfig, dumps, result_payload
from .evaluation import GoldFormatError, evaluate, format_table, load_gold, skipped_report
from .matcher import Condition, ConfigError, MatchConfig, match_affiliation, validate_config
from .registry import REGISTRY_CRITERIA, REGISTRY_KINDS, GeoMapping, RegistryError, build_index_set, load_registry

log = logging.getLogger("affmatch")


class CLIError(Exception):
    pass


def _parse_condition(raw: str) -> Condition:
    crit, sep, value = raw.partition("=")
    if not sep or not crit or not value:
        raise argparse.ArgumentTypeError(f"expected CRITERION=VALUE, got {raw!r}")
    return Condition(crit.strip(), value.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="affmatch", description=__doc__)
    parser.add_argument("--app-config", help="JSON app config (default: $AFFMATCH_CONFIG)")
    parser.add_argument("--log-level", default=None)
    parser.add_argument("--build-dir", type=Path, default=None, help="snapshot directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build criterion indexes and persist a snapshot")
    p.add_argument("--registry", choices=[*REGISTRY_KINDS, "all"], default="all")
    p.add_argument("--input", type=Path, help="registry JSON-lines file (single registry only)")
    p.add_argument("--geo", type=Path, help="geo mapping JSON for indirect criteria")
    p.add_argument("--no-geo", action="store_true", help="skip indirect criteria derivation")

    p = sub.add_parser("match", help="match affiliations against a registry snapshot")
    p.add_argument("--registry", choices=REGISTRY_KINDS, required=True)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--query", help="a single affiliation string")
    src.add_argument("--input", help="file with one affiliation per line ('-' for stdin)")
    p.add_argument("--config", type=Path, help="match config JSON (strategy groups)")
    p.add_argument("--condition", action="append", type=_parse_condition, default=[],
                   metavar="CRITERION=VALUE")

    p = sub.add_parser("evaluate", help="precision/recall against a gold standard")
    p.add_argument("--gold", type=Path, required=True)
    p.add_argument("--registry", nargs="+", choices=[*REGISTRY_KINDS, "siren"],
                   default=list(REGISTRY_KINDS))
    p.add_argument("--report", type=Path, help="write the JSON report here")

    p = sub.add_parser("serve", help="HTTP matching service")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    return parser


def cmd_index(args, cfg: AppConfig, out) -> int:
    kinds = list(REGISTRY_KINDS) if args.registry == "all" else [args.registry]
    if args.input and len(kinds) > 1:
        raise CLIError("--input needs a single --registry")
    geo = None
    geo_path = args.geo or cfg.geo
    if not args.no_geo and geo_path:
        if not Path(geo_path).exists():
            raise CLIError(f"geo mapping not found: {geo_path}")
        geo = GeoMapping.load(geo_path)
    for kind in kinds:
        path = args.input or cfg.registries[kind]
        if not Path(path).exists():
            raise CLIError(f"registry file not found: {path}")
        index_set = build_index_set(kind, load_registry(path, kind), geo)
        dest = snapshot.save(index_set, cfg.build_dir)
        if len(kinds) > 1:
            print(f"# {kind}", file=out)
        for name in REGISTRY_CRITERIA[kind]:
            print(f"{name}: {len(index_set.indexes[name])}", file=out)
        log.info("wrote %s", dest)
    return 0


def _load_match_config(path, registry: str) -> MatchConfig:
    config = MatchConfig.load(path)
    if config.registry != registry:
        raise ConfigError(f"{path} targets {config.registry!r}, not {registry!r}")
    return config


def _lines(args):
    if args.query is not None:
        yield args.query
        return
    if args.input is None or args.input == "-":
        stream = sys.stdin
        for line in stream:
            if line.strip():
                yield line.rstrip("\n")
        return
    with open(args.input, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                yield line.rstrip("\n")


def cmd_match(args, cfg: AppConfig, out) -> int:
    config = _load_match_config(args.config or cfg.match_configs[args.registry], args.registry)
    index_set = snapshot.load(cfg.build_dir, args.registry)
    validate_config(config, index_set)
    for text in _lines(args):
        results = match_affiliation(text, args.condition, config, index_set)
        print(dumps(result_payload(text, args.registry, results)), file=out)
    return 0


def cmd_evaluate(args, cfg: AppConfig, out) -> int:
    try:
        gold = load_gold(args.gold)
    except OSError as e:
        raise CLIError(f"cannot read gold file {args.gold}: {e}") from e
    reports = []
    for kind in args.registry:
        if kind == "siren":
            reports.append(skipped_report("siren", gold))
            continue
        config = _load_match_config(cfg.match_configs[kind], kind)
        index_set = snapshot.load(cfg.build_dir, kind)
        validate_config(config, index_set)

        def matcher(text, config=config, index_set=index_set):
            return [r.registry_id for r in match_affiliation(text, (), config, index_set)]

        reports.append(evaluate(matcher, gold, kind))
    if "siren" not in args.registry and any(r.expected.get("siren") for r in gold):
        skipped_report("siren", gold)
    print(format_table(reports), file=out)
    if args.report:
        args.report.parent.mkdir(parents=True, exist_ok=True)
        args.report.write_text(
            dumps({"gold": str(args.gold), "reports": [r.to_json() for r in reports]}) + "\n",
            encoding="utf-8",
        )
    return 0


def cmd_serve(args, cfg: AppConfig, out) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(cfg.build_dir, cfg.match_configs)
    uvicorn.run(app, host=args.host or cfg.host, port=args.port or cfg.port,
                log_level=cfg.log_level.lower())
    return 0


COMMANDS = {"index": cmd_index, "match": cmd_match, "evaluate": cmd_evaluate, "serve": cmd_serve}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        cfg = AppConfig.load(args.app_config)
    except (OSError, ValueError) as e:
        print(f"affmatch: error: bad app config: {e}", file=sys.stderr)
        return 2
    if args.build_dir is not None:
        cfg.build_dir = args.build_dir
    logging.basicConfig(
        level=(args.log_level or cfg.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args, cfg, out)
    except ConfigError as e:
        print(f"affmatch: error: invalid match config: {e}", file=sys.stderr)
        return 2
    except (CLIError, RegistryError, GoldFormatError, snapshot.SnapshotError, OSError) as e:
        print(f"affmatch: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
