"""Command-line entry point.

Subcommands run individual pipeline stages (ingest, coverage, bridge,
estimate, impacts, trends, scenario) or the whole thing (report). All paths
can be bundled in a JSON file pointed to by the MLCA_TRENDS_CONFIG
environment variable; explicit flags win over the bundle, which wins over
the data files shipped with the package.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import __version__
from .catalog import serialize_card_table
from .errors import (
    CatalogError,
    ConfigError,
    EstimationError,
    LcaError,
    MlcaTrendsError,
    PipelineError,
    StatsError,
    SystemsError,
)
from .pipeline import (
    RunConfig,
    load_bundle,
    run_pipeline,
    scenario_compare,
    write_scenario_csv,
)
from .systems import coverage_summary, serialize_systems_table

ENV_CONFIG = "MLCA_TRENDS_CONFIG"

_PATH_FLAGS = [
    ("--cards", "cards", "primary card table CSV (TechPowerUp-style schema)"),
    ("--cards-alt", "cards_alt", "second card table CSV to cross-validate against"),
    ("--cards-extra", "cards_extra", "curated non-workstation/accelerator card CSV"),
    ("--overrides", "overrides", "datasheet override CSV (name,field,value)"),
    ("--systems", "systems", "notable ML systems CSV"),
    ("--mixes", "mixes", "electricity mix CSV (country,ci g/kWh,adpe kgSb/kWh)"),
    ("--factors", "factors", "production impact factor JSON"),
    ("--constants", "constants", "datacenter constants JSON (PUE, lifespan, ...)"),
    ("--plausibility", "plausibility", "ambiguous-name plausibility JSON"),
    ("--server-profiles", "server_profiles", "server layout rules JSON"),
    ("--column-map", "column_map", "systems column-mapping JSON"),
]

_STAGE_BY_ERROR = (
    (CatalogError, "catalog"),
    (SystemsError, "systems"),
    (EstimationError, "estimation"),
    (LcaError, "lca"),
    (StatsError, "stats"),
    (ConfigError, "config"),
    (PipelineError, "pipeline"),
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlca-trends",
        description="Life-cycle assessment trends for machine-learning compute.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        for flag, dest, help_text in _PATH_FLAGS:
            p.add_argument(flag, dest=dest, type=Path, default=None, help=help_text)
        p.add_argument("--out", type=Path, default=None, help="output directory (default ./out)")
        p.add_argument(
            "--apply-bridge",
            nargs="?",
            const="true",
            choices=["true", "false"],
            default=None,
            help="calibrate compute-based estimates with the bridge regression (default true)",
        )
        p.add_argument("--scenario-ratio", type=float, default=None,
                       help="annual carbon-intensity reduction ratio, 0..0.25")
        p.add_argument("--gwp-floor", type=float, default=None,
                       help="exclude systems below this footprint (kgCO2eq) in scenario series")
        p.add_argument("--seed", type=int, default=None, help="recorded in provenance")

    for name, help_text in [
        ("ingest", "parse and merge card tables, normalize the systems table"),
        ("coverage", "coverage statistics of the systems table"),
        ("bridge", "fit the log-log bridge between the two GPU-hour estimators"),
        ("estimate", "per-system GPU-hour estimates"),
        ("impacts", "per-system life-cycle impacts and embodied shares"),
        ("trends", "exponential trend fits and plot-ready series"),
        ("scenario", "compare real vs reduced carbon-intensity footprints"),
        ("report", "full pipeline: all outputs"),
    ]:
        add_common(sub.add_parser(name, help=help_text))
    return parser


def _env_defaults() -> dict:
    bundle_path = os.environ.get(ENV_CONFIG)
    if not bundle_path:
        return {}
    path = Path(bundle_path)
    if not path.is_file():
        raise ConfigError(f"{ENV_CONFIG} points to a missing file: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{ENV_CONFIG} file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{ENV_CONFIG} file {path} must hold a JSON object")
    return data


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    env = _env_defaults()

    def pick(name, fallback=None):
        value = getattr(args, name, None)
        if value is not None:
            return value
        return env.get(name, fallback)

    apply_bridge = pick("apply_bridge", "true")
    if isinstance(apply_bridge, str):
        apply_bridge = apply_bridge.lower() == "true"
    return RunConfig(
        out=Path(pick("out", "out")),
        cards=pick("cards"),
        cards_alt=pick("cards_alt"),
        cards_extra=pick("cards_extra"),
        overrides=pick("overrides"),
        systems=pick("systems"),
        mixes=pick("mixes"),
        factors=pick("factors"),
        constants=pick("constants"),
        plausibility=pick("plausibility"),
        server_profiles=pick("server_profiles"),
        column_map=pick("column_map"),
        apply_bridge=bool(apply_bridge),
        scenario_ratio=pick("scenario_ratio"),
        gwp_floor=float(pick("gwp_floor", 50.0)),
        seed=int(pick("seed", 0)),
    )


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _cmd_ingest(config: RunConfig) -> dict:
    bundle = load_bundle(config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    serialize_card_table(bundle.full_catalog, out / "catalog.csv")
    serialize_systems_table(bundle.systems, out / "systems_normalized.csv")
    (out / "merge_report.json").write_text(
        json.dumps(
            {
                "total_cards": bundle.merge_report.total_cards,
                "validated": bundle.merge_report.validated,
                "divergent": [
                    {
                        "name": d.name,
                        "field": d.field,
                        "value_a": str(d.value_a),
                        "value_b": str(d.value_b),
                        "resolution": d.resolution,
                    }
                    for d in bundle.merge_report.divergent
                ],
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    return {
        "cards_total": len(bundle.full_catalog),
        "cards_validated": bundle.merge_report.validated,
        "card_row_errors": [vars(e) for e in bundle.card_row_errors],
        "systems_total": len(bundle.systems),
        "system_row_errors": [vars(e) for e in bundle.system_row_errors],
        "outputs": ["catalog.csv", "systems_normalized.csv", "merge_report.json"],
    }


def _cmd_coverage(config: RunConfig) -> dict:
    bundle = load_bundle(config)
    summary = coverage_summary(bundle.systems)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = summary.csv_rows()
    with (out / "coverage.csv").open("w", newline="", encoding="utf-8") as handle:
        csv.writer(handle).writerows(rows)
    (out / "coverage.json").write_text(
        json.dumps(summary.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return {**summary.as_dict(), "outputs": ["coverage.csv", "coverage.json"]}


def _cmd_scenario(config: RunConfig) -> dict:
    ratio = config.scenario_ratio
    if ratio is None:
        raise ConfigError("scenario requires --scenario-ratio")
    comparison = scenario_compare(config, ratio)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"scenario_{ratio:.12g}.csv"
    write_scenario_csv(path, comparison)
    return {
        "ratio": ratio,
        "excluded_real": comparison.excluded_real,
        "excluded_scenario": comparison.excluded_scenario,
        "growth_factor_real": None
        if comparison.trend_real is None
        else comparison.trend_real.growth_factor,
        "growth_factor_scenario": None
        if comparison.trend_scenario is None
        else comparison.trend_scenario.growth_factor,
        "outputs": [path.name],
    }


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.command == "ingest":
            _print_json(_cmd_ingest(config))
        elif args.command == "coverage":
            _print_json(_cmd_coverage(config))
        elif args.command == "scenario":
            _print_json(_cmd_scenario(config))
        else:
            only = {
                "bridge": {"bridge.json"},
                "estimate": {"estimates.csv"},
                "impacts": {"impacts.csv", "embodied_shares.csv"},
                "trends": {"trends.csv"},
                "report": None,
            }[args.command]
            summary = run_pipeline(config, only=only)
            _print_json(summary.as_dict())
    except MlcaTrendsError as exc:
        stage = "pipeline"
        for error_type, label in _STAGE_BY_ERROR:
            if isinstance(exc, error_type):
                stage = label
                break
        print(f"error [{stage}]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
