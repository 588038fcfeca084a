"""End-to-end pipeline: ingest -> merge -> eligibility -> bridge -> estimates
-> impacts -> trends -> tables.

Every stage is a plain function over the loaded bundle so subcommands can run
individually; `run_pipeline` chains them and persists the canonical outputs
(coverage.csv, bridge.json, estimates.csv, impacts.csv, trends.csv,
embodied_shares.csv, plus scenario_<ratio>.csv when a scenario is requested).
Outputs are deterministic: identical inputs and config produce byte-identical
files.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import hashlib
import json
import warnings
from dataclasses import dataclass
from importlib.resources import files as _resource_files
from pathlib import Path

from . import __version__
from .catalog import (
    CardReference,
    CardSpec,
    MergeReport,
    characteristic_series,
    load_overrides,
    load_plausibility,
    merge_catalogs,
    parse_card_table,
    resolve_card_reference,
)
from .errors import (
    CannotEstimateError,
    EstimationError,
    MissingPeakError,
    PipelineError,
    StatsError,
    UnknownCountryError,
    UnresolvedCardError,
)
from .estimation import (
    BridgeModel,
    detect_anomalies,
    estimate_gpu_hours,
    fit_bridge,
    gpu_hours_from_flop,
)
from .lca import (
    SystemImpact,
    embodied_share_table,
    load_constants,
    load_impact_factors,
    load_mix_table,
    load_server_profiles,
    production_impact,
    system_impact,
)
from .stats import TrendFit, exp_trend, to_fractional_year
from .systems import coverage_summary, eligible_systems, load_column_map, parse_systems_table

__all__ = [
    "RunConfig",
    "RunSummary",
    "ScenarioComparison",
    "default_data_path",
    "run_pipeline",
    "scenario_compare",
]

OUTPUT_SCHEMAS = {
    "coverage.csv": [
        "row", "systems", "flop", "hardware", "flop_and_hardware",
        "duration", "quantity", "duration_and_quantity", "duration_quantity_hardware",
    ],
    "estimates.csv": ["system", "method", "gpu_hours_min", "gpu_hours_ref", "gpu_hours_max"],
    "impacts.csv": [
        "system", "date",
        "energy_kwh_min", "energy_kwh_ref", "energy_kwh_max",
        "gwp_kg_min", "gwp_kg_ref", "gwp_kg_max",
        "adpe_kgsb_min", "adpe_kgsb_ref", "adpe_kgsb_max",
        "embodied_gwp_ref", "embodied_adpe_ref", "method", "scenario_ratio",
    ],
    "trends.csv": [
        "series", "kind", "name", "date", "year", "value",
        "slope_per_year", "intercept", "growth_factor", "cagr_pct",
        "doubling_time_years", "weighting", "n_used", "n_excluded",
    ],
    "embodied_shares.csv": ["metric", "min", "q1", "median", "mean", "q3", "max", "n", "excluded"],
    "scenario.csv": [
        "series", "kind", "system", "date", "year", "gwp_kg", "included",
        "slope_per_year", "intercept", "growth_factor", "cagr_pct",
        "doubling_time_years", "weighting", "n_used", "n_excluded_floor",
    ],
}

# Trend weighting follows the figure methodology: per-system quantities and
# footprints are fitted with feasible WLS (heteroscedastic), card
# characteristics with plain OLS.
_SYSTEM_TREND_WEIGHTING = "feasible_wls"
_CARD_TREND_WEIGHTING = "ols"


def default_data_path(name: str) -> Path:
    return Path(str(_resource_files("mlca_trends.data").joinpath(name)))


@dataclass(frozen=True)
class RunConfig:
    """Paths and flags for one pipeline run. None paths fall back to the
    bundled data files (cards_alt/overrides/column_map stay unused)."""

    out: Path
    cards: Path = None
    cards_alt: Path | None = None
    cards_extra: Path | None = None
    overrides: Path | None = None
    systems: Path = None
    mixes: Path = None
    factors: Path = None
    constants: Path = None
    plausibility: Path = None
    server_profiles: Path = None
    column_map: Path | None = None
    apply_bridge: bool = True
    scenario_ratio: float | None = None
    gwp_floor: float = 50.0
    seed: int = 0

    def __post_init__(self):
        defaults = {
            "cards": "cards_nvidia_workstation.csv",
            "cards_extra": "cards_other.csv",
            "systems": "systems_sample.csv",
            "mixes": "electricity_mixes.csv",
            "factors": "impact_factors.json",
            "constants": "lca_constants.json",
            "plausibility": "plausibility.json",
            "server_profiles": "server_profiles.json",
        }
        for name, filename in defaults.items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, default_data_path(filename))
        for name in ("out", "cards", "cards_alt", "cards_extra", "overrides", "systems",
                     "mixes", "factors", "constants", "plausibility", "server_profiles",
                     "column_map"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, Path(value))
        if self.scenario_ratio is not None:
            if self.scenario_ratio < 0:
                raise PipelineError(f"scenario ratio must be >= 0, got {self.scenario_ratio}")
            if self.scenario_ratio > 0.25:
                warnings.warn(
                    f"scenario ratio {self.scenario_ratio} exceeds the explored range (0.25/year)",
                    stacklevel=2,
                )

    def sha256(self) -> str:
        payload = {
            k: (str(v) if isinstance(v, Path) else v)
            for k, v in dataclasses.asdict(self).items()
        }
        return hashlib.sha256(
            json.dumps(payload, sort_keys=True).encode("utf-8")
        ).hexdigest()


@dataclass
class Bundle:
    """Everything loaded and merged, shared read-only by the stages."""

    workstation_cards: list[CardSpec]
    full_catalog: list[CardSpec]
    merge_report: MergeReport
    card_row_errors: list
    systems: list
    system_row_errors: list
    mixes: dict
    factors: object
    constants: object
    server_profiles: object
    plausibility: dict


@dataclass(frozen=True)
class RunSummary:
    counts: dict[str, int]
    output_files: list[str]
    provenance: dict

    def as_dict(self) -> dict:
        return {
            "counts": self.counts,
            "output_files": self.output_files,
            "provenance": self.provenance,
        }


@dataclass(frozen=True)
class ScenarioComparison:
    ratio: float
    points: list  # (series, system_name, date, gwp_kg, included)
    excluded_real: int
    excluded_scenario: int
    trend_real: TrendFit | None
    trend_scenario: TrendFit | None


def load_bundle(config: RunConfig) -> Bundle:
    cards_a, errors_a = parse_card_table(config.cards, "techpowerup")
    if config.cards_alt is not None:
        cards_b, errors_b = parse_card_table(config.cards_alt, "wiki")
        overrides = load_overrides(config.overrides) if config.overrides else None
        workstation, report = merge_catalogs(cards_a, cards_b, overrides)
        card_errors = errors_a + errors_b
    else:
        workstation = cards_a
        report = MergeReport(total_cards=len(cards_a), validated=0, divergent=())
        card_errors = errors_a

    full_catalog = list(workstation)
    if config.cards_extra is not None:
        extra, errors_extra = parse_card_table(config.cards_extra, "other")
        full_catalog.extend(extra)
        card_errors = card_errors + errors_extra

    column_map = load_column_map(config.column_map) if config.column_map else None
    systems, system_errors = parse_systems_table(config.systems, column_map)

    return Bundle(
        workstation_cards=workstation,
        full_catalog=full_catalog,
        merge_report=report,
        card_row_errors=card_errors,
        systems=systems,
        system_row_errors=system_errors,
        mixes=load_mix_table(config.mixes),
        factors=load_impact_factors(config.factors),
        constants=load_constants(config.constants),
        server_profiles=load_server_profiles(config.server_profiles),
        plausibility=load_plausibility(config.plausibility),
    )


def _resolve(bundle: Bundle, system) -> CardReference | None:
    if not system.hardware_names or len(set(system.hardware_names)) != 1:
        return None
    return resolve_card_reference(
        system.hardware_names[0], bundle.full_catalog, bundle.plausibility
    )


def fit_bridge_stage(bundle: Bundle, eligible) -> tuple[BridgeModel | None, dict]:
    """Pairs up both estimators where available, drops anomalies, fits.

    Returns (model or None when fewer than 3 clean pairs exist, counts)."""
    pairs = []
    for system in eligible:
        if not (system.has_direct_inputs and system.has_flop_inputs):
            continue
        try:
            card_ref = _resolve(bundle, system)
            if card_ref is None:
                continue
            h2 = gpu_hours_from_flop(system.training_flop, card_ref.reference).value
        except (UnresolvedCardError, MissingPeakError):
            continue
        h1 = system.training_hours * system.hardware_quantity
        pairs.append((system, h1, h2))
    clean, anomalous = detect_anomalies(pairs)
    counts = {"pairs": len(pairs), "clean": len(clean), "anomalous": len(anomalous)}
    if len(clean) < 3:
        return None, counts
    model = fit_bridge([(h1, h2) for _, h1, h2 in clean])
    return model, counts


def estimate_stage(bundle: Bundle, eligible, bridge, apply_bridge: bool):
    """GPU-hour estimates for every eligible system that the catalog can
    serve. Returns (rows, skipped) where rows are (system, card_ref, estimate)."""
    rows = []
    skipped = []
    for system in eligible:
        try:
            card_ref = _resolve(bundle, system)
        except UnresolvedCardError as exc:
            if system.has_direct_inputs:
                card_ref = None  # direct estimate still possible without a card
            else:
                skipped.append((system.name, f"unresolved hardware: {exc.query}"))
                continue
        try:
            estimate = estimate_gpu_hours(
                system, card_ref, bridge, apply_bridge=apply_bridge and bridge is not None
            )
        except (EstimationError, MissingPeakError) as exc:
            skipped.append((system.name, str(exc)))
            continue
        rows.append((system, card_ref, estimate))
    return rows, skipped


def impact_stage(bundle: Bundle, estimate_rows, scenario_ratio=None):
    """Impacts for every estimated system whose hardware resolved."""
    impacts: list[SystemImpact] = []
    skipped = []
    for system, card_ref, estimate in estimate_rows:
        if card_ref is None:
            skipped.append(
                (system.name, "no resolvable hardware; impacts need a specific card")
            )
            continue
        try:
            impacts.append(
                system_impact(
                    system,
                    estimate,
                    card_ref,
                    bundle.mixes,
                    bundle.server_profiles,
                    bundle.factors,
                    bundle.constants,
                    scenario_ratio=scenario_ratio,
                )
            )
        except (CannotEstimateError, UnknownCountryError) as exc:
            skipped.append((system.name, str(exc)))
    return impacts, skipped


def trend_stage(bundle: Bundle, impacts):
    """All plot-ready series with their fits: card characteristics, card
    production impacts, per-system footprints, hardware quantities."""
    series = []

    for field_name in ("die_area", "process_node", "memory_size", "tdp"):
        points = characteristic_series(bundle.workstation_cards, field_name)
        series.append((f"card_{field_name}", points, _CARD_TREND_WEIGHTING))

    for metric in ("gwp_kg", "adpe_kgsb"):
        points = []
        for card in bundle.workstation_cards:
            try:
                impact = production_impact(card, bundle.factors)
            except CannotEstimateError:
                continue
            points.append((card.release_date, getattr(impact, metric), card.name))
        points.sort(key=lambda p: (p[0], p[2]))
        series.append(
            (f"card_production_{metric}", [(d, v) for d, v, _ in points], _CARD_TREND_WEIGHTING)
        )

    for metric in ("energy_kwh", "gwp_kg", "adpe_kgsb"):
        points = [
            (r.publication_date, getattr(r, metric).reference, r.system_name) for r in impacts
        ]
        points.sort(key=lambda p: (p[0], p[2]))
        series.append(
            (f"system_{metric}", [(d, v) for d, v, _ in points], _SYSTEM_TREND_WEIGHTING)
        )

    quantity_points = [
        (s.publication_date, float(s.hardware_quantity), s.name)
        for s in bundle.systems
        if s.hardware_quantity is not None
    ]
    quantity_points.sort(key=lambda p: (p[0], p[2]))
    series.append(
        ("hardware_quantity", [(d, v) for d, v, _ in quantity_points], _SYSTEM_TREND_WEIGHTING)
    )

    fitted = []
    for name, points, weighting in series:
        try:
            fit = exp_trend(points, weighting=weighting)
        except StatsError:
            fit = None  # too few positive points or degenerate; points still emitted
        fitted.append((name, points, fit, weighting))
    return fitted


def _scenario_points(impacts_real, impacts_scenario, gwp_floor):
    points = []
    excluded = {"real": 0, "scenario": 0}
    fits = {}
    for series, impacts in (("real", impacts_real), ("scenario", impacts_scenario)):
        kept = []
        for r in impacts:
            if r.publication_date.year < 2019:
                continue
            value = r.gwp_kg.reference
            included = value >= gwp_floor
            if not included:
                excluded[series] += 1
            else:
                kept.append((r.publication_date, value))
            points.append((series, r.system_name, r.publication_date, value, included))
        try:
            fits[series] = exp_trend(kept, weighting=_SYSTEM_TREND_WEIGHTING)
        except StatsError:
            fits[series] = None
    return points, excluded, fits


def scenario_compare(config: RunConfig, ratio: float) -> ScenarioComparison:
    """Real vs carbon-intensity-reduction footprints for post-2019 systems.

    Both series drop systems whose carbon footprint falls below the
    configured floor; exclusion counts are reported per series.
    """
    bundle = load_bundle(config)
    eligible, _ = eligible_systems(bundle.systems)
    bridge, _ = fit_bridge_stage(bundle, eligible)
    estimate_rows, _ = estimate_stage(bundle, eligible, bridge, config.apply_bridge)
    return _scenario_from_rows(bundle, estimate_rows, ratio, config.gwp_floor)


def _scenario_from_rows(bundle, estimate_rows, ratio, gwp_floor) -> ScenarioComparison:
    impacts_real, _ = impact_stage(bundle, estimate_rows, scenario_ratio=None)
    impacts_scenario, _ = impact_stage(bundle, estimate_rows, scenario_ratio=ratio)
    post_2019 = [r for r in impacts_real if r.publication_date.year >= 2019]
    if not post_2019:
        raise PipelineError("no post-2019 systems; scenario comparison is empty")
    points, excluded, fits = _scenario_points(impacts_real, impacts_scenario, gwp_floor)
    return ScenarioComparison(
        ratio=ratio,
        points=points,
        excluded_real=excluded["real"],
        excluded_scenario=excluded["scenario"],
        trend_real=fits["real"],
        trend_scenario=fits["scenario"],
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    if isinstance(value, dt.date):
        return value.isoformat()
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(cell) for cell in row])


def _trend_cells(fit: TrendFit | None):
    if fit is None:
        return ["", "", "", "", "", "", "", ""]
    return [
        fit.slope_per_year, fit.intercept, fit.growth_factor, fit.cagr_pct,
        fit.doubling_time_years, fit.weighting, fit.n_used, fit.n_excluded,
    ]


def write_scenario_csv(path: Path, comparison: ScenarioComparison) -> None:
    rows = []
    for series, system_name, date, value, included in comparison.points:
        rows.append(
            [series, "point", system_name, date, round(_year(date), 6), value,
             "true" if included else "false", "", "", "", "", "", "", "", ""]
        )
    for series, fit, n_excl in (
        ("real", comparison.trend_real, comparison.excluded_real),
        ("scenario", comparison.trend_scenario, comparison.excluded_scenario),
    ):
        cells = _trend_cells(fit)
        rows.append([series, "trend", "", "", "", "", "", *cells[:6], cells[6], n_excl])
    _write_csv(path, OUTPUT_SCHEMAS["scenario.csv"], rows)


def _year(date: dt.date) -> float:
    return to_fractional_year(date)


def run_pipeline(config: RunConfig, only: set[str] | None = None) -> RunSummary:
    """Execute the pipeline and persist canonical outputs under config.out.

    `only` restricts which output files are written (stage subcommands);
    None writes them all. Returns the run summary with counts and
    provenance."""
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    def wanted(name: str) -> bool:
        return only is None or name in only

    bundle = load_bundle(config)
    coverage = coverage_summary(bundle.systems)
    eligible, excluded = eligible_systems(bundle.systems)
    bridge, bridge_counts = fit_bridge_stage(bundle, eligible)
    estimate_rows, estimate_skips = estimate_stage(
        bundle, eligible, bridge, config.apply_bridge
    )
    impacts, impact_skips = impact_stage(bundle, estimate_rows)
    trends = trend_stage(bundle, impacts)
    shares, share_excluded = embodied_share_table(
        [(r.embodied_ref, r.total_ref) for r in impacts]
    )

    output_files = []

    if wanted("coverage.csv"):
        coverage_path = out / "coverage.csv"
        rows = coverage.csv_rows()
        _write_csv(coverage_path, rows[0], rows[1:])
        output_files.append(coverage_path.name)

    bridge_payload = {
        "model": None
        if bridge is None
        else {
            "intercept": bridge.intercept,
            "slope": bridge.slope,
            "intercept_se": bridge.intercept_se,
            "slope_se": bridge.slope_se,
            "adj_r2": bridge.adj_r2,
            "f_statistic": bridge.f_statistic,
            "f_df": list(bridge.f_df),
            "f_pvalue": bridge.f_pvalue,
            "n_observations": bridge.n_observations,
            "performance_ratio": bridge.performance_ratio,
            "log_base": "natural",
        },
        "diagnostics": None
        if bridge is None or bridge.diagnostics is None
        else {
            "shapiro_wilk": list(bridge.diagnostics.shapiro_wilk),
            "breusch_pagan_studentized": list(bridge.diagnostics.breusch_pagan),
            "durbin_watson": list(bridge.diagnostics.durbin_watson),
        },
        "counts": bridge_counts,
        "anomaly_rule": "finetuned OR |log-ratio - median| > 3*MAD",
    }
    if wanted("bridge.json"):
        bridge_path = out / "bridge.json"
        bridge_path.write_text(
            json.dumps(bridge_payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        output_files.append(bridge_path.name)

    if wanted("estimates.csv"):
        estimates_path = out / "estimates.csv"
        _write_csv(
            estimates_path,
            OUTPUT_SCHEMAS["estimates.csv"],
            [
                [system.name, estimate.method, estimate.interval.min,
                 estimate.interval.reference, estimate.interval.max]
                for system, _, estimate in estimate_rows
            ],
        )
        output_files.append(estimates_path.name)

    if wanted("impacts.csv"):
        impacts_path = out / "impacts.csv"
        _write_csv(
            impacts_path,
            OUTPUT_SCHEMAS["impacts.csv"],
            [
                [r.system_name, r.publication_date,
                 r.energy_kwh.min, r.energy_kwh.reference, r.energy_kwh.max,
                 r.gwp_kg.min, r.gwp_kg.reference, r.gwp_kg.max,
                 r.adpe_kgsb.min, r.adpe_kgsb.reference, r.adpe_kgsb.max,
                 r.embodied_ref.gwp_kg, r.embodied_ref.adpe_kgsb,
                 r.method, r.scenario_ratio]
                for r in impacts
            ],
        )
        output_files.append(impacts_path.name)

    if wanted("trends.csv"):
        trends_path = out / "trends.csv"
        trend_rows = []
        for name, points, fit, weighting in trends:
            for date, value in points:
                trend_rows.append(
                    [name, "point", "", date, round(_year(date), 6), value,
                     "", "", "", "", "", "", "", ""]
                )
            if fit is not None:
                trend_rows.append([name, "trend", "", "", "", "", *_trend_cells(fit)])
        _write_csv(trends_path, OUTPUT_SCHEMAS["trends.csv"], trend_rows)
        output_files.append(trends_path.name)

    if wanted("embodied_shares.csv"):
        shares_path = out / "embodied_shares.csv"
        _write_csv(
            shares_path,
            OUTPUT_SCHEMAS["embodied_shares.csv"],
            [
                [s.metric, s.min, s.q1, s.median, s.mean, s.q3, s.max, s.n, s.excluded]
                for s in shares
            ],
        )
        output_files.append(shares_path.name)

    scenario_used = None
    if config.scenario_ratio is not None and wanted("scenario"):
        comparison = _scenario_from_rows(
            bundle, estimate_rows, config.scenario_ratio, config.gwp_floor
        )
        scenario_path = out / f"scenario_{_fmt(config.scenario_ratio)}.csv"
        write_scenario_csv(scenario_path, comparison)
        output_files.append(scenario_path.name)
        scenario_used = config.scenario_ratio

    counts = {
        "cards_workstation": len(bundle.workstation_cards),
        "cards_total": len(bundle.full_catalog),
        "cards_validated": bundle.merge_report.validated,
        "card_row_errors": len(bundle.card_row_errors),
        "systems_total": len(bundle.systems),
        "system_row_errors": len(bundle.system_row_errors),
        "systems_eligible": len(eligible),
        "excluded_multi_hardware": sum(1 for _, r in excluded if r == "multi-hardware"),
        "excluded_insufficient_data": sum(1 for _, r in excluded if r == "insufficient-data"),
        "bridge_pairs": bridge_counts["pairs"],
        "bridge_clean": bridge_counts["clean"],
        "bridge_anomalous": bridge_counts["anomalous"],
        "estimates": len(estimate_rows),
        "estimate_skips": len(estimate_skips),
        "impacts": len(impacts),
        "impact_skips": len(impact_skips),
        "share_rows_excluded": share_excluded,
    }
    provenance = {
        "package_version": __version__,
        "config_sha256": config.sha256(),
        "apply_bridge": config.apply_bridge,
        "bridge_applied": config.apply_bridge and bridge is not None,
        "bridge_log_base": "natural",
        "system_trend_weighting": _SYSTEM_TREND_WEIGHTING,
        "card_trend_weighting": _CARD_TREND_WEIGHTING,
        "scenario_ratio": scenario_used,
        "gwp_floor": config.gwp_floor,
        "seed": config.seed,
        "cpu_embodied_allocation": "cpus_per_server/gpus_per_server per card",
    }
    return RunSummary(counts=counts, output_files=output_files, provenance=provenance)
