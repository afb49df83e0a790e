"""Feature matrix construction from parsed source records.

One row per zone; the zone universe is the census zones that also have
a polygon and a positive population, pared down to those with both
outcomes available. All aggregation runs as plain sequential loops in
record order and every formula is a single fixed expression, so the
same inputs always reproduce the same bits:

  per 1000 residents    count * 1000.0 / pop
  population share      count / pop           (walk and bike sum first)
  density               pop / land_m2 * 1e6   (or the square-mile factor)
  land acres per 1000   (total_m2 / 4046.8564224) * 1000.0 / pop
  building age          pop-weighted mean of (base_year - bin midpoint)
  building age mix      weighted sd / weighted mean

A cell that cannot be computed (missing input, zero denominator, or a
share outside [0, 1]) is masked: the mask is set and the stored value
is the 0.0 sentinel. Zones missing an outcome are dropped entirely and
listed in the join report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LagMismatchError
from .ingest import (
    BizRegRecord,
    CensusRecord,
    H1BRecord,
    H1B_STATUSES,
    PatentRecord,
    PoiRecord,
    RnDRecord,
    SFRRecord,
)
from .model import FeatureCatalog, FeatureMatrix, ZoneId, catalog_default
from .spatial import ZonePolygon, acres, population_density

REQUIRED_LAG_YEARS = 4

AUX_COLUMNS = ("building_age_sd",)


def check_lag(base_year: int, outcome_year: int, allow_custom: bool = False) -> int:
    """Enforce the outcome-minus-base lag unless explicitly overridden."""
    lag = outcome_year - base_year
    if lag != REQUIRED_LAG_YEARS and not allow_custom:
        raise LagMismatchError(
            f"outcome year {outcome_year} minus base year {base_year} is "
            f"{lag}, required lag is {REQUIRED_LAG_YEARS}"
        )
    return lag


def dedup_patents(patents: list[PatentRecord]) -> dict[ZoneId, int]:
    """Distinct (rf_id, zone) pairs per zone.

    A patent family granted once is one event per zone it touches:
    repeated rows for the same pair collapse, while the same rf_id in
    several zones counts once in each.
    """
    seen: set[tuple[str, ZoneId]] = set()
    counts: dict[ZoneId, int] = {}
    for r in patents:
        key = (r.rf_id, r.zone)
        if key in seen:
            continue
        seen.add(key)
        counts[r.zone] = counts.get(r.zone, 0) + 1
    return counts


def per_1000(count: float, population: int) -> float:
    """Events per 1000 residents."""
    if population <= 0:
        raise ValueError("population must be positive")
    return count * 1000.0 / population


def commute_shares(record: CensusRecord) -> dict[str, float | None]:
    """The five commute-mode shares of total population.

    Walking and cycling merge into one share, summed as counts before
    dividing. A share is None when its count is missing.
    """
    pop = record.total_population
    if pop is None or pop <= 0:
        return {k: None for k in (
            "car_truck_van_pct",
            "public_transit_pct",
            "walk_bike_pct",
            "worked_from_home_pct",
            "worked_outside_state_pct",
        )}
    out: dict[str, float | None] = {}
    out["car_truck_van_pct"] = (
        None if record.commute_car_truck_van is None
        else record.commute_car_truck_van / pop
    )
    out["public_transit_pct"] = (
        None if record.commute_public_transit is None
        else record.commute_public_transit / pop
    )
    if record.commute_walk is None or record.commute_bike is None:
        out["walk_bike_pct"] = None
    else:
        out["walk_bike_pct"] = (record.commute_walk + record.commute_bike) / pop
    out["worked_from_home_pct"] = (
        None if record.commute_worked_from_home is None
        else record.commute_worked_from_home / pop
    )
    out["worked_outside_state_pct"] = (
        None if record.commute_worked_outside_state is None
        else record.commute_worked_outside_state / pop
    )
    return out


def building_age_indicators(
    bins: tuple[tuple[int, int, int], ...], base_year: int
) -> tuple[float, float, float | None] | None:
    """(weighted mean age, weighted sd, mix index) from year-built bins.

    Ages are base_year minus the bin midpoint, weighted by unit counts.
    The mix index is the coefficient of variation sd / mean; it is None
    when the mean is not positive. Returns None when no units at all.
    """
    total = 0
    for _, _, count in bins:
        total += count
    if total <= 0:
        return None
    num = 0.0
    for lo, hi, count in bins:
        age = base_year - (lo + hi) / 2.0
        num += count * age
    mean = num / total
    var_num = 0.0
    for lo, hi, count in bins:
        age = base_year - (lo + hi) / 2.0
        var_num += count * (age - mean) * (age - mean)
    sd = math.sqrt(var_num / total)
    mix = sd / mean if mean > 0.0 else None
    return mean, sd, mix


@dataclass
class JoinReport:
    """What went into the matrix and what fell out, with reasons."""

    base_year: int
    outcome_year: int
    n_census: int = 0
    n_polygons: int = 0
    n_universe: int = 0
    n_rows: int = 0
    dropped: list[tuple[ZoneId, str]] = field(default_factory=list)
    patent_rows: int = 0
    patent_pairs: int = 0
    patent_pairs_in_universe: int = 0
    poi_counts: dict[str, int] = field(default_factory=dict)
    pois_missing_area: int = 0
    masked_cells: int = 0
    notes: list[str] = field(default_factory=list)

    def as_text(self) -> str:
        lines = [
            "# join report",
            f"base_year={self.base_year} outcome_year={self.outcome_year}",
            f"census_zones={self.n_census} polygon_zones={self.n_polygons}",
            f"universe={self.n_universe} rows={self.n_rows}",
            f"patent_rows={self.patent_rows} distinct_pairs={self.patent_pairs} "
            f"pairs_in_universe={self.patent_pairs_in_universe}",
            f"masked_cells={self.masked_cells} pois_missing_area={self.pois_missing_area}",
        ]
        for kind in sorted(self.poi_counts):
            lines.append(f"poi_{kind}={self.poi_counts[kind]}")
        for zone, reason in self.dropped:
            lines.append(f"dropped {zone.code} {zone.state}: {reason}")
        for note in self.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines) + "\n"


def build_matrix(
    census: list[CensusRecord],
    polygons: list[ZonePolygon],
    patents: list[PatentRecord],
    sfr: list[SFRRecord],
    rnd: list[RnDRecord],
    h1b: list[H1BRecord],
    bizreg: list[BizRegRecord],
    pois: list[PoiRecord],
    base_year: int,
    outcome_year: int,
    catalog: FeatureCatalog | None = None,
    density_per_square_mile: bool = False,
    h1b_statuses: tuple[str, ...] = H1B_STATUSES,
    allow_custom_lag: bool = False,
) -> tuple[FeatureMatrix, JoinReport]:
    """Assemble the per-zone matrix for one base year.

    POI records must already carry zone assignments; unassigned ones
    are ignored here. Patents should already be filtered to the study
    window and states.
    """
    check_lag(base_year, outcome_year, allow_custom_lag)
    cat = catalog if catalog is not None else catalog_default()
    report = JoinReport(base_year=base_year, outcome_year=outcome_year)

    by_zone = {r.zone: r for r in census}
    poly_by_zone = {p.zone: p for p in polygons}
    report.n_census = len(by_zone)
    report.n_polygons = len(poly_by_zone)

    universe = []
    for zone in sorted(by_zone):
        rec = by_zone[zone]
        if zone not in poly_by_zone:
            report.dropped.append((zone, "no polygon"))
            continue
        if rec.total_population is None:
            report.dropped.append((zone, "population missing"))
            continue
        if rec.total_population <= 0:
            report.dropped.append((zone, "population not positive"))
            continue
        universe.append(zone)
    report.n_universe = len(universe)

    patent_counts = dedup_patents(patents)
    report.patent_rows = len(patents)
    report.patent_pairs = sum(patent_counts.values())

    sfr_by_zone: dict[ZoneId, float] = {r.zone: r.sfr for r in sfr}

    rnd_sum: dict[ZoneId, float] = {}
    for r in rnd:
        rnd_sum[r.zone] = rnd_sum.get(r.zone, 0.0) + r.expenditure

    h1b_counts: dict[ZoneId, int] = {}
    allowed = set(h1b_statuses)
    for r in h1b:
        if r.status in allowed:
            h1b_counts[r.zone] = h1b_counts.get(r.zone, 0) + 1

    bizreg_counts: dict[ZoneId, int] = {}
    for r in bizreg:
        bizreg_counts[r.zone] = bizreg_counts.get(r.zone, 0) + 1

    poi_counts: dict[tuple[str, ZoneId], int] = {}
    poi_area: dict[tuple[str, ZoneId], float] = {}
    for r in pois:
        if r.zone is None:
            continue
        key = (r.kind, r.zone)
        poi_counts[key] = poi_counts.get(key, 0) + 1
        if r.kind in ("park", "square"):
            if r.area_m2 is None:
                report.pois_missing_area += 1
            else:
                poi_area[key] = poi_area.get(key, 0.0) + r.area_m2
        report.poi_counts[r.kind] = report.poi_counts.get(r.kind, 0) + 1

    rows = []
    for zone in universe:
        if zone not in sfr_by_zone:
            report.dropped.append((zone, "no sfr outcome"))
            continue
        rows.append(zone)
    report.n_rows = len(rows)
    report.patent_pairs_in_universe = sum(
        patent_counts.get(z, 0) for z in rows
    )

    feature_names = cat.predictor_names
    outcome_names = cat.outcome_names
    colnames = feature_names + outcome_names + AUX_COLUMNS
    values = np.zeros((len(rows), len(colnames)), dtype=np.float64)
    mask = np.zeros((len(rows), len(colnames)), dtype=bool)
    col = {name: j for j, name in enumerate(colnames)}

    def put(i: int, name: str, v: float | None, domain: str = "") -> None:
        j = col[name]
        if v is None:
            mask[i, j] = True
            report.masked_cells += 1
            return
        if domain == "share" and not 0.0 <= v <= 1.0:
            mask[i, j] = True
            report.masked_cells += 1
            report.notes.append(f"{rows[i].code} {rows[i].state} {name}: {v!r} outside [0, 1]")
            return
        values[i, j] = v

    def share(count: int | None, pop: int) -> float | None:
        return None if count is None else count / pop

    for i, zone in enumerate(rows):
        rec = by_zone[zone]
        poly = poly_by_zone[zone]
        pop = rec.total_population

        put(i, "h1b_per_1000", per_1000(h1b_counts.get(zone, 0), pop))
        put(i, "scientific_technical_pct", share(rec.scientific_technical, pop), "share")
        put(i, "white_pct", share(rec.white, pop), "share")
        put(i, "black_pct", share(rec.black, pop), "share")
        put(i, "native_pct", share(rec.native, pop), "share")
        put(i, "asian_pct", share(rec.asian, pop), "share")
        put(i, "age_25_34_pct", share(rec.age_25_34, pop), "share")
        put(i, "college_pct", share(rec.college, pop), "share")
        put(i, "bachelor_pct", share(rec.bachelor, pop), "share")
        put(i, "graduate_pct", share(rec.graduate, pop), "share")
        if poly.land_area_m2 > 0.0:
            put(i, "population_density",
                population_density(pop, poly.land_area_m2, density_per_square_mile))
        else:
            put(i, "population_density", None)

        put(i, "median_age", rec.median_age)
        put(i, "median_income", rec.median_income)
        put(i, "unemployment_rate", rec.unemployment_rate, "share")
        put(i, "poverty_pct", rec.poverty_rate, "share")
        put(i, "median_home_value", rec.median_home_value)
        put(i, "rnd_per_1000", per_1000(rnd_sum.get(zone, 0.0), pop))

        if rec.occupied_housing_units is None or rec.housing_total is None or rec.housing_total <= 0:
            put(i, "occupied_housing_pct", None)
        else:
            put(i, "occupied_housing_pct",
                rec.occupied_housing_units / rec.housing_total, "share")
        put(i, "schools_per_1000", per_1000(poi_counts.get(("school", zone), 0), pop))
        put(i, "universities_per_1000", per_1000(poi_counts.get(("university", zone), 0), pop))
        put(i, "business_registrations_per_1000", per_1000(bizreg_counts.get(zone, 0), pop))
        aged = building_age_indicators(rec.year_built_bins, base_year)
        if aged is None:
            put(i, "mean_building_age", None)
            put(i, "building_age_mix_index", None)
            put(i, "building_age_sd", None)
        else:
            put(i, "mean_building_age", aged[0])
            put(i, "building_age_mix_index", aged[2])
            put(i, "building_age_sd", aged[1])
        put(i, "innovation_spaces_per_1000",
            per_1000(poi_counts.get(("innovation_space", zone), 0), pop))
        put(i, "cafes_per_1000", per_1000(poi_counts.get(("cafe", zone), 0), pop))

        put(i, "parks_per_1000", per_1000(poi_counts.get(("park", zone), 0), pop))
        put(i, "squares_per_1000", per_1000(poi_counts.get(("square", zone), 0), pop))
        put(i, "park_land_acres_per_1000",
            per_1000(acres(poi_area.get(("park", zone), 0.0)), pop))
        put(i, "square_land_acres_per_1000",
            per_1000(acres(poi_area.get(("square", zone), 0.0)), pop))

        shares = commute_shares(rec)
        put(i, "car_truck_van_pct", shares["car_truck_van_pct"], "share")
        put(i, "public_transit_pct", shares["public_transit_pct"], "share")
        put(i, "walk_bike_pct", shares["walk_bike_pct"], "share")
        put(i, "worked_from_home_pct", shares["worked_from_home_pct"], "share")
        put(i, "worked_outside_state_pct", shares["worked_outside_state_pct"], "share")
        put(i, "bus_stops_per_1000", per_1000(poi_counts.get(("bus_stop", zone), 0), pop))

        put(i, "patents_per_1000", per_1000(patent_counts.get(zone, 0), pop))
        put(i, "sfr", sfr_by_zone[zone])

    matrix = FeatureMatrix(
        base_year=base_year,
        outcome_year=outcome_year,
        zones=tuple(rows),
        feature_names=feature_names,
        outcome_names=outcome_names,
        aux_names=AUX_COLUMNS,
        values=values,
        mask=mask,
        catalog_version=cat.version,
    )
    return matrix, report


@dataclass(frozen=True)
class SummaryRow:
    name: str
    label: str
    group_label: str
    median: float | None
    mean: float | None
    sd: float | None
    n: int


def summarize(
    m: FeatureMatrix,
    states: list[str] | None = None,
    catalog: FeatureCatalog | None = None,
) -> list[SummaryRow]:
    """Median, mean, and sample sd per column over unmasked cells.

    The scope is the given states, or all zones when None. Catalog
    predictors come first, then outcomes. sd is None below 2 values;
    median and mean are None for empty columns.
    """
    cat = catalog if catalog is not None else catalog_default()
    if states is None:
        keep = list(range(m.n_zones))
    else:
        allowed = set(states)
        keep = [i for i, z in enumerate(m.zones) if z.state in allowed]
    rows = []
    for spec in cat.predictors + cat.outcomes:
        vals, msk = m.column(spec.name)
        vs = sorted(float(vals[i]) for i in keep if not msk[i])
        n = len(vs)
        if n == 0:
            rows.append(SummaryRow(spec.name, spec.label, spec.group.value,
                                   None, None, None, 0))
            continue
        mid = n // 2
        median = vs[mid] if n % 2 == 1 else (vs[mid - 1] + vs[mid]) / 2.0
        s = 0.0
        for v in vs:
            s += v
        mean = s / n
        if n >= 2:
            acc = 0.0
            for v in vs:
                acc += (v - mean) * (v - mean)
            sd = math.sqrt(acc / (n - 1))
        else:
            sd = None
        rows.append(SummaryRow(spec.name, spec.label, spec.group.value,
                               median, mean, sd, n))
    return rows
