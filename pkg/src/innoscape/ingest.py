"""Parsers for the delimited input sources.

Parsing is total with an explicit account: every non-header line either
becomes a record or is dropped with a warning, and structural damage
(missing columns, duplicate zones in one-row-per-zone sources, rows
with the wrong field count) raises instead. Unparseable cells in census
rows degrade to None so the row survives with a cell warning; the
matrix builder later masks whatever stayed None.

All zone codes are kept as strings to preserve leading zeros.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, replace
from datetime import date

from .errors import DuplicateZoneError, MalformedRowError, MissingColumnError
from .model import ZoneId
from .spatial import ZoneIndex, assign_zone

POI_KINDS = (
    "school",
    "university",
    "cafe",
    "park",
    "square",
    "bus_stop",
    "innovation_space",
)

H1B_STATUSES = ("certified", "denied", "withdrawn")

INNOVATION_KEYWORDS = (
    "accelerator",
    "co-working space",
    "incubator",
    "innovation center",
    "innovation hub",
    "innovation park",
    "start-up",
    "tech hub",
    "technology park",
)


@dataclass(frozen=True)
class ParseWarning:
    path: str
    line_no: int
    code: str
    message: str


@dataclass
class ParseResult:
    """Records plus the full account of what happened to every line."""

    records: list
    warnings: list[ParseWarning]
    lines_total: int
    dropped_lines: int

    def consistent(self) -> bool:
        return len(self.records) + self.dropped_lines == self.lines_total


@dataclass(frozen=True)
class CensusRecord:
    zone: ZoneId
    total_population: int | None
    white: int | None = None
    black: int | None = None
    native: int | None = None
    asian: int | None = None
    age_25_34: int | None = None
    college: int | None = None
    bachelor: int | None = None
    graduate: int | None = None
    scientific_technical: int | None = None
    median_age: float | None = None
    median_income: float | None = None
    unemployment_rate: float | None = None
    poverty_rate: float | None = None
    median_home_value: float | None = None
    occupied_housing_units: int | None = None
    housing_total: int | None = None
    commute_car_truck_van: int | None = None
    commute_public_transit: int | None = None
    commute_walk: int | None = None
    commute_bike: int | None = None
    commute_worked_from_home: int | None = None
    commute_worked_outside_state: int | None = None
    year_built_bins: tuple[tuple[int, int, int], ...] = ()


@dataclass(frozen=True)
class PatentRecord:
    rf_id: str
    zone: ZoneId
    grant_date: date
    lon: float | None = None
    lat: float | None = None


@dataclass(frozen=True)
class SFRRecord:
    zone: ZoneId
    sfr: float


@dataclass(frozen=True)
class RnDRecord:
    zone: ZoneId
    expenditure: float


@dataclass(frozen=True)
class H1BRecord:
    zone: ZoneId
    status: str


@dataclass(frozen=True)
class BizRegRecord:
    zone: ZoneId
    year: int


@dataclass(frozen=True)
class PoiRecord:
    kind: str
    name: str
    lon: float
    lat: float
    area_m2: float | None = None
    matched_keyword: str | None = None
    zone: ZoneId | None = None


_CENSUS_INT_FIELDS = (
    "total_population",
    "white",
    "black",
    "native",
    "asian",
    "age_25_34",
    "college",
    "bachelor",
    "graduate",
    "scientific_technical",
    "occupied_housing_units",
    "housing_total",
    "commute_car_truck_van",
    "commute_public_transit",
    "commute_walk",
    "commute_bike",
    "commute_worked_from_home",
    "commute_worked_outside_state",
)

_CENSUS_FLOAT_FIELDS = (
    "median_age",
    "median_income",
    "unemployment_rate",
    "poverty_rate",
    "median_home_value",
)

_BUILT_BIN = re.compile(r"^built_(\d{4})_(\d{4})$")


def _open_reader(path: str, delimiter: str, required: tuple[str, ...]):
    fh = open(path, "r", encoding="utf-8", newline="")
    reader = csv.DictReader(fh, delimiter=delimiter)
    names = reader.fieldnames or []
    for col in required:
        if col not in names:
            fh.close()
            raise MissingColumnError(path, col)
    return fh, reader


def _row_shape_ok(row: dict) -> bool:
    if row.get(None):
        return False
    return all(v is not None for k, v in row.items() if k is not None)


def _zone_of(row: dict, path: str, line_no: int) -> ZoneId:
    try:
        return ZoneId(row["zone"].strip(), row["state"].strip().upper())
    except ValueError as e:
        raise MalformedRowError(path, line_no, str(e)) from None


def _parse_int(text: str) -> int | None:
    text = text.strip()
    if not text:
        return None
    try:
        v = int(text)
    except ValueError:
        return None
    return v if v >= 0 else None


def _parse_float(text: str) -> float | None:
    text = text.strip()
    if not text:
        return None
    try:
        v = float(text)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def parse_census(
    path: str, delimiter: str = ",", schema: dict[str, str] | None = None
) -> ParseResult:
    """Read the one-row-per-zone census table.

    `schema` maps canonical field names to the column names actually
    present, for sources with different headers. Year-built counts come
    from columns named built_<lo>_<hi> with explicit closed year bounds.
    Unparseable or negative cells become None with a warning; a zone
    appearing twice raises.
    """
    rename = schema or {}

    def col(name: str) -> str:
        return rename.get(name, name)

    required = (col("zone"), col("state"), col("total_population"))
    fh, reader = _open_reader(path, delimiter, required)
    bin_cols = []
    for name in reader.fieldnames:
        mt = _BUILT_BIN.match(name)
        if mt:
            lo, hi = int(mt.group(1)), int(mt.group(2))
            if hi < lo:
                raise MissingColumnError(path, f"{name} (bounds reversed)")
            bin_cols.append((name, lo, hi))
    records: list[CensusRecord] = []
    warnings: list[ParseWarning] = []
    seen: dict[ZoneId, int] = {}
    lines = 0
    with fh:
        for row in reader:
            lines += 1
            line_no = reader.line_num
            if not _row_shape_ok(row):
                raise MalformedRowError(path, line_no, "wrong field count")
            zone = _zone_of(
                {"zone": row[col("zone")], "state": row[col("state")]}, path, line_no
            )
            if zone in seen:
                raise DuplicateZoneError(path, line_no, zone.code)
            seen[zone] = line_no
            fields: dict = {"zone": zone}
            for f in _CENSUS_INT_FIELDS:
                name = col(f)
                if name not in row:
                    fields[f] = None
                    continue
                v = _parse_int(row[name])
                if v is None and row[name].strip():
                    warnings.append(
                        ParseWarning(path, line_no, "bad_cell", f"{name}={row[name]!r}")
                    )
                fields[f] = v
            for f in _CENSUS_FLOAT_FIELDS:
                name = col(f)
                if name not in row:
                    fields[f] = None
                    continue
                v = _parse_float(row[name])
                if v is None and row[name].strip():
                    warnings.append(
                        ParseWarning(path, line_no, "bad_cell", f"{name}={row[name]!r}")
                    )
                fields[f] = v
            bins = []
            for name, lo, hi in bin_cols:
                v = _parse_int(row[name])
                if v is None:
                    if row[name].strip():
                        warnings.append(
                            ParseWarning(path, line_no, "bad_cell", f"{name}={row[name]!r}")
                        )
                    continue
                bins.append((lo, hi, v))
            fields["year_built_bins"] = tuple(bins)
            records.append(CensusRecord(**fields))
    return ParseResult(records, warnings, lines, 0)


def parse_patents(
    path: str, window_start: date, window_end: date, delimiter: str = ","
) -> ParseResult:
    """Read patent grant events; keep those granted inside the window.

    Duplicate (rf_id, zone) rows are kept here and collapsed by the
    matrix builder. Rows with bad zones, bad dates, or out-of-window
    dates are dropped with warnings. Coordinates are optional per row
    and must come as a pair.
    """
    fh, reader = _open_reader(path, delimiter, ("rf_id", "zone", "state", "grant_date"))
    has_coords = "lon" in reader.fieldnames and "lat" in reader.fieldnames
    records: list[PatentRecord] = []
    warnings: list[ParseWarning] = []
    lines = 0
    dropped = 0
    with fh:
        for row in reader:
            lines += 1
            line_no = reader.line_num
            if not _row_shape_ok(row):
                raise MalformedRowError(path, line_no, "wrong field count")
            try:
                zone = ZoneId(row["zone"].strip(), row["state"].strip().upper())
            except ValueError as e:
                warnings.append(ParseWarning(path, line_no, "bad_zone", str(e)))
                dropped += 1
                continue
            try:
                granted = date.fromisoformat(row["grant_date"].strip())
            except ValueError:
                warnings.append(
                    ParseWarning(path, line_no, "bad_date", f"grant_date={row['grant_date']!r}")
                )
                dropped += 1
                continue
            if not window_start <= granted <= window_end:
                warnings.append(
                    ParseWarning(path, line_no, "out_of_window", f"granted {granted}")
                )
                dropped += 1
                continue
            lon = lat = None
            if has_coords:
                lon = _parse_float(row["lon"])
                lat = _parse_float(row["lat"])
                if (lon is None) != (lat is None):
                    warnings.append(
                        ParseWarning(path, line_no, "half_coords", "lon/lat must pair")
                    )
                    lon = lat = None
            records.append(PatentRecord(row["rf_id"].strip(), zone, granted, lon, lat))
    return ParseResult(records, warnings, lines, dropped)


def _parse_zone_value(
    path: str,
    delimiter: str,
    value_col: str,
    make,
    one_per_zone: bool,
) -> ParseResult:
    fh, reader = _open_reader(path, delimiter, ("zone", "state", value_col))
    records = []
    warnings: list[ParseWarning] = []
    seen: set[ZoneId] = set()
    lines = 0
    dropped = 0
    with fh:
        for row in reader:
            lines += 1
            line_no = reader.line_num
            if not _row_shape_ok(row):
                raise MalformedRowError(path, line_no, "wrong field count")
            try:
                zone = ZoneId(row["zone"].strip(), row["state"].strip().upper())
            except ValueError as e:
                warnings.append(ParseWarning(path, line_no, "bad_zone", str(e)))
                dropped += 1
                continue
            if one_per_zone:
                if zone in seen:
                    raise DuplicateZoneError(path, line_no, zone.code)
                seen.add(zone)
            rec = make(zone, row[value_col], line_no)
            if rec is None:
                warnings.append(
                    ParseWarning(path, line_no, "bad_cell", f"{value_col}={row[value_col]!r}")
                )
                dropped += 1
                continue
            records.append(rec)
    return ParseResult(records, warnings, lines, dropped)


def parse_sfr(path: str, delimiter: str = ",") -> ParseResult:
    """Read the per-zone startup formation rate outcome."""

    def make(zone, text, _line):
        v = _parse_float(text)
        return None if v is None else SFRRecord(zone, v)

    return _parse_zone_value(path, delimiter, "sfr", make, one_per_zone=True)


def parse_rnd(path: str, delimiter: str = ",") -> ParseResult:
    """Read one row per R&D-reporting firm; expenditures sum by zone."""

    def make(zone, text, _line):
        v = _parse_float(text)
        return None if v is None or v < 0 else RnDRecord(zone, v)

    return _parse_zone_value(path, delimiter, "expenditure", make, one_per_zone=False)


def parse_h1b(path: str, delimiter: str = ",") -> ParseResult:
    """Read one row per visa application with its decision status."""

    def make(zone, text, _line):
        status = text.strip().lower()
        return H1BRecord(zone, status) if status in H1B_STATUSES else None

    return _parse_zone_value(path, delimiter, "status", make, one_per_zone=False)


def parse_bizreg(path: str, year: int, delimiter: str = ",") -> ParseResult:
    """Read one row per business registration, keeping the given year."""
    fh, reader = _open_reader(path, delimiter, ("zone", "state", "year"))
    records: list[BizRegRecord] = []
    warnings: list[ParseWarning] = []
    lines = 0
    dropped = 0
    with fh:
        for row in reader:
            lines += 1
            line_no = reader.line_num
            if not _row_shape_ok(row):
                raise MalformedRowError(path, line_no, "wrong field count")
            try:
                zone = ZoneId(row["zone"].strip(), row["state"].strip().upper())
            except ValueError as e:
                warnings.append(ParseWarning(path, line_no, "bad_zone", str(e)))
                dropped += 1
                continue
            y = _parse_int(row["year"])
            if y is None:
                warnings.append(
                    ParseWarning(path, line_no, "bad_cell", f"year={row['year']!r}")
                )
                dropped += 1
                continue
            if y != year:
                warnings.append(ParseWarning(path, line_no, "wrong_year", f"year {y}"))
                dropped += 1
                continue
            records.append(BizRegRecord(zone, y))
    return ParseResult(records, warnings, lines, dropped)


def parse_poi(path: str, kind: str, delimiter: str = ",") -> ParseResult:
    """Read one point of interest per row for the given kind.

    Area and matched-keyword columns are optional; land-kind areas that
    fail to parse degrade to None with a warning.
    """
    if kind not in POI_KINDS:
        raise ValueError(f"unknown poi kind {kind!r}")
    fh, reader = _open_reader(path, delimiter, ("lon", "lat"))
    has_name = "name" in reader.fieldnames
    has_area = "area_m2" in reader.fieldnames
    has_kw = "matched_keyword" in reader.fieldnames
    records: list[PoiRecord] = []
    warnings: list[ParseWarning] = []
    lines = 0
    dropped = 0
    with fh:
        for row in reader:
            lines += 1
            line_no = reader.line_num
            if not _row_shape_ok(row):
                raise MalformedRowError(path, line_no, "wrong field count")
            lon = _parse_float(row["lon"])
            lat = _parse_float(row["lat"])
            if lon is None or lat is None:
                warnings.append(ParseWarning(path, line_no, "bad_coords", "lon/lat"))
                dropped += 1
                continue
            area = None
            if has_area and row["area_m2"].strip():
                area = _parse_float(row["area_m2"])
                if area is None or area < 0:
                    warnings.append(
                        ParseWarning(path, line_no, "bad_cell", f"area_m2={row['area_m2']!r}")
                    )
                    area = None
            kw = row["matched_keyword"].strip().lower() if has_kw else ""
            records.append(
                PoiRecord(
                    kind=kind,
                    name=row["name"].strip() if has_name else "",
                    lon=lon,
                    lat=lat,
                    area_m2=area,
                    matched_keyword=kw or None,
                )
            )
    return ParseResult(records, warnings, lines, dropped)


def filter_zone_records(records: list, states: list[str]) -> list:
    """Keep records whose zone belongs to a configured state."""
    allowed = set(states)
    return [r for r in records if r.zone.state in allowed]


def filter_patents_to_states(
    patents: list[PatentRecord], states: list[str], index: ZoneIndex | None = None
) -> tuple[list[PatentRecord], int]:
    """Keep patents located in a configured state.

    Records with coordinates must fall inside some configured-state
    polygon; records without coordinates fall back to their zone's
    state. Returns (kept, dropped count).
    """
    allowed = set(states)
    kept = []
    dropped = 0
    for r in patents:
        if r.lon is not None and index is not None:
            hit = assign_zone(r.lon, r.lat, index)
            if hit is None or hit.state not in allowed:
                dropped += 1
                continue
        elif r.zone.state not in allowed:
            dropped += 1
            continue
        kept.append(r)
    return kept, dropped


def assign_poi_zones(
    pois: list[PoiRecord], index: ZoneIndex
) -> tuple[list[PoiRecord], int]:
    """Attach a zone to each point; drop points outside every zone.

    Returns (assigned records, dropped count).
    """
    out = []
    dropped = 0
    for r in pois:
        zone = assign_zone(r.lon, r.lat, index)
        if zone is None:
            dropped += 1
            continue
        out.append(replace(r, zone=zone))
    return out, dropped
