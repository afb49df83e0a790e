"""Core domain types: zones, the feature catalog, and the matrix.

The catalog pins the 35 predictor columns and 2 outcome columns by
name, display label, thematic group, and value kind. Column order is
part of the contract: downstream ranking breaks importance ties by
catalog position, and the matrix file format stores columns in catalog
order followed by auxiliary columns.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import UnknownColumnError

CATALOG_VERSION = "1"
MATRIX_FORMAT = "feature-matrix v1"
MASK_FORMAT = "feature-matrix-mask v1"


@dataclass(frozen=True, order=True)
class ZoneId:
    """A zone is a 5-digit postal code qualified by its state."""

    code: str
    state: str

    def __post_init__(self):
        if len(self.code) != 5 or not self.code.isdigit():
            raise ValueError(f"zone code must be 5 digits, got {self.code!r}")
        if len(self.state) != 2 or not self.state.isalpha() or not self.state.isupper():
            raise ValueError(f"state must be 2 uppercase letters, got {self.state!r}")


class Group(enum.Enum):
    SOCIAL = "Social"
    ECONOMIC = "Economic"
    INFRASTRUCTURE = "Infrastructure"
    URBAN_MORPHOLOGY = "Urban Morphology"
    URBAN_MOBILITY = "Urban Mobility"
    OUTCOME = "Innovation Outcomes"


class Kind(enum.Enum):
    PER_1000 = "per_1000"
    PERCENTAGE = "percentage"
    LEVEL = "level"
    INDEX = "index"


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    label: str
    group: Group
    kind: Kind


_PREDICTORS = (
    # Social
    FeatureSpec("h1b_per_1000", "H1B applications per 1000 residents", Group.SOCIAL, Kind.PER_1000),
    FeatureSpec("scientific_technical_pct", "Scientific technical pct", Group.SOCIAL, Kind.PERCENTAGE),
    FeatureSpec("white_pct", "White pct", Group.SOCIAL, Kind.PERCENTAGE),
    FeatureSpec("black_pct", "Black pct", Group.SOCIAL, Kind.PERCENTAGE),
    FeatureSpec("native_pct", "Native pct", Group.SOCIAL, Kind.PERCENTAGE),
    FeatureSpec("asian_pct", "Asian pct", Group.SOCIAL, Kind.PERCENTAGE),
    FeatureSpec("age_25_34_pct", "25 to 34 years pct", Group.SOCIAL, Kind.PERCENTAGE),
    FeatureSpec("college_pct", "College pct", Group.SOCIAL, Kind.PERCENTAGE),
    FeatureSpec("bachelor_pct", "Bachelor pct", Group.SOCIAL, Kind.PERCENTAGE),
    FeatureSpec("graduate_pct", "Graduate pct", Group.SOCIAL, Kind.PERCENTAGE),
    FeatureSpec("population_density", "Population density", Group.SOCIAL, Kind.LEVEL),
    # Economic
    FeatureSpec("median_age", "Median age", Group.ECONOMIC, Kind.LEVEL),
    FeatureSpec("median_income", "Median income", Group.ECONOMIC, Kind.LEVEL),
    FeatureSpec("unemployment_rate", "Unemployment rate", Group.ECONOMIC, Kind.PERCENTAGE),
    FeatureSpec("poverty_pct", "Poverty pct", Group.ECONOMIC, Kind.PERCENTAGE),
    FeatureSpec("median_home_value", "Median home value", Group.ECONOMIC, Kind.LEVEL),
    FeatureSpec("rnd_per_1000", "R&D expenditure per 1000 residents", Group.ECONOMIC, Kind.PER_1000),
    # Infrastructure
    FeatureSpec("occupied_housing_pct", "Occupied housing units pct", Group.INFRASTRUCTURE, Kind.PERCENTAGE),
    FeatureSpec("schools_per_1000", "Schools per 1000 residents", Group.INFRASTRUCTURE, Kind.PER_1000),
    FeatureSpec("universities_per_1000", "Universities per 1000 residents", Group.INFRASTRUCTURE, Kind.PER_1000),
    FeatureSpec("business_registrations_per_1000", "Business registrations per 1000 residents", Group.INFRASTRUCTURE, Kind.PER_1000),
    FeatureSpec("mean_building_age", "Mean age of buildings", Group.INFRASTRUCTURE, Kind.LEVEL),
    FeatureSpec("building_age_mix_index", "Mix age building index", Group.INFRASTRUCTURE, Kind.INDEX),
    FeatureSpec("innovation_spaces_per_1000", "Innovation spaces per 1000 residents", Group.INFRASTRUCTURE, Kind.PER_1000),
    FeatureSpec("cafes_per_1000", "Cafes per 1000 residents", Group.INFRASTRUCTURE, Kind.PER_1000),
    # Urban Morphology
    FeatureSpec("parks_per_1000", "Parks per 1000 residents", Group.URBAN_MORPHOLOGY, Kind.PER_1000),
    FeatureSpec("squares_per_1000", "Squares per 1000 residents", Group.URBAN_MORPHOLOGY, Kind.PER_1000),
    FeatureSpec("park_land_acres_per_1000", "Park land acres per 1000 residents", Group.URBAN_MORPHOLOGY, Kind.PER_1000),
    FeatureSpec("square_land_acres_per_1000", "Square land acres per 1000 residents", Group.URBAN_MORPHOLOGY, Kind.PER_1000),
    # Urban Mobility
    FeatureSpec("car_truck_van_pct", "Car truck van to work pct", Group.URBAN_MOBILITY, Kind.PERCENTAGE),
    FeatureSpec("public_transit_pct", "Public transportation to work pct", Group.URBAN_MOBILITY, Kind.PERCENTAGE),
    FeatureSpec("walk_bike_pct", "Walk bike to work pct", Group.URBAN_MOBILITY, Kind.PERCENTAGE),
    FeatureSpec("worked_from_home_pct", "Worked from home pct", Group.URBAN_MOBILITY, Kind.PERCENTAGE),
    FeatureSpec("worked_outside_state_pct", "Worked outside state of residence pct", Group.URBAN_MOBILITY, Kind.PERCENTAGE),
    FeatureSpec("bus_stops_per_1000", "Bus stops per 1000 residents", Group.URBAN_MOBILITY, Kind.PER_1000),
)

_OUTCOMES = (
    FeatureSpec("patents_per_1000", "Patents per 1000 residents", Group.OUTCOME, Kind.PER_1000),
    FeatureSpec("sfr", "SFR", Group.OUTCOME, Kind.LEVEL),
)


@dataclass(frozen=True)
class FeatureCatalog:
    """Immutable, ordered description of all matrix columns."""

    version: str
    predictors: tuple[FeatureSpec, ...]
    outcomes: tuple[FeatureSpec, ...]

    def __post_init__(self):
        names = [s.name for s in self.predictors + self.outcomes]
        if len(set(names)) != len(names):
            raise ValueError("catalog names must be unique")

    @property
    def predictor_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.predictors)

    @property
    def outcome_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.outcomes)

    def spec(self, name: str) -> FeatureSpec:
        for s in self.predictors + self.outcomes:
            if s.name == name:
                return s
        raise UnknownColumnError(name)

    def export_text(self) -> str:
        """One line per column: name, label, group, kind, role."""
        lines = [f"# feature-catalog v{self.version}"]
        for s in self.predictors:
            lines.append(f"{s.name}\t{s.label}\t{s.group.value}\t{s.kind.value}\tpredictor")
        for s in self.outcomes:
            lines.append(f"{s.name}\t{s.label}\t{s.group.value}\t{s.kind.value}\toutcome")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.export_text().encode("utf-8")).hexdigest()


def catalog_default() -> FeatureCatalog:
    """The pinned 35-predictor, 2-outcome catalog."""
    return FeatureCatalog(CATALOG_VERSION, _PREDICTORS, _OUTCOMES)


@dataclass
class FeatureMatrix:
    """Per-zone values for one base year, with a missingness mask.

    Columns are catalog predictors, then catalog outcomes, then any
    auxiliary columns. `mask` is True where a value is missing; masked
    cells hold a 0.0 sentinel and must be excluded from statistics and
    training. Rows are sorted by (code, state) and unique.
    """

    base_year: int
    outcome_year: int
    zones: tuple[ZoneId, ...]
    feature_names: tuple[str, ...]
    outcome_names: tuple[str, ...]
    aux_names: tuple[str, ...]
    values: np.ndarray
    mask: np.ndarray
    catalog_version: str = CATALOG_VERSION
    _index: dict[str, int] = field(default_factory=dict, repr=False, compare=False)

    @property
    def column_names(self) -> tuple[str, ...]:
        return self.feature_names + self.outcome_names + self.aux_names

    @property
    def n_zones(self) -> int:
        return len(self.zones)

    def column_index(self, name: str) -> int:
        if not self._index:
            self._index.update({n: i for i, n in enumerate(self.column_names)})
        try:
            return self._index[name]
        except KeyError:
            raise UnknownColumnError(name) from None

    def column(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """Return (values, mask) for one column."""
        j = self.column_index(name)
        return self.values[:, j], self.mask[:, j]

    def states(self) -> tuple[str, ...]:
        out = []
        for z in self.zones:
            if z.state not in out:
                out.append(z.state)
        return tuple(sorted(out))

    def subset_by_state(self, state: str) -> "FeatureMatrix":
        keep = [i for i, z in enumerate(self.zones) if z.state == state]
        return FeatureMatrix(
            base_year=self.base_year,
            outcome_year=self.outcome_year,
            zones=tuple(self.zones[i] for i in keep),
            feature_names=self.feature_names,
            outcome_names=self.outcome_names,
            aux_names=self.aux_names,
            values=self.values[keep].copy(),
            mask=self.mask[keep].copy(),
            catalog_version=self.catalog_version,
        )

    def training_rows(self, outcome: str) -> tuple[np.ndarray, np.ndarray, list[int]]:
        """Complete rows for fitting: no predictor masked, outcome present.

        Returns (X over predictors, y, kept row indices).
        """
        if outcome not in self.outcome_names:
            raise UnknownColumnError(outcome)
        pcols = [self.column_index(n) for n in self.feature_names]
        ocol = self.column_index(outcome)
        keep = [
            i
            for i in range(self.n_zones)
            if not self.mask[i, ocol] and not self.mask[i, pcols].any()
        ]
        X = self.values[np.ix_(keep, pcols)].astype(np.float64)
        y = self.values[keep, ocol].astype(np.float64)
        return X, y, keep


def validate_matrix(m: FeatureMatrix, catalog: FeatureCatalog | None = None) -> list[str]:
    """Check matrix invariants; return a list of violation descriptions.

    Shape inconsistencies raise ValueError outright since nothing else
    can be trusted after that.
    """
    cat = catalog if catalog is not None else catalog_default()
    ncols = len(m.column_names)
    if m.values.shape != (m.n_zones, ncols) or m.mask.shape != (m.n_zones, ncols):
        raise ValueError(
            f"shape mismatch: {m.values.shape} values, {m.mask.shape} mask, "
            f"{m.n_zones} zones x {ncols} columns"
        )
    problems = []
    if m.feature_names != cat.predictor_names:
        problems.append("feature columns do not match catalog order")
    if m.outcome_names != cat.outcome_names:
        problems.append("outcome columns do not match catalog")
    if list(m.zones) != sorted(set(m.zones)):
        problems.append("zones are not sorted and unique")
    masked = m.mask & (m.values != 0.0)
    if masked.any():
        problems.append("masked cells must hold the 0.0 sentinel")
    for j, name in enumerate(m.column_names):
        try:
            spec = cat.spec(name)
        except UnknownColumnError:
            continue
        live = ~m.mask[:, j]
        col = m.values[live, j]
        if spec.kind is Kind.PERCENTAGE and ((col < 0.0) | (col > 1.0)).any():
            problems.append(f"{name}: percentage values outside [0, 1]")
        if spec.kind is Kind.PER_1000 and (col < 0.0).any():
            problems.append(f"{name}: negative rate values")
        if spec.kind is Kind.INDEX and (col < 0.0).any():
            problems.append(f"{name}: negative index values")
    for name in m.outcome_names:
        _, omask = m.column(name)
        if omask.any():
            problems.append(f"{name}: outcome column has masked rows")
    return problems


def write_matrix(m: FeatureMatrix, path: str, mask_path: str) -> None:
    """Write the matrix and its mask sidecar.

    Values are serialized with repr(), the shortest round-tripping
    decimal form, so a read-back reproduces every cell bit for bit.
    """
    header = [
        f"# {MATRIX_FORMAT}",
        f"# base_year={m.base_year}",
        f"# outcome_year={m.outcome_year}",
        f"# catalog_version={m.catalog_version}",
        f"# columns features={len(m.feature_names)} "
        f"outcomes={len(m.outcome_names)} aux={len(m.aux_names)}",
    ]
    cols = "\t".join(("zone", "state") + m.column_names)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(header) + "\n" + cols + "\n")
        for i, z in enumerate(m.zones):
            cells = [z.code, z.state]
            cells += [repr(float(v)) for v in m.values[i]]
            fh.write("\t".join(cells) + "\n")
    with open(mask_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {MASK_FORMAT}\n" + "\n".join(header[1:]) + "\n" + cols + "\n")
        for i, z in enumerate(m.zones):
            cells = [z.code, z.state]
            cells += ["1" if v else "0" for v in m.mask[i]]
            fh.write("\t".join(cells) + "\n")


def _read_table(path: str, magic: str) -> tuple[dict[str, str], list[str], list[list[str]]]:
    meta: dict[str, str] = {}
    rows: list[list[str]] = []
    names: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != f"# {magic}":
            raise ValueError(f"{path}: expected {magic!r} header, got {first!r}")
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                body = line[2:]
                if "=" in body.split(" ")[0]:
                    k, v = body.split("=", 1)
                    meta[k] = v
                else:
                    meta[body.split(" ")[0]] = body
            elif not names:
                names = line.split("\t")
            elif line:
                rows.append(line.split("\t"))
    return meta, names, rows


def read_matrix(path: str, mask_path: str) -> FeatureMatrix:
    """Read a matrix written by `write_matrix`."""
    meta, names, rows = _read_table(path, MATRIX_FORMAT)
    _, mnames, mrows = _read_table(mask_path, MASK_FORMAT)
    if names != mnames or len(rows) != len(mrows):
        raise ValueError(f"{mask_path}: mask does not align with {path}")
    counts = meta["columns"].split(" ")
    nfeat = int(counts[1].split("=")[1])
    nout = int(counts[2].split("=")[1])
    colnames = tuple(names[2:])
    zones = []
    values = np.zeros((len(rows), len(colnames)), dtype=np.float64)
    mask = np.zeros((len(rows), len(colnames)), dtype=bool)
    for i, row in enumerate(rows):
        zones.append(ZoneId(row[0], row[1]))
        values[i] = [float(c) for c in row[2:]]
        mask[i] = [c == "1" for c in mrows[i][2:]]
    return FeatureMatrix(
        base_year=int(meta["base_year"]),
        outcome_year=int(meta["outcome_year"]),
        zones=tuple(zones),
        feature_names=colnames[:nfeat],
        outcome_names=colnames[nfeat : nfeat + nout],
        aux_names=colnames[nfeat + nout :],
        values=values,
        mask=mask,
        catalog_version=meta["catalog_version"],
    )
