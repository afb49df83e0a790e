"""Run configuration: one JSON file drives the whole pipeline.

Relative source paths resolve against the config file's directory, and
the manifest echoes the paths as written, so a checkout moved elsewhere
produces byte-identical artifacts. Execution knobs (thread count,
output directory) are deliberately not part of the configuration echo.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .features import check_lag
from .forest import ForestParams
from .ingest import H1B_STATUSES, POI_KINDS

SOURCE_NAMES = ("census", "patents", "sfr", "rnd", "h1b", "bizreg")

DEFAULT_MASTER_SEED = 20160101


@dataclass
class RunConfig:
    states: list[str]
    base_year: int
    outcome_year: int
    sources: dict[str, str]
    poi_sources: dict[str, str]
    polygons: str
    allow_custom_lag: bool = False
    master_seed: int = DEFAULT_MASTER_SEED
    delimiter: str = ","
    density_per_square_mile: bool = False
    h1b_statuses: tuple[str, ...] = H1B_STATUSES
    census_schema: dict[str, str] = field(default_factory=dict)
    polygon_zone_property: str = "zone"
    polygon_state_property: str = "state"
    polygon_land_area_property: str = "land_area_m2"
    forest: ForestParams = field(default_factory=ForestParams)
    map_columns: list[str] = field(default_factory=lambda: ["patents_per_1000", "sfr"])
    config_dir: str = "."

    def resolve(self, path: str) -> str:
        if os.path.isabs(path):
            return path
        return os.path.normpath(os.path.join(self.config_dir, path))

    def input_paths(self) -> dict[str, str]:
        """Label -> resolved path for every input file."""
        out = {name: self.resolve(p) for name, p in self.sources.items()}
        for kind, p in self.poi_sources.items():
            out[f"poi_{kind}"] = self.resolve(p)
        out["polygons"] = self.resolve(self.polygons)
        return out

    def echo(self) -> dict:
        """The digest-relevant view of this configuration."""
        return {
            "states": list(self.states),
            "base_year": self.base_year,
            "outcome_year": self.outcome_year,
            "allow_custom_lag": self.allow_custom_lag,
            "master_seed": self.master_seed,
            "delimiter": self.delimiter,
            "density_per_square_mile": self.density_per_square_mile,
            "h1b_statuses": list(self.h1b_statuses),
            "census_schema": dict(self.census_schema),
            "sources": dict(self.sources),
            "poi_sources": dict(self.poi_sources),
            "polygons": self.polygons,
            "polygon_properties": {
                "zone": self.polygon_zone_property,
                "state": self.polygon_state_property,
                "land_area": self.polygon_land_area_property,
            },
            "forest": {
                "n_trees": self.forest.n_trees,
                "mtry": self.forest.mtry,
                "min_samples_split": self.forest.min_samples_split,
                "max_depth": self.forest.max_depth,
                "n_seeds": self.forest.n_seeds,
            },
            "map_columns": list(self.map_columns),
        }


def load_config(path: str) -> RunConfig:
    """Parse and validate a run configuration file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e

    def need(key):
        if key not in doc:
            raise ConfigError(f"{path}: missing key {key!r}")
        return doc[key]

    states = need("states")
    if not isinstance(states, list) or not states:
        raise ConfigError("states must be a non-empty list")
    states = [str(s).upper() for s in states]
    for s in states:
        if len(s) != 2 or not s.isalpha():
            raise ConfigError(f"bad state code {s!r}")
    if len(set(states)) != len(states):
        raise ConfigError("states must be unique")

    base_year = int(need("base_year"))
    outcome_year = int(need("outcome_year"))
    allow_custom_lag = bool(doc.get("allow_custom_lag", False))
    check_lag(base_year, outcome_year, allow_custom_lag)

    sources = need("sources")
    if not isinstance(sources, dict):
        raise ConfigError("sources must be an object")
    for name in SOURCE_NAMES:
        if name not in sources:
            raise ConfigError(f"sources missing {name!r}")
    poi_sources = need("poi_sources")
    if not isinstance(poi_sources, dict) or not poi_sources:
        raise ConfigError("poi_sources must be a non-empty object")
    for kind in poi_sources:
        if kind not in POI_KINDS:
            raise ConfigError(f"unknown poi kind {kind!r}")

    statuses = doc.get("h1b_statuses", list(H1B_STATUSES))
    for s in statuses:
        if s not in H1B_STATUSES:
            raise ConfigError(f"unknown h1b status {s!r}")

    fdoc = doc.get("forest", {})
    forest = ForestParams(
        n_trees=int(fdoc.get("n_trees", 1000)),
        mtry=fdoc.get("mtry"),
        min_samples_split=int(fdoc.get("min_samples_split", 2)),
        max_depth=fdoc.get("max_depth"),
        n_seeds=int(fdoc.get("n_seeds", 8)),
    )

    cfg = RunConfig(
        states=states,
        base_year=base_year,
        outcome_year=outcome_year,
        sources={k: str(v) for k, v in sources.items()},
        poi_sources={k: str(v) for k, v in poi_sources.items()},
        polygons=str(need("polygons")),
        allow_custom_lag=allow_custom_lag,
        master_seed=int(doc.get("master_seed", DEFAULT_MASTER_SEED)),
        delimiter=str(doc.get("delimiter", ",")),
        density_per_square_mile=bool(doc.get("density_per_square_mile", False)),
        h1b_statuses=tuple(statuses),
        census_schema=dict(doc.get("census_schema", {})),
        polygon_zone_property=str(doc.get("polygon_zone_property", "zone")),
        polygon_state_property=str(doc.get("polygon_state_property", "state")),
        polygon_land_area_property=str(doc.get("polygon_land_area_property", "land_area_m2")),
        forest=forest,
        map_columns=list(doc.get("map_columns", ["patents_per_1000", "sfr"])),
        config_dir=os.path.dirname(os.path.abspath(path)),
    )
    missing = [p for p in cfg.input_paths().values() if not os.path.exists(p)]
    if missing:
        raise ConfigError(f"missing input files: {', '.join(sorted(missing))}")
    return cfg
