"""Run manifest and artifact emission: tables and choropleth maps.

Every run writes a manifest whose digest covers the effective
configuration, the sha256 of every input file, and the feature catalog.
Execution knobs that cannot change results (thread count, cache and
output locations) stay out of the digest. All emitted artifacts embed
the digest: delimited tables in a `# manifest=` header line, maps as a
top-level foreign member. The manifest timestamp honors
SOURCE_DATE_EPOCH and is excluded from the digest, so two identical
runs produce identical artifacts.

Digest recipe: sha256 of the canonical JSON (sorted keys, separators
"," and ":") of {"catalog": {digest, version}, "config": <echo>,
"inputs": {label: sha256-of-bytes}}.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import dataclass

from . import __version__
from .errors import DegenerateReportError
from .features import SummaryRow
from .forest import ImportanceReport
from .model import FeatureCatalog, FeatureMatrix, catalog_default
from .spatial import ZonePolygon, group_rings


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class RunManifest:
    created_utc: str
    tool_name: str
    tool_version: str
    config: dict
    inputs: dict[str, str]
    catalog_version: str
    catalog_digest: str
    digest: str

    def as_dict(self) -> dict:
        return {
            "created_utc": self.created_utc,
            "tool": {"name": self.tool_name, "version": self.tool_version},
            "config": self.config,
            "inputs": self.inputs,
            "catalog": {
                "version": self.catalog_version,
                "digest": self.catalog_digest,
            },
            "digest": self.digest,
        }


def manifest_digest(config_echo: dict, inputs: dict[str, str], catalog: FeatureCatalog) -> str:
    body = {
        "catalog": {"digest": catalog.digest(), "version": catalog.version},
        "config": config_echo,
        "inputs": inputs,
    }
    return hashlib.sha256(canonical_json(body).encode("utf-8")).hexdigest()


def build_manifest(
    config_echo: dict,
    input_paths: dict[str, str],
    catalog: FeatureCatalog | None = None,
) -> RunManifest:
    """Hash the inputs and assemble the manifest.

    `input_paths` maps a stable label (e.g. "census") to a file path;
    the path itself is not part of the digest, only the label and the
    file content, so a relocated but identical corpus verifies.
    """
    cat = catalog if catalog is not None else catalog_default()
    inputs = {label: _sha256_file(path) for label, path in sorted(input_paths.items())}
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    stamp = int(epoch) if epoch else int(time.time())
    created = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(stamp))
    return RunManifest(
        created_utc=created,
        tool_name="innoscape",
        tool_version=__version__,
        config=config_echo,
        inputs=inputs,
        catalog_version=cat.version,
        catalog_digest=cat.digest(),
        digest=manifest_digest(config_echo, inputs, cat),
    )


def write_manifest(manifest: RunManifest, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt3(v: float | None) -> str:
    return "" if v is None else f"{v:.3f}"


def emit_summary_table(
    rows: list[SummaryRow],
    n_zones_in_scope: int,
    scope_label: str,
    base_year: int,
    outcome_year: int,
    manifest_digest_hex: str,
    path: str,
    catalog: FeatureCatalog | None = None,
) -> list[str]:
    """Write one summary table; return warnings.

    Layout: Variable, Median, Mean, SD, Group, three decimals, features
    in catalog order followed by the outcome rows with the outcome year
    in the label. An empty scope writes only headers.
    """
    cat = catalog if catalog is not None else catalog_default()
    warnings = []
    header = [
        "# summary statistics",
        f"# scope={scope_label}",
        f"# base_year={base_year} outcome_year={outcome_year}",
        f"# catalog_version={cat.version}",
        f"# manifest={manifest_digest_hex}",
        "Variable\tMedian\tMean\tSD\tGroup",
    ]
    lines = list(header)
    if n_zones_in_scope == 0:
        warnings.append(f"scope {scope_label} has no zones; table is header only")
    else:
        outcome_names = set(cat.outcome_names)
        for r in rows:
            label = r.label
            if r.name in outcome_names:
                label = f"{label} ({outcome_year})"
            lines.append(
                "\t".join(
                    [label, _fmt3(r.median), _fmt3(r.mean), _fmt3(r.sd), r.group_label]
                )
            )
            if r.n == 0:
                warnings.append(f"{scope_label}: column {r.name} has no values")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return warnings


def emit_importance_table(
    reports: list[ImportanceReport],
    manifest_digest_hex: str,
    path: str,
    catalog: FeatureCatalog | None = None,
) -> None:
    """Write the ranked importance table for one outcome.

    The first report orders the rows (descending mean importance, ties
    by catalog position); every report contributes one column, labeled
    by its scope. All reports must cover the same outcome and feature
    list, and none may be degenerate.
    """
    if not reports:
        raise ValueError("need at least one report")
    cat = catalog if catalog is not None else catalog_default()
    lead = reports[0]
    for rep in reports:
        if rep.feature_names != lead.feature_names:
            raise ValueError("reports disagree on feature lists")
        if rep.outcome != lead.outcome:
            raise ValueError("reports mix outcomes")
        if rep.degenerate:
            raise DegenerateReportError(
                f"scope {rep.scope}: all importances zero for {rep.outcome}"
            )
    labels = {s.name: s.label for s in cat.predictors + cat.outcomes}
    order = sorted(
        range(len(lead.feature_names)),
        key=lambda i: (-lead.mean_importance[i], i),
    )
    lines = [
        "# feature importance",
        f"# outcome={lead.outcome}",
        f"# protocol trees={lead.params.n_trees} seeds={lead.params.n_seeds} "
        f"master_seed={lead.master_seed}",
        f"# catalog_version={cat.version}",
        f"# manifest={manifest_digest_hex}",
        "\t".join(["Feature"] + [f"Importance ({rep.scope})" for rep in reports]),
    ]
    for i in order:
        name = lead.feature_names[i]
        row = [labels.get(name, name)]
        row += [_fmt3(float(rep.mean_importance[i])) for rep in reports]
        lines.append("\t".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def quantile_bins(values: list[float], n_bins: int = 5) -> list[int]:
    """Class index per value under upper-inclusive quantile cuts.

    Cut j (1-based) is the ceil(j*n/n_bins)-th smallest value; a value
    lands in the bin counting the cuts strictly below it. Ties share
    the lower bin, and a constant column maps everything to bin 0. With
    n a multiple of n_bins and all values distinct the classes are
    exactly balanced.
    """
    n = len(values)
    if n == 0:
        return []
    svals = sorted(values)
    cuts = [svals[math.ceil(j * n / n_bins) - 1] for j in range(1, n_bins)]
    out = []
    for v in values:
        b = 0
        for c in cuts:
            if c < v:
                b += 1
        out.append(b)
    return out


def emit_choropleth(
    m: FeatureMatrix,
    column: str,
    polygons: list[ZonePolygon],
    manifest_digest_hex: str,
    path: str,
    n_bins: int = 5,
) -> list[str]:
    """Write one column as a GeoJSON choropleth; return warnings.

    Each zone becomes a Feature with properties zone, state, value, and
    quantile_bin. Masked values carry nulls and take no part in the
    binning. Zones without geometry are skipped with a warning. The
    manifest digest rides along as a top-level foreign member.
    """
    vals, msk = m.column(column)
    poly_by_zone = {p.zone: p for p in polygons}
    warnings = []
    live_idx = [i for i in range(m.n_zones) if not msk[i]]
    bins = quantile_bins([float(vals[i]) for i in live_idx], n_bins)
    bin_by_row = dict(zip(live_idx, bins))
    features = []
    for i, zone in enumerate(m.zones):
        poly = poly_by_zone.get(zone)
        if poly is None:
            warnings.append(f"{zone.code} {zone.state}: no geometry, skipped")
            continue
        groups = [
            [[[float(x), float(y)] for x, y in ring] for ring in g]
            for g in group_rings(poly.rings)
        ]
        if len(groups) == 1:
            geometry = {"type": "Polygon", "coordinates": groups[0]}
        else:
            geometry = {"type": "MultiPolygon", "coordinates": groups}
        if msk[i]:
            value = None
            qbin = None
        else:
            value = float(vals[i])
            qbin = bin_by_row[i]
        features.append(
            {
                "type": "Feature",
                "geometry": geometry,
                "properties": {
                    "zone": zone.code,
                    "state": zone.state,
                    "value": value,
                    "quantile_bin": qbin,
                },
            }
        )
    doc = {
        "type": "FeatureCollection",
        "manifest": manifest_digest_hex,
        "column": column,
        "features": features,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    return warnings


def validate_geojson_structure(doc: dict) -> list[str]:
    """Structural checks for an emitted map; returns problem strings.

    Verifies the FeatureCollection shape, per-feature geometry with
    closed rings of at least four [lon, lat] positions in range, the
    three required properties, and the manifest foreign member.
    """
    problems = []
    if doc.get("type") != "FeatureCollection":
        problems.append("top-level type must be FeatureCollection")
    if not isinstance(doc.get("manifest"), str) or not doc.get("manifest"):
        problems.append("manifest foreign member missing")
    feats = doc.get("features")
    if not isinstance(feats, list):
        return problems + ["features must be a list"]
    for k, feat in enumerate(feats):
        where = f"feature {k}"
        if feat.get("type") != "Feature":
            problems.append(f"{where}: type must be Feature")
        props = feat.get("properties")
        if not isinstance(props, dict):
            problems.append(f"{where}: properties missing")
        else:
            for key in ("zone", "value", "quantile_bin"):
                if key not in props:
                    problems.append(f"{where}: property {key} missing")
            if props.get("value") is None and props.get("quantile_bin") is not None:
                problems.append(f"{where}: null value with non-null bin")
        geom = feat.get("geometry")
        if not isinstance(geom, dict) or geom.get("type") not in ("Polygon", "MultiPolygon"):
            problems.append(f"{where}: geometry must be Polygon or MultiPolygon")
            continue
        polys = geom["coordinates"] if geom["type"] == "MultiPolygon" else [geom["coordinates"]]
        for ring_list in polys:
            for ring in ring_list:
                if len(ring) < 4:
                    problems.append(f"{where}: ring with under 4 positions")
                    continue
                if ring[0] != ring[-1]:
                    problems.append(f"{where}: unclosed ring")
                for pos in ring:
                    if (
                        not isinstance(pos, list)
                        or len(pos) != 2
                        or not all(isinstance(c, (int, float)) for c in pos)
                    ):
                        problems.append(f"{where}: bad position {pos!r}")
                        break
                    if not (-180.0 <= pos[0] <= 180.0 and -90.0 <= pos[1] <= 90.0):
                        problems.append(f"{where}: position out of range {pos!r}")
                        break
    return problems
