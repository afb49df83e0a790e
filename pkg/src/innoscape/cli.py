"""Command-line pipeline: ingest, build, summarize, train, maps.

Each stage reads the run configuration plus the staging area left by
earlier stages and can be re-run independently; `run` chains all of
them. Configuration or validation problems exit with status 2 before
any artifact is written; failures inside a stage exit with status 1.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import date

from . import __version__, features, ingest, osmfetch, report, staging
from .config import RunConfig, load_config
from .errors import ConfigError, InnoscapeError
from .forest import importance_detail_text, seed_averaged_importance
from .model import catalog_default, read_matrix, validate_matrix, write_matrix
from .spatial import ZoneIndex, load_zone_polygons

STAGES = ("ingest", "build", "summarize", "train", "maps")


def _ensure_dirs(out: str) -> None:
    for sub in ("staging/records", "tables", "maps"):
        os.makedirs(os.path.join(out, sub), exist_ok=True)


def _manifest_for(cfg: RunConfig, out: str) -> report.RunManifest:
    manifest = report.build_manifest(cfg.echo(), cfg.input_paths())
    report.write_manifest(manifest, os.path.join(out, "manifest.json"))
    return manifest


def _load_polygons(cfg: RunConfig):
    return load_zone_polygons(
        cfg.resolve(cfg.polygons),
        zone_property=cfg.polygon_zone_property,
        state_property=cfg.polygon_state_property,
        land_area_property=cfg.polygon_land_area_property,
        states=cfg.states,
    )


def _scope_list(cfg: RunConfig) -> list[tuple[str, str, list[str]]]:
    """(label, filename token, states) for pooled plus each state."""
    scopes = [(" + ".join(cfg.states), "_".join(cfg.states), list(cfg.states))]
    if len(cfg.states) > 1:
        for s in cfg.states:
            scopes.append((s, s, [s]))
    return scopes


def stage_ingest(cfg: RunConfig, out: str) -> None:
    rec_dir = os.path.join(out, "staging", "records")
    polygons = _load_polygons(cfg)
    index = ZoneIndex(polygons)
    lines = ["# ingest report"]

    def log_result(name: str, res: ingest.ParseResult, kept: int) -> None:
        lines.append(
            f"{name}: lines={res.lines_total} records={len(res.records)} "
            f"dropped={res.dropped_lines} warnings={len(res.warnings)} kept={kept}"
        )
        if not res.consistent():
            raise InnoscapeError(f"{name}: parse accounting is inconsistent")
        for w in res.warnings[:50]:
            lines.append(f"  {w.path}:{w.line_no} [{w.code}] {w.message}")

    census = ingest.parse_census(
        cfg.resolve(cfg.sources["census"]), cfg.delimiter, cfg.census_schema or None
    )
    census_kept = ingest.filter_zone_records(census.records, cfg.states)
    log_result("census", census, len(census_kept))
    staging.write_records(os.path.join(rec_dir, "census.jsonl"), census_kept)

    window = (date(cfg.outcome_year, 1, 1), date(cfg.outcome_year, 12, 31))
    patents = ingest.parse_patents(
        cfg.resolve(cfg.sources["patents"]), window[0], window[1], cfg.delimiter
    )
    patents_kept, geo_dropped = ingest.filter_patents_to_states(
        patents.records, cfg.states, index
    )
    log_result("patents", patents, len(patents_kept))
    lines.append(f"patents: dropped_outside_states={geo_dropped}")
    staging.write_records(os.path.join(rec_dir, "patents.jsonl"), patents_kept)

    sfr = ingest.parse_sfr(cfg.resolve(cfg.sources["sfr"]), cfg.delimiter)
    sfr_kept = ingest.filter_zone_records(sfr.records, cfg.states)
    log_result("sfr", sfr, len(sfr_kept))
    staging.write_records(os.path.join(rec_dir, "sfr.jsonl"), sfr_kept)

    rnd = ingest.parse_rnd(cfg.resolve(cfg.sources["rnd"]), cfg.delimiter)
    rnd_kept = ingest.filter_zone_records(rnd.records, cfg.states)
    log_result("rnd", rnd, len(rnd_kept))
    staging.write_records(os.path.join(rec_dir, "rnd.jsonl"), rnd_kept)

    h1b = ingest.parse_h1b(cfg.resolve(cfg.sources["h1b"]), cfg.delimiter)
    h1b_kept = ingest.filter_zone_records(h1b.records, cfg.states)
    log_result("h1b", h1b, len(h1b_kept))
    staging.write_records(os.path.join(rec_dir, "h1b.jsonl"), h1b_kept)

    bizreg = ingest.parse_bizreg(
        cfg.resolve(cfg.sources["bizreg"]), cfg.base_year, cfg.delimiter
    )
    bizreg_kept = ingest.filter_zone_records(bizreg.records, cfg.states)
    log_result("bizreg", bizreg, len(bizreg_kept))
    staging.write_records(os.path.join(rec_dir, "bizreg.jsonl"), bizreg_kept)

    all_pois = []
    for kind in sorted(cfg.poi_sources):
        res = ingest.parse_poi(cfg.resolve(cfg.poi_sources[kind]), kind, cfg.delimiter)
        assigned, unassigned = ingest.assign_poi_zones(res.records, index)
        log_result(f"poi_{kind}", res, len(assigned))
        lines.append(f"poi_{kind}: outside_all_zones={unassigned}")
        all_pois.extend(assigned)
    staging.write_records(os.path.join(rec_dir, "poi.jsonl"), all_pois)

    with open(os.path.join(out, "staging", "ingest_report.txt"), "w",
              encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"ingest: staged records for {len(census_kept)} census zones")


def stage_build(cfg: RunConfig, out: str) -> None:
    rec_dir = os.path.join(out, "staging", "records")
    for name in ("census", "patents", "sfr", "rnd", "h1b", "bizreg", "poi"):
        if not os.path.exists(os.path.join(rec_dir, f"{name}.jsonl")):
            raise InnoscapeError(f"build: staged records missing ({name}); run ingest first")
    polygons = _load_polygons(cfg)
    matrix, join = features.build_matrix(
        census=staging.read_records(os.path.join(rec_dir, "census.jsonl")),
        polygons=polygons,
        patents=staging.read_records(os.path.join(rec_dir, "patents.jsonl")),
        sfr=staging.read_records(os.path.join(rec_dir, "sfr.jsonl")),
        rnd=staging.read_records(os.path.join(rec_dir, "rnd.jsonl")),
        h1b=staging.read_records(os.path.join(rec_dir, "h1b.jsonl")),
        bizreg=staging.read_records(os.path.join(rec_dir, "bizreg.jsonl")),
        pois=staging.read_records(os.path.join(rec_dir, "poi.jsonl")),
        base_year=cfg.base_year,
        outcome_year=cfg.outcome_year,
        density_per_square_mile=cfg.density_per_square_mile,
        h1b_statuses=cfg.h1b_statuses,
        allow_custom_lag=cfg.allow_custom_lag,
    )
    problems = validate_matrix(matrix)
    if problems:
        raise InnoscapeError("build: invalid matrix: " + "; ".join(problems))
    write_matrix(
        matrix,
        os.path.join(out, "staging", "matrix.tsv"),
        os.path.join(out, "staging", "matrix.mask.tsv"),
    )
    with open(os.path.join(out, "staging", "join_report.txt"), "w",
              encoding="utf-8", newline="\n") as fh:
        fh.write(join.as_text())
    print(f"build: matrix with {matrix.n_zones} zones, "
          f"{len(matrix.feature_names)} features")


def _read_staged_matrix(out: str):
    mpath = os.path.join(out, "staging", "matrix.tsv")
    if not os.path.exists(mpath):
        raise InnoscapeError("staged matrix missing; run build first")
    matrix = read_matrix(mpath, os.path.join(out, "staging", "matrix.mask.tsv"))
    problems = validate_matrix(matrix)
    if problems:
        raise InnoscapeError("staged matrix invalid: " + "; ".join(problems))
    return matrix


def stage_summarize(cfg: RunConfig, out: str, manifest: report.RunManifest) -> None:
    matrix = _read_staged_matrix(out)
    for label, token, states in _scope_list(cfg):
        rows = features.summarize(matrix, states)
        n_in_scope = sum(1 for z in matrix.zones if z.state in set(states))
        path = os.path.join(out, "tables", f"summary_{token}.tsv")
        warnings = report.emit_summary_table(
            rows, n_in_scope, label, cfg.base_year, cfg.outcome_year,
            manifest.digest, path,
        )
        for w in warnings:
            print(f"summarize: warning: {w}", file=sys.stderr)
    print(f"summarize: wrote {len(_scope_list(cfg))} tables")


def stage_train(cfg: RunConfig, out: str, manifest: report.RunManifest,
                threads: int | None = None) -> None:
    if threads is not None:
        import numba

        effective = max(1, min(threads, numba.config.NUMBA_NUM_THREADS))
        numba.set_num_threads(effective)
        if effective != threads:
            print(f"train: clamped threads {threads} -> {effective}", file=sys.stderr)
    matrix = _read_staged_matrix(out)
    catalog = catalog_default()
    for outcome in matrix.outcome_names:
        reports = []
        for label, token, states in _scope_list(cfg):
            sub = matrix.subset_by_state(states[0]) if len(states) == 1 else matrix
            X, y, kept = sub.training_rows(outcome)
            rep = seed_averaged_importance(
                X, y, list(matrix.feature_names), cfg.forest, cfg.master_seed,
                outcome=outcome, scope=label,
            )
            reports.append(rep)
            detail = os.path.join(
                out, "staging", f"importance_{outcome}_{token}.tsv"
            )
            with open(detail, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(importance_detail_text(rep))
            print(f"train: {outcome} [{label}]: {len(kept)} rows")
        path = os.path.join(out, "tables", f"importance_{outcome}.tsv")
        report.emit_importance_table(reports, manifest.digest, path, catalog)
    print(f"train: wrote {len(matrix.outcome_names)} importance tables")


def stage_maps(cfg: RunConfig, out: str, manifest: report.RunManifest) -> None:
    matrix = _read_staged_matrix(out)
    polygons = _load_polygons(cfg)
    for column in cfg.map_columns:
        path = os.path.join(out, "maps", f"{column}.geojson")
        warnings = report.emit_choropleth(matrix, column, polygons, manifest.digest, path)
        for w in warnings:
            print(f"maps: warning: {w}", file=sys.stderr)
        with open(path, "r", encoding="utf-8") as fh:
            problems = report.validate_geojson_structure(json.load(fh))
        if problems:
            raise InnoscapeError(f"maps: {column}: " + "; ".join(problems))
    print(f"maps: wrote {len(cfg.map_columns)} choropleths")


def cmd_fetch_poi(args) -> int:
    bbox = tuple(float(x) for x in args.bbox.split(","))
    if len(bbox) != 4:
        raise ConfigError("bbox must be south,west,north,east")
    cache_dir = args.cache_dir or os.environ.get(
        "INNOSCAPE_CACHE_DIR",
        os.path.join(os.path.expanduser("~"), ".cache", "innoscape"),
    )
    records, stats = osmfetch.fetch_poi(
        args.kind, bbox, cache_dir, endpoint=args.endpoint, offline=args.offline
    )
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "name", "lon", "lat", "area_m2", "matched_keyword"])
        for r in records:
            writer.writerow([
                r.kind, r.name, repr(r.lon), repr(r.lat),
                "" if r.area_m2 is None else repr(r.area_m2),
                r.matched_keyword or "",
            ])
    print(
        f"fetch-poi: {stats.elements} {args.kind} records "
        f"({stats.requests_made} fetched, {stats.cache_hits} from cache)"
    )
    return 0


def _run_stages(args, stages: list[str]) -> int:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.master_seed = args.seed
    out = args.out
    _ensure_dirs(out)
    manifest = _manifest_for(cfg, out)
    for stage in stages:
        if stage == "ingest":
            stage_ingest(cfg, out)
        elif stage == "build":
            stage_build(cfg, out)
        elif stage == "summarize":
            stage_summarize(cfg, out, manifest)
        elif stage == "train":
            stage_train(cfg, out, manifest, getattr(args, "threads", None))
        elif stage == "maps":
            stage_maps(cfg, out, manifest)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="innoscape",
        description="Zone-level innovation analytics pipeline",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_stage(name: str, help_text: str):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="run configuration JSON")
        p.add_argument("--out", required=True, help="output directory")
        return p

    add_stage("ingest", "parse sources into the staging area")
    add_stage("build", "assemble the feature matrix from staged records")
    add_stage("summarize", "write summary statistic tables")
    p_train = add_stage("train", "rank factors with the forest protocol")
    p_train.add_argument("--seed", type=int, help="override the master seed")
    p_train.add_argument("--threads", type=int, help="numba thread count")
    add_stage("maps", "write choropleth GeoJSON per configured column")

    p_run = add_stage("run", "run all stages in order")
    p_run.add_argument("--only", choices=STAGES, help="run a single stage")
    p_run.add_argument("--seed", type=int, help="override the master seed")
    p_run.add_argument("--threads", type=int, help="numba thread count")

    p_fetch = sub.add_parser("fetch-poi", help="fetch points of interest to CSV")
    p_fetch.add_argument("--kind", required=True, choices=ingest.POI_KINDS)
    p_fetch.add_argument("--bbox", required=True, help="south,west,north,east")
    p_fetch.add_argument("--out", required=True, help="output CSV path")
    p_fetch.add_argument("--cache-dir", help="response cache directory")
    p_fetch.add_argument("--endpoint", default=osmfetch.DEFAULT_ENDPOINT)
    p_fetch.add_argument("--offline", action="store_true",
                         help="fail instead of fetching on cache miss")

    args = parser.parse_args(argv)
    try:
        if args.command == "fetch-poi":
            return cmd_fetch_poi(args)
        if args.command == "run":
            stages = [args.only] if args.only else list(STAGES)
            return _run_stages(args, stages)
        return _run_stages(args, [args.command])
    except ConfigError as e:
        print(f"error [{args.command}]: {e}", file=sys.stderr)
        return 2
    except InnoscapeError as e:
        print(f"error [{args.command}]: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
