"""Record-and-replay client for an Overpass-style POI endpoint.

Every query is canonical text; its response body is cached verbatim
under the sha256 of (endpoint, query) next to a JSON sidecar recording
the body digest. A later run with the same query replays the cached
body without touching the network, and a body that no longer matches
its recorded digest is refused. Offline runs that miss the cache fail
loudly rather than returning partial data.

Innovation spaces are found by name keyword; one query is issued per
keyword so each result carries the keyword that produced it.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass

import requests

from .errors import CacheCorruptError, NetworkUnavailableError
from .ingest import INNOVATION_KEYWORDS, PoiRecord
from .spatial import polygon_area_m2

DEFAULT_ENDPOINT = "https://overpass-api.de/api/interpreter"

# bbox order is (south, west, north, east), Overpass convention
BBox = tuple[float, float, float, float]

_KIND_SELECTORS = {
    "school": '["amenity"="school"]',
    "university": '["amenity"="university"]',
    "cafe": '["amenity"="cafe"]',
    "park": '["leisure"="park"]',
    "square": '["place"="square"]',
    "bus_stop": '["highway"="bus_stop"]',
}

_AREA_KINDS = ("park", "square")


@dataclass(frozen=True)
class FetchStats:
    kind: str
    requests_made: int
    cache_hits: int
    elements: int
    skipped_no_coords: int


def build_query(kind: str, bbox: BBox, keyword: str | None = None) -> str:
    """Canonical query text for one kind (and keyword, if name-based)."""
    s, w, n, e = bbox
    box = f"({s!r},{w!r},{n!r},{e!r})"
    if keyword is not None:
        sel = f'["name"~"{keyword}",i]'
    else:
        sel = _KIND_SELECTORS[kind]
    body = "out geom;" if kind in _AREA_KINDS else "out center;"
    lines = ["[out:json][timeout:180];", "("]
    for elem in ("node", "way", "relation"):
        lines.append(f"  {elem}{sel}{box};")
    lines.append(");")
    lines.append(body)
    return "\n".join(lines) + "\n"


def cache_key(endpoint: str, query: str) -> str:
    return hashlib.sha256((endpoint + "\n" + query).encode("utf-8")).hexdigest()


def _fetch_one(
    query: str,
    endpoint: str,
    cache_dir: str,
    offline: bool,
    http_post,
) -> tuple[bytes, bool]:
    """Return (body, was_cache_hit) for one query, caching on miss."""
    key = cache_key(endpoint, query)
    body_path = os.path.join(cache_dir, f"{key}.body")
    meta_path = os.path.join(cache_dir, f"{key}.meta.json")
    if os.path.exists(body_path) and os.path.exists(meta_path):
        with open(body_path, "rb") as fh:
            body = fh.read()
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
        got = hashlib.sha256(body).hexdigest()
        if got != meta.get("body_sha256"):
            raise CacheCorruptError(
                f"{body_path}: body digest {got} != recorded {meta.get('body_sha256')}"
            )
        return body, True
    if offline:
        raise NetworkUnavailableError(
            f"offline and no cached response for query key {key}"
        )
    if http_post is None:
        def http_post(url, data):
            try:
                resp = requests.post(url, data={"data": data}, timeout=300)
                resp.raise_for_status()
            except requests.RequestException as e:
                raise NetworkUnavailableError(str(e)) from e
            return resp.content

    body = http_post(endpoint, query)
    os.makedirs(cache_dir, exist_ok=True)
    tmp = body_path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(body)
    os.replace(tmp, body_path)
    meta = {
        "endpoint": endpoint,
        "query": query,
        "body_sha256": hashlib.sha256(body).hexdigest(),
        "fetched_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    tmp = meta_path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
    os.replace(tmp, meta_path)
    return body, False


def _element_area(el: dict) -> float | None:
    geom = el.get("geometry")
    if not geom or len(geom) < 4:
        return None
    ring = tuple((float(p["lon"]), float(p["lat"])) for p in geom)
    if ring[0] != ring[-1]:
        return None
    return polygon_area_m2((ring,))


def parse_overpass(body: bytes, kind: str, keyword: str | None) -> tuple[list[PoiRecord], int, list]:
    """Decode one response into records.

    Returns (records, skipped count, element identities) where the
    identities let callers deduplicate the same element found by
    several keyword queries.
    """
    doc = json.loads(body.decode("utf-8"))
    records = []
    skipped = 0
    idents = []
    for el in doc.get("elements", []):
        if "lon" in el and "lat" in el:
            lon, lat = float(el["lon"]), float(el["lat"])
        elif "center" in el:
            lon, lat = float(el["center"]["lon"]), float(el["center"]["lat"])
        elif el.get("geometry"):
            pts = el["geometry"]
            lon = sum(float(p["lon"]) for p in pts) / len(pts)
            lat = sum(float(p["lat"]) for p in pts) / len(pts)
        else:
            skipped += 1
            continue
        name = (el.get("tags") or {}).get("name", "")
        area = _element_area(el) if kind in _AREA_KINDS else None
        records.append(
            PoiRecord(
                kind=kind,
                name=name,
                lon=lon,
                lat=lat,
                area_m2=area,
                matched_keyword=keyword,
            )
        )
        idents.append((el.get("type"), el.get("id")))
    return records, skipped, idents


def fetch_poi(
    kind: str,
    bbox: BBox,
    cache_dir: str,
    endpoint: str = DEFAULT_ENDPOINT,
    offline: bool = False,
    http_post=None,
) -> tuple[list[PoiRecord], FetchStats]:
    """Fetch all POIs of one kind inside the bbox, through the cache.

    `http_post(url, query_text) -> bytes` can replace the real client
    for tests. Innovation spaces issue one query per name keyword, in
    keyword order, keeping the first hit for an element matched by
    several keywords.
    """
    queries: list[tuple[str, str | None]]
    if kind == "innovation_space":
        queries = [(build_query(kind, bbox, kw), kw) for kw in INNOVATION_KEYWORDS]
    else:
        queries = [(build_query(kind, bbox), None)]
    records: list[PoiRecord] = []
    seen: set = set()
    hits = 0
    made = 0
    skipped = 0
    for query, kw in queries:
        body, was_hit = _fetch_one(query, endpoint, cache_dir, offline, http_post)
        if was_hit:
            hits += 1
        else:
            made += 1
        recs, skip, idents = parse_overpass(body, kind, kw)
        skipped += skip
        for rec, ident in zip(recs, idents):
            if ident in seen and ident != (None, None):
                continue
            seen.add(ident)
            records.append(rec)
    return records, FetchStats(kind, made, hits, len(records), skipped)
