"""Zone geometry: containment tests, a packed bbox tree, and areas.

Containment uses the even-odd rule over all rings of a zone, with
points on any ring boundary counting as inside. When several zones
contain a point (shared boundaries), assignment goes to the
lexicographically smallest (code, state).

Areas come from projecting each polygon onto a local azimuthal
equal-area plane about its own vertex centroid on the authalic sphere,
then running the shoelace formula per ring. Because the projection is
equal-area, results do not depend on the chosen center, so areas of
adjacent zones add up consistently. Hole rings are subtracted by
even-odd nesting depth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import DegenerateRingError, DegenerateZoneError, DuplicateZoneError
from .model import ZoneId

EARTH_RADIUS_M = 6371007.1809184  # authalic sphere radius
SQM_PER_ACRE = 4046.8564224
SQM_PER_SQMILE = 2589988.110336

Ring = tuple[tuple[float, float], ...]


def _check_ring(ring: Ring) -> None:
    if len(ring) < 4:
        raise DegenerateRingError(f"ring has {len(ring)} vertices, need at least 4")
    if ring[0] != ring[-1]:
        raise DegenerateRingError("ring is not closed")


@dataclass(frozen=True)
class ZonePolygon:
    """A zone's rings (closed, lon/lat degrees) and its land area."""

    zone: ZoneId
    rings: tuple[Ring, ...]
    land_area_m2: float

    def __post_init__(self):
        if not self.rings:
            raise DegenerateRingError(f"{self.zone}: no rings")
        for ring in self.rings:
            _check_ring(ring)

    def bbox(self) -> tuple[float, float, float, float]:
        xs = [x for ring in self.rings for x, _ in ring]
        ys = [y for ring in self.rings for _, y in ring]
        return min(xs), min(ys), max(xs), max(ys)


def _on_segment(x: float, y: float, x1: float, y1: float, x2: float, y2: float) -> bool:
    cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
    if cross != 0.0:
        return False
    return min(x1, x2) <= x <= max(x1, x2) and min(y1, y2) <= y <= max(y1, y2)


def _crossings_odd(x: float, y: float, ring: Ring) -> bool:
    inside = False
    for i in range(len(ring) - 1):
        x1, y1 = ring[i]
        x2, y2 = ring[i + 1]
        if (y1 > y) != (y2 > y):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xint:
                inside = not inside
    return inside


def point_in_polygon(lon: float, lat: float, rings: tuple[Ring, ...]) -> bool:
    """Even-odd containment; any ring boundary counts as inside."""
    for ring in rings:
        for i in range(len(ring) - 1):
            if _on_segment(lon, lat, *ring[i], *ring[i + 1]):
                return True
    inside = False
    for ring in rings:
        if _crossings_odd(lon, lat, ring):
            inside = not inside
    return inside


@dataclass
class _Node:
    bbox: tuple[float, float, float, float]
    children: "list[_Node] | None"
    entries: list[ZonePolygon] | None


def _merge_bbox(boxes: list[tuple[float, float, float, float]]):
    return (
        min(b[0] for b in boxes),
        min(b[1] for b in boxes),
        max(b[2] for b in boxes),
        max(b[3] for b in boxes),
    )


class ZoneIndex:
    """Sort-tile-recursive packed bbox tree over zone polygons.

    Candidate lookup is by bbox containment; exact ring tests happen in
    `assign_zone`. The tree is static after construction.
    """

    NODE_CAPACITY = 8

    def __init__(self, polygons: list[ZonePolygon]):
        self.polygons = list(polygons)
        if not polygons:
            self._root = None
            return
        leaves = self._pack(
            sorted(polygons, key=lambda p: p.zone),
            lambda p: p.bbox(),
            leaf=True,
        )
        nodes = leaves
        while len(nodes) > 1:
            nodes = self._pack(nodes, lambda nd: nd.bbox, leaf=False)
        self._root = nodes[0]

    def _pack(self, items, get_bbox, leaf: bool) -> list[_Node]:
        def center(it):
            b = get_bbox(it)
            return ((b[0] + b[2]) / 2.0, (b[1] + b[3]) / 2.0)

        cap = self.NODE_CAPACITY
        n_groups = math.ceil(len(items) / cap)
        n_slices = math.ceil(math.sqrt(n_groups))
        by_x = sorted(items, key=lambda it: center(it)[0])
        slice_size = math.ceil(len(items) / n_slices)
        out = []
        for s in range(0, len(items), slice_size):
            run = sorted(by_x[s : s + slice_size], key=lambda it: center(it)[1])
            for g in range(0, len(run), cap):
                group = run[g : g + cap]
                bbox = _merge_bbox([get_bbox(it) for it in group])
                if leaf:
                    out.append(_Node(bbox, None, group))
                else:
                    out.append(_Node(bbox, group, None))
        return out

    def candidates(self, lon: float, lat: float) -> list[ZonePolygon]:
        """Polygons whose bbox contains the point."""
        if self._root is None:
            return []
        out = []
        stack = [self._root]
        while stack:
            node = stack.pop()
            b = node.bbox
            if not (b[0] <= lon <= b[2] and b[1] <= lat <= b[3]):
                continue
            if node.entries is not None:
                for poly in node.entries:
                    pb = poly.bbox()
                    if pb[0] <= lon <= pb[2] and pb[1] <= lat <= pb[3]:
                        out.append(poly)
            else:
                stack.extend(node.children)
        return out


def assign_zone(lon: float, lat: float, index: ZoneIndex) -> ZoneId | None:
    """The zone containing the point, or None.

    Boundary points belong to every zone whose boundary they touch; the
    smallest (code, state) wins so assignment is order independent.
    """
    hits = [
        p.zone
        for p in index.candidates(lon, lat)
        if point_in_polygon(lon, lat, p.rings)
    ]
    return min(hits) if hits else None


def _project_laea(
    ring: Ring, lon0: float, lat0: float
) -> list[tuple[float, float]]:
    sin0 = math.sin(lat0)
    cos0 = math.cos(lat0)
    out = []
    for lon, lat in ring:
        lam = math.radians(lon) - lon0
        phi = math.radians(lat)
        denom = 1.0 + sin0 * math.sin(phi) + cos0 * math.cos(phi) * math.cos(lam)
        if denom <= 0.0:
            raise DegenerateZoneError("ring vertex antipodal to projection center")
        k = math.sqrt(2.0 / denom)
        x = EARTH_RADIUS_M * k * math.cos(phi) * math.sin(lam)
        y = EARTH_RADIUS_M * k * (cos0 * math.sin(phi) - sin0 * math.cos(phi) * math.cos(lam))
        out.append((x, y))
    return out


def _shoelace(points: list[tuple[float, float]]) -> float:
    acc = 0.0
    for i in range(len(points) - 1):
        x1, y1 = points[i]
        x2, y2 = points[i + 1]
        acc += x1 * y2 - x2 * y1
    return acc / 2.0


def ring_nesting_depths(rings: tuple[Ring, ...]) -> list[int]:
    """How many other rings enclose each ring's first vertex.

    Even depth marks an outer boundary, odd depth a hole. Rings of one
    zone must not share vertices with each other.
    """
    depths = []
    for i, ring in enumerate(rings):
        depth = 0
        for j, other in enumerate(rings):
            if i != j and _crossings_odd(ring[0][0], ring[0][1], other):
                depth += 1
        depths.append(depth)
    return depths


def group_rings(rings: tuple[Ring, ...]) -> list[list[Ring]]:
    """Group a flat ring set into polygons as [outer, holes...] lists.

    Each odd-depth ring attaches to the deepest outer enclosing it, so
    disjoint parts of one zone come back as separate groups.
    """
    depths = ring_nesting_depths(rings)
    outers = [i for i in range(len(rings)) if depths[i] % 2 == 0]
    groups: dict[int, list[Ring]] = {i: [rings[i]] for i in outers}
    for i in range(len(rings)):
        if depths[i] % 2 == 0:
            continue
        best = None
        for j in outers:
            if _crossings_odd(rings[i][0][0], rings[i][0][1], rings[j]):
                if best is None or depths[j] > depths[best]:
                    best = j
        if best is not None:
            groups[best].append(rings[i])
    return [groups[i] for i in outers]


def polygon_area_m2(rings: tuple[Ring, ...]) -> float:
    """Area of the ring set in square meters, holes subtracted."""
    for ring in rings:
        _check_ring(ring)
    verts = [pt for ring in rings for pt in ring[:-1]]
    lon0 = math.radians(sum(x for x, _ in verts) / len(verts))
    lat0 = math.radians(sum(y for _, y in verts) / len(verts))
    total = 0.0
    for depth, ring in zip(ring_nesting_depths(rings), rings):
        area = abs(_shoelace(_project_laea(ring, lon0, lat0)))
        total += area if depth % 2 == 0 else -area
    return total


def acres(area_m2: float) -> float:
    """Square meters to international acres."""
    return area_m2 / SQM_PER_ACRE


def population_density(
    population: float, land_area_m2: float, per_square_mile: bool = False
) -> float:
    """Residents per unit area.

    Default is population / land_area_m2 * 1e6 (residents per square
    kilometer). `per_square_mile` switches the scale factor to the
    square-mile constant.
    """
    if land_area_m2 <= 0.0:
        raise DegenerateZoneError(f"land area {land_area_m2} must be positive")
    factor = SQM_PER_SQMILE if per_square_mile else 1e6
    return population / land_area_m2 * factor


def load_zone_polygons(
    path: str,
    zone_property: str = "zone",
    state_property: str = "state",
    land_area_property: str = "land_area_m2",
    states: list[str] | None = None,
) -> list[ZonePolygon]:
    """Read zone polygons from a GeoJSON FeatureCollection.

    Accepts Polygon and MultiPolygon geometries. When the land-area
    property is absent the area is computed from the geometry. Rings
    must arrive closed; no topology repair is attempted.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise ValueError(f"{path}: expected a FeatureCollection")
    out: list[ZonePolygon] = []
    seen: set[ZoneId] = set()
    for k, feat in enumerate(doc.get("features", [])):
        props = feat.get("properties") or {}
        geom = feat.get("geometry") or {}
        try:
            zone = ZoneId(str(props[zone_property]), str(props[state_property]).upper())
        except KeyError as e:
            raise ValueError(f"{path}: feature {k} lacks property {e}") from None
        if states is not None and zone.state not in states:
            continue
        if zone in seen:
            raise DuplicateZoneError(path, k, zone.code)
        seen.add(zone)
        gtype = geom.get("type")
        if gtype == "Polygon":
            ring_lists = geom["coordinates"]
        elif gtype == "MultiPolygon":
            ring_lists = [r for poly in geom["coordinates"] for r in poly]
        else:
            raise ValueError(f"{path}: feature {k} has geometry {gtype!r}")
        rings = tuple(tuple((float(x), float(y)) for x, y in ring) for ring in ring_lists)
        if land_area_property in props:
            land = float(props[land_area_property])
        else:
            land = polygon_area_m2(rings)
        out.append(ZonePolygon(zone, rings, land))
    return out
