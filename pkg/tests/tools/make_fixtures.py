"""Regenerate the frozen fixture corpus under tests/data.

Twenty zones on a 5x4 grid of 0.1 degree squares: twelve MA zones and
eight NY zones, plus one census-only zone (02113) that has no polygon
and therefore drops out of the matrix. All values are simple explicit
formulas of the zone index so every cell can be recomputed by hand.

Pinned cells used by tests:
  02101: population 1000, land area 1e6 m2, walk 30, bike 20
  02102: year-built bins 10 units at age 80 and 10 at age 20
  02103: all-zero bins (building-age columns masked)
  02104: median_income cell "NA" (masked)
  02107: poverty_rate 1.2, outside [0, 1] (masked)

Run from the repository root:  python3 tests/tools/make_fixtures.py
"""

import csv
import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.normpath(os.path.join(HERE, "..", "data"))

LON0, LAT0, STEP = -71.5, 42.0, 0.1

# zone layout: (code, state, column, row, population, patent pair count)
ZONES = [
    ("02101", "MA", 0, 0, 1000, 3),
    ("02102", "MA", 1, 0, 2000, 5),
    ("02103", "MA", 2, 0, 1500, 6),
    ("02104", "MA", 3, 0, 2500, 3),
    ("02105", "MA", 4, 0, 3000, 2),
    ("02106", "MA", 0, 1, 1200, 4),
    ("02107", "MA", 1, 1, 1800, 1),
    ("02108", "MA", 2, 1, 2200, 2),
    ("02109", "MA", 3, 1, 2600, 5),
    ("02110", "MA", 4, 1, 1400, 2),
    ("02111", "MA", 0, 2, 1600, 7),
    ("02112", "MA", 1, 2, 2400, 4),
    ("10001", "NY", 2, 2, 3500, 7),
    ("10002", "NY", 3, 2, 2800, 1),
    ("10003", "NY", 4, 2, 3200, 6),
    ("10004", "NY", 0, 3, 1100, 2),
    ("10005", "NY", 1, 3, 1300, 3),
    ("10006", "NY", 2, 3, 1700, 5),
    ("10007", "NY", 3, 3, 1900, 4),
    ("10008", "NY", 4, 3, 2100, 0),
]

KEYWORDS = ["incubator", "innovation hub", "accelerator", "tech hub", "co-working space"]


def cell_bounds(c, r):
    w = LON0 + STEP * c
    s = LAT0 + STEP * r
    return w, s, w + STEP, s + STEP


def center(c, r):
    w, s, e, n = cell_bounds(c, r)
    return (w + e) / 2.0, (s + n) / 2.0


def poi_point(c, r, k):
    # offset away from the center so no point lands in 02105's hole
    cx, cy = center(c, r)
    return cx + 0.02 + 0.002 * k, cy + 0.02


def write_zones():
    features = []
    for idx, (code, state, c, r, _pop, _pat) in enumerate(ZONES, start=1):
        w, s, e, n = cell_bounds(c, r)
        exterior = [[w, s], [e, s], [e, n], [w, n], [w, s]]
        if code == "02105":
            # square with a hole in the middle
            hole = [[-71.06, 42.04], [-71.04, 42.04], [-71.04, 42.06],
                    [-71.06, 42.06], [-71.06, 42.04]]
            geometry = {"type": "Polygon", "coordinates": [exterior, hole]}
        elif code == "10008":
            west = [[w, s], [w + 0.04, s], [w + 0.04, n], [w, n], [w, s]]
            east = [[w + 0.06, s], [e, s], [e, n], [w + 0.06, n], [w + 0.06, s]]
            geometry = {"type": "MultiPolygon", "coordinates": [[west], [east]]}
        else:
            geometry = {"type": "Polygon", "coordinates": [exterior]}
        land = 1000000.0 if code == "02101" else 10000000.0 + 543210.0 * idx
        features.append({
            "type": "Feature",
            "geometry": geometry,
            "properties": {"zone": code, "state": state, "land_area_m2": land},
        })
    doc = {"type": "FeatureCollection", "features": features}
    with open(os.path.join(DATA, "zones.geojson"), "w", newline="\n") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def census_row(idx, code, state, pop):
    row = {
        "zone": code,
        "state": state,
        "total_population": pop,
        "white": (62 * pop) // 100 + idx * 3,
        "black": (9 * pop) // 100 + idx * 2,
        "native": pop // 100 + (idx % 3),
        "asian": (6 * pop) // 100 + idx * 4,
        "age_25_34": (15 * pop) // 100 + idx * 5,
        "college": (11 * pop) // 100 + idx * 2,
        "bachelor": (19 * pop) // 100 + idx * 3,
        "graduate": (8 * pop) // 100 + idx * 2,
        "scientific_technical": (5 * pop) // 100 + idx * 6,
        "median_age": round(28.0 + 0.7 * idx, 1),
        "median_income": 42000 + 3100 * idx,
        "unemployment_rate": round(0.03 + 0.004 * idx, 4),
        "poverty_rate": round(0.06 + 0.008 * idx, 4),
        "median_home_value": 160000 + 27000 * idx,
        "occupied_housing_units": (45 * pop) // 100 + 10 * idx - (2 * idx + 5),
        "housing_total": (45 * pop) // 100 + 10 * idx,
        "commute_car_truck_van": (38 * pop) // 100 + idx,
        "commute_public_transit": (9 * pop) // 100 + 2 * idx,
        "commute_walk": (3 * pop) // 100 + idx,
        "commute_bike": pop // 100 + idx,
        "commute_worked_from_home": (4 * pop) // 100 + idx,
        "commute_worked_outside_state": (2 * pop) // 100 + idx,
        "built_1927_1937": 40 + 7 * idx,
        "built_1987_1997": 60 + 9 * idx,
        "built_1997_2007": 30 + 5 * idx,
    }
    if code == "02101":
        row["commute_walk"] = 30
        row["commute_bike"] = 20
    if code == "02102":
        row["built_1927_1937"] = 10
        row["built_1987_1997"] = 10
        row["built_1997_2007"] = 0
    if code == "02103":
        row["built_1927_1937"] = 0
        row["built_1987_1997"] = 0
        row["built_1997_2007"] = 0
    if code == "02104":
        row["median_income"] = "NA"
    if code == "02107":
        row["poverty_rate"] = 1.2
    return row


def write_census():
    rows = [census_row(i, code, state, pop)
            for i, (code, state, _c, _r, pop, _p) in enumerate(ZONES, start=1)]
    rows.append(census_row(21, "02113", "MA", 999))
    cols = list(rows[0].keys())
    with open(os.path.join(DATA, "census.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        w.writerows(rows)


def write_patents():
    rows = []
    for i, (code, state, _c, _r, _pop, count) in enumerate(ZONES, start=1):
        for k in range(1, count + 1):
            rf = f"P{i:02d}{k:02d}"
            if i == 2 and k == count:
                rf = "P0101"  # family shared with zone 02101
            rows.append([rf, code, state,
                         f"2016-{(k % 12) + 1:02d}-{(i % 27) + 1:02d}", "", ""])
    rows.append(["P0101", "02101", "MA", "2016-02-02", "", ""])  # duplicate pair
    rows.append(["POLD1", "02103", "MA", "2015-06-01", "", ""])  # out of window
    rows.append(["PBAD1", "02103", "MA", "2016-13-01", "", ""])  # bad date
    rows.append(["PGEO1", "02101", "MA", "2016-03-03", "-70.5", "42.05"])  # outside zones
    rows.append(["PZON1", "ABCDE", "MA", "2016-04-04", "", ""])  # bad zone code
    rows.append(["PCST1", "99999", "CT", "2016-05-05", "", ""])  # unconfigured state
    rows.append(["P113A", "02113", "MA", "2016-06-06", "", ""])  # zone outside matrix
    with open(os.path.join(DATA, "patents.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rf_id", "zone", "state", "grant_date", "lon", "lat"])
        w.writerows(rows)


def write_sfr():
    with open(os.path.join(DATA, "sfr.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["zone", "state", "sfr"])
        for i, (code, state, _c, _r, _pop, _p) in enumerate(ZONES, start=1):
            w.writerow([code, state, round(4.0 + 0.37 * i + (i * i % 7) * 0.21, 3)])


def write_rnd():
    with open(os.path.join(DATA, "rnd.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["zone", "state", "expenditure"])
        for i, (code, state, _c, _r, _pop, _p) in enumerate(ZONES, start=1):
            if i % 3 == 1:
                w.writerow([code, state, 12.5])
                w.writerow([code, state, 7.5])
            elif i % 3 == 2:
                w.writerow([code, state, 20.0])


def write_h1b():
    cycle = ["certified", "certified", "denied", "withdrawn"]
    with open(os.path.join(DATA, "h1b.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["zone", "state", "status"])
        for i, (code, state, _c, _r, _pop, _p) in enumerate(ZONES, start=1):
            for k in range(i % 5):
                w.writerow([code, state, cycle[k % 4]])
        w.writerow(["02101", "MA", "pending"])  # unknown status, dropped


def write_bizreg():
    with open(os.path.join(DATA, "bizreg.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["zone", "state", "year"])
        for i, (code, state, _c, _r, _pop, _p) in enumerate(ZONES, start=1):
            for _k in range((2 * i) % 9):
                w.writerow([code, state, 2012])
        w.writerow(["02101", "MA", 2011])
        w.writerow(["02102", "MA", 2011])


def write_pois():
    def kind_file(kind, rows, with_area=False, with_kw=False):
        cols = ["name", "lon", "lat"]
        if with_area:
            cols.append("area_m2")
        if with_kw:
            cols.append("matched_keyword")
        with open(os.path.join(DATA, f"poi_{kind}.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            w.writerows(rows)

    schools, universities, cafes, stops, parks, squares, spaces = [], [], [], [], [], [], []
    for i, (code, _state, c, r, _pop, _p) in enumerate(ZONES, start=1):
        for k in range(i % 4):
            x, y = poi_point(c, r, k)
            schools.append([f"school {code} {k}", x, y])
        if i % 5 == 0:
            x, y = poi_point(c, r, 4)
            universities.append([f"university {code}", x, y])
        for k in range(i % 6):
            x, y = poi_point(c, r, 5 + k)
            cafes.append([f"cafe {code} {k}", x, y])
        for k in range((3 * i) % 7):
            x, y = poi_point(c, r, 11 + k)
            stops.append([f"stop {code} {k}", x, y])
        for k in range(i % 3):
            x, y = poi_point(c, r, 18 + k)
            parks.append([f"park {code} {k}", x, y, 8000.0 * (k + 1)])
        if i % 2 == 0:
            x, y = poi_point(c, r, 21)
            squares.append([f"square {code}", x, y, 2500.0 * ((i % 4) + 1)])
        if i % 4 == 0:
            x, y = poi_point(c, r, 22)
            spaces.append([f"space {code}", x, y, KEYWORDS[(i // 4) % 5]])
    schools.append(["school offshore", -70.5, 41.0])  # outside every zone
    kind_file("school", schools)
    kind_file("university", universities)
    kind_file("cafe", cafes)
    kind_file("bus_stop", stops)
    kind_file("park", parks, with_area=True)
    kind_file("square", squares, with_area=True)
    kind_file("innovation_space", spaces, with_kw=True)


def write_config():
    doc = {
        "states": ["MA", "NY"],
        "base_year": 2012,
        "outcome_year": 2016,
        "master_seed": 20160101,
        "sources": {
            "census": "census.csv",
            "patents": "patents.csv",
            "sfr": "sfr.csv",
            "rnd": "rnd.csv",
            "h1b": "h1b.csv",
            "bizreg": "bizreg.csv",
        },
        "poi_sources": {
            "school": "poi_school.csv",
            "university": "poi_university.csv",
            "cafe": "poi_cafe.csv",
            "park": "poi_park.csv",
            "square": "poi_square.csv",
            "bus_stop": "poi_bus_stop.csv",
            "innovation_space": "poi_innovation_space.csv",
        },
        "polygons": "zones.geojson",
    }
    with open(os.path.join(DATA, "config.json"), "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def main():
    os.makedirs(DATA, exist_ok=True)
    write_zones()
    write_census()
    write_patents()
    write_sfr()
    write_rnd()
    write_h1b()
    write_bizreg()
    write_pois()
    write_config()
    print(f"fixtures written to {DATA}")


if __name__ == "__main__":
    main()
