"""JSON-lines persistence for parsed records between pipeline stages.

Each line is one record tagged with its type; reading back yields
objects equal to the originals, so a stage can be re-run from staged
state without touching the raw sources.
"""

from __future__ import annotations

import json
from dataclasses import fields
from datetime import date

from .ingest import (
    BizRegRecord,
    CensusRecord,
    H1BRecord,
    PatentRecord,
    PoiRecord,
    RnDRecord,
    SFRRecord,
)
from .model import ZoneId

_TYPES = {
    cls.__name__: cls
    for cls in (
        CensusRecord,
        PatentRecord,
        SFRRecord,
        RnDRecord,
        H1BRecord,
        BizRegRecord,
        PoiRecord,
    )
}


def _encode_value(v):
    if isinstance(v, ZoneId):
        return {"code": v.code, "state": v.state}
    if isinstance(v, date):
        return v.isoformat()
    if isinstance(v, tuple):
        return [_encode_value(x) for x in v]
    return v


def _decode_value(name: str, v):
    if v is None:
        return None
    if name == "zone":
        return ZoneId(v["code"], v["state"])
    if name == "grant_date":
        return date.fromisoformat(v)
    if name == "year_built_bins":
        return tuple(tuple(b) for b in v)
    return v


def write_records(path: str, records: list) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            row = {"_type": type(rec).__name__}
            for f in fields(rec):
                row[f.name] = _encode_value(getattr(rec, f.name))
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")


def read_records(path: str) -> list:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            cls = _TYPES[row.pop("_type")]
            kwargs = {name: _decode_value(name, v) for name, v in row.items()}
            out.append(cls(**kwargs))
    return out
