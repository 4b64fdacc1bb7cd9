"""Canonical serialization helpers shared by reports, sweeps, and the CLI.

JSON documents are dumped with sorted keys and fixed separators so equal
documents are equal bytes; CSV files are written through the csv module
with its RFC-4180 quoting and CRLF rows, always with a header row.
"""

from __future__ import annotations

import csv
import datetime
import hashlib
import json


def jsonable(value):
    """Recursively convert numpy scalars and arrays to plain JSON values."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return jsonable(value.tolist())
    if hasattr(value, "item"):
        return value.item()
    return value


def canonical_dumps(doc) -> str:
    """Deterministic JSON text for a document (sorted keys, fixed separators)."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def doc_hash(doc) -> str:
    """Hex sha256 of the canonical JSON encoding."""
    return hashlib.sha256(canonical_dumps(doc).encode("utf-8")).hexdigest()


def write_json(path, doc):
    """Pretty but deterministic JSON file (sorted keys, trailing newline)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1, allow_nan=False)
        fh.write("\n")


def write_csv(path, header, rows):
    """CSV with a mandatory header row; values are stringified verbatim."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(list(row))


def fmt(value) -> str:
    """Cell formatting: full-fidelity repr for floats, str otherwise."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def timestamp(deterministic: bool):
    """ISO-8601 UTC now, or None when deterministic output is requested."""
    if deterministic:
        return None
    return datetime.datetime.now(datetime.timezone.utc).isoformat()
