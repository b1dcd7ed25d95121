"""Machine-readable report files: CSV and JSON with a provenance header."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def config_hash(config) -> str:
    """sha256 of the canonical JSON form (sorted keys, no whitespace)."""
    text = json.dumps(_plain(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def make_header(config, seed, schema_hash: str | None = None) -> dict:
    return {"config_hash": config_hash(config), "seed": seed, "schema_hash": schema_hash or ""}


def write_csv(path, rows: list[dict], header: dict, columns=None) -> Path:
    """``# key: value`` header lines, then a standard CSV table."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if columns is None:
        columns = []
        for r in rows:
            columns.extend(k for k in r if k not in columns)
    with open(path, "w", newline="") as f:
        for k, v in header.items():
            f.write(f"# {k}: {v}\n")
        writer = csv.DictWriter(f, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: _cell(r.get(k, "")) for k in columns})
    return path


def _cell(v):
    v = _plain(v)
    if isinstance(v, list):
        return json.dumps(v)
    if isinstance(v, float):
        return repr(v)
    return v


def read_csv(path) -> tuple[dict, list[dict]]:
    header, lines = {}, []
    with open(path) as f:
        for line in f:
            if line.startswith("# ") and not lines:
                k, _, v = line[2:].rstrip("\n").partition(": ")
                header[k] = v
            else:
                lines.append(line)
    return header, list(csv.DictReader(lines))


def write_json(path, rows, header: dict, **extra) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"header": header, **_plain(extra), "rows": _plain(rows)}
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")
    return path


def write_report(stem, rows, header: dict, columns=None, **extra) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.json`` side by side."""
    stem = Path(stem)
    return (
        write_csv(stem.with_suffix(".csv"), rows, header, columns),
        write_json(stem.with_suffix(".json"), rows, header, **extra),
    )


class JsonLinesLog:
    """Append-only JSON-lines writer, one record per call."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._f = open(self.path, "w")

    def __call__(self, record: dict) -> None:
        self._f.write(json.dumps(_plain(record)) + "\n")
        self._f.flush()

    def close(self):
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
