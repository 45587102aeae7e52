"""Report files: one JSON document plus optional CSV tables and figures."""

from __future__ import annotations

import csv
import json
import os
from typing import Iterable, Mapping, Optional


def write_json(path, payload) -> str:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return str(path)


def write_csv(path, rows: Iterable[Mapping], fields: Optional[list] = None) -> str:
    rows = list(rows)
    fields = fields or sorted({k for r in rows for k in r})
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r.get(k, "") for k in fields})
    return str(path)


def histogram_rows(label: str, hist: Mapping) -> list:
    total = sum(hist.values()) or 1
    return [{"source": label, "rank": int(r), "count": c, "fraction": c / total}
            for r, c in sorted(hist.items(), key=lambda kv: int(kv[0]))]


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return str(path)
