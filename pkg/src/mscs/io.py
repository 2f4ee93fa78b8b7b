"""CSV ingestion and JSON/CSV writers.

Every written artifact carries a provenance header (tool version plus the
resolved configuration): JSON gets a ``meta`` key, CSV files a leading
``# {...}`` comment line.
"""

from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidData
from .likelihood import Dataset, Family

_YCOL = re.compile(r"^y(\d*)$")
_XCOL = re.compile(r"^x(\d+)$")


def read_dataset_csv(path, family: Family | str) -> Dataset:
    """Load a dataset from a CSV with a mandatory header.

    Responses are ``y`` (regressions) or ``y1..yp``; covariates ``x1..xp``.
    Numbers use a period decimal separator regardless of locale.
    """
    family = Family(family)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise InvalidData("empty file: no header and no observations")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise InvalidData("no observations")
    ycols = sorted(
        (int(m.group(1) or 0), i) for i, h in enumerate(header) if (m := _YCOL.match(h))
    )
    xcols = sorted((int(m.group(1)), i) for i, h in enumerate(header) if (m := _XCOL.match(h)))
    if not ycols:
        raise InvalidData("header has no response column (y or y1..yp)")
    try:
        table = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise InvalidData(f"non-numeric entry: {exc}") from None
    if table.shape[1] != len(header):
        raise InvalidData("rows and header have different lengths")
    y = table[:, [i for _, i in ycols]]
    if family.is_regression:
        if len(ycols) != 1:
            raise InvalidData("regression families take a single response column y")
        if not xcols:
            raise InvalidData("regression families need covariates x1..xp")
        return Dataset(family, y[:, 0], table[:, [i for _, i in xcols]])
    return Dataset(family, y)


def write_dataset_csv(path, data: Dataset) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if data.family.is_regression:
            w.writerow(["y"] + [f"x{j}" for j in range(1, data.p + 1)])
            for yi, xi in zip(data.y, data.x):
                w.writerow([_num(yi)] + [_num(v) for v in xi])
        else:
            w.writerow([f"y{j}" for j in range(1, data.p + 1)])
            for row in data.y:
                w.writerow([_num(v) for v in row])


def _num(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


def meta(config: dict) -> dict:
    return {"tool": "mscs", "version": __version__, "config": config}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, payload: dict, config: dict) -> None:
    body = {"meta": meta(config), **payload}
    Path(path).write_text(json.dumps(_jsonable(body), indent=2, sort_keys=False) + "\n")


def write_csv(path, rows: list[dict], config: dict, fieldnames: list[str] | None = None) -> None:
    if fieldnames is None:
        fieldnames = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(_jsonable(meta(config)), sort_keys=True) + "\n")
        w = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_csv_rows(path) -> list[dict]:
    """Read a CSV written by :func:`write_csv`, skipping the provenance line."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))
