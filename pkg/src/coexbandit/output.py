"""CSV trajectories and NDJSON round logs."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .experiments import TrajectoryRecord

CSV_FIELDS = (
    "run_id", "seed", "k", "t", "y_k", "toff_ms", "gradient_estimate", "truncated", "s_lte_bps",
    "s_wifi_mean_bps", "n", "toff_opt_ms", "s_lte_opt_bps", "s_wifi_opt_bps", "regret_so_far",
)


def _num(x: float) -> str:
    # repr is locale independent and round-trips exactly
    return "nan" if isinstance(x, float) and math.isnan(x) else repr(float(x))


def csv_rows(record: TrajectoryRecord):
    for r in record.rows:
        yield [
            record.run_id, record.seed, r.k, r.t, _num(r.y), _num(r.toff * 1e3), _num(r.gradient),
            int(r.truncated), _num(r.s_lte), _num(r.s_wifi_mean), r.n, _num(r.toff_opt * 1e3),
            _num(r.s_lte_opt), _num(r.s_wifi_opt), _num(r.regret),
        ]


def write_csv(records, path) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_FIELDS)
            for rec in records:
                w.writerows(csv_rows(rec))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_csv(path) -> list[dict]:
    ints = {"run_id", "seed", "k", "t", "truncated", "n"}
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_FIELDS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [{k: int(v) if k in ints else float(v) for k, v in row.items()} for row in reader]


def write_events(records, path) -> None:
    path = Path(path)
    try:
        with path.open("w") as fh:
            for rec in records:
                for e in rec.events:
                    fh.write(json.dumps({
                        "run_id": rec.run_id, "seed": rec.seed, "k": e.k, "t": e.t, "x": e.x,
                        "n": e.n, "cost": e.cost, "observed": e.observed,
                    }) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_events(path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]
