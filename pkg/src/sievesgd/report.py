"""Run output: delimited records, a JSON metadata sidecar, and figure files.

The CSV layout is fixed::

    run_id,replication,n,mse,regret,op_count,coef_count,storage_bits,wall_time_s

Optional fields are left empty.  Apart from ``wall_time_s`` the bytes are a
pure function of (config, seed).
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

from . import __version__
from .config import ExperimentConfig, config_to_dict
from .simulation import RNG_IDENTITY, RunRecord, replication_seed

CSV_HEADER = [
    "run_id",
    "replication",
    "n",
    "mse",
    "regret",
    "op_count",
    "coef_count",
    "storage_bits",
    "wall_time_s",
]


def _cell(value) -> str:
    return "" if value is None else str(value)


def write_records_csv(path, run_id: str, records_by_rep: list[list[RunRecord]]) -> None:
    """Write all replications; atomic so failures never leave partial files."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_HEADER)
        for replication, records in enumerate(records_by_rep):
            for rec in records:
                writer.writerow(
                    [
                        run_id,
                        replication,
                        rec.n,
                        rec.mse,
                        _cell(rec.regret),
                        rec.op_count,
                        rec.coef_count,
                        _cell(rec.storage_bits),
                        rec.wall_time_s,
                    ]
                )
    os.replace(tmp, path)


def read_records_csv(path) -> list[dict]:
    """Rows back as typed dicts (None for empty optional cells)."""
    rows = []
    with open(path, "r", newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(
                f"unexpected CSV header {reader.fieldnames}; expected {CSV_HEADER}"
            )
        for raw in reader:
            rows.append(
                {
                    "run_id": raw["run_id"],
                    "replication": int(raw["replication"]),
                    "n": int(raw["n"]),
                    "mse": float(raw["mse"]),
                    "regret": float(raw["regret"]) if raw["regret"] else None,
                    "op_count": int(raw["op_count"]),
                    "coef_count": int(raw["coef_count"]),
                    "storage_bits": int(raw["storage_bits"]) if raw["storage_bits"] else None,
                    "wall_time_s": float(raw["wall_time_s"]),
                }
            )
    return rows


def rows_to_mean_records(rows: list[dict], field: str = "mse") -> list[RunRecord]:
    """Aggregate CSV rows to one record per checkpoint (mean over replications)."""
    by_n: dict[int, list[float]] = {}
    for row in rows:
        value = row[field]
        if value is None:
            continue
        by_n.setdefault(row["n"], []).append(value)
    records = []
    for n in sorted(by_n):
        values = by_n[n]
        rec = RunRecord(
            n=n, mse=0.0, regret=None, op_count=0, coef_count=0,
            storage_bits=None, wall_time_s=0.0,
        )
        setattr(rec, field, sum(values) / len(values))
        records.append(rec)
    return records


def write_metadata(
    path,
    config: ExperimentConfig,
    warnings: list[str],
    partial: bool = False,
    error: str | None = None,
) -> None:
    payload = {
        "library": "sievesgd",
        "version": __version__,
        "config": config_to_dict(config),
        "rng": RNG_IDENTITY,
        "master_seed": config.seed,
        "replication_seeds": [
            replication_seed(config.seed, r) for r in range(config.replications)
        ],
        "warnings": warnings,
        "partial": partial,
    }
    if error is not None:
        payload["error"] = error
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
