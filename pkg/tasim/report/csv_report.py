"""CSV output of metric sweeps and the JSON run-metadata sidecar."""

import json
import logging
from typing import Optional

import pandas as pd

from tasim.models import Method, SweepRow

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["snr_db", "metric", "method", "value", "stderr", "trials"]
METHOD_ORDER = [Method.CLOSED, Method.ASYMPTOTIC, Method.ORACLE, Method.MC]


def rows_to_frame(rows: list[SweepRow]) -> pd.DataFrame:
    """
    Tabulate sweep rows in the stable CSV schema.

    Rows are ordered by SNR, then by method (closed, asymptotic, oracle, mc),
    keeping the original order among equal keys.
    """
    for row in rows:
        errors = row.validate()
        if errors:
            raise ValueError("; ".join(errors))

    frame = pd.DataFrame(
        {
            "snr_db": [row.snr_db for row in rows],
            "metric": [row.metric for row in rows],
            "method": [Method(row.method).value for row in rows],
            "value": [row.value for row in rows],
            "stderr": [row.stderr for row in rows],
            "trials": pd.array([row.trials for row in rows], dtype="Int64"),
        },
        columns=CSV_COLUMNS,
    )
    rank = frame["method"].map({m.value: i for i, m in enumerate(METHOD_ORDER)})
    order = sorted(range(len(frame)), key=lambda i: (frame["snr_db"].iat[i], rank.iat[i]))
    return frame.iloc[order].reset_index(drop=True)


def to_csv(rows: list[SweepRow]) -> str:
    """CSV text; failed rows carry the value nan, non-mc rows leave stderr and trials empty."""
    frame = rows_to_frame(rows)
    frame["value"] = frame["value"].map(lambda v: repr(float(v)))
    frame["stderr"] = frame["stderr"].map(lambda v: "" if v is None or pd.isna(v) else repr(float(v)))
    return frame.to_csv(index=False, na_rep="", lineterminator="\n")


def write_csv(rows: list[SweepRow], path: Optional[str]) -> str:
    """Write rows to path (or just return the text when path is None)."""
    text = to_csv(rows)
    if path:
        with open(path, "w") as f:
            f.write(text)
        logger.info(f"Wrote {len(rows)} row(s) to {path}")
    return text


def sidecar_path(path: str) -> str:
    return f"{path}.meta.json"


def write_sidecar(path: str, metadata: dict) -> str:
    """Write run metadata next to a CSV file as <path>.meta.json."""
    target = sidecar_path(path)
    with open(target, "w") as f:
        json.dump(metadata, f, indent=2, sort_keys=True, default=str)
    logger.debug(f"Wrote run metadata to {target}")
    return target
