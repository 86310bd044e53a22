"""
Per-sample result rows and their per-configuration aggregates.

Rows are plain dicts keyed by :data:`ROW_COLUMNS`; both CSV files use a
fixed column order so two reports of the same run compare byte by byte.
"""
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Tuple
import csv
import io
import os
import numpy as np

from spikesplit.utils.prepare import prep_create_parent_dir


class ReportError(Exception):
    pass


ROW_COLUMNS = [
    "sweep_axis",
    "sweep_value",
    "sample",
    "label",
    "split",
    "t_max",
    "t_exit",
    "prediction",
    "raw_bits",
    "uplink_bits",
    "uplink_payload_bytes",
    "uplink_wire_bytes",
    "downlink_wire_bytes",
    "compression_ratio",
    "edge_compute_s",
    "uplink_s",
    "cloud_compute_s",
    "downlink_s",
    "total_s",
    "edge_energy_j",
    "encoder_energy_j",
]

SUMMARY_COLUMNS = [
    "sweep_axis",
    "sweep_value",
    "label",
    "split",
    "samples",
    "t_max",
    "t_avg",
    "latency_mean_s",
    "latency_p50_s",
    "latency_p95_s",
    "edge_compute_mean_s",
    "uplink_mean_s",
    "cloud_compute_mean_s",
    "downlink_mean_s",
    "raw_bits_total",
    "uplink_bits_total",
    "downlink_bytes_total",
    "compression_ratio",
    "edge_energy_mean_j",
    "encoder_energy_mean_j",
    "exit_fractions",
]

_STR_COLUMNS = {"sweep_axis", "sweep_value", "label", "split"}
_INT_COLUMNS = {
    "sample",
    "t_max",
    "t_exit",
    "prediction",
    "raw_bits",
    "uplink_bits",
    "uplink_payload_bytes",
    "uplink_wire_bytes",
    "downlink_wire_bytes",
}

GroupKey = Tuple[str, str, str]


def _ratio(raw: int, coded: int):
    return raw / coded if coded > 0 else None


def _aggregate(key: GroupKey, rows: List[Dict[str, Any]]) -> Dict[str, Any]:
    sweep_value, label, split = key
    t_max = {row["t_max"] for row in rows}
    if len(t_max) != 1:
        raise ReportError(
            f"Rows of configuration {label} at split {split} "
            f"have different t_max: {sorted(t_max)}"
        )
    t_max = t_max.pop()
    t_exit = np.array([row["t_exit"] for row in rows])
    if t_exit.min() < 1 or t_exit.max() > t_max:
        raise ReportError(
            f"t_exit of configuration {label} must lie in [1, {t_max}], "
            f"got [{t_exit.min()}, {t_exit.max()}]"
        )
    total = np.array([row["total_s"] for row in rows], dtype=np.float64)
    fractions = np.bincount(t_exit, minlength=t_max + 1)[1:] / len(rows)
    raw_bits = int(sum(row["raw_bits"] for row in rows))
    uplink_bits = int(sum(row["uplink_bits"] for row in rows))

    def mean(column):
        return float(np.mean([row[column] for row in rows]))

    return OrderedDict(
        sweep_axis=rows[0]["sweep_axis"],
        sweep_value=sweep_value,
        label=label,
        split=split,
        samples=len(rows),
        t_max=t_max,
        t_avg=float(t_exit.mean()),
        latency_mean_s=float(total.mean()),
        latency_p50_s=float(np.percentile(total, 50)),
        latency_p95_s=float(np.percentile(total, 95)),
        edge_compute_mean_s=mean("edge_compute_s"),
        uplink_mean_s=mean("uplink_s"),
        cloud_compute_mean_s=mean("cloud_compute_s"),
        downlink_mean_s=mean("downlink_s"),
        raw_bits_total=raw_bits,
        uplink_bits_total=uplink_bits,
        downlink_bytes_total=int(sum(row["downlink_wire_bytes"] for row in rows)),
        compression_ratio=_ratio(raw_bits, uplink_bits),
        edge_energy_mean_j=mean("edge_energy_j"),
        encoder_energy_mean_j=mean("encoder_energy_j"),
        exit_fractions=";".join(f"{f:.6g}" for f in fractions),
    )


def _write(columns: List[str], rows: Iterable[Dict[str, Any]], stream):
    writer = csv.DictWriter(stream, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: row[c] for c in columns})


@dataclass
class RunReport:
    rows: List[Dict[str, Any]]
    aggregates: List[Dict[str, Any]] = field(default_factory=list)

    def aggregate(self, label: str, split: str = None, sweep_value: str = None):
        """
        Find the aggregate of one configuration.

        Raises:
            ``ReportError`` if it does not exist or is ambiguous.
        """
        found = [
            a
            for a in self.aggregates
            if a["label"] == label
            and (split is None or a["split"] == split)
            and (sweep_value is None or a["sweep_value"] == sweep_value)
        ]
        if len(found) != 1:
            raise ReportError(
                f"Expected one aggregate of {label} (split={split}, "
                f"sweep_value={sweep_value}), found {len(found)}"
            )
        return found[0]

    def rows_csv(self) -> str:
        stream = io.StringIO()
        _write(ROW_COLUMNS, self.rows, stream)
        return stream.getvalue()

    def summary_csv(self) -> str:
        stream = io.StringIO()
        _write(SUMMARY_COLUMNS, self.aggregates, stream)
        return stream.getvalue()

    def write(self, path: str) -> Tuple[str, str]:
        """
        Write rows to ``path`` and aggregates to ``<stem>.summary.csv``
        next to it.

        Returns:
            Paths of both files.
        """
        prep_create_parent_dir(path)
        summary_path = summary_path_of(path)
        with open(path, "w", newline="") as f:
            f.write(self.rows_csv())
        with open(summary_path, "w", newline="") as f:
            f.write(self.summary_csv())
        return path, summary_path


def summary_path_of(path: str) -> str:
    stem, _ = os.path.splitext(path)
    return stem + ".summary.csv"


def build_report(rows: Iterable[Dict[str, Any]]) -> RunReport:
    """
    Aggregate rows per ``(sweep value, label, split)``, in the order the
    groups first appear.

    Raises:
        ``ReportError`` on an empty row list, missing columns, or rows of
        one configuration with different ``t_max``.
    """
    rows = list(rows)
    if not rows:
        raise ReportError("Can not build a report without rows.")
    groups = OrderedDict()  # type: Dict[GroupKey, List[Dict[str, Any]]]
    for idx, row in enumerate(rows):
        missing = [c for c in ROW_COLUMNS if c not in row]
        if missing:
            raise ReportError(f"Row {idx} misses columns {missing}")
        key = (str(row["sweep_value"]), row["label"], row["split"])
        groups.setdefault(key, []).append(row)
    return RunReport(rows, [_aggregate(key, group) for key, group in groups.items()])


def merge_reports(reports: Iterable[RunReport]) -> RunReport:
    return build_report(row for report in reports for row in report.rows)


def _parse(column: str, value: str):
    if column in _STR_COLUMNS:
        return value
    if value == "":
        return None
    if column in _INT_COLUMNS:
        return int(value)
    return float(value)


def read_rows(path: str) -> List[Dict[str, Any]]:
    """
    Read a per-sample CSV written by :meth:`RunReport.write`.
    """
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != ROW_COLUMNS:
            raise ReportError(
                f"{path} is not a per-sample report, columns: {reader.fieldnames}"
            )
        return [{c: _parse(c, row[c]) for c in ROW_COLUMNS} for row in reader]
