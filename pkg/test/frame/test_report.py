from spikesplit.frame.report import (
    ROW_COLUMNS,
    SUMMARY_COLUMNS,
    ReportError,
    build_report,
    merge_reports,
    read_rows,
    summary_path_of,
)
from test.util_fixtures import *

import os
import pytest


def make_row(sample, t_exit, label="D+B", t_max=2, total_s=1.0, sweep_value="", **kwargs):
    row = {c: 0 for c in ROW_COLUMNS}
    row.update(
        sweep_axis="alpha" if sweep_value != "" else "",
        sweep_value=sweep_value,
        sample=sample,
        label=label,
        split="SP3",
        t_max=t_max,
        t_exit=t_exit,
        prediction=sample % 10,
        raw_bits=4096 * t_exit,
        uplink_bits=256 * t_exit,
        uplink_payload_bytes=40 * t_exit,
        uplink_wire_bytes=100,
        downlink_wire_bytes=50,
        compression_ratio=16.0,
        edge_compute_s=0.25,
        uplink_s=0.25,
        cloud_compute_s=0.25,
        downlink_s=0.25,
        total_s=total_s,
        edge_energy_j=1e-6 * t_exit,
        encoder_energy_j=1e-7 * t_exit,
    )
    row.update(kwargs)
    return row


class TestBuildReport:
    def test_aggregate(self):
        rows = [make_row(0, 1, total_s=1.0), make_row(1, 2, total_s=3.0)]
        report = build_report(rows)
        assert len(report.aggregates) == 1
        agg = report.aggregate("D+B")
        assert list(agg) == SUMMARY_COLUMNS
        assert agg["samples"] == 2
        assert agg["t_avg"] == 1.5
        assert agg["latency_mean_s"] == 2.0
        assert agg["latency_p50_s"] == 2.0
        assert agg["latency_p95_s"] == pytest.approx(2.9)
        assert agg["raw_bits_total"] == 4096 * 3
        assert agg["uplink_bits_total"] == 256 * 3
        assert agg["compression_ratio"] == 16.0
        assert agg["downlink_bytes_total"] == 100
        assert agg["edge_energy_mean_j"] == pytest.approx(1.5e-6)
        assert agg["exit_fractions"] == "0.5;0.5"

    def test_groups_in_order(self):
        rows = [
            make_row(0, 2, label="F-B"),
            make_row(0, 1, label="D-B"),
            make_row(1, 2, label="F-B"),
        ]
        report = build_report(rows)
        assert [a["label"] for a in report.aggregates] == ["F-B", "D-B"]
        assert report.aggregate("F-B")["exit_fractions"] == "0;1"
        assert report.aggregate("D-B")["t_avg"] == 1.0

    def test_no_compression_ratio_without_uplink(self):
        rows = [make_row(0, 1, split="edge-only", raw_bits=0, uplink_bits=0)]
        assert build_report(rows).aggregate("D+B")["compression_ratio"] is None

    param_test_invalid = [
        ([], "without rows"),
        ([{"label": "D+B"}], "misses columns"),
        ([make_row(0, 1, t_max=2), make_row(1, 1, t_max=3)], "different t_max"),
        ([make_row(0, 3, t_max=2)], "must lie in \\[1, 2\\]"),
        ([make_row(0, 0, t_max=2)], "must lie in \\[1, 2\\]"),
    ]

    @pytest.mark.parametrize("rows,match", param_test_invalid)
    def test_invalid(self, rows, match):
        with pytest.raises(ReportError, match=match):
            build_report(rows)

    def test_aggregate_lookup(self):
        report = build_report([make_row(0, 1, label="F-B"), make_row(0, 2, label="D-B")])
        with pytest.raises(ReportError, match="found 0"):
            report.aggregate("D+B")


class TestReportFiles:
    def test_write_and_read(self, tmpdir):
        rows = [make_row(i, 1 + i % 2, total_s=0.5 * i) for i in range(4)]
        report = build_report(rows)
        path, summary = report.write(str(tmpdir.join("out", "run.csv")))
        assert summary == str(tmpdir.join("out", "run.summary.csv"))
        assert os.path.exists(path) and os.path.exists(summary)
        with open(path) as f:
            assert f.readline().strip() == ",".join(ROW_COLUMNS)
        with open(summary) as f:
            assert f.read() == report.summary_csv()

        loaded = read_rows(path)
        assert loaded[1]["t_exit"] == 2
        assert loaded[1]["total_s"] == 0.5
        assert loaded[1]["label"] == "D+B"
        assert build_report(loaded).summary_csv() == report.summary_csv()

    def test_csv_is_deterministic(self):
        rows = [make_row(i, 1 + i % 2) for i in range(3)]
        assert build_report(rows).rows_csv() == build_report(list(rows)).rows_csv()
        assert "\r" not in build_report(rows).rows_csv()

    def test_read_foreign_csv(self, tmpdir):
        path = tmpdir.join("other.csv")
        path.write("a,b\n1,2\n")
        with pytest.raises(ReportError, match="not a per-sample report"):
            read_rows(str(path))

    def test_merge(self):
        a = build_report([make_row(0, 1, sweep_value="0.5")])
        b = build_report([make_row(0, 2, sweep_value="0.9")])
        merged = merge_reports([a, b])
        assert [x["sweep_value"] for x in merged.aggregates] == ["0.5", "0.9"]
        assert merged.aggregate("D+B", sweep_value="0.9")["t_avg"] == 2.0

    def test_summary_path(self):
        assert summary_path_of("results/run.csv") == "results/run.summary.csv"
        assert summary_path_of("run") == "run.summary.csv"
