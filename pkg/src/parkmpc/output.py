"""Trace CSV and metrics JSON writers."""
from __future__ import annotations

import csv
import json

TRACE_COLUMNS = ("t", "x", "y", "theta", "v", "delta_cmd", "a_cmd",
                 "cross_track_err", "heading_err", "qp_iters", "constraint_active")


def _num(v):
    # repr round-trips exactly and never uses a decimal comma
    return repr(float(v))


def trace_rows(result):
    for s in result.samples:
        yield [
            _num(s.t), _num(s.state.x_r), _num(s.state.y_r), _num(s.state.theta), _num(s.state.v),
            _num(s.command.delta_cmd), _num(s.applied.a),
            _num(s.cross_track_error), _num(s.heading_error),
            str(int(s.command.qp_iterations)), "1" if s.command.constraint_active else "0",
        ]


def write_trace_csv(result, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(TRACE_COLUMNS)
        writer.writerows(trace_rows(result))


def metrics_document(metrics, result):
    doc = metrics.as_dict()
    doc["reached_goal"] = bool(result.reached_goal)
    doc["samples"] = len(result.samples)
    return doc


def write_metrics_json(metrics, result, path):
    with open(path, "w") as fh:
        json.dump(metrics_document(metrics, result), fh, indent=2, sort_keys=True)
        fh.write("\n")
