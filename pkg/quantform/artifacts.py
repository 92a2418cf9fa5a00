"""
Run directories: trajectory.csv, events.jsonl and summary.json.

Output is a pure function of the run, so identical scenarios give
byte-identical files.
"""

import csv
import json
import logging
from pathlib import Path

from .exact import fraction_str
from .lyapunov import lyapunov

logger = logging.getLogger(__name__)

TRAJECTORY_FILE = "trajectory.csv"
EVENTS_FILE = "events.jsonl"
SUMMARY_FILE = "summary.json"
SWEEP_FILE = "sweep.csv"
ARTIFACTS = (TRAJECTORY_FILE, EVENTS_FILE, SUMMARY_FILE, SWEEP_FILE)


def _dump(data):
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def trajectory_header(m, with_x):
    header = ["branch", "t"] + [f"z_{i + 1}" for i in range(m)]
    if with_x:
        header += [f"x_{i + 1}" for i in range(m + 1)]
    header += ["V", "mode", "active_set", "t_exact"] + [f"z_{i + 1}_exact" for i in range(m)]
    if with_x:
        header += [f"x_{i + 1}_exact" for i in range(m + 1)]
    return header


def _exact_row(branch, t, z, x, V, mode, active):
    row = [branch, float(t)] + [float(v) for v in z]
    if x is not None:
        row += [float(v) for v in x]
    row += [float(V), mode, ";".join(str(i + 1) for i in active), fraction_str(t)]
    row += [fraction_str(v) for v in z]
    if x is not None:
        row += [fraction_str(v) for v in x]
    return row


def trajectory_rows(traj):
    """One row per segment endpoint, the first at t = 0."""
    spec = traj.spec
    positions = traj.positions()
    rows = []
    for idx, seg in enumerate(traj.segments):
        x = None if positions is None else positions[idx]
        rows.append(_exact_row(traj.branch, seg.t_start, seg.z_start, x,
                               lyapunov(seg.z_start, spec), seg.mode.value, seg.active))
    last = traj.segments[-1] if traj.segments else None
    if last is not None and last.duration > 0:
        x = None if positions is None else positions[-1]
        rows.append(_exact_row(traj.branch, last.t_end, last.z_end, x,
                               lyapunov(last.z_end, spec), traj.terminal.value, ()))
    return rows


def sampled_rows(sampled):
    return [
        [0, float(t)] + [float(v) for v in z] + [float(V), sampled.solver, ""]
        for t, z, V in zip(sampled.t, sampled.z, sampled.V)
    ]


def write_run(outcome, out_dir):
    """Write the three run artifacts into out_dir and return their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = outcome.config.spec
    m = spec.m

    with open(out_dir / TRAJECTORY_FILE, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        if outcome.sampled is not None:
            writer.writerow(["branch", "t"] + [f"z_{i + 1}" for i in range(m)] + ["V", "mode", "active_set"])
            writer.writerows(sampled_rows(outcome.sampled))
        else:
            with_x = outcome.trajectories[0].anchor is not None
            writer.writerow(trajectory_header(m, with_x))
            for traj in outcome.trajectories:
                writer.writerows(trajectory_rows(traj))

    with open(out_dir / EVENTS_FILE, "w") as f:
        for traj in outcome.trajectories:
            for event in traj.events:
                record = {
                    "t": fraction_str(event.t),
                    "t_decimal": float(event.t),
                    "kind": event.kind.value,
                    "coords": list(event.coords),
                    "branch": traj.branch,
                    "detail": event.detail,
                }
                f.write(json.dumps(record, sort_keys=True) + "\n")

    (out_dir / SUMMARY_FILE).write_text(_dump(outcome.summary))
    logger.info(f"Wrote run artifacts to {out_dir}")
    return [out_dir / name for name in (TRAJECTORY_FILE, EVENTS_FILE, SUMMARY_FILE)]


def write_sweep(rows, summary, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / SWEEP_FILE, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["z0", "predicted", "simulated", "branches", "timeouts",
                         "terminal_time", "time_bound", "agreement"])
        for row in rows:
            writer.writerow([
                ";".join(row["z0"]),
                " ".join(row["predicted"]),
                " ".join(row["simulated"]),
                row["branches"],
                row["timeouts"],
                row["terminal_time"],
                "" if row["time_bound"] is None else row["time_bound"],
                "" if row["agreement"] is None else str(row["agreement"]).lower(),
            ])
    (out_dir / SUMMARY_FILE).write_text(_dump(summary))
    logger.info(f"Wrote sweep table ({len(rows)} rows) to {out_dir}")
    return out_dir / SWEEP_FILE


def read_summary(run_dir):
    """summary.json of a run directory; FileNotFoundError when absent."""
    path = Path(run_dir) / SUMMARY_FILE
    with open(path) as f:
        return json.load(f)


def read_events(run_dir):
    with open(Path(run_dir) / EVENTS_FILE) as f:
        return [json.loads(line) for line in f if line.strip()]


def read_trajectory(run_dir):
    with open(Path(run_dir) / TRAJECTORY_FILE, newline="") as f:
        return list(csv.DictReader(f))
