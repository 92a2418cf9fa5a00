"""
Run orchestration shared by the command line and the web app: single
scenario runs, exit-code policy and basin sweeps.
"""

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .analysis import classify_basin_3agent, convergence_report, sampled_report
from .exact import as_fraction, exact_pair, fraction_str
from .hull import EquilibriumTag
from .model import bit_budget, speed_bound, validate_gains_convergence, validate_gains_equilibrium
from .oracle import simulate_euler, simulate_hysteresis
from .solver import BranchPolicy, EventKind, simulate

logger = logging.getLogger(__name__)

EXIT_DESIRED = 0
EXIT_CONFIG = 1
EXIT_DEGENERATE = 2
EXIT_TIMEOUT = 3


def exit_code_for(terminals):
    """0 when every branch is Desired, 3 when any timed out, 2 otherwise."""
    terminals = list(terminals)
    if terminals and all(t == EquilibriumTag.DESIRED.value for t in terminals):
        return EXIT_DESIRED
    if any(t == EventKind.TIMEOUT.value for t in terminals):
        return EXIT_TIMEOUT
    return EXIT_DEGENERATE


@dataclass
class RunOutcome:
    config: object
    trajectories: list = field(default_factory=list)
    sampled: object = None
    reports: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    exit_code: int = EXIT_DESIRED


def _spec_echo(config):
    spec = config.spec
    echo = config.echo()
    echo["gains_equilibrium"] = validate_gains_equilibrium(spec)
    echo["gains_convergence"] = validate_gains_convergence(spec)
    echo["speed_bound"] = [fraction_str(v) for v in speed_bound(spec)]
    return echo


def run_scenario(config):
    spec = config.spec
    z0 = config.initial_z()
    logger.info(f"Running {config.name}: solver={config.solver}, n={spec.n}")
    outcome = RunOutcome(config)

    if config.solver == "event":
        result = simulate(
            z0, spec, t_max=config.t_max, policy=config.branch_policy,
            snap_tol=config.snap_tol, max_events=config.max_events,
            max_branches=config.max_branches, anchor=config.anchor_value())
        outcome.trajectories = result if isinstance(result, list) else [result]
        outcome.reports = [convergence_report(tr, spec) for tr in outcome.trajectories]
        terminals = [r.terminal for r in outcome.reports]
        main = outcome.reports[0]
        summary = {
            "scenario": _spec_echo(config),
            "solver": {"kind": "event", "branch_policy": config.branch_policy.value,
                       "branches": len(outcome.trajectories)},
            "terminal": main.terminal,
            "terminal_state": [exact_pair(v) for v in main.terminal_state],
            "branches": [r.to_dict() for r in outcome.reports],
        }
    else:
        if config.solver == "euler":
            sampled = simulate_euler(z0, spec, config.h, config.t_max)
        else:
            sampled = simulate_hysteresis(z0, spec, config.h, config.eps_h, config.t_max)
        outcome.sampled = sampled
        report = sampled_report(sampled, spec)
        outcome.reports = [report]
        terminals = [report.terminal]
        summary = {
            "scenario": _spec_echo(config),
            "solver": {"kind": config.solver, "h": float(config.h),
                       "eps_h": None if config.eps_h is None else float(config.eps_h),
                       "samples": int(len(sampled.t))},
            "terminal": report.terminal,
            "terminal_state": [{"decimal": v} for v in report.terminal_state],
            "sampled": report.to_dict(),
        }

    summary["bit_budget"] = bit_budget(spec).to_dict()
    outcome.exit_code = exit_code_for(terminals)
    summary["exit_code"] = outcome.exit_code
    outcome.summary = summary
    logger.info(f"Finished {config.name}: terminal {summary['terminal']}, exit code {outcome.exit_code}")
    return outcome


def grid_points(config):
    """Starting points for a sweep: a seeded random sample or an exact rational grid."""
    m = config.n - 1
    if config.samples:
        rng = np.random.default_rng(config.seed)
        raw = rng.uniform(float(config.grid_min), float(config.grid_max), size=(config.samples, m))
        # six decimals keep random starts exact and reproducible
        return [tuple(as_fraction(f"{v:.6f}") for v in row) for row in raw]
    count = config.grid_points
    if count == 0:
        return []
    if count == 1:
        axis = [config.grid_min]
    else:
        step = (config.grid_max - config.grid_min) / (count - 1)
        axis = [config.grid_min + i * step for i in range(count)]
    points = []
    for point in itertools.product(axis, repeat=m):
        on_axis = any(v == 0 for v in point)
        if config.grid_axes == "exclude" and on_axis:
            continue
        if config.grid_axes == "only" and not on_axis:
            continue
        points.append(point)
    return points


def _limit_key(point):
    return "(" + ",".join(fraction_str(v) for v in point) + ")"


def sweep_point(z0, config):
    """Simulate one start and compare with the classifier when it applies."""
    spec = config.spec
    result = simulate(z0, spec, t_max=config.t_max, policy=config.branch_policy,
                      snap_tol=config.snap_tol, max_events=config.max_events,
                      max_branches=config.max_branches)
    trajectories = result if isinstance(result, list) else [result]
    terminals = []
    for tr in trajectories:
        cls = tr.terminal_class
        terminals.append(None if cls is None else tr.terminal_state.z)
    row = {
        "z0": [fraction_str(v) for v in z0],
        "branches": len(trajectories),
        "simulated": sorted({_limit_key(t) for t in terminals if t is not None}),
        "timeouts": sum(1 for t in terminals if t is None),
        "terminal_time": fraction_str(max(tr.end_time for tr in trajectories)),
        "predicted": [],
        "time_bound": None,
        "agreement": None,
    }
    classifiable = spec.n == 3 and all(k == 1 for k in spec.k)
    if not classifiable:
        return row
    prediction = classify_basin_3agent(z0, spec.d)
    predicted = {_limit_key(p) for p in prediction.limits}
    simulated = set(row["simulated"])
    row["predicted"] = sorted(predicted)
    if prediction.finite_time_bound is not None:
        row["time_bound"] = fraction_str(prediction.finite_time_bound)
    if row["timeouts"]:
        row["agreement"] = False
    elif config.branch_policy is BranchPolicy.ENUMERATE:
        row["agreement"] = simulated == predicted
    else:
        row["agreement"] = simulated <= predicted
    if row["agreement"] and prediction.finite_time_bound is not None:
        row["agreement"] = all(tr.end_time <= prediction.finite_time_bound for tr in trajectories)
    return row


def run_sweep(config):
    """Rows in grid order plus a small summary; grid points may run in parallel."""
    points = grid_points(config)
    logger.info(f"Sweeping {len(points)} starts for {config.name} with {config.jobs} job(s)")
    if config.jobs == 1 or len(points) < 2:
        rows = [sweep_point(p, config) for p in points]
    else:
        rows = Parallel(n_jobs=config.jobs)(delayed(sweep_point)(p, config) for p in points)
    compared = [r for r in rows if r["agreement"] is not None]
    agreed = sum(1 for r in compared if r["agreement"])
    summary = {
        "scenario": _spec_echo(config),
        "points": len(rows),
        "compared": len(compared),
        "agreed": agreed,
        "agreement_rate": (agreed / len(compared)) if compared else None,
    }
    exit_code = EXIT_DESIRED if agreed == len(compared) else EXIT_DEGENERATE
    if exit_code:
        logger.warning(f"{len(compared) - agreed} of {len(compared)} starts disagree with the classifier")
    return rows, summary, exit_code
