"""
Command line front end.

    python -m quantform run six_agent_line --out runs/six
    python -m quantform sweep three_agent_sweep --jobs 4
    python -m quantform report runs/six
"""

import argparse
import logging
import sys
from pathlib import Path

from .analysis import ConvergenceReport
from .artifacts import read_summary, write_run, write_sweep
from .config import configure_logging, default_output_dir, load_scenario
from .errors import ConfigError, QuantformError
from .exact import as_fraction, fraction_str
from .model import BitBudget
from .runner import EXIT_CONFIG, run_scenario, run_sweep
from .solver import BranchPolicy

logger = logging.getLogger(__name__)


def _output_dir(args, config):
    if args.out:
        return Path(args.out)
    if config.output_dir is not None:
        return config.output_dir
    return default_output_dir() / config.name


def _apply_overrides(args, config):
    if getattr(args, "policy", None):
        config.branch_policy = BranchPolicy(args.policy)
    if getattr(args, "solver", None):
        config.solver = args.solver
        if config.solver == "hysteresis" and config.eps_h is None:
            raise ConfigError("EPS_H: required for the hysteresis solver", config.source)
    if getattr(args, "t_max", None):
        try:
            config.t_max = as_fraction(args.t_max)
        except (TypeError, ValueError, ZeroDivisionError):
            raise ConfigError(f"T_MAX: not a number: {args.t_max!r}")
    if getattr(args, "jobs", None):
        config.jobs = args.jobs
    return config


def cmd_run(args):
    config = _apply_overrides(args, load_scenario(args.scenario))
    outcome = run_scenario(config)
    out_dir = _output_dir(args, config)
    write_run(outcome, out_dir)
    print(f"{config.name}: {outcome.summary['terminal']} (exit {outcome.exit_code}), artifacts in {out_dir}")
    return outcome.exit_code


def cmd_sweep(args):
    config = _apply_overrides(args, load_scenario(args.scenario))
    rows, summary, code = run_sweep(config)
    out_dir = _output_dir(args, config)
    write_sweep(rows, summary, out_dir)
    print(f"{config.name}: {summary['points']} starts, agreement {_rate_text(summary['agreement_rate'])}, "
          f"table in {out_dir}")
    return code


def _rate_text(rate):
    return "n/a" if rate is None else f"{100 * rate:.1f}%"


def _fmt_time(value):
    if value is None:
        return "never"
    value = as_fraction(value)
    return f"{float(value):.6g} ({fraction_str(value)})"


def render_sweep_report(summary):
    scenario = summary["scenario"]
    lines = [f"sweep {scenario['name']}: n={scenario['n']}, {summary['points']} starts"]
    if not summary["compared"]:
        lines.append("no start was compared with the basin classifier")
    else:
        lines.append(f"compared with the basin classifier: {summary['compared']}, "
                     f"agreed: {summary['agreed']}, agreement {_rate_text(summary['agreement_rate'])}")
    return lines


def render_report(summary):
    """Human-readable lines for a run summary or a sweep summary."""
    if "points" in summary:
        return render_sweep_report(summary)
    scenario = summary["scenario"]
    lines = [f"scenario {scenario['name']}: n={scenario['n']}, solver={summary['solver']['kind']}"]
    terminal = summary["terminal"]
    if terminal == "Timeout":
        lines.append("terminal: Timeout (did not converge within t_max)")
    else:
        lines.append(f"terminal: {terminal}")

    if "branches" in summary:
        reports = [ConvergenceReport.from_dict(b) for b in summary["branches"]]
        if len(reports) > 1:
            lines.append(f"branches: {len(reports)}")
        for r in reports:
            prefix = f"  [branch {r.branch}] " if len(reports) > 1 else "  "
            lines.append(f"{prefix}terminal {r.terminal} at t={_fmt_time(r.terminal_time)}")
            lines.append(f"{prefix}time to desired shape: {_fmt_time(r.time_to_desired)}")
            lines.append(f"{prefix}time to equilibrium set: {_fmt_time(r.time_to_equilibrium)}")
            lines.append(f"{prefix}sliding fraction: {float(r.sliding_fraction):.3f}, events: {r.event_count}")
            if r.final_x is not None:
                lines.append(f"{prefix}final positions: {', '.join(f'{float(v):.6g}' for v in r.final_x)}")
            if r.nearest_point is not None:
                point = ", ".join(fraction_str(v) for v in r.nearest_point)
                lines.append(f"{prefix}nearest equilibrium: ({point}), "
                             f"max-norm distance {fraction_str(r.equilibrium_distance)}")
    else:
        sampled = summary["sampled"]
        lines.append(f"  step h={sampled['h']}, neighbourhood tol={sampled['tol']:.3g}")
        desired = sampled["time_to_desired"]
        lines.append(f"  time to desired shape: {'never' if desired is None else f'{desired:.6g}'}")
        lines.append(f"  largest V increase per step: {sampled['max_v_increase']:.3g}")
        band = sampled["band"]
        if band is None:
            lines.append("  z_1 never settled")
        else:
            lines.append(f"  z_1 chattering band: width {band['width']:.3g} around {band['centre']:.6g} "
                         f"after t={band['settle_time']:.6g}, {band['switches']} switches")

    budget = summary["bit_budget"]
    lines.append("bandwidth per agent:")
    budget = BitBudget(tuple(budget["per_agent"]), budget["total"], budget["stated_total"])
    lines.extend(f"  {line}" for line in budget.lines())
    return lines


def cmd_report(args):
    try:
        summary = read_summary(args.run_dir)
    except FileNotFoundError:
        logger.error(f"no summary.json in {args.run_dir}")
        print(f"error: {args.run_dir} does not contain run outputs", file=sys.stderr)
        return EXIT_CONFIG
    print("\n".join(render_report(summary)))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="quantform", description="Quantized formation control simulator")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario and write artifacts")
    run.add_argument("scenario", help="scenario file or bundled scenario name")
    run.add_argument("--out", help="output directory")
    run.add_argument("--solver", choices=["event", "euler", "hysteresis"])
    run.add_argument("--policy", choices=[p.value for p in BranchPolicy])
    run.add_argument("--t-max", dest="t_max")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="compare the basin classifier with the simulator on a grid")
    sweep.add_argument("scenario")
    sweep.add_argument("--out")
    sweep.add_argument("--policy", choices=[p.value for p in BranchPolicy])
    sweep.add_argument("--jobs", type=int)
    sweep.set_defaults(func=cmd_sweep)

    report = sub.add_parser("report", help="summarise a run directory")
    report.add_argument("run_dir")
    report.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except ConfigError as e:
        logger.error(f"configuration error: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except QuantformError as e:
        logger.error(f"run failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
