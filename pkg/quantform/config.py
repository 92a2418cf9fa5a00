"""
Scenario files and process configuration.

A scenario is a flat KEY=value text file (comments with #), read with
python-dotenv. Numbers are parsed as exact rationals, so D=1/3 means
exactly one third.
"""

import io
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

from dotenv import dotenv_values, load_dotenv

from .errors import ConfigError
from .exact import as_fraction, as_fractions
from .model import FormationSpec, XState, ZState, x_to_z
from .solver import BranchPolicy

logger = logging.getLogger(__name__)

load_dotenv()

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
SCENARIO_DIR = Path(__file__).parent / "scenarios"
SOLVERS = ("event", "euler", "hysteresis")
GRID_AXES = ("exclude", "only", "include")

KNOWN_KEYS = {
    "N", "D", "K", "X0", "Z0", "ANCHOR", "SOLVER", "H", "EPS_H", "T_MAX",
    "BRANCH_POLICY", "SNAP_TOL", "MAX_EVENTS", "MAX_BRANCHES", "OUTPUT_DIR",
    "SEED", "GRID_MIN", "GRID_MAX", "GRID_POINTS", "GRID_AXES", "SAMPLES", "JOBS",
}


def configure_logging(level=None):
    """Root logging setup shared by the CLI and the web app."""
    level = level or os.environ.get('QUANTFORM_LOG_LEVEL', 'INFO')
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=[
            logging.StreamHandler(),
        ]
    )


def default_output_dir():
    return Path(os.environ.get('QUANTFORM_OUTPUT_DIR', 'runs'))


def default_max_events():
    value = os.environ.get('QUANTFORM_MAX_EVENTS')
    return int(value) if value else None


@dataclass
class ScenarioConfig:
    n: int
    d: tuple
    k: tuple
    x0: tuple = None
    z0: tuple = None
    anchor: object = None
    solver: str = "event"
    h: object = as_fraction("1/1000")
    eps_h: object = None
    t_max: object = as_fraction(20)
    branch_policy: BranchPolicy = BranchPolicy.DETERMINISTIC
    snap_tol: object = None
    max_events: int = None
    max_branches: int = 64
    output_dir: Path = None
    seed: int = 0
    grid_min: object = as_fraction(-3)
    grid_max: object = as_fraction(3)
    grid_points: int = 21
    grid_axes: str = "exclude"
    samples: int = 0
    jobs: int = 1
    name: str = "scenario"
    source: str = None
    lines: dict = field(default_factory=dict, repr=False)

    @property
    def spec(self):
        return FormationSpec(self.n, self.d, self.k)

    def initial_z(self):
        if self.z0 is not None:
            return ZState(self.z0).z
        return x_to_z(XState(self.x0)).z

    def anchor_value(self):
        """Position of agent n at t = 0 when known."""
        if self.x0 is not None:
            return self.x0[-1]
        return self.anchor

    def echo(self):
        out = {
            "name": self.name,
            "n": self.n,
            "d": [str(v) for v in self.d],
            "k": [str(v) for v in self.k],
            "solver": self.solver,
            "t_max": str(self.t_max),
            "branch_policy": self.branch_policy.value,
        }
        if self.x0 is not None:
            out["x0"] = [str(v) for v in self.x0]
        else:
            out["z0"] = [str(v) for v in self.z0]
        if self.solver != "event":
            out["h"] = str(self.h)
        if self.solver == "hysteresis":
            out["eps_h"] = str(self.eps_h)
        return out


class _Reader:
    """Typed access to raw KEY=value pairs with errors pointing at the offending line."""

    def __init__(self, values, source=None, lines=None):
        self.values = values
        self.source = source
        self.lines = lines or {}

    def fail(self, key, message):
        raise ConfigError(f"{key}: {message}", self.source, self.lines.get(key))

    def has(self, key):
        value = self.values.get(key)
        return value is not None and str(value).strip() != ""

    def raw(self, key):
        return self.values.get(key)

    def number(self, key, default=None, positive=False):
        if not self.has(key):
            return default
        try:
            value = as_fraction(_scalar(self.raw(key)))
        except (TypeError, ValueError, ZeroDivisionError):
            self.fail(key, f"not a number: {self.raw(key)!r}")
        if positive and value <= 0:
            self.fail(key, f"must be positive, got {value}")
        return value

    def integer(self, key, default=None, minimum=None):
        value = self.number(key)
        if value is None:
            return default
        if value.denominator != 1:
            self.fail(key, f"must be an integer, got {value}")
        value = int(value)
        if minimum is not None and value < minimum:
            self.fail(key, f"must be at least {minimum}, got {value}")
        return value

    def vector(self, key, length, broadcast=False, positive=False):
        raw = self.raw(key)
        items = raw if isinstance(raw, (list, tuple)) else [p for p in str(raw).split(',') if p.strip()]
        try:
            values = as_fractions(_scalar(v) for v in items)
        except (TypeError, ValueError, ZeroDivisionError):
            self.fail(key, f"not a list of numbers: {raw!r}")
        if broadcast and len(values) == 1:
            values = values * length
        if len(values) != length:
            self.fail(key, f"expected {length} values, got {len(values)}")
        if positive and any(v <= 0 for v in values):
            self.fail(key, f"all values must be positive, got {[str(v) for v in values]}")
        return values

    def choice(self, key, options, default):
        if not self.has(key):
            return default
        value = str(self.raw(key)).strip().lower()
        if value not in options:
            self.fail(key, f"expected one of {', '.join(options)}, got {value!r}")
        return value


def _scalar(value):
    # JSON floats keep their decimal spelling, not their binary value
    if isinstance(value, float):
        return repr(value)
    return value.strip() if isinstance(value, str) else value


def _line_numbers(text):
    lines = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith('#') or '=' not in stripped:
            continue
        key = stripped.split('=', 1)[0].strip()
        if key.startswith('export '):
            key = key[len('export '):].strip()
        lines.setdefault(key.upper(), number)
    return lines


def scenario_from_mapping(values, source=None, lines=None, name="scenario"):
    """Build and validate a ScenarioConfig from raw key/value pairs."""
    values = {str(k).strip().upper(): v for k, v in values.items()}
    reader = _Reader(values, source, lines)
    for key in values:
        if key not in KNOWN_KEYS:
            reader.fail(key, "unknown key")

    if not reader.has("N"):
        raise ConfigError("N: missing agent count", source)
    n = reader.integer("N", minimum=2)
    for key in ("D", "K"):
        if not reader.has(key):
            raise ConfigError(f"{key}: missing", source)
    d = reader.vector("D", n - 1, broadcast=True, positive=True)
    k = reader.vector("K", n - 1, broadcast=True, positive=True)

    has_x, has_z = reader.has("X0"), reader.has("Z0")
    if has_x == has_z:
        raise ConfigError("exactly one of X0 and Z0 must be given", source,
                          lines.get("X0", lines.get("Z0")) if lines else None)
    x0 = reader.vector("X0", n) if has_x else None
    z0 = reader.vector("Z0", n - 1) if has_z else None
    anchor = reader.number("ANCHOR")
    if anchor is not None and has_x:
        reader.fail("ANCHOR", "only allowed together with Z0")

    solver = reader.choice("SOLVER", SOLVERS, "event")
    h = reader.number("H", as_fraction("1/1000"), positive=True)
    eps_h = reader.number("EPS_H", positive=True)
    if solver == "hysteresis" and eps_h is None:
        raise ConfigError("EPS_H: required for the hysteresis solver", source)
    policy = reader.choice("BRANCH_POLICY", [p.value for p in BranchPolicy], "deterministic")
    snap_tol = reader.number("SNAP_TOL")
    if snap_tol is not None and snap_tol < 0:
        reader.fail("SNAP_TOL", "must be non-negative")

    grid_min = reader.number("GRID_MIN", as_fraction(-3))
    grid_max = reader.number("GRID_MAX", as_fraction(3))
    if grid_max < grid_min:
        reader.fail("GRID_MAX", f"below GRID_MIN ({grid_min})")

    output_dir = reader.raw("OUTPUT_DIR")
    config = ScenarioConfig(
        n=n,
        d=d,
        k=k,
        x0=x0,
        z0=z0,
        anchor=anchor,
        solver=solver,
        h=h,
        eps_h=eps_h,
        t_max=reader.number("T_MAX", as_fraction(20), positive=True),
        branch_policy=BranchPolicy(policy),
        snap_tol=snap_tol,
        max_events=reader.integer("MAX_EVENTS", default_max_events(), minimum=1),
        max_branches=reader.integer("MAX_BRANCHES", 64, minimum=1),
        output_dir=Path(output_dir) if output_dir else None,
        seed=reader.integer("SEED", 0),
        grid_min=grid_min,
        grid_max=grid_max,
        grid_points=reader.integer("GRID_POINTS", 21, minimum=0),
        grid_axes=reader.choice("GRID_AXES", GRID_AXES, "exclude"),
        samples=reader.integer("SAMPLES", 0, minimum=0),
        jobs=reader.integer("JOBS", 1),
        name=name,
        source=source,
        lines=dict(lines or {}),
    )
    logger.debug(f"scenario {name}: n={n}, solver={solver}, policy={policy}")
    return config


def resolve_scenario(name_or_path):
    """A file path, or the name of a bundled scenario."""
    path = Path(name_or_path)
    if path.is_file():
        return path
    bundled = SCENARIO_DIR / f"{path.name}.cfg" if path.suffix != ".cfg" else SCENARIO_DIR / path.name
    if bundled.is_file():
        return bundled
    raise ConfigError(f"no such scenario file or bundled scenario: {name_or_path}")


def load_scenario(name_or_path):
    path = resolve_scenario(name_or_path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read scenario: {e}", str(path)) from e
    values = dotenv_values(stream=io.StringIO(text))
    config = scenario_from_mapping(values, str(path), _line_numbers(text), name=path.stem)
    logger.info(f"Loaded scenario {config.name} from {path}")
    return config

