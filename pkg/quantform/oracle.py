"""
Fixed-step integrators on the raw discontinuous field.

Both work in float64 with numpy and serve as independent checks of the
event solver. The hysteresis variant holds each quantizer output until the
coordinate is at least eps_h away from every surface on the other side.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class SampledTrajectory:
    h: float
    t: np.ndarray
    z: np.ndarray
    V: np.ndarray
    q: np.ndarray
    solver: str = "euler"
    eps_h: float = None
    d: np.ndarray = None

    @property
    def terminal(self):
        return self.z[-1]

    def switch_count(self):
        """Number of quantizer output changes per coordinate."""
        return np.count_nonzero(np.diff(self.q, axis=0), axis=0)


@dataclass
class HysteresisState:
    q: np.ndarray
    eps_h: float

    def update(self, z, d):
        raw = quantize_array(z, d)
        distance = np.minimum(np.abs(z), np.abs(np.abs(z) - d))
        flip = (raw != self.q) & (distance >= self.eps_h)
        self.q = np.where(flip, raw, self.q)
        return self.q


def quantize_array(z, d):
    """Vectorised sgn(z) sgn(|z| - d) with sgn(0) = +1."""
    z = np.asarray(z, dtype=float)
    d = np.asarray(d, dtype=float)
    return np.where(z >= 0, 1, -1) * np.where(np.abs(z) - d >= 0, 1, -1)


def sample_count(h, t_max):
    return math.floor(float(t_max) / float(h) + 1e-9) + 1


def _lyapunov(z, d):
    return 0.25 * np.sum((z ** 2 - d ** 2) ** 2, axis=-1)


def _integrate(z0, spec, h, t_max, next_q, solver, eps_h=None):
    h = float(h)
    if h <= 0:
        raise ValueError(f"step size must be positive, got {h}")
    M = spec.field.as_array()
    d = np.array([float(v) for v in spec.d])
    count = sample_count(h, t_max)
    z = np.empty((count, spec.m))
    q = np.empty((count, spec.m), dtype=int)
    z[0] = np.array([float(v) for v in z0], dtype=float)
    for j in range(count):
        q[j] = next_q(z[j], d)
        if j + 1 < count:
            z[j + 1] = z[j] + h * (M @ q[j])
    t = np.arange(count) * h
    logger.debug(f"{solver}: {count} samples, h={h}")
    return SampledTrajectory(h, t, z, _lyapunov(z, d), q, solver, eps_h, d)


def simulate_euler(z0, spec, h, t_max):
    return _integrate(z0, spec, h, t_max, quantize_array, "euler")


def simulate_hysteresis(z0, spec, h, eps_h, t_max):
    eps_h = float(eps_h)
    if eps_h <= 0:
        raise ValueError(f"hysteresis band must be positive, got {eps_h}")
    d = np.array([float(v) for v in spec.d])
    state = HysteresisState(quantize_array(np.array([float(v) for v in z0]), d), eps_h)
    return _integrate(z0, spec, h, t_max, state.update, "hysteresis", eps_h)


def oracle_deviation(sampled, trajectory):
    """Per-sample max-norm distance between sampled z and the exact trajectory."""
    exact = trajectory.sample([float(t) for t in sampled.t])
    return np.max(np.abs(sampled.z - exact), axis=1)


def speed_limit(spec):
    """Largest row sum of |M| as a float."""
    return float(np.max(np.sum(np.abs(spec.field.as_array()), axis=1)))
