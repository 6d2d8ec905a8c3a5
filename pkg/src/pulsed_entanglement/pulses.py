"""Time-dependent pulse shapes: source transmissivity, optomechanical coupling
and the sech temporal-mode envelope used to read out the stored state.

All functions accept scalars or numpy arrays of dimensionless time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import PulseSchedule

SQRT_HALF = math.sqrt(0.5)
_SECH_CUTOFF = 350.0


def sech(x):
    """``1/cosh(x)``, returning exactly 0 for ``|x| > 350`` instead of overflowing."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    ok = np.abs(x) <= _SECH_CUTOFF
    out[ok] = 1.0 / np.cosh(x[ok])
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class Window:
    """Integration window for a temporal mode centered at ``center``."""

    start: float
    end: float
    center: float

    def __post_init__(self):
        if not self.start < self.end:
            raise DomainError(f"empty window [{self.start}, {self.end}]")
        if not self.start <= self.center <= self.end:
            raise DomainError(f"center {self.center} outside [{self.start}, {self.end}]")


def readout_window(schedule: PulseSchedule) -> Window:
    """Output-mode window: from the pulse switchover to the end of the run."""
    return Window(start=schedule.switch_time, end=schedule.tau_max, center=schedule.tau2)


def kappa(tau, schedule: PulseSchedule):
    """Source-cavity transmissivity ``(1 + tanh(tau - tau1)) / 2``."""
    return 0.5 * (1.0 + np.tanh(np.asarray(tau, dtype=float) - schedule.tau1))


def envelope_u(tau, center: float, norm: float = SQRT_HALF):
    """Temporal-mode envelope ``norm * sech(tau - center)``."""
    if norm <= 0:
        raise DomainError(f"norm must be > 0, got {norm}")
    return norm * sech(np.asarray(tau, dtype=float) - center)


def norm_restricted(w: Window) -> float:
    """Normalization giving ``int_w (N sech(tau - center))^2 dtau == 1``.

    Infinite endpoints are allowed; the full line gives ``sqrt(1/2)``.
    """
    mass = math.tanh(w.end - w.center) - math.tanh(w.start - w.center)
    if not mass > 0:
        raise DomainError(f"window {w} carries no envelope weight")
    return 1.0 / math.sqrt(mass)


def coupling_g(tau, schedule: PulseSchedule):
    """Optomechanical coupling: ``-sech(tau - tau1)`` while writing, then
    ``-sech(tau - tau2)`` from the switchover onwards.

    Raises:
        DomainError: if any ``tau`` lies outside ``[0, tau_max]``.
    """
    t = np.asarray(tau, dtype=float)
    eps = 1e-9 * schedule.tau_max
    if np.any(t < -eps) or np.any(t > schedule.tau_max + eps):
        raise DomainError(f"tau outside [0, {schedule.tau_max}]")
    center = np.where(t < schedule.switch_time, schedule.tau1, schedule.tau2)
    return -math.sqrt(2.0) * envelope_u(t, center, SQRT_HALF)
