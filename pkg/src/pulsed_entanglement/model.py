"""Protocol parameters and conversion to dimensionless units.

All dynamics run in the dimensionless time ``tau = Gamma_c * t`` where
``Gamma_c`` is the optomechanical cavity decay rate, so the cavity decays at
unit rate. Frequencies in :class:`PhysicalParams` are ordinary frequencies in
Hz (the ``X/2pi`` values); the ratio of two such values equals the ratio of
the corresponding angular rates, which is what :func:`to_dimensionless` stores.

Rate convention for the reference parameter set
-----------------------------------------------
The reference dimensionless mechanical damping and coupling are given as
``gamma_m/2pi = 1.59e-5`` and ``chi0/2pi = 3.5e-3``. The dimensionless rates
used by the equations of motion are therefore ``gamma_m = 2pi * 1.59e-5``
(about ``9.99e-5``) and ``chi0 = 2pi * 3.5e-3``. :data:`REFERENCE_PHYSICAL` encodes
this by storing the physical damping/coupling frequencies as
``2pi * value * (Gamma_c/2pi)``. The mechanical frequency is a plain ratio of
14.23 to the cavity linewidth, which gives 0.70 thermal phonons at 200 mK.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError

HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J / K

TAU1_DEFAULT = 8.17
N_STEPS_DEFAULT = 3000
SQUEEZING_DEFAULT = 1.0
STORAGE_TIMES = (16.3, 40.8, 81.7)

_GAMMA_C_HZ = 0.26e9


@dataclass(frozen=True)
class PhysicalParams:
    """Physical inputs; every frequency is an ordinary frequency in Hz."""

    cavity_decay_rate: float
    mech_frequency: float
    mech_damping: float
    coupling: float
    bath_temperature: float

    def __post_init__(self):
        for name in ("cavity_decay_rate", "mech_frequency", "mech_damping", "coupling"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and > 0, got {value!r}")
        if not (math.isfinite(self.bath_temperature) and self.bath_temperature >= 0):
            raise DomainError(
                f"bath_temperature must be finite and >= 0, got {self.bath_temperature!r}"
            )
        if self.mech_frequency <= self.mech_damping:
            raise DomainError("mech_frequency must exceed mech_damping (underdamped oscillator)")


REFERENCE_PHYSICAL = PhysicalParams(
    cavity_decay_rate=_GAMMA_C_HZ,
    mech_frequency=14.23 * _GAMMA_C_HZ,
    mech_damping=2 * math.pi * 1.59e-5 * _GAMMA_C_HZ,
    coupling=2 * math.pi * 3.5e-3 * _GAMMA_C_HZ,
    bath_temperature=0.2,
)


@dataclass(frozen=True)
class ProtocolParams:
    """Dimensionless constants entering the stochastic equations.

    ``omega_m`` and ``chi0`` do not appear in the (rotating-frame, linearized)
    dynamics; they are carried for bookkeeping and unit conversion.
    """

    gamma_m: float = 2 * math.pi * 1.59e-5
    omega_m: float = 14.23
    squeezing_r: float = SQUEEZING_DEFAULT
    n_bath: float = 0.0
    n_mech_init: float | None = None
    chi0: float = 2 * math.pi * 3.5e-3

    def __post_init__(self):
        if self.n_mech_init is None:
            object.__setattr__(self, "n_mech_init", self.n_bath)
        for name in ("gamma_m", "squeezing_r", "n_bath", "n_mech_init"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise DomainError(f"{name} must be finite and >= 0, got {value!r}")

    def with_(self, **changes) -> "ProtocolParams":
        """Copy with fields replaced. ``n_mech_init`` re-thermalizes unless given."""
        if "n_bath" in changes and "n_mech_init" not in changes:
            changes["n_mech_init"] = None
        return replace(self, **changes)


@dataclass(frozen=True)
class PulseSchedule:
    """Write/read timing. ``tau2`` and ``tau_max`` are derived, never passed."""

    tau1: float
    tau_s: float
    n_steps: int = N_STEPS_DEFAULT

    def __post_init__(self):
        if not self.tau1 > 3:
            raise DomainError(f"tau1 must exceed 3 for negligible truncation, got {self.tau1}")
        if not (math.isfinite(self.tau_s) and self.tau_s >= 0):
            raise DomainError(f"tau_s must be finite and >= 0, got {self.tau_s}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 100:
            raise DomainError(f"n_steps must be an integer >= 100, got {self.n_steps}")

    @property
    def tau2(self) -> float:
        return self.tau1 + self.tau_s

    @property
    def tau_max(self) -> float:
        return 2 * self.tau1 + self.tau_s

    @property
    def switch_time(self) -> float:
        """Midpoint between the pulses: coupling switches to the read pulse and
        output integration begins."""
        return self.tau1 + self.tau_s / 2

    @property
    def dtau(self) -> float:
        return self.tau_max / self.n_steps

    def grid(self) -> np.ndarray:
        return self.tau_max * np.arange(self.n_steps + 1) / self.n_steps


def default_schedule(tau_s: float, n_steps: int = N_STEPS_DEFAULT) -> PulseSchedule:
    """Schedule with the standard write-pulse peak ``tau1 = 8.17``.

    ``tau_s = 0`` is accepted as a degenerate limit (write and read pulses coincide).
    """
    if tau_s < 0:
        raise DomainError(f"tau_s must be >= 0, got {tau_s}")
    return PulseSchedule(tau1=TAU1_DEFAULT, tau_s=tau_s, n_steps=n_steps)


def bose_occupation(frequency_hz: float, temperature: float) -> float:
    """Mean thermal occupation ``1/(exp(h f / k_B T) - 1)``; zero at ``T = 0``."""
    if temperature < 0 or not math.isfinite(temperature):
        raise DomainError(f"temperature must be finite and >= 0, got {temperature!r}")
    if frequency_hz <= 0:
        raise DomainError(f"frequency must be > 0, got {frequency_hz!r}")
    if temperature == 0:
        return 0.0
    x = HBAR * 2 * math.pi * frequency_hz / (K_B * temperature)
    # e^{-x} / (1 - e^{-x}) stays finite for very cold baths
    return math.exp(-x) / -math.expm1(-x)


def thermal_occupation(p: PhysicalParams) -> float:
    """Mean phonon number of the mechanical bath at ``p.bath_temperature``."""
    return bose_occupation(p.mech_frequency, p.bath_temperature)


def to_dimensionless(p: PhysicalParams, r: float = SQUEEZING_DEFAULT) -> ProtocolParams:
    """Scale all rates by the cavity decay rate and thermalize the mechanics.

    Args:
        p: physical parameters (Hz, K).
        r: two-mode squeezing parameter of the source.

    Returns:
        Protocol parameters with ``n_mech_init == n_bath``.
    """
    if r < 0:
        raise DomainError(f"squeezing must be >= 0, got {r}")
    gc = p.cavity_decay_rate
    return ProtocolParams(
        gamma_m=p.mech_damping / gc,
        omega_m=p.mech_frequency / gc,
        squeezing_r=r,
        n_bath=thermal_occupation(p),
        chi0=p.coupling / gc,
    )
