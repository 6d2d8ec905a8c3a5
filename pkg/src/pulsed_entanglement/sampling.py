"""Wigner sampling of initial states and of the per-step noise increments.

Conventions (symmetric ordering): a vacuum amplitude ``z`` has ``<|z|^2> = 1/2``
and each real quadrature ``Re z``, ``Im z`` has variance ``1/4``.

Random streams are keyed by ``(seed, stream_id)`` through
:class:`numpy.random.SeedSequence` spawn keys, so any batch of trajectories can
be regenerated on its own without replaying earlier batches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError
from .model import ProtocolParams


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream for one batch of trajectories.

    ``stream_id`` may be an int or a tuple of ints (e.g. ``(point, block)``).
    """

    seed: int
    stream_id: Union[int, tuple] = 0

    def generator(self) -> np.random.Generator:
        key = self.stream_id if isinstance(self.stream_id, tuple) else (self.stream_id,)
        ss = np.random.SeedSequence(int(self.seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
        return np.random.Generator(np.random.SFC64(ss))


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


def complex_gaussian(rng: RngLike, mean_sq: float, size=None) -> np.ndarray:
    """Circular complex Gaussian with ``<|z|^2> = mean_sq``."""
    gen = as_generator(rng)
    shape = () if size is None else (size if isinstance(size, tuple) else (size,))
    z = gen.standard_normal(shape + (2,)).view(complex)[..., 0]
    return math.sqrt(mean_sq / 2) * z


@dataclass
class TrajectoryState:
    """Amplitudes for modes k = 1, 2 along axis 0; trailing axes index trajectories."""

    alpha: np.ndarray
    delta: np.ndarray
    beta: np.ndarray
    a_out: np.ndarray

    def copy(self) -> "TrajectoryState":
        return TrajectoryState(self.alpha.copy(), self.delta.copy(), self.beta.copy(), self.a_out.copy())

    def is_finite(self) -> np.ndarray:
        parts = (self.alpha, self.delta, self.beta, self.a_out)
        return np.logical_and.reduce([np.isfinite(x).all(axis=0) for x in parts])


@dataclass(frozen=True)
class NoiseIncrements:
    """One step of Wiener increments ``xi[0:4]`` (optical 1, 2; mechanical 1, 2).

    Each real and imaginary part has variance ``dtau/4``.
    """

    xi: np.ndarray
    dtau: float

    @property
    def optical(self) -> np.ndarray:
        return self.xi[0:2]

    @property
    def mechanical(self) -> np.ndarray:
        return self.xi[2:4]


def source_pair_from_noise(xi_plus: complex, xi_minus: complex, r: float):
    """Map unit-variance noise ``xi = xi_x + i xi_y`` onto the squeezed pair.

    ``alpha_pm = xi_pm e^{+-r} / 2``, ``alpha_1 = (alpha_+ + alpha_-)/sqrt 2``,
    ``alpha_2 = (alpha_+^* - alpha_-^*)/sqrt 2``.
    """
    a_plus = np.asarray(xi_plus) * math.exp(r) / 2
    a_minus = np.asarray(xi_minus) * math.exp(-r) / 2
    alpha1 = (a_plus + a_minus) / math.sqrt(2)
    alpha2 = (np.conj(a_plus) - np.conj(a_minus)) / math.sqrt(2)
    return alpha1, alpha2


def sample_source_pair(r: float, rng: RngLike, size=None):
    """Draw Wigner samples of the two-mode squeezed vacuum.

    Returns:
        ``(alpha1, alpha2)`` with ``<|alpha_k|^2> = cosh(2r)/2`` and
        ``<alpha1 alpha2> = sinh(2r)/2``.
    """
    if r < 0:
        raise DomainError(f"squeezing must be >= 0, got {r}")
    gen = as_generator(rng)
    shape = () if size is None else (size if isinstance(size, tuple) else (size,))
    xi = gen.standard_normal((2,) + shape + (2,)).view(complex)[..., 0]
    return source_pair_from_noise(xi[0], xi[1], r)


def sample_vacuum(rng: RngLike, size=None) -> np.ndarray:
    return complex_gaussian(rng, 0.5, size)


def sample_thermal(n0: float, rng: RngLike, size=None) -> np.ndarray:
    """Thermal-state Wigner sample, ``<|beta|^2> = n0 + 1/2``."""
    if not n0 >= 0:
        raise DomainError(f"occupation must be >= 0, got {n0}")
    return complex_gaussian(rng, n0 + 0.5, size)


def draw_noise(dtau: float, rng: RngLike, size=None) -> NoiseIncrements:
    """Four independent complex Wiener increments with ``<xi xi^*> = dtau/2``."""
    if not dtau > 0:
        raise DomainError(f"dtau must be > 0, got {dtau}")
    shape = (4,) if size is None else (4,) + (size if isinstance(size, tuple) else (size,))
    return NoiseIncrements(complex_gaussian(rng, dtau / 2, shape), dtau)


def initial_state(p: ProtocolParams, rng: RngLike, size: int) -> TrajectoryState:
    """Sample ``size`` starting points: squeezed source, vacuum cavities,
    thermal mechanics at ``p.n_mech_init``, empty output record."""
    gen = as_generator(rng)
    a1, a2 = sample_source_pair(p.squeezing_r, gen, size)
    delta = sample_vacuum(gen, (2, size))
    beta = sample_thermal(p.n_mech_init, gen, (2, size))
    return TrajectoryState(
        alpha=np.stack([a1, a2]),
        delta=delta,
        beta=beta,
        a_out=np.zeros((2, size), dtype=complex),
    )
