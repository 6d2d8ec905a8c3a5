"""Stochastic integration of the cascaded source / cavity / mechanics system.

For each mode k = 1, 2 the Wigner amplitudes obey

    d alpha/dtau = -kappa alpha + sqrt(2 kappa) xi_k
    d delta/dtau = -delta - i g beta + 2 sqrt(kappa) alpha - sqrt(2) xi_k
    d beta/dtau  = -gamma_m beta - i g delta + sqrt(2 gamma_m (2 n_bath + 1)) xi_{2+k}

and the temporal output mode accumulates, from the pulse switchover onwards,

    d A/dtau = u(tau - tau2) [sqrt(2) delta - sqrt(2 kappa) alpha + xi_k].

The same optical increment ``xi_k`` drives the source, the cavity and the
output record within a step: that is the cascaded-noise correlation.

The stochastic RK4 scheme draws one Wiener increment per step and holds the
noise drive ``xi/dtau`` fixed across the four stages. Since drift and noise are
linear with trajectory-independent coefficients, each step is an affine map
``y -> M_n y + K_n xi_n``; :func:`build_step_maps` evaluates those maps once by
running the RK4 stages on basis vectors, and every trajectory batch reuses them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import TrajectoryError
from .model import ProtocolParams, PulseSchedule
from .pulses import coupling_g, envelope_u, kappa, norm_restricted, readout_window
from .sampling import NoiseIncrements, RngLike, TrajectoryState, as_generator, initial_state

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)

# component order inside one mode's state vector
ALPHA, DELTA, BETA, AOUT = range(4)


@dataclass(frozen=True)
class DriftEvaluation:
    d_alpha: np.ndarray
    d_delta: np.ndarray
    d_beta: np.ndarray


def drift(state: TrajectoryState, tau: float, p: ProtocolParams, s: PulseSchedule) -> DriftEvaluation:
    """Deterministic time derivatives of the six dynamical amplitudes."""
    k = kappa(tau, s)
    g = coupling_g(tau, s)
    return DriftEvaluation(
        d_alpha=-k * state.alpha,
        d_delta=-state.delta - 1j * g * state.beta + 2 * math.sqrt(k) * state.alpha,
        d_beta=-p.gamma_m * state.beta - 1j * g * state.delta,
    )


def mech_noise_amplitude(p: ProtocolParams) -> float:
    return math.sqrt(2 * p.gamma_m * (2 * p.n_bath + 1))


def apply_noise(
    state: TrajectoryState, tau: float, dtau: float, xi: NoiseIncrements, p: ProtocolParams, s: PulseSchedule
) -> TrajectoryState:
    """Add one step of noise; the optical draw enters source and cavity together."""
    k = float(kappa(tau, s))
    out = state.copy()
    out.alpha = state.alpha + math.sqrt(2 * k) * xi.optical
    out.delta = state.delta - SQRT2 * xi.optical
    out.beta = state.beta + mech_noise_amplitude(p) * xi.mechanical
    return out


def accumulate_output(
    state: TrajectoryState, tau: float, dtau: float, xi: NoiseIncrements, s: PulseSchedule, norm: float
) -> np.ndarray:
    """Output record after one Euler step, gated to ``tau >= tau1 + tau_s/2``.

    The envelope is sampled at the step midpoint; ``xi`` must be the same draw
    passed to :func:`apply_noise` for this step.
    """
    if tau < s.switch_time:
        return state.a_out.copy()
    u = float(envelope_u(tau + dtau / 2, s.tau2, norm))
    k = float(kappa(tau, s))
    integrand = SQRT2 * state.delta - math.sqrt(2 * k) * state.alpha
    return state.a_out + u * (integrand * dtau + xi.optical)


def euler_maruyama_step(
    state: TrajectoryState,
    tau: float,
    dtau: float,
    xi: NoiseIncrements,
    p: ProtocolParams,
    s: PulseSchedule,
    norm: float,
) -> TrajectoryState:
    """Reference Euler-Maruyama step built from :func:`drift`, :func:`apply_noise`
    and :func:`accumulate_output`."""
    d = drift(state, tau, p, s)
    a_out = accumulate_output(state, tau, dtau, xi, s, norm)
    moved = TrajectoryState(
        alpha=state.alpha + d.d_alpha * dtau,
        delta=state.delta + d.d_delta * dtau,
        beta=state.beta + d.d_beta * dtau,
        a_out=a_out,
    )
    new = apply_noise(moved, tau, dtau, xi, p, s)
    new.a_out = a_out
    return new


# --------------------------------------------------------------------------
# precomputed RK4 step maps


@dataclass(frozen=True)
class StepMaps:
    """Per-step affine maps ``y_{n+1} = M[n] y_n + K[n] xi_n`` for one mode.

    ``K`` acts on Wiener increments ordered as channels: 0 optical,
    1 mechanical and, only when ``shared_noise`` is False, 2 an independent
    optical draw used by the output record.
    """

    M: np.ndarray
    K: np.ndarray
    dtau: float
    readout_norm: float
    shared_noise: bool = True

    @property
    def n_steps(self) -> int:
        return self.M.shape[0]

    @property
    def n_channels(self) -> int:
        return self.K.shape[2]


def _coefficients(
    t: np.ndarray, p: ProtocolParams, s: PulseSchedule, norm: float, shared: bool, gate: np.ndarray
):
    """Drift matrices F(t) and noise matrices B(t) for an array of times.

    ``gate`` switches the output record on per step, so that all four RK4
    stages of a step agree on whether the readout window is open.
    """
    n = t.shape[0]
    k = kappa(t, s)
    g = coupling_g(t, s)
    u = gate * envelope_u(t, s.tau2, norm)
    sk = np.sqrt(k)

    F = np.zeros((n, 4, 4), dtype=complex)
    F[:, ALPHA, ALPHA] = -k
    F[:, DELTA, ALPHA] = 2 * sk
    F[:, DELTA, DELTA] = -1.0
    F[:, DELTA, BETA] = -1j * g
    F[:, BETA, DELTA] = -1j * g
    F[:, BETA, BETA] = -p.gamma_m
    F[:, AOUT, ALPHA] = -u * SQRT2 * sk
    F[:, AOUT, DELTA] = u * SQRT2

    m = 2 if shared else 3
    B = np.zeros((n, 4, m), dtype=complex)
    B[:, ALPHA, 0] = SQRT2 * sk
    B[:, DELTA, 0] = -SQRT2
    B[:, BETA, 1] = mech_noise_amplitude(p)
    B[:, AOUT, 0 if shared else 2] = u
    return F, B


def build_step_maps(
    p: ProtocolParams, s: PulseSchedule, shared_noise: bool = True, n_steps: int | None = None
) -> StepMaps:
    """Run the RK4 stage algebra on basis vectors to get each step's affine map.

    Args:
        p: protocol parameters.
        s: pulse schedule (its ``n_steps`` sets the grid unless overridden).
        shared_noise: if False the output record gets its own optical draw,
            breaking the cascaded correlation (diagnostic use only).
        n_steps: optional grid override.
    """
    n = s.n_steps if n_steps is None else int(n_steps)
    h = s.tau_max / n
    t0 = s.tau_max * np.arange(n) / n
    t1 = s.tau_max * np.arange(1, n + 1) / n
    tm = 0.5 * (t0 + t1)
    norm = norm_restricted(readout_window(s))
    gate = (tm >= s.switch_time).astype(float)

    F0, B0 = _coefficients(t0, p, s, norm, shared_noise, gate)
    Fm, Bm = _coefficients(tm, p, s, norm, shared_noise, gate)
    F1, B1 = _coefficients(t1, p, s, norm, shared_noise, gate)
    m = B0.shape[2]

    # augmented unknowns [y (4) | eta (m)] with eta = xi / h held fixed over the step
    Y1 = np.zeros((n, 4, 4 + m), dtype=complex)
    Y1[:, :, :4] = np.eye(4)
    E = np.zeros((1, m, 4 + m))
    E[0, :, 4:] = np.eye(m)

    k1 = F0 @ Y1 + B0 @ E
    k2 = Fm @ (Y1 + 0.5 * h * k1) + Bm @ E
    k3 = Fm @ (Y1 + 0.5 * h * k2) + Bm @ E
    k4 = F1 @ (Y1 + h * k3) + B1 @ E
    Y = Y1 + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return StepMaps(M=Y[:, :, :4].copy(), K=Y[:, :, 4:] / h, dtau=h, readout_norm=norm, shared_noise=shared_noise)


def pack(state: TrajectoryState) -> np.ndarray:
    """Stack to shape ``(4, 2B)``: rows (alpha, delta, beta, A), columns mode 1 then mode 2."""
    parts = [np.atleast_2d(x) for x in (state.alpha, state.delta, state.beta, state.a_out)]
    return np.stack([x.reshape(2, -1).reshape(-1) for x in parts])


def unpack(y: np.ndarray) -> TrajectoryState:
    half = y.shape[1] // 2
    rows = [y[i].reshape(2, half) for i in range(4)]
    return TrajectoryState(*rows)


def integrate(maps: StepMaps, state: TrajectoryState, xi: np.ndarray | None = None) -> TrajectoryState:
    """Apply all step maps to ``state`` with explicit Wiener increments.

    Args:
        maps: step maps from :func:`build_step_maps`.
        state: starting amplitudes, each of shape ``(2, B)``.
        xi: increments of shape ``(n_steps, n_channels, 2, B)`` (mode on axis 2),
            or None for a noise-free run.
    """
    y = pack(state)
    for n in range(maps.n_steps):
        y = maps.M[n] @ y
        if xi is not None:
            y += maps.K[n] @ xi[n].reshape(maps.n_channels, -1)
    return unpack(y)


@dataclass(frozen=True)
class BatchResult:
    a_out: np.ndarray
    rejected: int


def run_batch(
    p: ProtocolParams,
    s: PulseSchedule,
    rng: RngLike,
    size: int,
    maps: StepMaps | None = None,
) -> BatchResult:
    """Integrate ``size`` independent trajectories drawn from one random stream.

    Returns:
        Output-mode samples of shape ``(n_ok, 2)`` and the count of trajectories
        discarded for non-finite amplitudes.
    """
    gen = as_generator(rng)
    if maps is None:
        maps = build_step_maps(p, s)
    y = pack(initial_state(p, gen, size))

    # unit complex normals (Re, Im ~ N(0, 1)) scaled to increments of variance dtau/4
    K = maps.K * math.sqrt(maps.dtau / 4)
    active = np.flatnonzero(np.any(K != 0, axis=(0, 1)))
    K = np.ascontiguousarray(K[:, :, active])
    buf = np.empty((active.size, 4 * size))
    z = buf.view(complex)
    M = maps.M
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(maps.n_steps):
            gen.standard_normal(out=buf)
            y = M[n] @ y + K[n] @ z

    final = unpack(y)
    ok = final.is_finite()
    rejected = int(size - ok.sum())
    if rejected:
        log.warning("discarded %d of %d trajectories with non-finite amplitudes", rejected, size)
    return BatchResult(a_out=final.a_out[:, ok].T.copy(), rejected=rejected)


def run_trajectory(p: ProtocolParams, s: PulseSchedule, rng: RngLike) -> tuple[complex, complex]:
    """One stochastic trajectory; returns the two output-mode amplitudes."""
    res = run_batch(p, s, rng, 1)
    if res.rejected:
        raise TrajectoryError("trajectory produced non-finite amplitudes")
    return complex(res.a_out[0, 0]), complex(res.a_out[0, 1])


@dataclass(frozen=True)
class DeterministicRun:
    """Noise-free time series, each of shape ``(n_steps + 1, 2)``."""

    tau: np.ndarray
    alpha: np.ndarray
    delta: np.ndarray
    beta: np.ndarray
    a_out: np.ndarray


def run_deterministic(
    p: ProtocolParams, s: PulseSchedule, source_amplitude=1.0, maps: StepMaps | None = None
) -> DeterministicRun:
    """Noise-free evolution from source amplitude(s), with empty cavities and
    mechanics, recorded at every grid point.

    Args:
        source_amplitude: scalar (both modes) or pair ``(alpha1, alpha2)``.
    """
    if maps is None:
        maps = build_step_maps(p, s)
    a0 = np.broadcast_to(np.asarray(source_amplitude, dtype=complex), (2,))
    y = np.zeros((4, 2), dtype=complex)
    y[ALPHA] = a0
    trace = np.empty((maps.n_steps + 1, 4, 2), dtype=complex)
    trace[0] = y
    for n in range(maps.n_steps):
        y = maps.M[n] @ y
        trace[n + 1] = y
    tau = s.tau_max * np.arange(maps.n_steps + 1) / maps.n_steps
    return DeterministicRun(tau, trace[:, ALPHA], trace[:, DELTA], trace[:, BETA], trace[:, AOUT])
