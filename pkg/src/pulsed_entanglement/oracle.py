"""Sampling-free references for the Monte Carlo estimates.

* Closed-form storage-only decoherence predictions for the entanglement and
  steering criteria.
* Exact second-moment transport of the full linear system: the real 16x16
  covariance ``V`` of ``(Re z, Im z)`` with
  ``z = (alpha1, alpha2, delta1, delta2, beta1, beta2, A1, A2)`` obeys
  ``dV/dtau = F V + V F^T + Q`` and is integrated with classical RK4.
* Gaussian overlap fidelity with the two-mode squeezed target.

The drift and diffusion matrices here are assembled directly from the
equations of motion and share no code with :mod:`.integrator`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError
from .estimators import CriterionResult, optimize_criterion
from .model import ProtocolParams, PulseSchedule
from .pulses import coupling_g, envelope_u, kappa, norm_restricted, readout_window

N_COMPLEX = 8
A1, A2, D1, D2, B1, B2, O1, O2 = range(N_COMPLEX)
# (Re A1, Im A1, Re A2, Im A2) inside the 16-dim real vector
OUTPUT_INDEX = [O1, O1 + N_COMPLEX, O2, O2 + N_COMPLEX]
PSD_TOL = 1e-10


def analytic_delta_ent(r: float, gamma_m: float, tau_s: float, n_bath: float) -> float:
    """Storage-only prediction ``b e^{-2r} + (1 - b)(1 + 2 n)``, ``b = e^{-2 gamma tau_s}``."""
    _check_nonneg(r=r, gamma_m=gamma_m, tau_s=tau_s, n_bath=n_bath)
    b = math.exp(-2 * gamma_m * tau_s)
    return b * math.exp(-2 * r) + (1 - b) * (1 + 2 * n_bath)


def analytic_epr(r: float, gamma_m: float, tau_s: float, n_bath: float) -> float:
    """Storage-only steering prediction with ``a = cosh 2r``, ``b = e^{-2 gamma tau_s}``,
    ``c = 1 + 2 n``: ``(2ab(1-b)c + b^2 + c^2 (1-b)^2) / (ab + (1-b)c)``."""
    _check_nonneg(r=r, gamma_m=gamma_m, tau_s=tau_s, n_bath=n_bath)
    a = math.cosh(2 * r)
    b = math.exp(-2 * gamma_m * tau_s)
    c = 1 + 2 * n_bath
    return (2 * a * b * (1 - b) * c + b**2 + c**2 * (1 - b) ** 2) / (a * b + (1 - b) * c)


def _check_nonneg(**kw):
    for k, v in kw.items():
        if not v >= 0:
            raise DomainError(f"{k} must be >= 0, got {v}")


def tmsv_covariance(r: float) -> np.ndarray:
    """4x4 covariance of the squeezed pair in ``(x1, y1, x2, y2)`` order."""
    c = math.cosh(2 * r) / 4
    s = math.sinh(2 * r) / 4
    return np.array([[c, 0, s, 0], [0, c, 0, -s], [s, 0, c, 0], [0, -s, 0, c]])


@dataclass(frozen=True)
class QuadCovariance:
    """Covariance of all 16 real variables, ordered ``(Re z_0..z_7, Im z_0..z_7)``."""

    matrix: np.ndarray

    @property
    def output(self) -> np.ndarray:
        """4x4 block over ``(Re A1, Im A1, Re A2, Im A2)``."""
        return self.matrix[np.ix_(OUTPUT_INDEX, OUTPUT_INDEX)]

    def block(self, i: int, j: int | None = None) -> np.ndarray:
        """Real covariance of component ``i`` (2x2) or of the pair ``i, j`` (4x4)."""
        idx = [i, i + N_COMPLEX] if j is None else [i, i + N_COMPLEX, j, j + N_COMPLEX]
        return self.matrix[np.ix_(idx, idx)]


def initial_covariance(p: ProtocolParams) -> np.ndarray:
    V = np.zeros((2 * N_COMPLEX, 2 * N_COMPLEX))
    re = lambda k: k  # noqa: E731
    im = lambda k: k + N_COMPLEX  # noqa: E731
    c = math.cosh(2 * p.squeezing_r) / 4
    s = math.sinh(2 * p.squeezing_r) / 4
    for k in (A1, A2):
        V[re(k), re(k)] = V[im(k), im(k)] = c
    V[re(A1), re(A2)] = V[re(A2), re(A1)] = s
    V[im(A1), im(A2)] = V[im(A2), im(A1)] = -s
    for k in (D1, D2):
        V[re(k), re(k)] = V[im(k), im(k)] = 0.25
    for k in (B1, B2):
        V[re(k), re(k)] = V[im(k), im(k)] = (p.n_mech_init + 0.5) / 2
    return V


def _complex_system(tau: float, p: ProtocolParams, s: PulseSchedule, norm: float, reading: bool):
    """Complex drift ``Fc`` (8x8) and noise loading ``Bc`` (8x4) at one time.

    ``reading`` opens the output record for the whole RK4 step. Noise columns: optical 1, optical 2, mechanical 1, mechanical 2, each a
    complex white noise with ``<xi xi^*> = delta(tau - tau')/2``.
    """
    k = float(kappa(tau, s))
    g = float(coupling_g(tau, s))
    u = float(envelope_u(tau, s.tau2, norm)) if reading else 0.0
    sq = math.sqrt(k)
    mech = math.sqrt(2 * p.gamma_m * (2 * p.n_bath + 1))
    Fc = np.zeros((N_COMPLEX, N_COMPLEX), dtype=complex)
    Bc = np.zeros((N_COMPLEX, 4), dtype=complex)
    for m, (a, d, b, o) in enumerate([(A1, D1, B1, O1), (A2, D2, B2, O2)]):
        Fc[a, a] = -k
        Fc[d, a] = 2 * sq
        Fc[d, d] = -1.0
        Fc[d, b] = -1j * g
        Fc[b, d] = -1j * g
        Fc[b, b] = -p.gamma_m
        Fc[o, d] = math.sqrt(2) * u
        Fc[o, a] = -math.sqrt(2 * k) * u
        Bc[a, m] = math.sqrt(2 * k)
        Bc[d, m] = -math.sqrt(2)
        Bc[o, m] = u
        Bc[b, 2 + m] = mech
    return Fc, Bc


def _real_system(tau, p, s, norm, reading):
    Fc, Bc = _complex_system(tau, p, s, norm, reading)
    F = np.block([[Fc.real, -Fc.imag], [Fc.imag, Fc.real]])
    Br = np.block([[Bc.real, -Bc.imag], [Bc.imag, Bc.real]])
    # real and imaginary noise parts each carry intensity 1/4
    Q = 0.25 * Br @ Br.T
    return F, Q


def propagate_covariance(
    p: ProtocolParams, s: PulseSchedule, check_psd: bool = True, record: bool = False
):
    """Integrate the covariance ODE over ``[0, tau_max]`` on the schedule grid.

    Returns:
        Final :class:`QuadCovariance`; with ``record=True`` also the list of
        covariances at every grid point.

    Raises:
        NumericalError: if an intermediate covariance loses positivity.
    """
    norm = norm_restricted(readout_window(s))
    n = s.n_steps
    h = s.tau_max / n
    V = initial_covariance(p)
    trace = [V.copy()] if record else None

    def rhs(V, F, Q):
        FV = F @ V
        return FV + FV.T + Q

    reading = False
    F0, Q0 = _real_system(0.0, p, s, norm, reading)
    for i in range(n):
        t1 = s.tau_max * (i + 1) / n
        tm = s.tau_max * (i + 0.5) / n
        if not reading and tm >= s.switch_time:
            reading = True
            F0, Q0 = _real_system(s.tau_max * i / n, p, s, norm, reading)
        Fm, Qm = _real_system(tm, p, s, norm, reading)
        F1, Q1 = _real_system(t1, p, s, norm, reading)
        k1 = rhs(V, F0, Q0)
        k2 = rhs(V + 0.5 * h * k1, Fm, Qm)
        k3 = rhs(V + 0.5 * h * k2, Fm, Qm)
        k4 = rhs(V + h * k3, F1, Q1)
        V = V + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        V = 0.5 * (V + V.T)
        F0, Q0 = F1, Q1
        if check_psd:
            lo = np.linalg.eigvalsh(V)[0]
            if lo < -PSD_TOL * max(1.0, float(np.abs(V).max())):
                raise NumericalError(f"covariance lost positivity at tau={t1:.4f} (eigenvalue {lo:.3e})")
        if record:
            trace.append(V.copy())
    result = QuadCovariance(V)
    return (result, trace) if record else result


@dataclass(frozen=True)
class OracleCriteria:
    delta_ent: CriterionResult
    epr12: CriterionResult
    epr21: CriterionResult


def criterion_from_covariance(V) -> OracleCriteria:
    """Optimized criteria on exact output moments."""
    cov = V.output if isinstance(V, QuadCovariance) else np.asarray(V)
    return OracleCriteria(
        delta_ent=optimize_criterion(cov, "ent", "1|2"),
        epr12=optimize_criterion(cov, "epr", "1|2"),
        epr21=optimize_criterion(cov, "epr", "2|1"),
    )


def gaussian_fidelity(v_out, r: float) -> float:
    """Overlap of a zero-mean Gaussian state with the squeezed target:
    ``1 / (4 sqrt(det(V_psi + V_rho)))`` for 4x4 quadrature covariances."""
    cov = v_out.output if isinstance(v_out, QuadCovariance) else np.asarray(v_out, dtype=float)
    det = np.linalg.det(tmsv_covariance(r) + cov)
    if not det > 0:
        raise NumericalError(f"singular covariance sum (det={det})")
    return float(1.0 / (4.0 * math.sqrt(det)))
