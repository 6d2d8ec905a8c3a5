"""Moment accumulation and the gain/phase-optimized correlation criteria.

Samples are output-mode amplitudes ``(A1, A2)``; their real variables are
ordered ``(Re A1, Im A1, Re A2, Im A2)`` throughout. Wigner samples estimate
symmetrically ordered moments, so sample variances are directly the quadrature
variances the criteria need (vacuum: 1/4 per quadrature).

Quadratures: ``X_k^theta = Re(e^{-i theta} A_k)`` and
``P_k^theta = X_k^{theta + pi/2}``. With ``Delta`` the standard deviation,

    entanglement  4 Delta(X1 - G X2^theta) Delta(P1 + G P2^theta) / (1 + G^2)
    steering 1|2  4 Delta(X1 - G X2^theta) Delta(P1 + G P2^theta)

minimized over real ``G`` and ``theta in [0, pi)``. A negative ``G`` stands in
for ``theta + pi``, so this range covers every relative phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegenerateCovarianceError, InsufficientSamplesError

Kind = Literal["ent", "epr"]
Direction = Literal["1|2", "2|1"]

G_BOUND = 10.0
N_THETA = 64
N_GAIN = 401
N_BOOTSTRAP = 200
MIN_CRITERION_SAMPLES = 100
MIN_FIDELITY_SAMPLES = 10_000


def as_real(samples: np.ndarray) -> np.ndarray:
    """``(n, 2)`` complex amplitudes to ``(n, 4)`` real quadrature variables."""
    a = np.asarray(samples)
    if np.iscomplexobj(a) or a.shape[-1] == 2:
        a = np.asarray(a, dtype=complex)
        return np.stack([a[:, 0].real, a[:, 0].imag, a[:, 1].real, a[:, 1].imag], axis=1)
    return np.asarray(a, dtype=float)


@dataclass
class MomentAccumulator:
    """Mergeable first/second raw-moment sums, kept per block.

    Totals are always formed by summing blocks in ascending block id, so the
    result does not depend on the order in which blocks were added or merged.
    """

    blocks: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, samples: np.ndarray, n_blocks: int = 1) -> "MomentAccumulator":
        """Split samples into ``n_blocks`` contiguous blocks."""
        x = as_real(samples)
        acc = cls()
        for b, chunk in enumerate(np.array_split(x, max(1, min(n_blocks, len(x))))):
            acc.add(chunk, block=b)
        return acc

    def add(self, samples: np.ndarray, block: int = 0) -> "MomentAccumulator":
        x = as_real(samples)
        n, s1, s2 = self.blocks.get(block, (0, np.zeros(4), np.zeros((4, 4))))
        self.blocks[block] = (n + len(x), s1 + x.sum(axis=0), s2 + x.T @ x)
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        out = MomentAccumulator(dict(self.blocks))
        for b, (n, s1, s2) in other.blocks.items():
            if b in out.blocks:
                m, t1, t2 = out.blocks[b]
                out.blocks[b] = (m + n, t1 + s1, t2 + s2)
            else:
                out.blocks[b] = (n, s1, s2)
        return out

    def _totals(self, ids=None):
        ids = sorted(self.blocks) if ids is None else ids
        n, s1, s2 = 0, np.zeros(4), np.zeros((4, 4))
        for b in ids:
            bn, b1, b2 = self.blocks[b]
            n, s1, s2 = n + bn, s1 + b1, s2 + b2
        return n, s1, s2

    @property
    def count(self) -> int:
        return self._totals()[0]

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def mean(self) -> np.ndarray:
        n, s1, _ = self._totals()
        return s1 / n

    @property
    def second_moment(self) -> np.ndarray:
        n, _, s2 = self._totals()
        return s2 / n

    def covariance(self, ids=None) -> np.ndarray:
        n, s1, s2 = self._totals(ids)
        if n < 2:
            raise InsufficientSamplesError(f"need at least 2 samples, have {n}")
        mu = s1 / n
        return (s2 - n * np.outer(mu, mu)) / (n - 1)

    def block_covariances(self) -> np.ndarray:
        """Covariance estimated within each block, shape ``(n_blocks, 4, 4)``."""
        return np.stack([self.covariance([b]) for b in sorted(self.blocks)])

    def covariance_error(self) -> np.ndarray:
        """Standard error of each covariance entry from the spread across blocks."""
        if self.n_blocks < 2:
            return np.full((4, 4), np.nan)
        c = self.block_covariances()
        w = np.array([self.blocks[b][0] for b in sorted(self.blocks)], dtype=float)
        w /= w.sum()
        mean = np.tensordot(w, c, axes=1)
        var = np.tensordot(w, (c - mean) ** 2, axes=1) * len(w) / (len(w) - 1)
        return np.sqrt(var * np.sum(w**2))

    def bootstrap(self, rng: np.random.Generator, n_rep: int = N_BOOTSTRAP):
        """Yield covariances of block-bootstrap resamples."""
        ids = np.array(sorted(self.blocks))
        stats = [self.blocks[b] for b in ids]
        ns = np.array([s[0] for s in stats], dtype=float)
        s1 = np.stack([s[1] for s in stats])
        s2 = np.stack([s[2] for s in stats])
        for _ in range(n_rep):
            counts = np.bincount(rng.integers(0, len(ids), len(ids)), minlength=len(ids)).astype(float)
            n = counts @ ns
            mu = (counts @ s1.reshape(len(ids), -1)).reshape(4) / n
            m2 = np.tensordot(counts, s2, axes=1)
            yield (m2 - n * np.outer(mu, mu)) / (n - 1)


@dataclass(frozen=True)
class CriterionResult:
    value: float
    gain: float
    phase: float
    std_error: float = float("nan")


# --------------------------------------------------------------------------
# criterion evaluation on a 4x4 covariance


def _oriented(cov: np.ndarray, direction: Direction) -> np.ndarray:
    if direction == "1|2":
        return cov
    if direction == "2|1":
        idx = [2, 3, 0, 1]
        return cov[np.ix_(idx, idx)]
    raise ValueError(f"unknown direction {direction!r}")


def _pair_terms(cov: np.ndarray, theta):
    """Coefficients of ``Var(X1 - G X2) = a - 2 b G + c G^2`` and
    ``Var(P1 + G P2) = d + 2 e G + f G^2`` at phase ``theta``."""
    ct, st = np.cos(theta), np.sin(theta)
    a = cov[0, 0]
    d = cov[1, 1]
    b = ct * cov[0, 2] + st * cov[0, 3]
    e = -st * cov[1, 2] + ct * cov[1, 3]
    c = ct**2 * cov[2, 2] + 2 * ct * st * cov[2, 3] + st**2 * cov[3, 3]
    f = st**2 * cov[2, 2] - 2 * ct * st * cov[2, 3] + ct**2 * cov[3, 3]
    return a, b, c, d, e, f


def criterion_value(cov: np.ndarray, gain, theta, kind: Kind = "ent", direction: Direction = "1|2"):
    """Criterion at fixed gain and phase (broadcasts over array inputs)."""
    a, b, c, d, e, f = _pair_terms(_oriented(np.asarray(cov), direction), theta)
    vx = np.maximum(a - 2 * b * gain + c * gain**2, 0.0)
    vp = np.maximum(d + 2 * e * gain + f * gain**2, 0.0)
    val = 4 * np.sqrt(vx * vp)
    return val / (1 + gain**2) if kind == "ent" else val


def quad_variance(cov_or_acc, theta: float, gain: float, combo: Literal["minus_X", "plus_P"]) -> float:
    """Variance of ``X1 - G X2^theta`` (``minus_X``) or ``P1 + G P2^theta`` (``plus_P``)."""
    cov = cov_or_acc.covariance() if isinstance(cov_or_acc, MomentAccumulator) else np.asarray(cov_or_acc)
    a, b, c, d, e, f = _pair_terms(cov, theta)
    if combo == "minus_X":
        return float(a - 2 * b * gain + c * gain**2)
    if combo == "plus_P":
        return float(d + 2 * e * gain + f * gain**2)
    raise ValueError(f"unknown combo {combo!r}")


def _best_gain(cov, theta, kind, gains):
    vals = criterion_value(cov, gains, theta, kind)
    i = int(np.argmin(vals))
    lo = gains[max(i - 1, 0)]
    hi = gains[min(i + 1, len(gains) - 1)]
    res = minimize_scalar(
        lambda g: float(criterion_value(cov, g, theta, kind)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-11},
    )
    if res.fun <= vals[i]:
        return float(res.x), float(res.fun)
    return float(gains[i]), float(vals[i])


def optimize_criterion(cov: np.ndarray, kind: Kind = "ent", direction: Direction = "1|2") -> CriterionResult:
    """Minimize the criterion over ``(G, theta)`` on a 4x4 quadrature covariance.

    A 64-point phase grid times a gain grid locates the basin; bounded Brent
    searches (golden section with parabolic steps) then refine the phase, with
    the gain re-optimized at every trial phase.
    """
    cov = _oriented(np.asarray(cov, dtype=float), direction)
    if not np.all(np.isfinite(cov)):
        raise DegenerateCovarianceError("non-finite covariance")
    if min(cov[0, 0], cov[1, 1], cov[2, 2], cov[3, 3]) <= 0:
        raise DegenerateCovarianceError("a quadrature has zero variance")

    thetas = np.pi * np.arange(N_THETA) / N_THETA
    gains = np.linspace(-G_BOUND, G_BOUND, N_GAIN)
    grid = criterion_value(cov, gains[None, :], thetas[:, None], kind)
    it, _ = np.unravel_index(np.argmin(grid), grid.shape)
    step = np.pi / N_THETA

    res = minimize_scalar(
        lambda th: _best_gain(cov, th, kind, gains)[1],
        bounds=(thetas[it] - step, thetas[it] + step),
        method="bounded",
        options={"xatol": 1e-10},
    )
    theta = float(res.x)
    gain, value = _best_gain(cov, theta, kind, gains)
    grid_min = float(grid.min())
    if grid_min < value:
        # grid point beat the refinement (flat or noisy objective)
        ig = int(np.argmin(grid[it]))
        theta, gain, value = float(thetas[it]), float(gains[ig]), grid_min
    # theta + pi with -G is the same quadrature pair
    if theta < 0:
        theta, gain = theta + np.pi, -gain
    elif theta >= np.pi:
        theta, gain = theta - np.pi, -gain
    return CriterionResult(value=value, gain=gain, phase=theta)


def _with_error(acc: MomentAccumulator, kind: Kind, direction: Direction, rng, n_rep: int) -> CriterionResult:
    if acc.count < MIN_CRITERION_SAMPLES:
        raise InsufficientSamplesError(f"need at least {MIN_CRITERION_SAMPLES} samples, have {acc.count}")
    best = optimize_criterion(acc.covariance(), kind, direction)
    if acc.n_blocks < 2 or n_rep < 2:
        return best
    rng = np.random.default_rng(0) if rng is None else rng
    reps = [optimize_criterion(c, kind, direction).value for c in acc.bootstrap(rng, n_rep)]
    return CriterionResult(best.value, best.gain, best.phase, float(np.std(reps, ddof=1)))


def delta_ent(acc: MomentAccumulator, rng: np.random.Generator | None = None, n_rep: int = N_BOOTSTRAP) -> CriterionResult:
    """Optimized entanglement criterion with a block-bootstrap standard error.

    Values below 1 certify entanglement between the two output modes.
    """
    return _with_error(acc, "ent", "1|2", rng, n_rep)


def epr_steering(
    acc: MomentAccumulator,
    direction: Direction = "1|2",
    rng: np.random.Generator | None = None,
    n_rep: int = N_BOOTSTRAP,
) -> CriterionResult:
    """Optimized steering criterion; ``"2|1"`` swaps the roles of the modes."""
    return _with_error(acc, "epr", direction, rng, n_rep)


# --------------------------------------------------------------------------
# fidelity against the two-mode squeezed target


def w_psi(a1, a2, r: float):
    """Wigner density of the two-mode squeezed vacuum at ``(a1, a2)``."""
    a1 = np.asarray(a1, dtype=complex)
    a2 = np.asarray(a2, dtype=complex)
    plus = (a1 + np.conj(a2)) / math.sqrt(2)
    minus = (a1 - np.conj(a2)) / math.sqrt(2)
    expo = -2 * (np.abs(plus) ** 2 * math.exp(-2 * r) + np.abs(minus) ** 2 * math.exp(2 * r))
    return 4 / np.pi**2 * np.exp(expo)


def fidelity_mc(
    samples: np.ndarray,
    r: float,
    n_blocks: int = 100,
    rng: np.random.Generator | None = None,
    n_rep: int = N_BOOTSTRAP,
    min_samples: int = MIN_FIDELITY_SAMPLES,
) -> tuple[float, float]:
    """Sampled overlap ``pi^2 <W_psi>`` with a block-bootstrap standard error.

    Args:
        samples: complex output amplitudes, shape ``(n, 2)``.
        r: squeezing of the target state.

    Returns:
        ``(F, std_error)``.
    """
    a = np.asarray(samples, dtype=complex)
    if len(a) < min_samples:
        raise InsufficientSamplesError(f"need at least {min_samples} samples, have {len(a)}")
    weights = np.pi**2 * w_psi(a[:, 0], a[:, 1], r)
    blocks = np.array_split(weights, min(n_blocks, len(weights)))
    sums = np.array([b.sum() for b in blocks])
    sizes = np.array([len(b) for b in blocks], dtype=float)
    F = float(sums.sum() / sizes.sum())
    rng = np.random.default_rng(0) if rng is None else rng
    idx = rng.integers(0, len(blocks), (n_rep, len(blocks)))
    reps = sums[idx].sum(axis=1) / sizes[idx].sum(axis=1)
    return F, float(np.std(reps, ddof=1))
