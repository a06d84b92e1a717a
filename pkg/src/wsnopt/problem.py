"""Decentralized-detection power allocation problem for wireless sensor networks.

A field of ``L`` sensors observes a common binary event in correlated Gaussian
noise, amplifies the observation with a per-sensor gain, and forwards it over a
Rayleigh-faded channel to a fusion center.  The fusion center applies a
log-likelihood-ratio threshold rule, and its error probability has a closed
form in terms of the gain vector.  The optimization problem is to minimize the
total transmit power subject to a ceiling on that error probability, handled
here through a dynamic multi-stage penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, toeplitz
from scipy.special import erfc

from .evo import Bounds

# Rayleigh scale that yields unit-mean channel amplitudes.
RAYLEIGH_UNIT_MEAN_SCALE = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class WsnConfig:
    """Static description of one sensor-network detection instance.

    Attributes
    ----------
    num_sensors : int
        Number of sensors ``L`` (also the optimization dimension).
    snr_db : float
        Signal-to-noise ratio in dB; the squared signal amplitude is
        ``10**(snr_db/10) * sigma_v2``.
    correlation : float
        Exponential decay base of the inter-sensor noise correlation,
        in ``[0, 1)``.  Zero means spatially white observation noise.
    spacing : float
        Inter-sensor distance multiplying the index gap in the
        correlation exponent.
    sigma_v2 : float
        Observation noise variance at each sensor.
    sigma_w2 : float
        Receiver (channel) noise variance at the fusion center.
    epsilon : float
        Ceiling on the fusion error probability, in ``(0, 0.5)``.
    prior_ratio : float
        Likelihood-ratio decision threshold; 1.0 corresponds to equal
        priors.
    fading_seed : int
        Seed used when drawing the channel amplitudes for this instance.
    """

    num_sensors: int
    snr_db: float = 10.0
    correlation: float = 0.0
    spacing: float = 1.0
    sigma_v2: float = 1.0
    sigma_w2: float = 1.0
    epsilon: float = 0.1
    prior_ratio: float = 1.0
    fading_seed: int = 0

    def __post_init__(self):
        if self.num_sensors < 1:
            raise ValueError("num_sensors must be at least 1")
        if not 0.0 <= self.correlation < 1.0:
            raise ValueError("correlation must lie in [0, 1)")
        if self.spacing <= 0.0:
            raise ValueError("spacing must be positive")
        if self.sigma_v2 <= 0.0 or self.sigma_w2 <= 0.0:
            raise ValueError("noise variances must be positive")
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError("epsilon must lie in (0, 0.5)")
        if self.prior_ratio <= 0.0:
            raise ValueError("prior_ratio must be positive")

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def signal_power(self) -> float:
        """Squared amplitude of the transmitted event signal."""
        return self.snr_linear * self.sigma_v2


def sample_fading(config: WsnConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Draw the channel amplitude vector for one instance.

    Amplitudes are Rayleigh with unit mean and are returned sorted in
    descending order, so sensor 0 always has the strongest channel.  With
    ``rng=None`` the draw is a pure function of ``config.fading_seed``.
    """
    if rng is None:
        rng = np.random.default_rng(config.fading_seed)
    h = rng.rayleigh(scale=RAYLEIGH_UNIT_MEAN_SCALE, size=config.num_sensors)
    return np.sort(h)[::-1].copy()


def build_signal_covariance(config: WsnConfig) -> np.ndarray:
    """Toeplitz covariance of the observation noise across sensors.

    Entry ``(i, j)`` equals ``sigma_v2 * correlation**(spacing * |i - j|)``.
    """
    lags = config.spacing * np.arange(config.num_sensors)
    first_col = config.sigma_v2 * np.power(config.correlation, lags)
    return toeplitz(first_col)


def effective_noise_covariance(config: WsnConfig, h: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Covariance of the received vector noise after amplify-and-forward.

    With the per-sensor scaling ``a = h * g`` this is
    ``diag(a) @ Sigma_v @ diag(a) + sigma_w2 * I``.
    """
    a = np.asarray(h, dtype=float) * np.asarray(g, dtype=float)
    sigma_v = build_signal_covariance(config)
    cov = sigma_v * np.outer(a, a)
    cov[np.diag_indices_from(cov)] += config.sigma_w2
    return cov


def q_function(x):
    """Gaussian tail probability Q(x) = 0.5 * erfc(x / sqrt(2))."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def _deflection(config: WsnConfig, h: np.ndarray, g: np.ndarray) -> float:
    """Squared deflection statistic through the SPD factorization path."""
    a = np.asarray(h, dtype=float) * np.asarray(g, dtype=float)
    cov = effective_noise_covariance(config, h, g)
    # Factorization solve; an explicit matrix inverse is never formed.
    factor = cho_factor(cov, lower=True)
    y = cho_solve(factor, a)
    return config.signal_power * float(a @ y)


def _deflection_diagonal(config: WsnConfig, h: np.ndarray, g: np.ndarray) -> float:
    """Closed-form squared deflection for spatially white observation noise."""
    a2 = (np.asarray(h, dtype=float) * np.asarray(g, dtype=float)) ** 2
    terms = config.signal_power * a2 / (a2 * config.sigma_v2 + config.sigma_w2)
    return float(terms.sum())


def fusion_error_probability(
    config: WsnConfig, h: np.ndarray, g: np.ndarray, method: str = "auto"
) -> float:
    """Error probability of the fusion-center threshold rule.

    ``method`` selects the computation path: "matrix" uses the covariance
    factorization, "diagonal" the white-noise closed form (valid only when
    ``correlation == 0``), and "auto" picks the diagonal path when it
    applies.  Both paths agree to floating-point accuracy on white noise.

    Raises ``numpy.linalg.LinAlgError`` when the effective covariance is
    not positive definite (a degenerate configuration).
    """
    if method == "auto":
        method = "diagonal" if config.correlation == 0.0 else "matrix"
    if method == "diagonal":
        if config.correlation != 0.0:
            raise ValueError("diagonal path requires correlation == 0")
        s = _deflection_diagonal(config, h, g)
    elif method == "matrix":
        s = _deflection(config, h, g)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(q_function(0.5 * math.sqrt(max(s, 0.0))))


def monte_carlo_error_rate(
    config: WsnConfig,
    h: np.ndarray,
    g: np.ndarray,
    n_samples: int,
    rng: np.random.Generator,
    chunk: int = 1 << 16,
) -> float:
    """Empirical fusion error rate from simulated received vectors.

    Draws ``n_samples`` received vectors under each hypothesis, applies the
    log-likelihood-ratio rule with threshold ``log(prior_ratio)``, and
    returns the equal-prior average of the false-alarm and miss rates.
    Serves as the independent oracle for ``fusion_error_probability``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    a = np.asarray(h, dtype=float) * np.asarray(g, dtype=float)
    m = math.sqrt(config.signal_power)
    cov = effective_noise_covariance(config, h, g)
    chol = cholesky(cov, lower=True)
    w = cho_solve((chol, True), a)
    offset = 0.5 * config.signal_power * float(a @ w)
    threshold = math.log(config.prior_ratio)
    mean_signal = m * a

    false_alarms = 0
    misses = 0
    remaining = n_samples
    while remaining > 0:
        n = min(chunk, remaining)
        z = rng.standard_normal((n, len(a)))
        noise = z @ chol.T
        # Under the null hypothesis the received vector is pure noise.
        t0 = m * (noise @ w) - offset
        false_alarms += int(np.count_nonzero(t0 >= threshold))
        # Under the alternative the scaled signal is added.
        t1 = m * ((noise + mean_signal) @ w) - offset
        misses += int(np.count_nonzero(t1 < threshold))
        remaining -= n
    return 0.5 * (false_alarms + misses) / n_samples


def total_power(g: np.ndarray) -> float:
    """Total transmit power, the sum of squared gains."""
    g = np.asarray(g, dtype=float)
    return float(g @ g)


def constraint_margin(config: WsnConfig, h: np.ndarray, g: np.ndarray) -> float:
    """Error-probability constraint value; positive means violated."""
    return fusion_error_probability(config, h, g) - config.epsilon


def violation_weight(x: float) -> float:
    """Stage weight of one violation term: 10, 100, or 300 by magnitude."""
    if x <= 0.1:
        return 10.0
    if x <= 1.0:
        return 100.0
    return 300.0


def violation_exponent(x: float) -> float:
    """Stage exponent of one violation term: linear below 1, squared above."""
    return 1.0 if x < 1.0 else 2.0


def _penalty_terms(violations: np.ndarray) -> float:
    """Sum of staged penalty terms over the positive violations only."""
    v = violations[violations > 0.0]
    if v.size == 0:
        return 0.0
    weights = np.where(v <= 0.1, 10.0, np.where(v <= 1.0, 100.0, 300.0))
    powers = np.where(v < 1.0, v, v * v)
    return float(np.sum(weights * powers))


def penalized_objective(
    config: WsnConfig, h: np.ndarray, g: np.ndarray, iteration: int
) -> float:
    """Total power plus the iteration-scaled penalty for constraint violations.

    Violations comprise the positive part of the error-probability margin
    and the positive part of each negated gain.  On feasible points the
    result equals ``total_power(g)`` exactly.
    """
    if iteration < 1:
        raise ValueError("iteration must be at least 1")
    g = np.asarray(g, dtype=float)
    violations = np.concatenate(([constraint_margin(config, h, g)], -g))
    penalty = _penalty_terms(violations)
    if penalty == 0.0:
        return total_power(g)
    return total_power(g) + iteration * penalty


class PowerAllocationProblem:
    """A config paired with one channel draw, evaluated as a penalized objective.

    Instances expose scalar and batch evaluation with an explicit penalty
    iteration, so the surrounding budget tracker can scale the penalty as
    the search progresses.  For white observation noise the batch path is
    fully vectorized.
    """

    def __init__(
        self,
        config: WsnConfig,
        fading: np.ndarray | None = None,
        bounds: Bounds | None = None,
    ):
        self.config = config
        self.fading = sample_fading(config) if fading is None else np.asarray(fading, float)
        if self.fading.shape != (config.num_sensors,):
            raise ValueError("fading vector length must match num_sensors")
        self.bounds = bounds if bounds is not None else Bounds()

    @property
    def dimension(self) -> int:
        return self.config.num_sensors

    def power(self, g: np.ndarray) -> float:
        return total_power(g)

    def error_probability(self, g: np.ndarray) -> float:
        return fusion_error_probability(self.config, self.fading, g)

    def constraint_margin(self, g: np.ndarray) -> float:
        return constraint_margin(self.config, self.fading, g)

    def value(self, g: np.ndarray, iteration: int) -> float:
        return penalized_objective(self.config, self.fading, g, iteration)

    def batch(self, G: np.ndarray, iterations: np.ndarray):
        """Evaluate a stack of gain vectors.

        Returns ``(values, feasible, powers)`` where ``feasible`` marks rows
        with no active violation term and ``powers`` holds the raw total
        power of each row.
        """
        G = np.atleast_2d(np.asarray(G, dtype=float))
        iterations = np.asarray(iterations, dtype=float)
        cfg = self.config
        powers = np.einsum("ij,ij->i", G, G)

        if cfg.correlation == 0.0:
            a2 = (G * self.fading) ** 2
            terms = cfg.signal_power * a2 / (a2 * cfg.sigma_v2 + cfg.sigma_w2)
            pe = q_function(0.5 * np.sqrt(terms.sum(axis=1)))
            margins = pe - cfg.epsilon
        else:
            margins = np.array([self.constraint_margin(row) for row in G])

        q0 = np.maximum(margins, 0.0)
        w0 = np.where(q0 <= 0.1, 10.0, np.where(q0 <= 1.0, 100.0, 300.0))
        p0 = np.where(q0 < 1.0, q0, q0 * q0)
        penalties = np.where(q0 > 0.0, w0 * p0, 0.0)
        if np.any(G < 0.0):
            neg = np.maximum(-G, 0.0)
            wn = np.where(neg <= 0.1, 10.0, np.where(neg <= 1.0, 100.0, 300.0))
            pn = np.where(neg < 1.0, neg, neg * neg)
            penalties = penalties + np.sum(np.where(neg > 0.0, wn * pn, 0.0), axis=1)
        feasible = penalties == 0.0
        values = np.where(feasible, powers, powers + iterations * penalties)
        return values, feasible, powers
