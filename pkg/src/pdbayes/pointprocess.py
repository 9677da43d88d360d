"""Prior, observation and spurious-feature models for tilted persistence diagrams.

Points live in the wedge W = {(b, p) : b >= 0, p >= 0}. Gaussian densities are
isotropic with a scalar *variance* (covariance ``sigma * I``) and are not
renormalized to W; masses over W are computed only where an integral needs them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, ndtr


def _as_wedge_points(x, name="point"):
    """Return ``x`` as an (n, 2) float array after checking every row lies in W."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"{name} must have 2 coordinates (birth, persistence)")
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{name} has non-finite coordinates")
    if np.any(pts < 0):
        raise ValueError(f"{name} lies outside the wedge W (negative coordinate)")
    return pts


def gaussian_density(x, mean, var):
    """Isotropic bivariate normal density N(x; mean, var * I), vectorized over rows of ``x``."""
    x = np.asarray(x, dtype=float)
    d2 = np.sum((x - np.asarray(mean, dtype=float)) ** 2, axis=-1)
    return np.exp(-0.5 * d2 / var) / (2.0 * np.pi * var)


@dataclass(frozen=True)
class GaussianMixtureIntensity:
    """Weighted sum of isotropic Gaussians; ``weights`` need not sum to one."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        mu = np.asarray(self.means, dtype=float).reshape(-1, 2)
        var = np.atleast_1d(np.asarray(self.variances, dtype=float))
        if not (len(w) == len(mu) == len(var)) or len(w) == 0:
            raise ValueError("weights, means and variances must have the same nonzero length")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("mixture weights must be finite and > 0")
        if not np.all(np.isfinite(var)) or np.any(var <= 0):
            raise ValueError("mixture variances must be finite and > 0")
        if not np.all(np.isfinite(mu)):
            raise ValueError("mixture means must be finite")
        for name, arr in (("weights", w), ("means", mu), ("variances", var)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_components(cls, components):
        """Build from an iterable of ``(c, (b, p), sigma)`` triples."""
        comps = list(components)
        return cls(
            weights=[c for c, _, _ in comps],
            means=[m for _, m, _ in comps],
            variances=[s for _, _, s in comps],
        )

    def __len__(self):
        return len(self.weights)

    def density(self, x):
        """Mixture value at each row of ``x`` (no wedge check)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for c, m, s in zip(self.weights, self.means, self.variances):
            out = out + c * gaussian_density(x, m, s)
        return out

    def wedge_mass(self) -> float:
        """Integral of the mixture over W."""
        return float(
            sum(c * truncated_gaussian_mass(m, s) for c, m, s in zip(self.weights, self.means, self.variances))
        )


@dataclass(frozen=True)
class BinomialCardinality:
    n_max: int
    p: float

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise ValueError("n_max must be a nonnegative integer")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("binomial p must lie in [0, 1]")
        object.__setattr__(self, "n_max", int(self.n_max))
        object.__setattr__(self, "p", float(self.p))

    def pmf_vector(self, length=None) -> np.ndarray:
        """Probabilities for n = 0 .. length-1 (default n_max), zero-padded."""
        length = self.n_max + 1 if length is None else length
        return np.array([binomial_pmf(self, n) for n in range(length)])


@dataclass(frozen=True)
class ObservationModel:
    alpha: float
    sigma_yo: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not self.sigma_yo > 0 or not math.isfinite(self.sigma_yo):
            raise ValueError("sigma_yo must be finite and > 0")


@dataclass(frozen=True)
class UnexpectedModel:
    mu_yu: float
    cardinality: BinomialCardinality

    def __post_init__(self):
        if not self.mu_yu > 0 or not math.isfinite(self.mu_yu):
            raise ValueError("mu_yu must be finite and > 0")


@dataclass(frozen=True)
class IidClusterPrior:
    intensity: GaussianMixtureIntensity
    cardinality: BinomialCardinality


def eval_prior_intensity(prior, x):
    """Prior mixture intensity at ``x`` (a point or an (n, 2) array of points in W).

    ``prior`` may be an IidClusterPrior or a bare GaussianMixtureIntensity.
    """
    intensity = prior.intensity if isinstance(prior, IidClusterPrior) else prior
    scalar = np.ndim(x) == 1
    vals = intensity.density(_as_wedge_points(x))
    return float(vals[0]) if scalar else vals


def log_binomial_pmf(card: BinomialCardinality, n: int) -> float:
    if n < 0 or n > card.n_max:
        return -math.inf
    p, N = card.p, card.n_max
    if p == 0.0:
        return 0.0 if n == 0 else -math.inf
    if p == 1.0:
        return 0.0 if n == N else -math.inf
    return float(
        gammaln(N + 1) - gammaln(n + 1) - gammaln(N - n + 1) + n * math.log(p) + (N - n) * math.log1p(-p)
    )


def binomial_pmf(card: BinomialCardinality, n: int) -> float:
    return math.exp(log_binomial_pmf(card, n))


def unexpected_intensity(model: UnexpectedModel, y):
    """Exponential spurious-feature intensity mu^2 exp(-mu (b + p)) at points in W."""
    scalar = np.ndim(y) == 1
    pts = _as_wedge_points(y)
    mu = model.mu_yu
    vals = mu * mu * np.exp(-mu * pts.sum(axis=1))
    return float(vals[0]) if scalar else vals


def log_unexpected_intensity(model: UnexpectedModel, pts):
    pts = _as_wedge_points(pts)
    return 2.0 * math.log(model.mu_yu) - model.mu_yu * pts.sum(axis=1)


def truncated_gaussian_mass(mean, sigma: float) -> float:
    """Mass of N(mean, sigma * I) on the closed first quadrant."""
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    b, p = (float(v) for v in mean)
    s = math.sqrt(sigma)
    return float(ndtr(b / s) * ndtr(p / s))


@dataclass(frozen=True)
class ModelConfig:
    """Everything a posterior computation needs besides the data."""

    prior: IidClusterPrior
    obs: ObservationModel
    unexpected: UnexpectedModel
    n_max: int | None = None
