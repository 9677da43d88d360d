"""Sensitivity study on polar-curve diagrams under four prior combinations.

Three noise levels (cases 1-3) are crossed with informative/uninformative prior
intensity and informative/uniform prior cardinality. Each case has a default
parameter row plus the alternative rows ``k`` and ``l``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .persistence import tilt, vr_persistence
from .pointprocess import (
    BinomialCardinality,
    GaussianMixtureIntensity,
    ObservationModel,
    UnexpectedModel,
)
from .posterior import (
    CardinalityPmf,
    PosteriorDistribution,
    compute_posterior,
    intensity_grid,
    posterior_cardinality_stats,
)
from .synthetic import polar_curve_sample

CASE_NOISE = {1: 0.001, 2: 0.005, 3: 0.01}

# (sigma_yo, mu_yu, rho_y) per case and row
CASE_ROWS = {
    1: {"default": (0.01, 20.0, 0.5)},
    2: {"default": (0.01, 20.0, 0.5), "k": (0.001, 25.0, 0.5), "l": (0.001, 16.0, 0.5)},
    3: {"default": (0.01, 20.0, 0.5), "k": (0.001, 20.0, 0.6), "l": (0.001, 20.0, 0.6)},
}

N0 = 15
SENSITIVITY_ALPHA = 0.99
SENSITIVITY_M0 = 15
SENSITIVITY_N_POINTS = 110
SENSITIVITY_SEED = 1

INFORMATIVE_INTENSITY = GaussianMixtureIntensity.from_components(
    [(2.0, (0.2, 0.55), 0.0018), (2.0, (0.17, 0.35), 0.0018)]
)
UNINFORMATIVE_INTENSITY = GaussianMixtureIntensity.from_components([(1.0, (0.5, 0.5), 0.5)])


def informative_cardinality() -> CardinalityPmf:
    """Binomial(15, 4/15): mode at 4 on the support 0..15."""
    return CardinalityPmf.from_binomial(BinomialCardinality(N0, 4.0 / N0))


def uniform_cardinality() -> CardinalityPmf:
    return CardinalityPmf.uniform(N0)


def prior_combination(prior: str, cardinality: str):
    intensities = {"informative": INFORMATIVE_INTENSITY, "uninformative": UNINFORMATIVE_INTENSITY}
    cards = {"informative": informative_cardinality, "uniform": uniform_cardinality}
    if prior not in intensities:
        raise ValueError(f"prior must be one of {sorted(intensities)}")
    if cardinality not in cards:
        raise ValueError(f"cardinality must be one of {sorted(cards)}")
    return intensities[prior], cards[cardinality]()


def case_models(case: int, row: str = "default", alpha: float = SENSITIVITY_ALPHA, m0: int = SENSITIVITY_M0):
    if case not in CASE_ROWS:
        raise ValueError(f"case must be one of {sorted(CASE_ROWS)}")
    if row not in CASE_ROWS[case]:
        raise ValueError(f"case {case} has rows {sorted(CASE_ROWS[case])}")
    sigma_yo, mu_yu, rho_y = CASE_ROWS[case][row]
    return ObservationModel(alpha, sigma_yo), UnexpectedModel(mu_yu, BinomialCardinality(m0, rho_y))


def case_diagram(case: int, n: int = SENSITIVITY_N_POINTS, seed: int = SENSITIVITY_SEED):
    """H1 tilted diagram of a polar-curve cloud at the case's noise variance."""
    if case not in CASE_NOISE:
        raise ValueError(f"case must be one of {sorted(CASE_NOISE)}")
    cloud = polar_curve_sample(n, CASE_NOISE[case], seed)
    return cloud, tilt(vr_persistence(cloud, max_dim=1)[1])


@dataclass(frozen=True)
class SensitivityResult:
    case: int
    row: str
    prior: str
    cardinality: str
    cloud: np.ndarray
    diagram: object
    posterior: PosteriorDistribution

    def stats(self):
        return posterior_cardinality_stats(self.posterior)


def run_case(case, prior="informative", cardinality="informative", row="default",
             n=SENSITIVITY_N_POINTS, seed=SENSITIVITY_SEED, alpha=SENSITIVITY_ALPHA, m0=SENSITIVITY_M0):
    intensity, card = prior_combination(prior, cardinality)
    obs, unexpected = case_models(case, row, alpha, m0)
    cloud, diagram = case_diagram(case, n, seed)
    post = compute_posterior(intensity, obs, unexpected, [diagram], cardinality=card)
    return SensitivityResult(case, row, prior, cardinality, cloud, diagram, post)


def local_maxima(grid_rows, nb: int, np_: int, floor: float = 0.05):
    """Grid points no smaller than any of their 8 neighbours and above ``floor`` (normalized scale).

    ``grid_rows`` is the output of ``intensity_grid`` with the same ``nb`` and ``np_``.
    """
    vals = grid_rows[:, 2].reshape(nb, np_)
    padded = np.pad(vals, 1, constant_values=-np.inf)
    is_max = vals >= floor
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_max &= vals >= padded[1 + di : 1 + di + nb, 1 + dj : 1 + dj + np_]
    idx = np.flatnonzero(is_max.ravel())
    return grid_rows[idx, :2]


def top_points(diagram, k=4):
    order = np.lexsort((np.arange(len(diagram)), -diagram.persistence))
    return diagram.points[order[:k]]


def intensity_maxima(post, b_max=1.0, p_max=1.0, nb=201, np_=201, floor=0.05):
    rows = intensity_grid(post, b_max, p_max, nb, np_)
    return local_maxima(rows, nb, np_, floor)
