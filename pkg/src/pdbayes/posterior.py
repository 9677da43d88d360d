"""Closed-form posterior of an i.i.d. cluster point process given observed diagrams.

The prior is a Gaussian-mixture intensity with a finite cardinality pmf, the
observation kernel is an isotropic Gaussian, and spurious observed points follow
an exponential intensity with binomial cardinality. The posterior intensity is
again a Gaussian mixture (prior components scaled for vanished features plus one
shrunk component per observed point and prior component), and the posterior
cardinality is a reweighting of the prior pmf.

All combinatorial sums are accumulated as logarithms because factorials and
products of the association ratios overflow doubles for a few dozen points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .persistence import PersistenceDiagram
from .pointprocess import (
    BinomialCardinality,
    GaussianMixtureIntensity,
    IidClusterPrior,
    ObservationModel,
    UnexpectedModel,
    _as_wedge_points,
    log_binomial_pmf,
    log_unexpected_intensity,
    truncated_gaussian_mass,
)


class PosteriorUnderflowError(FloatingPointError):
    """The model gives the observed diagram zero likelihood."""


@dataclass(frozen=True)
class CardinalityPmf:
    probs: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.probs, dtype=float)).copy()
        if p.ndim != 1 or len(p) == 0:
            raise ValueError("cardinality pmf must be a nonempty vector")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("cardinality probabilities must be finite and >= 0")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"cardinality probabilities sum to {p.sum()!r}, expected 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n_max(self) -> int:
        return len(self.probs) - 1

    @classmethod
    def from_binomial(cls, card: BinomialCardinality, n_max=None):
        n_max = card.n_max if n_max is None else n_max
        return cls(card.pmf_vector(n_max + 1))

    @classmethod
    def uniform(cls, n_max: int):
        return cls(np.full(n_max + 1, 1.0 / (n_max + 1)))


# ---------------------------------------------------------------------------
# Elementary pieces
# ---------------------------------------------------------------------------


def _component_arrays(intensity: GaussianMixtureIntensity):
    return intensity.weights, intensity.means, intensity.variances


def _log_q(intensity: GaussianMixtureIntensity, obs: ObservationModel, Y):
    """log q_l(y) for every observed point (rows) and prior component (columns)."""
    Y = np.asarray(Y, dtype=float).reshape(-1, 2)
    s = intensity.variances + obs.sigma_yo
    d2 = ((Y[:, None, :] - intensity.means[None, :, :]) ** 2).sum(axis=2)
    return -0.5 * d2 / s[None, :] - np.log(2.0 * np.pi * s)[None, :]


def marginal_q(intensity: GaussianMixtureIntensity, l: int, obs: ObservationModel, y) -> float:
    """Density of ``y`` under prior component ``l`` convolved with the observation kernel."""
    y = _as_wedge_points(y)
    return float(np.exp(_log_q(intensity, obs, y)[0, l]))


def _log_nu(intensity, obs, unexpected, Y):
    if obs.alpha == 0.0 or len(Y) == 0:
        return np.full(len(Y), -np.inf)
    lq = _log_q(intensity, obs, Y)
    mix = logsumexp(lq + np.log(intensity.weights)[None, :], axis=1)
    return math.log(obs.alpha) + mix - log_unexpected_intensity(unexpected, Y)


def nu_values(diagram, prior, obs: ObservationModel, unexpected: UnexpectedModel) -> np.ndarray:
    """Association ratio of each observed point: alpha <c, q(y)> / spurious intensity at y."""
    intensity = _intensity_of(prior)
    Y = _diagram_points(diagram)
    return np.exp(_log_nu(intensity, obs, unexpected, Y))


def elementary_symmetric(values) -> np.ndarray:
    """e[k] = sum over k-subsets of the product of their entries, for k = 0..K."""
    v = np.asarray(values, dtype=float).ravel()
    e = np.zeros(len(v) + 1)
    e[0] = 1.0
    for j, x in enumerate(v, start=1):
        e[1 : j + 1] = e[1 : j + 1] + x * e[0:j]
    return e


def log_elementary_symmetric(log_values) -> np.ndarray:
    """Logarithms of the elementary symmetric functions of exp(log_values)."""
    lv = np.asarray(log_values, dtype=float).ravel()
    le = np.full(len(lv) + 1, -np.inf)
    le[0] = 0.0
    for j, x in enumerate(lv, start=1):
        le[1 : j + 1] = np.logaddexp(le[1 : j + 1], x + le[0:j])
    return le


def _log_esf_without(log_e, log_v, i):
    """Log elementary symmetric functions with entry ``i`` removed.

    Uses the forward downdate e'_k = e_k - v_i e'_{k-1}. Falls back to a full
    recomputation once the accumulated cancellation could cost more than about
    four significant digits.
    """
    lvi = log_v[i]
    K = len(log_v)
    out = np.full(K, -np.inf)
    out[0] = 0.0
    if lvi == -np.inf:
        out[:] = log_e[:K]
        return out
    amp = 1.0
    for k in range(1, K):
        sub = lvi + out[k - 1]
        if log_e[k] == -np.inf:
            r = 1.0 if sub > -np.inf else 0.0
        else:
            r = math.exp(sub - log_e[k]) if sub > -np.inf else 0.0
        if r >= 1.0:
            break
        amp = 1.0 + amp * r / (1.0 - r)
        if amp > 1e4:
            break
        out[k] = log_e[k] + math.log1p(-r)
    else:
        return out
    return log_elementary_symmetric(np.delete(log_v, i))


def _log_gamma_vector(a, b, n_max, K, log_e, log_rho_yu, log_L):
    """log Gamma^{a,b}(tau) for tau = 0..n_max; ``log_e`` holds e_{K-a, 0..K-a}."""
    tau = np.arange(n_max + 1)[None, :]
    k = np.arange(K - a + 1)[:, None]
    expo = tau - k - b
    valid = expo >= 0
    expo_c = np.where(valid, expo, 0)
    if log_L == -np.inf:
        power = np.where(expo_c == 0, 0.0, -np.inf)
    else:
        power = expo_c * log_L
    r = K - k - a
    terms = (
        gammaln(r + 1)
        + gammaln(tau + 1)
        - gammaln(expo_c + 1)
        + log_rho_yu[r]
        + power
        + np.asarray(log_e[: K - a + 1])[:, None]
    )
    terms = np.where(valid, terms, -np.inf)
    return logsumexp(terms, axis=0)


def gamma_term(a, b, tau, K, e, unexpected_card: BinomialCardinality, lam_one_minus_alpha) -> float:
    """Gamma^{a,b}(tau) for elementary symmetric values ``e`` (e[k] = e_{K-a,k})."""
    if a not in (0, 1) or b not in (0, 1):
        raise ValueError("a and b must be 0 or 1")
    if tau < 0:
        raise ValueError("tau must be >= 0")
    e = np.asarray(e, dtype=float)
    if len(e) < K - a + 1:
        raise ValueError("e is too short for K - a")
    if K - a < 0:
        return 0.0
    with np.errstate(divide="ignore"):
        log_e = np.log(e[: K - a + 1])
        log_L = math.log(lam_one_minus_alpha) if lam_one_minus_alpha > 0 else -np.inf
    log_rho = np.array([log_binomial_pmf(unexpected_card, j) for j in range(K + 1)])
    return float(np.exp(_log_gamma_vector(a, b, tau, K, log_e, log_rho, log_L)[tau]))


# ---------------------------------------------------------------------------
# Posterior
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PosteriorDistribution:
    """Posterior intensity (Gaussian mixture) and truncated cardinality pmf.

    ``vanished_scale`` multiplies the whole prior intensity; ``weights``,
    ``means`` and ``variances`` describe the observed-point components, already
    divided by the number of observations ``m``.
    """

    prior_intensity: GaussianMixtureIntensity
    vanished_scale: float
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    cardinality: CardinalityPmf
    m: int

    @property
    def n_max(self) -> int:
        return self.cardinality.n_max

    def log_intensity(self, x) -> np.ndarray:
        """Log posterior intensity at each row of ``x`` (no wedge check)."""
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        pri = self.prior_intensity
        mus = np.concatenate([pri.means, self.means.reshape(-1, 2)])
        vs = np.concatenate([pri.variances, self.variances])
        with np.errstate(divide="ignore"):
            lw = np.concatenate([math.log(self.vanished_scale) + np.log(pri.weights) if self.vanished_scale > 0
                                 else np.full(len(pri.weights), -np.inf),
                                 np.log(self.weights)])
        keep = lw > -np.inf
        if not np.any(keep):
            return np.full(len(x), -np.inf)
        mus, vs, lw = mus[keep], vs[keep], lw[keep]
        out = np.empty(len(x))
        step = max(1, 2_000_000 // len(lw))
        for s in range(0, len(x), step):
            xs = x[s : s + step]
            d2 = ((xs[:, None, :] - mus[None, :, :]) ** 2).sum(axis=2)
            lt = lw[None, :] - 0.5 * d2 / vs[None, :] - np.log(2.0 * np.pi * vs)[None, :]
            out[s : s + step] = logsumexp(lt, axis=1)
        return out

    def total_mass(self) -> float:
        """Integral of the posterior intensity over W."""
        mass = self.vanished_scale * self.prior_intensity.wedge_mass()
        for c, mu, s in zip(self.weights, self.means, self.variances):
            mass += c * truncated_gaussian_mass(mu, s)
        return float(mass)


def _intensity_of(prior):
    if isinstance(prior, IidClusterPrior):
        return prior.intensity
    if isinstance(prior, GaussianMixtureIntensity):
        return prior
    raise TypeError("prior must be an IidClusterPrior or a GaussianMixtureIntensity")


def _diagram_points(diagram):
    pts = diagram.points if isinstance(diagram, PersistenceDiagram) else diagram
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    return _as_wedge_points(pts, "observed diagram point") if len(pts) else pts


def _single_observation(Y, intensity, log_rho, obs, unexpected, log_L):
    """Posterior pieces contributed by one observed diagram."""
    K = len(Y)
    n_max = len(log_rho) - 1
    log_rho_yu = np.array([log_binomial_pmf(unexpected.cardinality, j) for j in range(K + 1)])
    log_nu = _log_nu(intensity, obs, unexpected, Y)
    log_e = log_elementary_symmetric(log_nu)

    g00 = _log_gamma_vector(0, 0, n_max, K, log_e, log_rho_yu, log_L)
    log_norm = logsumexp(log_rho + g00)
    if not np.isfinite(log_norm):
        raise PosteriorUnderflowError("the model assigns zero likelihood to the observed diagram")
    log_card = log_rho + g00 - log_norm

    g01 = _log_gamma_vector(0, 1, n_max, K, log_e, log_rho_yu, log_L)
    log_b_empty = logsumexp(log_rho + g01) - log_norm

    comps = None
    if K:
        log_b_y = np.empty(K)
        for i in range(K):
            le_i = _log_esf_without(log_e, log_nu, i)
            g11 = _log_gamma_vector(1, 1, n_max, K, le_i, log_rho_yu, log_L)
            log_b_y[i] = logsumexp(log_rho + g11) - log_norm
        var = intensity.variances[None, :]
        so = obs.sigma_yo
        with np.errstate(divide="ignore"):
            log_alpha = math.log(obs.alpha) if obs.alpha > 0 else -np.inf
        log_c = (
            log_b_y[:, None]
            + log_alpha
            + np.log(intensity.weights)[None, :]
            + _log_q(intensity, obs, Y)
            - log_unexpected_intensity(unexpected, Y)[:, None]
        )
        means = (var[..., None] * Y[:, None, :] + so * intensity.means[None, :, :]) / (var[..., None] + so)
        vs = np.broadcast_to(so * var / (var + so), log_c.shape)
        comps = (np.exp(log_c).ravel(), means.reshape(-1, 2), np.array(vs).ravel())
    vanished = (1.0 - obs.alpha) * math.exp(log_b_empty) if obs.alpha < 1.0 else 0.0
    return np.exp(log_card), vanished, comps


def compute_posterior(
    prior,
    obs: ObservationModel,
    unexpected: UnexpectedModel,
    observations,
    n_max=None,
    cardinality=None,
) -> PosteriorDistribution:
    """Posterior intensity and cardinality averaged over the observed diagrams.

    ``prior`` is an IidClusterPrior, or a GaussianMixtureIntensity together with
    ``cardinality`` (a CardinalityPmf or probability vector). ``cardinality``
    also overrides the cardinality of an IidClusterPrior. ``n_max`` defaults to
    the prior's largest representable cardinality.
    """
    intensity = _intensity_of(prior)
    if cardinality is None:
        if not isinstance(prior, IidClusterPrior):
            raise ValueError("a bare intensity needs an explicit cardinality pmf")
        cardinality = prior.cardinality
    if isinstance(cardinality, BinomialCardinality):
        base = cardinality.pmf_vector()
    else:
        base = cardinality.probs if isinstance(cardinality, CardinalityPmf) else CardinalityPmf(cardinality).probs
    if n_max is None:
        n_max = len(base) - 1
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if np.any(base[n_max + 1 :] > 0):
        raise ValueError("n_max is below the support of the prior cardinality")
    rho = np.zeros(n_max + 1)
    rho[: min(len(base), n_max + 1)] = base[: n_max + 1]
    with np.errstate(divide="ignore"):
        log_rho = np.log(rho)

    observations = list(observations)
    if not observations:
        raise ValueError("at least one observed diagram is required")
    diagrams = [_diagram_points(d) for d in observations]
    m = len(diagrams)

    lam = (1.0 - obs.alpha) * intensity.wedge_mass()
    log_L = math.log(lam) if lam > 0 else -np.inf

    # identical diagrams contribute identical terms; evaluate each once
    groups: dict = {}
    for Y in diagrams:
        key = (Y.shape, Y.tobytes())
        groups.setdefault(key, [Y, 0])[1] += 1

    card = np.zeros(n_max + 1)
    vanished = 0.0
    w_parts, mu_parts, var_parts = [], [], []
    for Y, count in groups.values():
        share = count / m
        c_i, v_i, comps = _single_observation(Y, intensity, log_rho, obs, unexpected, log_L)
        card = card + share * c_i
        vanished += share * v_i
        if comps is not None:
            w_parts.append(share * comps[0])
            mu_parts.append(comps[1])
            var_parts.append(comps[2])
    card = card / card.sum()
    cat = (lambda parts, shape: np.concatenate(parts) if parts else np.zeros(shape))
    return PosteriorDistribution(
        prior_intensity=intensity,
        vanished_scale=float(vanished),
        weights=cat(w_parts, (0,)),
        means=cat(mu_parts, (0, 2)),
        variances=cat(var_parts, (0,)),
        cardinality=CardinalityPmf(card),
        m=m,
    )


def posterior_cardinality_stats(post: PosteriorDistribution):
    """(mean, variance, MAP) of the truncated posterior cardinality; MAP ties go to the smaller n."""
    p = post.cardinality.probs if isinstance(post, PosteriorDistribution) else CardinalityPmf(post).probs
    n = np.arange(len(p))
    mean = float(np.dot(n, p))
    var = float(np.dot((n - mean) ** 2, p))
    return mean, var, int(np.argmax(p))


def eval_posterior_intensity(post: PosteriorDistribution, x):
    """Posterior intensity at a point (or rows of points) in W."""
    scalar = np.ndim(x) == 1
    vals = np.exp(post.log_intensity(_as_wedge_points(x)))
    return float(vals[0]) if scalar else vals


def diagram_log_density(post: PosteriorDistribution, diagram) -> float:
    """log rho_post(|D|) + sum of log posterior intensity over the points of D."""
    pts = _diagram_points(diagram)
    if len(pts) > post.n_max:
        raise ValueError(f"diagram has {len(pts)} points, above the truncation n_max={post.n_max}")
    p = post.cardinality.probs[len(pts)]
    if p <= 0:
        return -math.inf
    total = math.log(p)
    if len(pts):
        total += float(np.sum(post.log_intensity(pts)))
    return total


def intensity_grid(post: PosteriorDistribution, b_max: float, p_max: float, nb: int = 100, np_: int = 100):
    """Rows (b, p, intensity / max intensity) on an nb x np_ grid over [0, b_max] x [0, p_max]."""
    if b_max <= 0 or p_max <= 0 or nb < 1 or np_ < 1:
        raise ValueError("grid extents must be > 0 and sizes >= 1")
    bb, pp = np.meshgrid(np.linspace(0.0, b_max, nb), np.linspace(0.0, p_max, np_), indexing="ij")
    pts = np.column_stack([bb.ravel(), pp.ravel()])
    li = post.log_intensity(pts)
    top = li.max()
    vals = np.exp(li - top) if np.isfinite(top) else np.zeros(len(li))
    return np.column_stack([pts, vals])
