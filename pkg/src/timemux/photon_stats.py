"""Pair-number statistics of a heralded pair source.

``p`` always means the probability that a pulse carries at least one pair,
``p = P(k >= 1) = 1 - P(0)``. ``mu`` is the mean pair number of the
untruncated distribution.

Truncated distributions keep the exact model probabilities for
``k < kmax`` and lump the remaining tail into ``k = kmax``.  This keeps
``P(0)`` (and therefore ``p``) exact for any cutoff, and makes ``kmax = 1``
the single-pair sub-model with ``P(1) = p``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class StatsModel(str, enum.Enum):
    THERMAL = "thermal"
    POISSON = "poisson"


class TruncationError(ValueError):
    """Requested pair number lies beyond the distribution cutoff."""


TRUNCATION_TOL = 1e-9


@dataclass(frozen=True)
class PairNumberDistribution:
    model: StatsModel
    mu: float
    kmax: int = 6

    def __post_init__(self):
        object.__setattr__(self, "model", StatsModel(self.model))
        if not (self.mu >= 0 and math.isfinite(self.mu)):
            raise ValueError(f"mu must be finite and >= 0, got {self.mu}")
        if int(self.kmax) != self.kmax or self.kmax < 1:
            raise ValueError(f"kmax must be an integer >= 1, got {self.kmax}")
        object.__setattr__(self, "kmax", int(self.kmax))

    @classmethod
    def from_p(cls, p: float, model=StatsModel.THERMAL, kmax: int = 6):
        return cls(StatsModel(model), mu_from_p(p, model), kmax)

    @classmethod
    def single_pair(cls, p: float, model=StatsModel.THERMAL):
        """Sub-model with at most one pair per pulse, ``P(1) = p``."""
        return cls.from_p(p, model, kmax=1)

    @property
    def p(self) -> float:
        return p_from_mu(self)

    def exact_pmf(self, k_max: int | None = None) -> np.ndarray:
        """Untruncated model probabilities for k = 0..k_max."""
        k_max = self.kmax if k_max is None else k_max
        k = np.arange(k_max + 1)
        if self.mu == 0:
            out = np.zeros(k_max + 1)
            out[0] = 1.0
            return out
        if self.model is StatsModel.THERMAL:
            x = self.mu / (1.0 + self.mu)
            return x**k / (1.0 + self.mu)
        log_fact = np.cumsum(np.log(np.maximum(k, 1)))
        return np.exp(-self.mu + k * math.log(self.mu) - log_fact)

    @cached_property
    def pmf(self) -> np.ndarray:
        """Truncated pmf over 0..kmax with the tail lumped into kmax."""
        out = self.exact_pmf()
        out[-1] = max(0.0, 1.0 - out[:-1].sum())
        return out

    @property
    def tail_mass(self) -> float:
        """Probability mass the untruncated model puts above kmax."""
        return max(0.0, 1.0 - float(self.exact_pmf().sum()))

    def check_truncation(self, tol: float = TRUNCATION_TOL) -> None:
        if self.tail_mass > tol:
            raise TruncationError(
                f"kmax={self.kmax} leaves tail mass {self.tail_mass:.3e} > {tol:g} "
                f"at mu={self.mu:g}"
            )


def prob_k_pairs(dist: PairNumberDistribution, k: int) -> float:
    """Model probability of exactly ``k`` pairs in one pulse."""
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if k > dist.kmax:
        raise TruncationError(f"k={k} exceeds kmax={dist.kmax}")
    mu = dist.mu
    if mu == 0:
        return 1.0 if k == 0 else 0.0
    if dist.model is StatsModel.THERMAL:
        return mu**k / (1.0 + mu) ** (k + 1)
    return math.exp(-mu + k * math.log(mu) - math.lgamma(k + 1))


def herald_click_prob(dist: PairNumberDistribution, eta_idler: float,
                      dark_count_prob: float = 0.0) -> float:
    """Click probability of a threshold herald detector for one pulse.

    ``1 - (1 - d) * sum_k P(k) (1 - eta)^k`` evaluated on the truncated pmf,
    so ``kmax = 1`` gives exactly ``d + (1 - d) p eta``.
    """
    d = dark_count_prob
    # accumulate the click probability directly; 1 - sum(...) cancels badly
    # at small mu * eta
    k = np.arange(dist.kmax + 1)
    if eta_idler < 1:
        pair_click = float(np.dot(dist.pmf, -np.expm1(k * np.log1p(-eta_idler))))
    else:
        pair_click = float(dist.pmf[1:].sum())
    return min(1.0, max(0.0, d + (1.0 - d) * pair_click))


def click_table(kmax: int, eta: float, dark_count_prob: float = 0.0) -> np.ndarray:
    """Threshold-detector click probability given k = 0..kmax photons."""
    k = np.arange(kmax + 1)
    return 1.0 - (1.0 - dark_count_prob) * (1.0 - eta) ** k


def mu_from_p(p: float, model=StatsModel.THERMAL) -> float:
    if not 0.0 <= p < 1.0:
        raise ValueError(f"p must lie in [0, 1), got {p}")
    if StatsModel(model) is StatsModel.THERMAL:
        # P(0) = 1/(1+mu)
        return p / (1.0 - p)
    # P(0) = exp(-mu)
    return -math.log1p(-p)


def p_from_mu(dist: PairNumberDistribution) -> float:
    if dist.model is StatsModel.THERMAL:
        return dist.mu / (1.0 + dist.mu)
    return -math.expm1(-dist.mu)


def sample_pairs(dist: PairNumberDistribution, rng: np.random.Generator,
                 size=None):
    """Inverse-CDF draw(s) of the pair number from the truncated pmf."""
    cdf = np.cumsum(dist.pmf)[:-1]
    u = rng.random(size)
    k = np.searchsorted(cdf, u, side="right")
    return int(k) if size is None else k
