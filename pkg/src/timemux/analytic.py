"""Closed-form storage-loop model of a temporally multiplexed heralded source.

Within one clock cycle ``N`` pulses (bins) each herald independently with
probability ``h``.  The controller latches one heralded bin ``j`` and the
partner photon circulates ``N - j`` extra times in the loop before leaving in
the final bin, so it survives with ``eta_s * eta_rt**(N - j)``.  The
single-pair form treats every herald as carrying exactly one signal photon:

    first herald:  p_m = h eta_s sum_j (1-h)^(j-1) eta_rt^(N-j)
    last herald:   p_m = h eta_s sum_j (1-h)^(N-j) eta_rt^(N-j)

:func:`exact_probabilities` drops the single-pair assumption and evaluates
the same routing with the full truncated pair-number distribution and
threshold detectors on both arms.  It coincides with the closed form for
``kmax = 1`` and no dark counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.optimize import bisect

from .params import ExperimentParams, Policy
from .photon_stats import PairNumberDistribution, click_table, herald_click_prob

CALIBRATION_TOL = 1e-9
CALIBRATION_MAXITER = 200


class NoSolution(ValueError):
    def __init__(self, target: float, lo: float, hi: float):
        super().__init__(
            f"target enhancement {target:g} outside attainable range [{lo:.9g}, {hi:.9g}]")
        self.target = target
        self.attainable = (lo, hi)


def _check_n(n) -> int:
    if int(n) != n or n < 1:
        raise ValueError(f"number of sources must be an integer >= 1, got {n}")
    return int(n)


def _check_prob(name, x):
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {x}")


def routing_weights(n: int, h: float, policy=Policy.FIRST) -> np.ndarray:
    """Probability, per heralded bin j = 1..n, that the controller latches it.

    Not multiplied by the herald probability of bin j itself.
    """
    j = np.arange(1, n + 1)
    if Policy(policy) is Policy.FIRST:
        return (1.0 - h) ** (j - 1)
    return (1.0 - h) ** (n - j)


def storage_passes(n: int) -> np.ndarray:
    return n - np.arange(1, n + 1)


def heralding_probability(n: int, h: float) -> float:
    """Probability that at least one of ``n`` bins heralds."""
    n = _check_n(n)
    _check_prob("h", h)
    return -math.expm1(n * math.log1p(-h)) if h < 1 else 1.0


def heralded_probability(n: int, h: float, eta_signal_fixed: float,
                         eta_roundtrip: float, policy=Policy.FIRST,
                         h_signal: float | None = None) -> float:
    """Probability p_m of a heralded output click per clock cycle.

    ``h_signal`` is the per-bin probability of a herald that actually comes
    with a pair; it defaults to ``h`` and only differs once dark counts are
    present.
    """
    n = _check_n(n)
    for name, x in (("h", h), ("eta_signal_fixed", eta_signal_fixed),
                    ("eta_roundtrip", eta_roundtrip)):
        _check_prob(name, x)
    h_signal = h if h_signal is None else h_signal
    survival = np.power(float(eta_roundtrip), storage_passes(n))
    return float(h_signal * eta_signal_fixed
                 * np.dot(routing_weights(n, h, policy), survival))


def enhancement_from_h(n: int, h: float, eta_roundtrip: float,
                       policy=Policy.FIRST) -> float:
    """p_m(n) / p_m(1); the h * eta_s prefactor cancels."""
    n = _check_n(n)
    _check_prob("eta_roundtrip", eta_roundtrip)
    survival = np.power(float(eta_roundtrip), storage_passes(n))
    return float(np.dot(routing_weights(n, h, policy), survival))


def single_pair_herald_probs(params: ExperimentParams) -> tuple[float, float]:
    """(h, h_signal) of the single-pair model built from ``p``.

    With no dark counts both equal ``p * eta_i``.
    """
    p = params.source.pair_prob_p
    if p is None:
        p = params.distribution().p
    ch = params.channel
    dist = PairNumberDistribution.single_pair(p, params.source.stats_model)
    h = herald_click_prob(dist, ch.eta_idler, ch.dark_count_prob)
    h_signal = p * float(click_table(1, ch.eta_idler, ch.dark_count_prob)[1])
    return h, h_signal


def _resolve(params: ExperimentParams, n, policy):
    n = params.n_bins if n is None else _check_n(n)
    policy = params.policy if policy is None else Policy(policy)
    return n, policy


def heralded_probability_for(params: ExperimentParams, n: int | None = None,
                             policy=None) -> float:
    n, policy = _resolve(params, n, policy)
    h, h_signal = single_pair_herald_probs(params)
    ch = params.channel
    return heralded_probability(n, h, ch.eta_signal_fixed, ch.eta_roundtrip,
                                policy, h_signal)


def enhancement(n: int, params: ExperimentParams, policy=None) -> float:
    n, policy = _resolve(params, n, policy)
    if n == 1:
        return 1.0
    h, _ = single_pair_herald_probs(params)
    return enhancement_from_h(n, h, params.channel.eta_roundtrip, policy)


def calibrate_roundtrip(target_e: float, n: int, h: float,
                        policy=Policy.FIRST) -> float:
    """Round-trip transmission that reproduces a measured enhancement.

    E grows strictly with eta_rt, from (1-h)^(n-1) at eta_rt = 0 (first
    herald) to (1 - (1-h)^n)/h at lossless storage; bisection on [0, 1].
    """
    n = _check_n(n)
    _check_prob("h", h)

    def residual(eta):
        return enhancement_from_h(n, h, eta, policy) - target_e

    lo, hi = enhancement_from_h(n, h, 0.0, policy), enhancement_from_h(n, h, 1.0, policy)
    if not lo - CALIBRATION_TOL <= target_e <= hi + CALIBRATION_TOL:
        raise NoSolution(target_e, lo, hi)
    if abs(target_e - hi) < CALIBRATION_TOL:
        return 1.0
    if abs(target_e - lo) < CALIBRATION_TOL:
        return 0.0
    eta = bisect(residual, 0.0, 1.0, xtol=1e-16, rtol=4 * np.finfo(float).eps,
                 maxiter=CALIBRATION_MAXITER)
    if abs(residual(eta)) >= CALIBRATION_TOL:
        raise RuntimeError(f"bisection stalled at eta_rt={eta!r}, residual {residual(eta):.3e}")
    return float(eta)


def optimal_n(params: ExperimentParams, policy=None, n_max: int = 64) -> int:
    """Smallest N in 1..n_max maximizing p_m(N) (exhaustive scan)."""
    n_max = _check_n(n_max)
    policy = params.policy if policy is None else Policy(policy)
    pm = [heralded_probability_for(params, n, policy) for n in range(1, n_max + 1)]
    return int(np.argmax(pm)) + 1


@dataclass(frozen=True)
class ModelPrediction:
    n_sources: int
    p_herald: float
    p_single: float
    herald_rate: float  # Hz
    single_rate: float  # Hz
    enhancement: float
    policy: Policy = Policy.FIRST
    params: ExperimentParams | None = field(default=None, compare=False, repr=False)


def predict(params: ExperimentParams, n: int | None = None, policy=None) -> ModelPrediction:
    n, policy = _resolve(params, n, policy)
    h, _ = single_pair_herald_probs(params)
    rate = params.clock.rate_hz
    p_herald = heralding_probability(n, h)
    p_single = heralded_probability_for(params, n, policy)
    e = enhancement(n, params, policy)
    return ModelPrediction(n, p_herald, p_single, p_herald * rate, p_single * rate,
                           e, policy, params.with_n(n))


def predict_sweep(params: ExperimentParams, policy=None,
                  n_range: Iterable[int] | None = None) -> list[ModelPrediction]:
    n_range = list(range(1, params.n_bins + 1) if n_range is None else n_range)
    if not n_range:
        raise ValueError("n_range must not be empty")
    return [predict(params, n, policy) for n in n_range]


@dataclass(frozen=True)
class ExactPrediction:
    n_sources: int
    p_herald: float
    p_single: float
    mean_output_photons: float  # per clock cycle
    g2_heralded: float  # <m(m-1)>/<m>^2 over heralded cycles; nan if <m> = 0


def exact_probabilities(params: ExperimentParams, n: int | None = None,
                        policy=None) -> ExactPrediction:
    """Multi-pair model with the same routing, on the truncated pmf."""
    n, policy = _resolve(params, n, policy)
    dist = params.distribution()
    ch = params.channel
    k = np.arange(dist.kmax + 1)
    joint = dist.pmf * click_table(dist.kmax, ch.eta_idler, ch.dark_count_prob)
    h = float(joint.sum())

    t = ch.eta_signal_fixed * np.power(float(ch.eta_roundtrip), storage_passes(n))
    w = routing_weights(n, h, policy)
    click = 1.0 - np.power.outer(1.0 - t, k)  # [bin, k]
    p_single = float(w @ (click @ joint))
    m1 = float(w @ t) * float(joint @ k)
    m2 = float(w @ t**2) * float(joint @ (k * (k - 1)))
    p_herald = heralding_probability(n, h)
    g2 = m2 / m1 * p_herald / m1 if m1 > 0 else math.nan
    return ExactPrediction(n, p_herald, p_single, m1, g2)


def predict_exact(params: ExperimentParams, n: int | None = None,
                  policy=None) -> ModelPrediction:
    """:func:`predict` with the multi-pair probabilities of
    :func:`exact_probabilities`; enhancement is relative to the exact N = 1."""
    n, policy = _resolve(params, n, policy)
    ex = exact_probabilities(params, n, policy)
    base = exact_probabilities(params, 1, policy).p_single
    rate = params.clock.rate_hz
    e = ex.p_single / base if base > 0 else math.nan
    return ModelPrediction(n, ex.p_herald, ex.p_single, ex.p_herald * rate,
                           ex.p_single * rate, e, policy, params.with_n(n))
