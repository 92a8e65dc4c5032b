"""Monte Carlo simulation of multiplexed clock cycles.

Each cycle draws a pair number and a threshold herald outcome for every bin,
lets the controller latch a bin, and sends each of that bin's signal photons
through ``N - j`` loop round trips.  The output detector clicks if at least
one photon survives; the surviving photon number ``m`` is kept for the
heralded g2 estimate.

Cycles are grouped in fixed blocks of ``BLOCK_CYCLES``.  Block ``b`` draws
from a Philox stream keyed by the seed with its counter offset by ``b``, so
the random numbers seen by any cycle depend only on ``(seed, cycle index)``
and not on how blocks are spread over workers.  Per-block tallies are integer
counts and combine by plain summation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import numpy as np
from scipy.stats import binomtest

from .analytic import ModelPrediction
from .controller import trigger_bins
from .params import ExperimentParams, Policy, RangeError
from .photon_stats import click_table

BLOCK_CYCLES = 1 << 16
BOOTSTRAP_RESAMPLES = 1000
MIN_HERALDS_G2 = 100
_BOOTSTRAP_STREAM = 0xB007  # key offset for the g2 bootstrap stream


class InsufficientStatistics(RuntimeError):
    pass


class MismatchError(ValueError):
    pass


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials <= 0:
        return (0.0, 1.0)
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence, method="wilson")
    return (float(ci.low), float(ci.high))


def score_z(successes: int, trials: int, p: float) -> float:
    """Standardized deviation of an observed fraction from ``p``.

    This is the statistic the Wilson interval inverts, so ``|z| < 1.96`` iff
    ``p`` lies inside the 95 % Wilson interval.
    """
    if trials <= 0:
        raise InsufficientStatistics("no trials")
    diff = successes / trials - p
    var = p * (1 - p) / trials
    if var == 0:
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return diff / math.sqrt(var)


@dataclass(frozen=True)
class Tally:
    cycles: int = 0
    herald_cycles: int = 0
    single_clicks: int = 0
    photon_hist: tuple[int, ...] = ()  # heralded cycles by surviving photon number

    def __add__(self, other: "Tally") -> "Tally":
        size = max(len(self.photon_hist), len(other.photon_hist))
        a = np.zeros(size, dtype=np.int64)
        for hist in (self.photon_hist, other.photon_hist):
            a[: len(hist)] += np.asarray(hist, dtype=np.int64)
        return Tally(self.cycles + other.cycles, self.herald_cycles + other.herald_cycles,
                     self.single_clicks + other.single_clicks, tuple(int(x) for x in a))


def _block_rng(seed: int, block: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed + (stream << 64),
                                                counter=block << 128))


class _CycleKernel:
    """Precomputed tables for one parameter set."""

    def __init__(self, params: ExperimentParams, policy: Policy):
        dist = params.distribution()
        ch = params.channel
        self.n = params.n_bins
        self.kmax = dist.kmax
        self.policy = policy
        self.cdf = np.cumsum(dist.pmf)[:-1]
        self.click = click_table(dist.kmax, ch.eta_idler, ch.dark_count_prob)
        passes = self.n - 1 - np.arange(self.n)
        self.survival = ch.eta_signal_fixed * np.power(float(ch.eta_roundtrip), passes)

    def run(self, rng: np.random.Generator, cycles: int) -> Tally:
        shape = (cycles, self.n)
        k = np.searchsorted(self.cdf, rng.random(shape), side="right")
        heralds = rng.random(shape) < self.click[k]
        trig = trigger_bins(heralds, self.policy)
        rows = np.flatnonzero(trig >= 0)
        cols = trig[rows]
        m = rng.binomial(k[rows, cols], self.survival[cols])
        hist = np.bincount(m, minlength=self.kmax + 1)
        return Tally(cycles, int(rows.size), int(np.count_nonzero(m)),
                     tuple(int(x) for x in hist))


def _g2_from_hist(hist) -> float:
    hist = np.asarray(hist, dtype=float)
    m = np.arange(hist.size)
    total = hist.sum()
    s1 = hist @ m
    if total == 0 or s1 == 0:
        return math.nan
    return float((hist @ (m * (m - 1))) * total / s1**2)


def _bootstrap_g2(hist, seed: int, resamples: int, stream: int = 0) -> tuple[float, float]:
    # multinomial resampling of the photon-number histogram is the
    # nonparametric bootstrap over heralded cycles
    counts = np.asarray(hist, dtype=np.int64)
    n = int(counts.sum())
    rng = _block_rng(seed, stream, _BOOTSTRAP_STREAM)
    draws = rng.multinomial(n, counts / n, size=resamples).astype(float)
    m = np.arange(counts.size)
    s1 = draws @ m
    s2 = draws @ (m * (m - 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        g2 = s2 * n / s1**2
    lo, hi = np.nanpercentile(g2, [2.5, 97.5])
    return float(lo), float(hi)


@dataclass(frozen=True)
class SimResult:
    cycles: int
    herald_cycles: int
    single_clicks: int
    photon_hist: tuple[int, ...]
    seed: int
    policy: Policy
    n_bins: int
    params: ExperimentParams | None = field(default=None, compare=False, repr=False)
    g2_ci: tuple[float, float] | None = None
    stream: int = 0

    @property
    def p_herald_hat(self) -> float:
        return self.herald_cycles / self.cycles if self.cycles else math.nan

    @property
    def p_single_hat(self) -> float:
        return self.single_clicks / self.cycles if self.cycles else math.nan

    @property
    def p_herald_ci(self) -> tuple[float, float]:
        return wilson_interval(self.herald_cycles, self.cycles)

    @property
    def p_single_ci(self) -> tuple[float, float]:
        return wilson_interval(self.single_clicks, self.cycles)

    @property
    def mean_output_photons(self) -> float:
        """Surviving signal photons per clock cycle."""
        if not self.cycles:
            return math.nan
        return float(np.dot(self.photon_hist, np.arange(len(self.photon_hist)))) / self.cycles

    @property
    def g2_heralded_hat(self) -> float:
        return _g2_from_hist(self.photon_hist)

    def as_dict(self) -> dict:
        return {
            "n": self.n_bins,
            "policy": self.policy.value,
            "seed": self.seed,
            "stream": self.stream,
            "cycles": self.cycles,
            "herald_cycles": self.herald_cycles,
            "single_clicks": self.single_clicks,
            "p_herald": self.p_herald_hat,
            "p_herald_ci": list(self.p_herald_ci),
            "p_single": self.p_single_hat,
            "p_single_ci": list(self.p_single_ci),
            "mean_output_photons": self.mean_output_photons,
            "photon_hist": list(self.photon_hist),
            "g2_heralded": None if math.isnan(self.g2_heralded_hat) else self.g2_heralded_hat,
            "g2_heralded_ci": None if self.g2_ci is None else list(self.g2_ci),
            "params": None if self.params is None else self.params.as_dict(),
        }


def _check_seed(seed) -> int:
    if int(seed) != seed or not 0 <= seed < 1 << 64:
        raise RangeError("seed", f"must be an integer in [0, 2**64), got {seed}")
    return int(seed)


def simulate(params: ExperimentParams, cycles: int, seed: int = 0, *, policy=None,
             workers: int = 1, stream: int = 0, block_cycles: int = BLOCK_CYCLES,
             bootstrap_resamples: int = BOOTSTRAP_RESAMPLES) -> SimResult:
    """Simulate ``cycles`` clock cycles of ``params`` (N = ``params.n_bins``).

    Bit-identical for a given ``(params, seed, stream, block_cycles)``
    whatever the number of ``workers``.  Distinct ``stream`` values give
    independent runs under the same seed (sweeps use one stream per N).
    """
    if int(cycles) != cycles or cycles < 1:
        raise RangeError("cycles", f"must be an integer >= 1, got {cycles}")
    if not 0 <= stream < _BOOTSTRAP_STREAM:
        raise RangeError("stream", f"must lie in [0, {_BOOTSTRAP_STREAM}), got {stream}")
    if workers < 1:
        raise RangeError("workers", f"must be >= 1, got {workers}")
    cycles = int(cycles)
    seed = _check_seed(seed)
    policy = params.policy if policy is None else Policy(policy)
    kernel = _CycleKernel(params, policy)
    n_blocks = -(-cycles // block_cycles)

    def run_block(b: int) -> Tally:
        size = min(block_cycles, cycles - b * block_cycles)
        return kernel.run(_block_rng(seed, b, stream), size)

    if workers == 1:
        tallies = map(run_block, range(n_blocks))
        total = sum(tallies, Tally())
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            total = sum(pool.map(run_block, range(n_blocks)), Tally())

    g2_ci = None
    if total.herald_cycles >= MIN_HERALDS_G2 and not math.isnan(_g2_from_hist(total.photon_hist)):
        g2_ci = _bootstrap_g2(total.photon_hist, seed, bootstrap_resamples, stream)
    return SimResult(total.cycles, total.herald_cycles, total.single_clicks,
                     total.photon_hist, seed, policy, params.n_bins, params, g2_ci,
                     stream)


def simulate_sweep(params: ExperimentParams, n_values, cycles: int, seed: int = 0, *,
                   policy=None, workers: int = 1) -> list[SimResult]:
    """One independent run per N, using stream ``N`` of ``seed``."""
    return [simulate(params.with_n(n), cycles, seed, policy=policy, workers=workers,
                     stream=n) for n in n_values]


@dataclass(frozen=True)
class G2Estimate:
    value: float
    ci_low: float
    ci_high: float
    heralded_events: int


def estimate_g2_heralded(params: ExperimentParams, cycles: int, seed: int = 0, *,
                         policy=None, workers: int = 1,
                         resamples: int = BOOTSTRAP_RESAMPLES) -> G2Estimate:
    """Heralded-output g2 with a bootstrap 95 % interval."""
    sim = simulate(params, cycles, seed, policy=policy, workers=workers,
                   bootstrap_resamples=resamples)
    return g2_from_result(sim)


def g2_from_result(sim: SimResult) -> G2Estimate:
    if sim.herald_cycles < MIN_HERALDS_G2:
        raise InsufficientStatistics(
            f"{sim.herald_cycles} heralded cycles, need at least {MIN_HERALDS_G2}")
    g2 = sim.g2_heralded_hat
    if math.isnan(g2) or sim.g2_ci is None:
        raise InsufficientStatistics("no output photons among heralded cycles")
    return G2Estimate(g2, sim.g2_ci[0], sim.g2_ci[1], sim.herald_cycles)


@dataclass(frozen=True)
class Agreement:
    n_sources: int
    z_herald: float
    z_single: float
    threshold: float = 3.0

    @property
    def passed(self) -> bool:
        return abs(self.z_herald) < self.threshold and abs(self.z_single) < self.threshold

    def as_dict(self) -> dict:
        return {"n": self.n_sources, "z_herald": self.z_herald,
                "z_single": self.z_single, "pass": self.passed}


def compare_to_analytic(sim: SimResult, model: ModelPrediction, *,
                        check_params: bool = True, threshold: float = 3.0) -> Agreement:
    """z-scores of the simulated probabilities against a model prediction."""
    if sim.cycles <= 0:
        raise InsufficientStatistics("simulation has no cycles")
    if sim.n_bins != model.n_sources:
        raise MismatchError(f"N differs: simulation {sim.n_bins}, model {model.n_sources}")
    if sim.policy != Policy(model.policy):
        raise MismatchError(f"policy differs: {sim.policy.value} vs {Policy(model.policy).value}")
    if check_params and sim.params is not None and model.params is not None:
        a = sim.params.with_n(sim.n_bins).as_dict()
        b = model.params.with_n(model.n_sources).as_dict()
        diff = sorted(key for key in a if a[key] != b[key])
        if diff:
            raise MismatchError(f"parameters differ: {', '.join(diff)}")
    return Agreement(sim.n_bins,
                     score_z(sim.herald_cycles, sim.cycles, model.p_herald),
                     score_z(sim.single_clicks, sim.cycles, model.p_single),
                     threshold)
