"""Physical parameters and clocking configuration.

All parameter containers are frozen dataclasses.  ``validate`` collects every
violated invariant before raising, and returns a normalized bundle (derived
``mu``/``p``, default tick and output bin filled in).  Normalization is
idempotent.

Units follow the field names: ``*_ps`` picoseconds, ``*_ns`` nanoseconds,
``*_ghz`` gigahertz.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

from .photon_stats import PairNumberDistribution, StatsModel, mu_from_p, p_from_mu


class Policy(str, enum.Enum):
    """Which heralded bin the controller latches when several bins herald."""

    FIRST = "first"
    LAST = "last"


class ParamError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class RangeError(ParamError):
    pass


class ConsistencyError(ParamError):
    pass


class ValidationError(ValueError):
    """Raised by :func:`validate` with the full list of violations."""

    def __init__(self, errors: list[ParamError]):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


@dataclass(frozen=True)
class SourceParams:
    # exactly one of p / mu is needed; validate() derives the other
    pair_prob_p: float | None = None
    mean_pairs_mu: float | None = None
    stats_model: StatsModel = StatsModel.THERMAL
    pair_cutoff_kmax: int = 6

    def distribution(self) -> PairNumberDistribution:
        mu = self.mean_pairs_mu
        if mu is None:
            mu = mu_from_p(self.pair_prob_p, self.stats_model)
        return PairNumberDistribution(self.stats_model, mu, self.pair_cutoff_kmax)


@dataclass(frozen=True)
class ChannelParams:
    eta_idler: float
    eta_signal_fixed: float  # includes exactly one buffer traversal
    eta_roundtrip: float = 1.0
    dark_count_prob: float = 0.0


@dataclass(frozen=True)
class ClockConfig:
    n_bins: int
    bin_spacing_ps: float = 200.0
    clock_period_ns: float = 16.07
    output_bin: int | None = None  # 1-based; pinned to n_bins
    tick_ps: float | None = None  # default bin_spacing / 8

    @property
    def rate_hz(self) -> float:
        return 1e9 / self.clock_period_ns

    @property
    def ticks_per_bin(self) -> int:
        return int(round(self.bin_spacing_ps / self.tick_ps))

    def bin_start_tick(self, j: int) -> int:
        """Tick index at which 1-based bin ``j`` begins."""
        return (j - 1) * self.ticks_per_bin


@dataclass(frozen=True)
class SwitchSpec:
    v_pi: float = 6.0  # metadata only
    eo_bandwidth_ghz: float = 40.0
    policy: Policy = Policy.FIRST


@dataclass(frozen=True)
class TimingParams:
    # placeholders: the component latencies and the fiber delay are not known
    detector_latency_ns: float = 0.0
    fpga_latency_ns: float = 0.0
    electrical_latency_ns: float = 0.0
    fiber_delay_ns: float = 0.0


@dataclass(frozen=True)
class ExperimentParams:
    source: SourceParams
    channel: ChannelParams
    clock: ClockConfig
    switch: SwitchSpec = field(default_factory=SwitchSpec)
    timing: TimingParams = field(default_factory=TimingParams)

    @property
    def n_bins(self) -> int:
        return self.clock.n_bins

    @property
    def policy(self) -> Policy:
        return self.switch.policy

    def distribution(self) -> PairNumberDistribution:
        return self.source.distribution()

    def with_n(self, n_bins: int) -> "ExperimentParams":
        """Same experiment multiplexing ``n_bins`` modes (output bin follows)."""
        return replace(self, clock=replace(self.clock, n_bins=n_bins,
                                           output_bin=n_bins))

    def with_channel(self, **changes) -> "ExperimentParams":
        return replace(self, channel=replace(self.channel, **changes))

    def with_source(self, **changes) -> "ExperimentParams":
        return replace(self, source=replace(self.source, **changes))

    def with_policy(self, policy) -> "ExperimentParams":
        return replace(self, switch=replace(self.switch, policy=Policy(policy)))

    def as_dict(self) -> dict:
        s, c, k, w, t = self.source, self.channel, self.clock, self.switch, self.timing
        return {
            "p": s.pair_prob_p,
            "mu": s.mean_pairs_mu,
            "stats_model": StatsModel(s.stats_model).value,
            "kmax": s.pair_cutoff_kmax,
            "eta_i": c.eta_idler,
            "eta_s": c.eta_signal_fixed,
            "eta_rt": c.eta_roundtrip,
            "dark_count_prob": c.dark_count_prob,
            "n_bins": k.n_bins,
            "bin_spacing_ps": k.bin_spacing_ps,
            "clock_period_ns": k.clock_period_ns,
            "output_bin": k.output_bin,
            "tick_ps": k.tick_ps,
            "v_pi": w.v_pi,
            "eo_bandwidth_ghz": w.eo_bandwidth_ghz,
            "policy": Policy(w.policy).value,
            "detector_latency_ns": t.detector_latency_ns,
            "fpga_latency_ns": t.fpga_latency_ns,
            "electrical_latency_ns": t.electrical_latency_ns,
            "fiber_delay_ns": t.fiber_delay_ns,
        }


PAPER_P = 0.046
PAPER_ETA_I = 0.079
PAPER_ETA_S = 0.011
PAPER_N = 12
PAPER_BIN_SPACING_PS = 200.0
PAPER_CLOCK_PERIOD_NS = 16.07


def paper_params(eta_roundtrip: float = 1.0, *, kmax: int = 6,
                 stats_model=StatsModel.THERMAL,
                 policy=Policy.FIRST) -> ExperimentParams:
    """The operating point of the 12-mode TFLN demonstration.

    The storage round-trip transmission is not reported, so it has to be
    supplied (typically from :func:`timemux.analytic.calibrate_roundtrip`).
    """
    return validate(ExperimentParams(
        source=SourceParams(pair_prob_p=PAPER_P, stats_model=StatsModel(stats_model),
                            pair_cutoff_kmax=kmax),
        channel=ChannelParams(PAPER_ETA_I, PAPER_ETA_S, eta_roundtrip),
        clock=ClockConfig(PAPER_N, PAPER_BIN_SPACING_PS, PAPER_CLOCK_PERIOD_NS),
        switch=SwitchSpec(policy=Policy(policy)),
    ))


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool) or (
        isinstance(x, float) and x.is_integer())


def _check_prob(errors, name, x, *, upper_open=False):
    if x is None or not isinstance(x, (int, float)) or math.isnan(x):
        errors.append(RangeError(name, f"must be a number, got {x!r}"))
    elif x < 0 or x > 1 or (upper_open and x == 1):
        bound = "[0, 1)" if upper_open else "[0, 1]"
        errors.append(RangeError(name, f"must lie in {bound}, got {x}"))
    else:
        return True
    return False


def _normalize_source(src: SourceParams, errors: list) -> SourceParams:
    try:
        model = StatsModel(src.stats_model)
    except ValueError:
        errors.append(RangeError("stats_model", f"unknown model {src.stats_model!r}"))
        return src
    if not _is_int(src.pair_cutoff_kmax) or src.pair_cutoff_kmax < 1:
        errors.append(RangeError("kmax", f"must be an integer >= 1, got {src.pair_cutoff_kmax}"))
        return src
    kmax = int(src.pair_cutoff_kmax)
    p, mu = src.pair_prob_p, src.mean_pairs_mu
    if p is None and mu is None:
        errors.append(RangeError("p", "one of p or mu is required"))
        return src
    if p is not None and not _check_prob(errors, "p", p, upper_open=True):
        return src
    if mu is not None and not (isinstance(mu, (int, float)) and mu >= 0 and math.isfinite(mu)):
        errors.append(RangeError("mu", f"must be finite and >= 0, got {mu}"))
        return src
    if mu is None:
        mu = mu_from_p(p, model)
    derived_p = p_from_mu(PairNumberDistribution(model, mu, kmax))
    if p is None:
        if derived_p >= 1.0:
            errors.append(RangeError("mu", f"mu={mu} gives p indistinguishable from 1"))
            return src
        p = derived_p
    elif not math.isclose(p, derived_p, rel_tol=1e-12, abs_tol=1e-300):
        errors.append(ConsistencyError("p", f"p={p} inconsistent with mu={mu} ({model.value})"))
        return src
    return SourceParams(float(p), float(mu), model, kmax)


def validate(params: ExperimentParams) -> ExperimentParams:
    """Check every invariant and return the normalized bundle.

    Raises :class:`ValidationError` carrying all violations at once.
    """
    errors: list[ParamError] = []
    source = _normalize_source(params.source, errors)

    ch = params.channel
    for name, value in (("eta_i", ch.eta_idler), ("eta_s", ch.eta_signal_fixed),
                        ("eta_rt", ch.eta_roundtrip), ("dark_count_prob", ch.dark_count_prob)):
        _check_prob(errors, name, value)

    clk = params.clock
    clock = clk
    clock_ok = True
    if not _is_int(clk.n_bins) or clk.n_bins < 1:
        errors.append(RangeError("n_bins", f"must be an integer >= 1, got {clk.n_bins}"))
        clock_ok = False
    for name, value in (("bin_spacing_ps", clk.bin_spacing_ps),
                        ("clock_period_ns", clk.clock_period_ns)):
        if not (isinstance(value, (int, float)) and value > 0 and math.isfinite(value)):
            errors.append(RangeError(name, f"must be > 0, got {value}"))
            clock_ok = False
    tick = clk.tick_ps
    if tick is None and clock_ok:
        tick = clk.bin_spacing_ps / 8.0
    if tick is not None and not (isinstance(tick, (int, float)) and tick > 0):
        errors.append(RangeError("tick_ps", f"must be > 0, got {tick}"))
        clock_ok = False
    if clock_ok:
        n = int(clk.n_bins)
        if n * clk.bin_spacing_ps > clk.clock_period_ns * 1e3 * (1 + 1e-12):
            errors.append(ConsistencyError(
                "n_bins", f"{n} bins x {clk.bin_spacing_ps} ps exceed the "
                          f"{clk.clock_period_ns} ns clock period"))
        ratio = clk.bin_spacing_ps / tick
        if not math.isclose(ratio, round(ratio), rel_tol=1e-9) or round(ratio) < 1:
            errors.append(ConsistencyError(
                "tick_ps", f"bin spacing {clk.bin_spacing_ps} ps is not a multiple "
                           f"of the {tick} ps tick"))
        if clk.output_bin is not None and clk.output_bin != n:
            errors.append(ConsistencyError(
                "output_bin", f"output bin is the final bin ({n}), got {clk.output_bin}"))
        clock = ClockConfig(n, float(clk.bin_spacing_ps), float(clk.clock_period_ns),
                            n, float(tick))

    sw = params.switch
    switch = sw
    try:
        switch = replace(sw, policy=Policy(sw.policy))
    except ValueError:
        errors.append(RangeError("policy", f"unknown policy {sw.policy!r}"))
    if not (isinstance(sw.eo_bandwidth_ghz, (int, float)) and sw.eo_bandwidth_ghz > 0):
        errors.append(RangeError("eo_bandwidth_ghz", f"must be > 0, got {sw.eo_bandwidth_ghz}"))

    tm = params.timing
    for name in ("detector_latency_ns", "fpga_latency_ns", "electrical_latency_ns",
                 "fiber_delay_ns"):
        value = getattr(tm, name)
        if not (isinstance(value, (int, float)) and value >= 0):
            errors.append(RangeError(name, f"must be >= 0, got {value}"))

    if errors:
        raise ValidationError(errors)
    return ExperimentParams(source, ch, clock, switch, tm)
