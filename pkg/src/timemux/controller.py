"""Cycle-accurate routing logic of the storage-loop switch.

The controller walks the ``N`` bins of one clock cycle.  When it latches a
herald in bin ``j`` it sets the switch to couple the partner photon into the
loop at the start of bin ``j`` and releases it at the start of the final
bin, after ``N - j`` round trips (one round trip per bin spacing).  A herald
in the final bin needs no switching: the photon passes straight through.

Last-herald routing cannot be decided causally inside the cycle; the
controller here is handed the whole pattern, and the timing report charges
the extra ``N * bin_spacing`` of decision delay.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .params import ClockConfig, Policy, SwitchSpec, TimingParams

RISE_TIME_FACTOR = 0.35  # 10-90 % rise time of a first-order response: 0.35 / BW


class Phase(enum.Enum):
    IDLE = "idle"
    STORING = "storing"
    RELEASED = "released"


class LengthError(ValueError):
    pass


@dataclass(frozen=True)
class ControllerState:
    phase: Phase = Phase.IDLE
    remaining_passes: int = 0
    trigger_bin: int | None = None

    def __post_init__(self):
        if (self.trigger_bin is None) != (self.phase is Phase.IDLE):
            raise ValueError("trigger_bin is set iff the controller is not idle")


@dataclass
class CycleTrace:
    herald_pattern: tuple[int, ...]
    trigger_bin: int | None = None
    passes_in_loop: int = 0
    switch_events: list[tuple[int, str]] = field(default_factory=list)

    @property
    def routed(self) -> bool:
        return self.trigger_bin is not None


class Controller:
    """Bin-by-bin state machine for one clock cycle."""

    def __init__(self, n_bins: int, clock: ClockConfig | None = None):
        self.n_bins = n_bins
        self._ticks_per_bin = clock.ticks_per_bin if clock is not None else 8
        self.state = ControllerState()
        self.events: list[tuple[int, str]] = []

    def _tick(self, j: int) -> int:
        return (j - 1) * self._ticks_per_bin

    def step(self, j: int, herald: bool) -> ControllerState:
        """Advance to the boundary of 1-based bin ``j`` with its herald bit."""
        s = self.state
        if s.phase is Phase.STORING:
            remaining = s.remaining_passes - 1
            if remaining == 0:
                # the output bin boundary
                self.events.append((self._tick(j), "release"))
                s = ControllerState(Phase.RELEASED, 0, s.trigger_bin)
            else:
                s = ControllerState(Phase.STORING, remaining, s.trigger_bin)
        elif s.phase is Phase.IDLE and herald:
            passes = self.n_bins - j
            if passes == 0:
                s = ControllerState(Phase.RELEASED, 0, j)
            else:
                self.events.append((self._tick(j), "store"))
                s = ControllerState(Phase.STORING, passes, j)
        self.state = s
        return s


def _check_pattern(pattern: Sequence[int], n: int | None) -> tuple[int, ...]:
    bits = tuple(int(bool(b)) for b in pattern)
    if n is not None and len(bits) != n:
        raise LengthError(f"herald pattern has {len(bits)} bins, expected {n}")
    if not bits:
        raise LengthError("empty herald pattern")
    return bits


def route(herald_pattern: Sequence[int], policy=Policy.FIRST, *,
          n_bins: int | None = None, clock: ClockConfig | None = None) -> CycleTrace:
    """Run one clock cycle through the controller.

    ``herald_pattern[j-1]`` is the herald bit of bin ``j``.
    """
    bits = _check_pattern(herald_pattern, n_bins if clock is None else clock.n_bins)
    n = len(bits)
    if Policy(policy) is Policy.LAST and any(bits):
        # delayed decision: only the last herald is presented to the machine
        last = n - 1 - bits[::-1].index(1)
        drive = tuple(int(i == last) for i in range(n))
    else:
        drive = bits
    ctl = Controller(n, clock)
    for j, b in enumerate(drive, start=1):
        ctl.step(j, bool(b))
    trigger = ctl.state.trigger_bin
    passes = n - trigger if trigger is not None else 0
    return CycleTrace(bits, trigger, passes, list(ctl.events))


def trigger_bins(heralds: np.ndarray, policy=Policy.FIRST) -> np.ndarray:
    """Vectorized latch decision for a batch of patterns, shape (cycles, N).

    Returns 0-based trigger indices, -1 where nothing heralded.
    """
    heralds = np.asarray(heralds, dtype=bool)
    any_h = heralds.any(axis=1)
    if Policy(policy) is Policy.FIRST:
        idx = heralds.argmax(axis=1)
    else:
        idx = heralds.shape[1] - 1 - heralds[:, ::-1].argmax(axis=1)
    return np.where(any_h, idx, -1)


def required_delay(timing: TimingParams) -> float:
    """Minimal signal fiber delay (ns): the switch must be set before the
    heralded photon reaches the buffer."""
    return timing.detector_latency_ns + timing.fpga_latency_ns + timing.electrical_latency_ns


def switch_rise_time(eo_bandwidth_ghz: float) -> float:
    """10-90 % switch rise time in ps for a given 3-dB EO bandwidth."""
    if not eo_bandwidth_ghz > 0:
        raise ValueError(f"EO bandwidth must be > 0, got {eo_bandwidth_ghz}")
    return RISE_TIME_FACTOR / eo_bandwidth_ghz * 1e3


@dataclass(frozen=True)
class TimingReport:
    rise_time_ps: float
    bin_spacing_ps: float
    tick_ps: float
    rise_ok: bool
    tick_aligned: bool
    delta_min_ns: float
    decision_delay_ns: float
    fiber_delay_ns: float | None
    delay_ok: bool
    policy: Policy

    @property
    def feasible(self) -> bool:
        return self.rise_ok and self.tick_aligned and self.delay_ok

    @property
    def required_fiber_delay_ns(self) -> float:
        return self.delta_min_ns + self.decision_delay_ns

    def as_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "policy": self.policy.value,
            "rise_time_ps": self.rise_time_ps,
            "bin_spacing_ps": self.bin_spacing_ps,
            "tick_ps": self.tick_ps,
            "rise_ok": self.rise_ok,
            "tick_aligned": self.tick_aligned,
            "delta_min_ns": self.delta_min_ns,
            "decision_delay_ns": self.decision_delay_ns,
            "required_fiber_delay_ns": self.required_fiber_delay_ns,
            "fiber_delay_ns": self.fiber_delay_ns,
            "delay_ok": self.delay_ok,
        }

    def to_text(self) -> str:
        lines = [
            f"switch rise time  {self.rise_time_ps:.4g} ps "
            f"({'<' if self.rise_ok else '>='} {self.bin_spacing_ps:g} ps bin spacing)",
            f"tick alignment    {'ok' if self.tick_aligned else 'FAIL'} "
            f"({self.tick_ps:g} ps tick)",
            f"delta_min         {self.delta_min_ns:.4g} ns",
        ]
        if self.decision_delay_ns:
            lines.append(f"decision delay    {self.decision_delay_ns:.4g} ns "
                         f"({self.policy.value}-herald policy)")
        if self.fiber_delay_ns is not None:
            lines.append(f"fiber delay       {self.fiber_delay_ns:.4g} ns "
                         f"(needs >= {self.required_fiber_delay_ns:.4g} ns)")
        lines.append("FEASIBLE" if self.feasible else "INFEASIBLE")
        return "\n".join(lines)


def timing_feasible(clock: ClockConfig, switch: SwitchSpec,
                    timing: TimingParams | None = None) -> TimingReport:
    """Check that the switch can act within one bin on the tick grid.

    Every switch event sits on a bin-start tick, so events are grid-aligned
    iff the bin spacing is an integer number of ticks; the transition must
    also finish strictly inside the bin.  The fiber delay is only checked
    when ``timing`` is given.
    """
    tau = switch_rise_time(switch.eo_bandwidth_ghz)
    tick = clock.tick_ps if clock.tick_ps is not None else clock.bin_spacing_ps / 8.0
    ratio = clock.bin_spacing_ps / tick
    aligned = bool(np.isclose(ratio, round(ratio), rtol=1e-9) and round(ratio) >= 1)
    policy = Policy(switch.policy)
    decision = clock.n_bins * clock.bin_spacing_ps * 1e-3 if policy is Policy.LAST else 0.0
    if timing is None:
        delta_min, fiber, delay_ok = 0.0, None, True
    else:
        delta_min = required_delay(timing)
        fiber = timing.fiber_delay_ns
        delay_ok = fiber >= delta_min + decision
    return TimingReport(tau, clock.bin_spacing_ps, tick, tau < clock.bin_spacing_ps,
                        aligned, delta_min, decision, fiber, delay_ok, policy)
