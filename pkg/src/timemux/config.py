"""Flat ``key = value`` configuration files.

One setting per line, ``#`` starts a comment.  Example::

    n_bins = 12
    bin_spacing_ps = 200
    clock_period_ns = 16.07
    p = 0.046            # or: mu = ...
    eta_i = 0.079
    eta_s = 0.011
    eta_rt = 0.706592476
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass
from pathlib import Path

from .params import (
    ChannelParams,
    ClockConfig,
    ExperimentParams,
    SourceParams,
    SwitchSpec,
    TimingParams,
    ValidationError,
    validate,
)

REQUIRED = ("n_bins", "bin_spacing_ps", "clock_period_ns", "eta_i", "eta_s", "eta_rt")

# key -> (parser, default)
OPTIONAL = {
    "p": (float, None),
    "mu": (float, None),
    "stats_model": (str, "thermal"),
    "policy": (str, "first"),
    "dark_count_prob": (float, 0.0),
    "kmax": (int, 6),
    "trials": (int, 1_000_000),
    "seed": (int, 0),
    "tick_ps": (float, None),
    "v_pi": (float, 6.0),
    "eo_bandwidth_ghz": (float, 40.0),
    "detector_latency_ns": (float, 0.0),
    "fpga_latency_ns": (float, 0.0),
    "electrical_latency_ns": (float, 0.0),
    "fiber_delay_ns": (float, 0.0),
}
_PARSERS = {"n_bins": int, "bin_spacing_ps": float, "clock_period_ns": float,
            "eta_i": float, "eta_s": float, "eta_rt": float}
_PARSERS.update({k: v[0] for k, v in OPTIONAL.items()})


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  {e}" for e in self.errors))


@dataclass(frozen=True)
class RunConfig:
    params: ExperimentParams
    trials: int
    seed: int
    keys: frozenset = frozenset()  # keys present in the file


def read_pairs(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",),
                                       comment_prefixes=("#",), interpolation=None,
                                       delimiters=("=",))
    parser.optionxform = str.lower
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError([str(exc).replace("\n", " ")]) from None
    return dict(parser["config"])


def parse_config(text: str, *, require_eta_rt: bool = True) -> RunConfig:
    raw = read_pairs(text)
    errors: list[str] = []
    required = REQUIRED if require_eta_rt else tuple(k for k in REQUIRED if k != "eta_rt")
    for key in required:
        if key not in raw:
            errors.append(f"missing required key: {key}")
    if "p" not in raw and "mu" not in raw:
        errors.append("missing required key: p (or mu)")
    for key in raw:
        if key not in _PARSERS:
            errors.append(f"unknown key: {key}")

    values = {k: default for k, (_, default) in OPTIONAL.items()}
    values["eta_rt"] = 1.0
    for key, text_value in raw.items():
        conv = _PARSERS.get(key)
        if conv is None:
            continue
        try:
            values[key] = conv(text_value.strip().lower() if conv is str else text_value)
        except ValueError:
            errors.append(f"{key}: cannot parse {text_value!r} as {conv.__name__}")
    if errors:
        raise ConfigError(errors)

    params = ExperimentParams(
        source=SourceParams(values["p"], values["mu"], values["stats_model"], values["kmax"]),
        channel=ChannelParams(values["eta_i"], values["eta_s"], values["eta_rt"],
                              values["dark_count_prob"]),
        clock=ClockConfig(values["n_bins"], values["bin_spacing_ps"],
                          values["clock_period_ns"], None, values["tick_ps"]),
        switch=SwitchSpec(values["v_pi"], values["eo_bandwidth_ghz"], values["policy"]),
        timing=TimingParams(values["detector_latency_ns"], values["fpga_latency_ns"],
                            values["electrical_latency_ns"], values["fiber_delay_ns"]),
    )
    try:
        params = validate(params)
    except ValidationError as exc:
        errors.extend(str(e) for e in exc.errors)
    trials = values["trials"]
    if trials < 1:
        errors.append(f"trials: must be >= 1, got {trials}")
    if not 0 <= values["seed"] < 1 << 64:
        errors.append(f"seed: must lie in [0, 2**64), got {values['seed']}")
    if errors:
        raise ConfigError(errors)
    return RunConfig(params, trials, values["seed"], frozenset(raw))


def load_config(path, *, require_eta_rt: bool = True) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from None
    return parse_config(text, require_eta_rt=require_eta_rt)


def set_value(path, key: str, value: str) -> None:
    """Rewrite ``key`` in place (keeping any trailing comment) or append it."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    pattern = re.compile(rf"^(\s*{re.escape(key)}\s*=\s*)([^#\n]*?)(\s*(#.*)?)$",
                         re.MULTILINE | re.IGNORECASE)
    new, count = pattern.subn(lambda m: f"{m.group(1)}{value}{m.group(3)}", text, count=1)
    if not count:
        new = text + ("" if text.endswith("\n") or not text else "\n") + f"{key} = {value}\n"
    path.write_text(new, encoding="utf-8")

