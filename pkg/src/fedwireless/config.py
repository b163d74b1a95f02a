"""Experiment configuration: a documented INI-style key-value file.

Every key has a default matching the standard system parameters, so an empty
file is a valid configuration.  Parsing and validation errors always name the
offending ``section.key``.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, replace

from .phy import NOISE_DENSITY_W_PER_HZ, FadingExpectation, NetworkParams

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "loads_config",
           "serialize_config", "save_config"]

KNOWN_ALGORITHMS = ("proposed", "baseline_a", "baseline_b", "baseline_c")

_KNOWN_KEYS = {
    "network": {
        "rb_count", "rb_bandwidth_hz", "downlink_bandwidth_hz",
        "noise_density_w_per_hz", "noise_density_dbm_per_hz", "bs_power_w",
        "max_user_power_w", "waterfall_threshold", "uplink_interference_w",
        "downlink_interference_w", "delay_budget_s", "energy_budget_j",
        "pathloss_exponent",
    },
    "users": {
        "count", "cell_radius_m", "sample_count_cycle", "fading_scale",
        "payload_bits", "payload_bits_per_param", "cpu_cycles_per_bit",
        "cpu_freq_hz", "energy_coeff",
    },
    "task": {"slope", "intercept", "noise_std"},
    "training": {"learning_rate", "rounds", "initial_model"},
    "experiment": {"algorithms", "seeds"},
    "fading": {"method", "count", "seed"},
}

MODEL_DIMENSION = 2  # slope and intercept


class ConfigError(ValueError):
    """A configuration file failed to parse or validate."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment from a seed list."""

    network: NetworkParams = field(default_factory=NetworkParams)
    user_count: int = 15
    cell_radius_m: float = 500.0
    sample_count_cycle: tuple = (12, 10, 8, 4, 2)
    fading_scale: float = 1.0
    payload_bits: float = 5e4
    cpu_cycles_per_bit: float = 40.0
    cpu_freq_hz: float = 1e9
    energy_coeff: float = 1e-27
    slope: float = -2.0
    intercept: float = 1.0
    noise_std: float = 0.4
    learning_rate: object = "one_over_L"   # float or the literal "one_over_L"
    rounds: int = 200
    initial_model: tuple = (0.0,) * MODEL_DIMENSION
    algorithms: tuple = KNOWN_ALGORITHMS
    seeds: tuple = (1, 2, 3)
    fading: FadingExpectation = field(default_factory=FadingExpectation)

    def __post_init__(self):
        if self.user_count < 1:
            raise ConfigError(f"users.count must be >= 1, got {self.user_count}")
        if self.cell_radius_m <= 0:
            raise ConfigError(f"users.cell_radius_m must be positive, got {self.cell_radius_m}")
        if not self.sample_count_cycle or any(k < 1 for k in self.sample_count_cycle):
            raise ConfigError("users.sample_count_cycle entries must be >= 1")
        if self.rounds < 1:
            raise ConfigError(f"training.rounds must be >= 1, got {self.rounds}")
        if not self.seeds:
            raise ConfigError("experiment.seeds must list at least one seed")
        if self.noise_std < 0:
            raise ConfigError(f"task.noise_std must be >= 0, got {self.noise_std}")
        for name in self.algorithms:
            if name not in KNOWN_ALGORITHMS:
                raise ConfigError(
                    f"experiment.algorithms: unknown algorithm {name!r} "
                    f"(known: {', '.join(KNOWN_ALGORITHMS)})"
                )
        if self.learning_rate != "one_over_L" and not (
            isinstance(self.learning_rate, (int, float)) and self.learning_rate > 0
        ):
            raise ConfigError(
                "training.learning_rate must be a positive number or 'one_over_L', "
                f"got {self.learning_rate!r}"
            )
        if len(self.initial_model) != MODEL_DIMENSION:
            raise ConfigError(
                f"training.initial_model must have {MODEL_DIMENSION} entries"
            )

    def sample_counts(self):
        """Per-user data sizes: the configured cycle repeated across users."""
        cycle = self.sample_count_cycle
        return [int(cycle[i % len(cycle)]) for i in range(self.user_count)]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _get(parser, section, key, convert, default, errors):
    raw = parser.get(section, key, fallback=None)
    if raw is None:
        return default
    try:
        return convert(raw)
    except (ValueError, TypeError) as exc:
        errors.append(f"{section}.{key}: {exc}")
        return default


def _parse_float_list(raw):
    return tuple(float(tok) for tok in raw.split())


def _parse_int_list(raw):
    return tuple(int(tok) for tok in raw.split())


def _parse_str_list(raw):
    return tuple(raw.split())


def loads_config(text: str) -> ExperimentConfig:
    """Parse configuration text; absent keys fall back to defaults."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config does not parse: {exc}") from exc

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"unknown key {section}.{key}")

    errors: list[str] = []
    g = lambda sec, key, conv, default: _get(parser, sec, key, conv, default, errors)

    noise_w = g("network", "noise_density_w_per_hz", float, None)
    noise_dbm = g("network", "noise_density_dbm_per_hz", float, None)
    if noise_w is not None and noise_dbm is not None:
        errors.append(
            "network.noise_density_w_per_hz and network.noise_density_dbm_per_hz "
            "are mutually exclusive"
        )
    if noise_w is None:
        noise_w = (
            10.0 ** ((noise_dbm - 30.0) / 10.0) if noise_dbm is not None
            else NOISE_DENSITY_W_PER_HZ
        )

    rb_count = g("network", "rb_count", lambda r: int(float(r)), 12)
    interference = g("network", "uplink_interference_w", _parse_float_list, None)
    if interference is not None and len(interference) == 1:
        interference = interference * rb_count

    network_kwargs = dict(
        rb_count=rb_count,
        rb_bandwidth_hz=g("network", "rb_bandwidth_hz", float, 1e6),
        downlink_bandwidth_hz=g("network", "downlink_bandwidth_hz", float, 20e6),
        noise_density_w_per_hz=noise_w,
        bs_power_w=g("network", "bs_power_w", float, 1.0),
        max_user_power_w=g("network", "max_user_power_w", float, 0.01),
        waterfall_threshold=g("network", "waterfall_threshold", float, 0.023),
        uplink_interference_w=interference,
        downlink_interference_w=g("network", "downlink_interference_w", float, 0.0),
        delay_budget_s=g("network", "delay_budget_s", float, 0.5),
        energy_budget_j=g("network", "energy_budget_j", float, 0.003),
        pathloss_exponent=g("network", "pathloss_exponent", float, 2.0),
    )

    payload = g("users", "payload_bits", float, None)
    bits_per_param = g("users", "payload_bits_per_param", float, None)
    if payload is not None and bits_per_param is not None:
        errors.append(
            "users.payload_bits and users.payload_bits_per_param are mutually exclusive"
        )
    if payload is None:
        payload = MODEL_DIMENSION * bits_per_param if bits_per_param is not None else 5e4

    lr_raw = parser.get("training", "learning_rate", fallback="one_over_L")
    if lr_raw == "one_over_L":
        learning_rate = "one_over_L"
    else:
        try:
            learning_rate = float(lr_raw)
        except ValueError:
            errors.append(f"training.learning_rate: not a number or 'one_over_L': {lr_raw!r}")
            learning_rate = "one_over_L"

    method = g("fading", "method", str, "quadrature")
    fading_kwargs = dict(
        method=method,
        node_or_sample_count=g("fading", "count", lambda r: int(float(r)), 64),
        seed=g("fading", "seed", lambda r: int(float(r)), 0),
    )

    if errors:
        raise ConfigError("; ".join(errors))

    try:
        network = NetworkParams(**network_kwargs)
    except ValueError as exc:
        raise ConfigError(f"network: {exc}") from exc
    try:
        fading = FadingExpectation(**fading_kwargs)
    except ValueError as exc:
        raise ConfigError(f"fading: {exc}") from exc

    return ExperimentConfig(
        network=network,
        user_count=g("users", "count", lambda r: int(float(r)), 15),
        cell_radius_m=g("users", "cell_radius_m", float, 500.0),
        sample_count_cycle=g("users", "sample_count_cycle", _parse_int_list, (12, 10, 8, 4, 2)),
        fading_scale=g("users", "fading_scale", float, 1.0),
        payload_bits=payload,
        cpu_cycles_per_bit=g("users", "cpu_cycles_per_bit", float, 40.0),
        cpu_freq_hz=g("users", "cpu_freq_hz", float, 1e9),
        energy_coeff=g("users", "energy_coeff", float, 1e-27),
        slope=g("task", "slope", float, -2.0),
        intercept=g("task", "intercept", float, 1.0),
        noise_std=g("task", "noise_std", float, 0.4),
        learning_rate=learning_rate,
        rounds=g("training", "rounds", lambda r: int(float(r)), 200),
        initial_model=g("training", "initial_model", _parse_float_list, (0.0, 0.0)),
        algorithms=g("experiment", "algorithms", _parse_str_list, KNOWN_ALGORITHMS),
        seeds=g("experiment", "seeds", _parse_int_list, (1, 2, 3)),
        fading=fading,
    )


def load_config(path) -> ExperimentConfig:
    """Load and validate a configuration file."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads_config(text)


def serialize_config(config: ExperimentConfig) -> str:
    """Render a configuration as text that reparses to an equal configuration."""
    net = config.network
    lines = [
        "[network]",
        f"rb_count = {net.rb_count}",
        f"rb_bandwidth_hz = {_fmt(net.rb_bandwidth_hz)}",
        f"downlink_bandwidth_hz = {_fmt(net.downlink_bandwidth_hz)}",
        f"noise_density_w_per_hz = {_fmt(net.noise_density_w_per_hz)}",
        f"bs_power_w = {_fmt(net.bs_power_w)}",
        f"max_user_power_w = {_fmt(net.max_user_power_w)}",
        f"waterfall_threshold = {_fmt(net.waterfall_threshold)}",
        "uplink_interference_w = " + " ".join(_fmt(v) for v in net.uplink_interference_w),
        f"downlink_interference_w = {_fmt(net.downlink_interference_w)}",
        f"delay_budget_s = {_fmt(net.delay_budget_s)}",
        f"energy_budget_j = {_fmt(net.energy_budget_j)}",
        f"pathloss_exponent = {_fmt(net.pathloss_exponent)}",
        "",
        "[users]",
        f"count = {config.user_count}",
        f"cell_radius_m = {_fmt(config.cell_radius_m)}",
        "sample_count_cycle = " + " ".join(str(k) for k in config.sample_count_cycle),
        f"fading_scale = {_fmt(config.fading_scale)}",
        f"payload_bits = {_fmt(config.payload_bits)}",
        f"cpu_cycles_per_bit = {_fmt(config.cpu_cycles_per_bit)}",
        f"cpu_freq_hz = {_fmt(config.cpu_freq_hz)}",
        f"energy_coeff = {_fmt(config.energy_coeff)}",
        "",
        "[task]",
        f"slope = {_fmt(config.slope)}",
        f"intercept = {_fmt(config.intercept)}",
        f"noise_std = {_fmt(config.noise_std)}",
        "",
        "[training]",
        "learning_rate = " + (
            config.learning_rate
            if isinstance(config.learning_rate, str)
            else _fmt(float(config.learning_rate))
        ),
        f"rounds = {config.rounds}",
        "initial_model = " + " ".join(_fmt(float(v)) for v in config.initial_model),
        "",
        "[experiment]",
        "algorithms = " + " ".join(config.algorithms),
        "seeds = " + " ".join(str(s) for s in config.seeds),
        "",
        "[fading]",
        f"method = {config.fading.method}",
        f"count = {config.fading.node_or_sample_count}",
        f"seed = {config.fading.seed}",
        "",
    ]
    return "\n".join(lines)


def save_config(config: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(serialize_config(config))
