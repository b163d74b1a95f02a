"""Link-level model of a single-cell OFDMA uplink/downlink.

All quantities are deterministic functions of (user, resource block, transmit
power): expected Shannon rate under Rayleigh fading, transmission delay,
packet error rate under the waterfall approximation, and per-round energy.
Everything is computed in linear SI units (W, Hz, s, J, bits).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "NOISE_DENSITY_W_PER_HZ",
    "NetworkParams",
    "UserProfile",
    "FadingExpectation",
    "channel_gain",
    "expected_uplink_rate",
    "expected_downlink_rate",
    "uplink_delay",
    "downlink_delay",
    "packet_error_rate",
    "training_energy",
    "user_energy",
]

_LN2 = math.log(2.0)

#: -174 dBm/Hz converted once to W/Hz; all arithmetic downstream is linear.
NOISE_DENSITY_W_PER_HZ = 10.0 ** -20.4


def _require_positive(name: str, value) -> None:
    if not value > 0:
        raise ValueError(f"{name} must be strictly positive, got {value!r}")


@dataclass(frozen=True)
class NetworkParams:
    """Cell-wide constants: bandwidths, powers, noise, interference, budgets.

    ``uplink_interference_w`` holds one background interference level per
    resource block (other-cell users are static, not optimized here).
    ``None`` means interference-free and expands to zeros.
    """

    rb_count: int = 12
    rb_bandwidth_hz: float = 1e6
    downlink_bandwidth_hz: float = 20e6
    noise_density_w_per_hz: float = NOISE_DENSITY_W_PER_HZ
    bs_power_w: float = 1.0
    max_user_power_w: float = 0.01
    waterfall_threshold: float = 0.023
    uplink_interference_w: tuple[float, ...] | None = None
    downlink_interference_w: float = 0.0
    delay_budget_s: float = 0.5
    energy_budget_j: float = 0.003
    pathloss_exponent: float = 2.0

    def __post_init__(self):
        if int(self.rb_count) != self.rb_count or self.rb_count < 1:
            raise ValueError(f"rb_count must be an integer >= 1, got {self.rb_count!r}")
        for name in (
            "rb_bandwidth_hz",
            "downlink_bandwidth_hz",
            "noise_density_w_per_hz",
            "bs_power_w",
            "max_user_power_w",
            "waterfall_threshold",
            "delay_budget_s",
            "energy_budget_j",
            "pathloss_exponent",
        ):
            _require_positive(name, getattr(self, name))
        if self.uplink_interference_w is None:
            interference = (0.0,) * self.rb_count
        else:
            interference = tuple(float(v) for v in self.uplink_interference_w)
        if len(interference) != self.rb_count:
            raise ValueError(
                f"uplink_interference_w must have rb_count={self.rb_count} entries, "
                f"got {len(interference)}"
            )
        if any(v < 0 for v in interference):
            raise ValueError("uplink_interference_w entries must be >= 0")
        if self.downlink_interference_w < 0:
            raise ValueError("downlink_interference_w must be >= 0")
        object.__setattr__(self, "uplink_interference_w", interference)


@dataclass(frozen=True)
class UserProfile:
    """Static description of one user: geometry, data size, device constants."""

    distance_m: float
    sample_count: int
    fading_scale: float = 1.0
    payload_bits: float = 5e4
    cpu_cycles_per_bit: float = 40.0
    cpu_freq_hz: float = 1e9
    energy_coeff: float = 1e-27

    def __post_init__(self):
        _require_positive("distance_m", self.distance_m)
        if int(self.sample_count) != self.sample_count or self.sample_count < 1:
            raise ValueError(f"sample_count must be an integer >= 1, got {self.sample_count!r}")
        _require_positive("fading_scale", self.fading_scale)
        # payload_bits == 0 is allowed as the degenerate "nothing to send" case.
        if self.payload_bits < 0:
            raise ValueError(f"payload_bits must be >= 0, got {self.payload_bits!r}")
        for name in ("cpu_cycles_per_bit", "cpu_freq_hz", "energy_coeff"):
            _require_positive(name, getattr(self, name))


@lru_cache(maxsize=8)
def _fading_nodes(count: int):
    """Fixed quadrature rule for expectations over unit-mean exponential fading.

    Gauss-Legendre nodes are mapped through the exponential inverse CDF
    (o = -log(1-u)), which keeps the rule accurate for integrands with an
    essential singularity at o = 0 such as the waterfall error expression.
    """
    t, w = np.polynomial.legendre.leggauss(count)
    u = 0.5 * (t + 1.0)
    nodes = -np.log1p(-u)
    weights = 0.5 * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@dataclass(frozen=True)
class FadingExpectation:
    """How to evaluate expectations over the exponential fading power.

    ``quadrature`` is the deterministic production path (fixed nodes, no
    seed dependence); ``monte_carlo`` draws ``node_or_sample_count`` fading
    realizations from a generator seeded fresh on every call, so repeated
    evaluations are bit-identical.  ``point_mass`` pins the fading power to
    a single value, collapsing every expectation to its integrand.
    """

    method: str = "quadrature"
    node_or_sample_count: int = 64
    seed: int = 0
    point_mass: float | None = None

    def __post_init__(self):
        if self.method not in ("quadrature", "monte_carlo"):
            raise ValueError(f"method must be 'quadrature' or 'monte_carlo', got {self.method!r}")
        if self.node_or_sample_count < 16:
            raise ValueError(
                f"node_or_sample_count must be >= 16, got {self.node_or_sample_count!r}"
            )
        if self.point_mass is not None and not self.point_mass > 0:
            raise ValueError(f"point_mass must be strictly positive, got {self.point_mass!r}")

    def expect(self, integrand, scale: float = 1.0):
        """E[integrand(o)] for fading power o with mean ``scale``.

        ``integrand`` must accept a 1-d array of fading draws and may return
        extra leading axes (used to vectorize over transmit power); the
        fading axis is always the last one.
        """
        if self.point_mass is not None:
            values = np.asarray(integrand(np.array([self.point_mass])), dtype=float)
            return values[..., 0]
        if self.method == "quadrature":
            nodes, weights = _fading_nodes(self.node_or_sample_count)
            values = np.asarray(integrand(scale * nodes), dtype=float)
            # sum (not dot) keeps the reduction order identical for scalar
            # and vectorized calls, so results are bit-identical either way
            return np.sum(values * weights, axis=-1)
        draws = np.random.default_rng(self.seed).exponential(scale, self.node_or_sample_count)
        return np.asarray(integrand(draws), dtype=float).mean(axis=-1)


def _as_result(value):
    """Collapse 0-d arrays to plain floats, pass arrays through."""
    arr = np.asarray(value)
    return float(arr) if arr.ndim == 0 else arr


def _check_rb(rb_index: int, params: NetworkParams) -> None:
    if not 0 <= rb_index < params.rb_count:
        raise ValueError(f"rb_index must be in [0, {params.rb_count}), got {rb_index}")


def _rb_noise_w(rb_index: int, params: NetworkParams) -> float:
    return (
        params.uplink_interference_w[rb_index]
        + params.rb_bandwidth_hz * params.noise_density_w_per_hz
    )


def channel_gain(user: UserProfile, fading_draw, params: NetworkParams):
    """Instantaneous channel gain o * d^-alpha for one fading realization."""
    draw = np.asarray(fading_draw, dtype=float)
    if np.any(draw <= 0):
        raise ValueError("fading_draw must be strictly positive")
    return _as_result(draw * user.distance_m ** -params.pathloss_exponent)


def expected_uplink_rate(user, rb_index, power_w, params, fexp):
    """Expected uplink rate in bits/s on one RB at the given transmit power.

    Accepts a scalar or an array of powers (vectorized over the leading axis).
    """
    _check_rb(rb_index, params)
    power = np.asarray(power_w, dtype=float)
    if np.any(power < 0) or np.any(power > params.max_user_power_w * (1 + 1e-12)):
        raise ValueError(
            f"power_w must lie in [0, {params.max_user_power_w}], got {power_w!r}"
        )
    noise_w = _rb_noise_w(rb_index, params)
    gain = user.distance_m ** -params.pathloss_exponent
    snr_scale = power[..., None] * gain / noise_w

    def integrand(o):
        # log1p keeps precision in the low-SNR regime probed by bisection.
        return np.log1p(snr_scale * o) / _LN2

    return _as_result(params.rb_bandwidth_hz * fexp.expect(integrand, user.fading_scale))


def expected_downlink_rate(user, params, fexp):
    """Expected downlink broadcast rate in bits/s for one user."""
    noise_w = params.downlink_interference_w + (
        params.downlink_bandwidth_hz * params.noise_density_w_per_hz
    )
    gain = user.distance_m ** -params.pathloss_exponent
    snr_scale = params.bs_power_w * gain / noise_w

    def integrand(o):
        return np.log1p(snr_scale * o) / _LN2

    return _as_result(params.downlink_bandwidth_hz * fexp.expect(integrand, user.fading_scale))


def _payload_over_rate(payload_bits, rate):
    rate_arr = np.asarray(rate, dtype=float)
    if payload_bits == 0:
        return _as_result(np.zeros_like(rate_arr))
    safe = np.where(rate_arr > 0, rate_arr, 1.0)
    return _as_result(np.where(rate_arr > 0, payload_bits / safe, np.inf))


def uplink_delay(user, rb_index, power_w, params, fexp):
    """Uplink transmission delay in seconds; infinite when the rate is zero."""
    rate = expected_uplink_rate(user, rb_index, power_w, params, fexp)
    return _payload_over_rate(user.payload_bits, rate)


def downlink_delay(user, params, fexp):
    """Downlink broadcast delay in seconds for one user."""
    rate = expected_downlink_rate(user, params, fexp)
    return _payload_over_rate(user.payload_bits, rate)


def packet_error_rate(user, rb_index, power_w, params, fexp):
    """Expected packet error rate on one RB, clamped to [0, 1].

    Follows the waterfall approximation: conditional on the fading draw,
    the error probability is one minus the exponential of minus the
    threshold-scaled inverse SNR.  Zero transmit power returns exactly 1
    (certain failure).  Non-increasing in power.
    """
    _check_rb(rb_index, params)
    power = np.asarray(power_w, dtype=float)
    if np.any(power < 0):
        raise ValueError(f"power_w must be >= 0, got {power_w!r}")
    noise_w = _rb_noise_w(rb_index, params)
    gain = user.distance_m ** -params.pathloss_exponent
    threshold_w = params.waterfall_threshold * noise_w / gain
    with np.errstate(divide="ignore"):
        exponents = np.where(power > 0, threshold_w / np.where(power > 0, power, 1.0), np.inf)
    exponents = exponents[..., None]

    def integrand(o):
        # -expm1(-x) = 1 - exp(-x), accurate for the tiny-error regime.
        return -np.expm1(-exponents / o)

    values = fexp.expect(integrand, user.fading_scale)
    return _as_result(np.clip(values, 0.0, 1.0))


def training_energy(user: UserProfile) -> float:
    """Energy spent on local training alone: coeff * cycles * freq^2 * bits."""
    return (
        user.energy_coeff
        * user.cpu_cycles_per_bit
        * user.cpu_freq_hz ** 2
        * user.payload_bits
    )


def user_energy(user, rb_index, power_w, params, fexp):
    """Per-round energy: training plus transmit power times uplink delay.

    Strictly increasing in power on (0, P_max].  Zero transmit power with a
    nonzero payload is treated as infeasible (infinite transmit energy);
    a zero payload costs nothing at any power.
    """
    power = np.asarray(power_w, dtype=float)
    if np.any(power < 0):
        raise ValueError(f"power_w must be >= 0, got {power_w!r}")
    if user.payload_bits == 0:
        return _as_result(np.zeros_like(power))
    delay = np.asarray(uplink_delay(user, rb_index, power_w, params, fexp), dtype=float)
    with np.errstate(invalid="ignore"):
        transmit = np.where(power > 0, power * delay, np.inf)
    return _as_result(training_energy(user) + transmit)
