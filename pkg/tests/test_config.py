"""Configuration parsing, defaults, validation, and round-trip tests."""

import numpy as np
import pytest

from fedwireless.config import (
    ConfigError,
    ExperimentConfig,
    load_config,
    loads_config,
    serialize_config,
)
from fedwireless.harness import place_users
from fedwireless.phy import NOISE_DENSITY_W_PER_HZ


class TestDefaults:
    def test_empty_file_gives_standard_parameters(self):
        config = loads_config("")
        net = config.network
        assert net.rb_count == 12
        assert net.rb_bandwidth_hz == 1e6
        assert net.downlink_bandwidth_hz == 20e6
        assert net.max_user_power_w == 0.01
        assert net.bs_power_w == 1.0
        assert net.waterfall_threshold == 0.023
        assert net.noise_density_w_per_hz == NOISE_DENSITY_W_PER_HZ
        assert net.delay_budget_s == 0.5
        assert net.energy_budget_j == 0.003
        assert net.pathloss_exponent == 2.0
        assert net.uplink_interference_w == (0.0,) * 12
        assert config.user_count == 15
        assert config.cell_radius_m == 500.0
        assert config.sample_count_cycle == (12, 10, 8, 4, 2)
        assert config.payload_bits == 5e4
        assert config.learning_rate == "one_over_L"
        assert config.fading.method == "quadrature"
        assert config.fading.node_or_sample_count == 64

    def test_sample_counts_cycle(self):
        config = loads_config("")
        counts = config.sample_counts()
        assert len(counts) == 15
        assert sum(counts) == 108


class TestValidation:
    def test_negative_bandwidth_names_the_key(self):
        with pytest.raises(ConfigError, match="rb_bandwidth_hz"):
            loads_config("[network]\nrb_bandwidth_hz = -5\n")

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key network.bandwidth"):
            loads_config("[network]\nbandwidth = 5\n")

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match=r"unknown section \[channel\]"):
            loads_config("[channel]\nx = 1\n")

    def test_non_numeric_value_names_the_key(self):
        with pytest.raises(ConfigError, match="network.bs_power_w"):
            loads_config("[network]\nbs_power_w = loud\n")

    def test_bad_algorithm_named(self):
        with pytest.raises(ConfigError, match="unknown algorithm"):
            loads_config("[experiment]\nalgorithms = proposed baseline_z\n")

    def test_empty_seeds_rejected(self):
        with pytest.raises(ConfigError, match="seeds"):
            loads_config("[experiment]\nseeds =\n")

    def test_noise_keys_mutually_exclusive(self):
        text = "[network]\nnoise_density_w_per_hz = 1e-20\nnoise_density_dbm_per_hz = -174\n"
        with pytest.raises(ConfigError, match="mutually exclusive"):
            loads_config(text)

    def test_bad_learning_rate(self):
        with pytest.raises(ConfigError, match="learning_rate"):
            loads_config("[training]\nlearning_rate = fast\n")


class TestParsing:
    def test_noise_dbm_converted(self):
        config = loads_config("[network]\nnoise_density_dbm_per_hz = -174\n")
        assert config.network.noise_density_w_per_hz == pytest.approx(10**-20.4, rel=1e-12)

    def test_interference_scalar_broadcasts(self):
        config = loads_config("[network]\nrb_count = 5\nuplink_interference_w = 1e-9\n")
        assert config.network.uplink_interference_w == (1e-9,) * 5

    def test_interference_vector(self):
        config = loads_config(
            "[network]\nrb_count = 3\nuplink_interference_w = 1e-9 2e-9 3e-9\n"
        )
        assert config.network.uplink_interference_w == (1e-9, 2e-9, 3e-9)

    def test_payload_from_bits_per_param(self):
        config = loads_config("[users]\npayload_bits_per_param = 32\n")
        assert config.payload_bits == 64.0

    def test_fixed_learning_rate(self):
        config = loads_config("[training]\nlearning_rate = 0.25\n")
        assert config.learning_rate == 0.25

    def test_comments_ignored(self):
        config = loads_config("# a comment\n[network]\nrb_count = 6  # inline\n")
        assert config.network.rb_count == 6


class TestRoundTrip:
    def test_serialize_reparses_equal(self, tmp_path):
        text = """
[network]
rb_count = 7
uplink_interference_w = 1e-9 2e-9 3e-9 4e-9 5e-9 6e-9 7e-9
energy_budget_j = 0.004

[users]
count = 9
sample_count_cycle = 5 3

[training]
learning_rate = 0.125
rounds = 42

[experiment]
algorithms = proposed baseline_b
seeds = 11 12 13
"""
        config = loads_config(text)
        again = loads_config(serialize_config(config))
        assert again == config
        thrice = loads_config(serialize_config(again))
        assert thrice == again

    def test_default_config_round_trips(self):
        config = loads_config("")
        assert loads_config(serialize_config(config)) == config

    def test_reference_config_round_trips(self):
        from pathlib import Path

        config = load_config(Path(__file__).resolve().parent.parent / "configs" / "reference.cfg")
        assert loads_config(serialize_config(config)) == config
        assert config.user_count == 15
        assert config.network.rb_count == 12

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "missing.cfg")


class TestPlaceUsers:
    def test_mean_distance_matches_disc_formula(self):
        rng = np.random.default_rng(42)
        distances = place_users(rng, 10**6, 500.0)
        assert abs(float(distances.mean()) - 2 * 500.0 / 3) < 1.0

    def test_distances_in_half_open_ball(self):
        rng = np.random.default_rng(1)
        distances = place_users(rng, 10**4, 100.0)
        assert np.all(distances > 0)
        assert np.all(distances <= 100.0)

    def test_tiny_radius_shrinks_distances(self):
        rng = np.random.default_rng(2)
        distances = place_users(rng, 100, 1e-9)
        assert np.all(distances <= 1e-9)

    def test_seed_determinism(self):
        a = place_users(np.random.default_rng(9), 50, 500.0)
        b = place_users(np.random.default_rng(9), 50, 500.0)
        assert np.array_equal(a, b)

    def test_validation(self):
        with pytest.raises(ValueError):
            place_users(np.random.default_rng(0), 0, 500.0)
        with pytest.raises(ValueError):
            place_users(np.random.default_rng(0), 5, 0.0)
