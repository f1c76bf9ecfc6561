import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import censor_bruteforce
from spadmix.errors import ConfigError, FrameError, OrderingError
from spadmix.simkit import (
    Frame,
    ScenarioConfig,
    TimestampSet,
    censor_dead_time,
    read_config,
    read_timestamps,
    sample_arrivals,
    sample_replication,
    simulate_replication,
    to_absolute,
    to_relative,
    write_config,
    write_timestamps,
)


def rel(vals, t_r):
    return TimestampSet(np.array(vals, dtype=float), Frame.RELATIVE, t_r)


def absolute(vals):
    return TimestampSet(np.array(vals, dtype=float), Frame.ABSOLUTE)


class TestConfig:
    def test_defaults(self):
        c = ScenarioConfig()
        assert (c.num_cycles, c.dead_time, c.pulse_delay, c.pulse_half_width) == (10000, 7.5, 4.0, 0.2)
        assert c.num_bins == 200

    @pytest.mark.parametrize(
        "bad",
        [
            dict(signal_level=0, noise_level=0),
            dict(noise_level=-1),
            dict(pulse_half_width=2.0),
            dict(pulse_delay=10.0),
            dict(dead_time=-0.1),
            dict(num_cycles=0),
            dict(bin_width=0.03),
        ],
    )
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            ScenarioConfig(**bad)

    def test_file_roundtrip(self, tmp_path):
        c = ScenarioConfig(signal_level=1.0, cycle_length=8.0, rng_seed=99)
        write_config(c, tmp_path / "c.cfg")
        assert read_config(tmp_path / "c.cfg") == c

    def test_file_rejects_unknown_key(self, tmp_path):
        (tmp_path / "c.cfg").write_text("dead_time = 5\nlaser_power = 3\n")
        with pytest.raises(ConfigError, match="laser_power"):
            read_config(tmp_path / "c.cfg")

    def test_file_comments(self, tmp_path):
        (tmp_path / "c.cfg").write_text("# units: 10 ns\ndead_time = 0  # no dead time\n")
        assert read_config(tmp_path / "c.cfg").dead_time == 0.0

    def test_hash_changes_with_seed(self):
        assert ScenarioConfig(rng_seed=1).config_hash() != ScenarioConfig(rng_seed=2).config_hash()


class TestSampleArrivals:
    def test_deterministic(self):
        c = ScenarioConfig(rng_seed=5)
        a = sample_arrivals(c, 17, replication=2)
        b = sample_arrivals(c, 17, replication=2)
        assert np.array_equal(a.values, b.values)

    def test_substreams_differ(self):
        c = ScenarioConfig(rng_seed=5, signal_level=30.0)
        assert not np.array_equal(sample_arrivals(c, 0).values, sample_arrivals(c, 1).values)
        assert not np.array_equal(sample_arrivals(c, 0).values,
                                  sample_arrivals(c, 0, replication=1).values)

    def test_bulk_matches_per_cycle(self):
        c = ScenarioConfig(rng_seed=11, num_cycles=500)
        bulk = sample_replication(c, 4)
        for k in (0, 1, 250, 499):
            assert np.array_equal(bulk[k].values, sample_arrivals(c, k, replication=4).values)

    def test_sorted_and_in_range(self):
        c = ScenarioConfig(signal_level=50.0, noise_level=50.0, pulse_delay=0.1)
        for k in range(20):
            v = sample_arrivals(c, k).values
            assert np.all(np.diff(v) >= 0)
            assert v.min() >= 0 and v.max() < c.cycle_length

    def test_pure_noise_count(self):
        c = ScenarioConfig(signal_level=0.0, noise_level=1.0, num_cycles=4000, rng_seed=3)
        cycles = sample_replication(c)
        n = np.array([len(x) for x in cycles])
        assert abs(n.mean() - 1.0) < 3 * math.sqrt(1.0 / c.num_cycles)
        vals = np.concatenate([x.values for x in cycles])
        # uniform placement: mean t_r/2, sd t_r/sqrt(12)
        assert abs(vals.mean() - 5.0) < 4 * (10 / math.sqrt(12)) / math.sqrt(vals.size)

    def test_mean_photons_is_q(self):
        c = ScenarioConfig(signal_level=3.16, noise_level=0.1, num_cycles=5000, rng_seed=8)
        n = np.array([len(x) for x in sample_replication(c)])
        Q = 3.26
        assert abs(n.mean() - Q) < 4 * math.sqrt(Q / c.num_cycles)

    def test_bad_cycle_index(self):
        with pytest.raises(ConfigError):
            sample_arrivals(ScenarioConfig(num_cycles=10), 10)


class TestToAbsolute:
    def test_formula(self):
        out = to_absolute([rel([4.0], 10), rel([4.0], 10)], 10)
        assert out.values.tolist() == [4.0, 14.0]

    def test_empty_cycle(self):
        assert to_absolute([rel([], 8), rel([1.0, 2.0], 8)], 8).values.tolist() == [9.0, 10.0]

    def test_mismatched_cycle_length(self):
        with pytest.raises(FrameError):
            to_absolute([rel([1.0], 10), rel([1.0], 8)], 10)

    def test_ties_are_nudged(self):
        out = to_absolute([rel([2.0, 2.0, 2.0], 10)], 10)
        assert np.all(np.diff(out.values) > 0)
        assert out.values[0] == 2.0 and out.values[1] == np.nextafter(2.0, 3.0)

    def test_roundtrip(self, rng):
        cycles = [rel(np.sort(rng.uniform(0, 10, rng.integers(0, 5))), 10) for _ in range(50)]
        back = to_relative(to_absolute(cycles, 10), 10)
        expect = np.sort(np.concatenate([c.values for c in cycles]))
        np.testing.assert_allclose(back.values, expect, atol=1e-12)


class TestCensor:
    def test_zero_dead_time(self):
        a = absolute([0.5, 3.0, 7.0])
        assert censor_dead_time(a, 0.0).values.tolist() == [0.5, 3.0, 7.0]

    def test_hand_trace(self):
        assert censor_dead_time(absolute([0.5, 3.0, 7.0, 16.0]), 7.5).values.tolist() == [0.5, 16.0]

    def test_window_crosses_cycle_boundary(self):
        assert censor_dead_time(absolute([4.0, 9.0, 20.0]), 7.5).values.tolist() == [4.0, 20.0]

    def test_boundary_is_dead(self):
        # exactly t_d after a registration is still dead
        assert censor_dead_time(absolute([1.0, 3.0, 3.5]), 2.0).values.tolist() == [1.0, 3.5]

    def test_nonparalyzable(self):
        # dropped arrivals at 5 and 9 do not extend the window opened at 0
        assert censor_dead_time(absolute([0.0, 5.0, 9.0, 10.5]), 10.0).values.tolist() == [0.0, 10.5]

    def test_unsorted_rejected(self):
        a = TimestampSet(np.array([3.0, 1.0]), Frame.ABSOLUTE, _checked=False)
        with pytest.raises(OrderingError):
            censor_dead_time(a, 1.0)

    def test_matches_bruteforce_1000(self, rng):
        for _ in range(1000):
            n = int(rng.integers(0, 51))
            T = np.sort(rng.uniform(0, 100, n))
            T = T[np.concatenate([[True], np.diff(T) > 0])] if n else T
            t_d = float(rng.uniform(0, 20))
            got = censor_dead_time(absolute(T), t_d).values
            np.testing.assert_array_equal(got, censor_bruteforce(T, t_d))

    @given(st.lists(st.floats(0, 1e4, allow_nan=False), max_size=60, unique=True),
           st.floats(0, 50, allow_nan=False))
    def test_gap_invariant(self, vals, t_d):
        T = np.sort(np.array(vals))
        out = censor_dead_time(absolute(T), t_d).values
        assert np.all(np.diff(out) > t_d)
        np.testing.assert_array_equal(out, censor_bruteforce(T, t_d))


class TestToRelative:
    def test_mod(self):
        assert to_relative(absolute([4.0, 20.0]), 10).values.tolist() == [0.0, 4.0]

    def test_empty(self):
        assert len(to_relative(absolute([]), 10)) == 0

    @given(st.lists(st.floats(0, 1e6, allow_nan=False), max_size=50, unique=True))
    def test_range(self, vals):
        out = to_relative(absolute(sorted(vals)), 7.3).values
        assert out.size == len(vals)
        assert np.all((out >= 0) & (out < 7.3))


def test_replication_pipeline_gap_invariant():
    c = ScenarioConfig(num_cycles=2000, rng_seed=4)
    r = simulate_replication(c, 0)
    assert np.all(np.diff(r.registered.values) > c.dead_time)
    assert r.registered.values.max() < c.num_cycles * c.cycle_length
    assert len(r.relative) == len(r.registered)


def test_replication_without_dead_time_keeps_everything():
    c = ScenarioConfig(num_cycles=500, dead_time=0.0, rng_seed=4)
    r = simulate_replication(c, 0)
    assert np.array_equal(r.arrivals.values, r.registered.values)


class TestTimestampFiles:
    @pytest.mark.parametrize("fmt,suffix", [("text", ".txt"), ("binary", ".bin")])
    def test_roundtrip(self, tmp_path, rng, fmt, suffix):
        ts = rel(np.sort(rng.uniform(0, 10, 100)), 10.0)
        write_timestamps(ts, tmp_path / f"t{suffix}", fmt, header={"seed": 3})
        back = read_timestamps(tmp_path / f"t{suffix}", cycle_length=10.0)
        assert np.array_equal(back.values, ts.values)
        assert back.cycle_length == 10.0

    def test_binary_layout(self, tmp_path):
        write_timestamps(rel([1.5, 2.5], 10), tmp_path / "t.bin", "binary")
        raw = (tmp_path / "t.bin").read_bytes()
        assert raw[:8] == (2).to_bytes(8, "little")
        assert np.frombuffer(raw[8:], "<f8").tolist() == [1.5, 2.5]

    def test_text_parse_error_names_line(self, tmp_path):
        (tmp_path / "t.txt").write_text("# cycle_length = 10.0\n1.0\nabc\n")
        with pytest.raises(ValueError, match=r"t.txt:3"):
            read_timestamps(tmp_path / "t.txt")
