from spikesplit.parallel.channel import (
    ChannelModel,
    VirtualClock,
    DEFAULT_THROUGHPUT_BPS,
    transmission_time,
)
from spikesplit.utils.checker import CheckError
from test.util_fixtures import *

import pytest


class TestChannelModel:
    param_test_invalid = [
        (dict(throughput_bps=0), "Throughput"),
        (dict(throughput_bps=float("nan")), "Throughput"),
        (dict(propagation_delay_s=-1e-3), "Propagation delay"),
        (dict(jitter=1.0), "Jitter"),
        (dict(jitter=-0.1), "Jitter"),
        (dict(framing_bytes=-1), "Framing bytes"),
    ]

    @pytest.mark.parametrize("kwargs,match", param_test_invalid)
    def test_invalid(self, kwargs, match):
        with pytest.raises(CheckError, match=match):
            ChannelModel(**kwargs)

    def test_message_bits(self):
        assert ChannelModel().message_bits(14) == 112
        assert ChannelModel(framing_bytes=40).message_bits(14) == 432


class TestTransmissionTime:
    def test_reference_value(self):
        assert DEFAULT_THROUGHPUT_BPS == 18.9e6
        elapsed = transmission_time(16384, ChannelModel(18.9e6))
        assert elapsed == pytest.approx(16384 / 18.9e6, rel=1e-9)
        assert elapsed == pytest.approx(8.669e-4, rel=1e-3)

    def test_delay(self):
        channel = ChannelModel(1e6, propagation_delay_s=0.01)
        assert transmission_time(0, channel) == pytest.approx(0.01)
        assert transmission_time(1000, channel) == pytest.approx(0.011)

    def test_monotone(self):
        channel = ChannelModel(1e6)
        times = [transmission_time(bits, channel) for bits in range(0, 10000, 100)]
        assert times == sorted(times)

    def test_jitter_deterministic(self):
        channel = ChannelModel(1e6, jitter=0.5, jitter_seed=3)
        rng_a, rng_b = channel.create_rng(), channel.create_rng()
        a = [transmission_time(1000, channel, rng_a) for _ in range(20)]
        b = [transmission_time(1000, channel, rng_b) for _ in range(20)]
        assert a == b
        assert all(1e-3 <= x < 1.5e-3 for x in a)
        assert len(set(a)) > 1
        other = channel.create_rng(1)
        assert [transmission_time(1000, channel, other) for _ in range(20)] != a

    def test_negative_bits(self):
        with pytest.raises(CheckError, match=">= 0"):
            transmission_time(-1, ChannelModel())


class TestVirtualClock:
    def test_clock(self):
        clock = VirtualClock()
        assert clock.now() == 0.0
        assert clock.advance(0.5) == 0.5
        assert clock.advance(0.25) == 0.75
        with pytest.raises(CheckError, match="can not go back"):
            clock.advance(-0.1)
        clock.reset()
        assert clock.now() == 0.0
