from spikesplit.model.codec import (
    Bottleneck,
    BottleneckConfig,
    default_bottleneck,
    encode,
    decode,
    payload_bits,
    compression_ratio,
)
from spikesplit.model.nets import split_probe, build_topology
from spikesplit.model.layers import RateMonitor
from spikesplit.model.neuron import LifParams
from spikesplit.model.spike import Shape, SpikeTensor
from spikesplit.model.weights import seeded_init, load_model
from spikesplit.utils.checker import CheckError
from test.util_fixtures import *

import pytest
import torch as t


@pytest.fixture(scope="module")
def probe_codec():
    graph = split_probe()
    codec = Bottleneck(default_bottleneck(graph.shape_at(graph.split_index("SP1"))))
    load_model(seeded_init(graph, 0, codec), graph, codec)
    return codec


def seeded_codec(bn_shift):
    graph = build_topology("resnet-mini")
    codec = Bottleneck(default_bottleneck(graph.shape_at(graph.split_index("SP3"))))
    load_model(seeded_init(graph, 0, codec, bn_shift=bn_shift), graph, codec)
    return codec


def random_spikes(shape, seed, density=0.5):
    generator = t.Generator().manual_seed(seed)
    return SpikeTensor.from_tensor((t.rand(list(shape), generator=generator) < density).float())


def is_binary(x: SpikeTensor):
    return set(t.unique(x.to_dense()).tolist()) <= {0.0, 1.0}


class TestBottleneckConfig:
    param_test_default = [
        ((512, 4, 4), 4, (4, 1, 1)),
        ((16, 16, 16), 4, (4, 4, 4)),
        ((8, 2, 2), 1, (1, 1, 1)),
    ]

    @pytest.mark.parametrize("in_shape,channels,code", param_test_default)
    def test_default(self, in_shape, channels, code):
        config = default_bottleneck(in_shape, channels)
        assert config.code_shape == Shape(code)
        assert config.output_padding == 0

    def test_dict(self):
        config = BottleneckConfig((16, 8, 8), 2, 3, 2, 1, LifParams(tau=4.0))
        assert config.code_shape == Shape(2, 4, 4)
        assert config.output_padding == 1
        assert config.to_dict() == {
            "in_shape": [16, 8, 8],
            "code_channels": 2,
            "kernel": 3,
            "stride": 2,
            "padding": 1,
            "lif": {"tau": 4.0, "v_th": 1.0, "v_reset": 0.0},
        }
        assert BottleneckConfig.from_dict(config.to_dict()) == config

    param_test_invalid = [
        (((4, 4, 4), 4, 1, 1), "not smaller"),
        (((8, 2, 2), 1, 4, 4), "does not fit"),
        (((8, 8, 6), 1, 2, 4), "can not restore"),
        (((8, 8), 1, 2, 2), "must be \\(C, H, W\\)"),
        (((8, 4, 4), 0, 2, 2), "code_channels must be >= 1"),
    ]

    @pytest.mark.parametrize("args,match", param_test_invalid)
    def test_invalid(self, args, match):
        with pytest.raises(CheckError, match=match):
            BottleneckConfig(*args)


class TestBottleneck:
    def test_encode_decode(self, probe_codec):
        enc_state, dec_state = probe_codec.create_states()
        x = SpikeTensor.from_tensor(
            (t.rand([512, 4, 4], generator=t.Generator().manual_seed(0)) < 0.2).float()
        )
        monitor = RateMonitor()
        z = probe_codec.encode(x, enc_state, monitor)
        assert z.shape == Shape(4, 1, 1)
        y = probe_codec.decode(z, dec_state, monitor)
        assert y.shape == Shape(512, 4, 4)
        assert set(monitor.layers()) == {"bottleneck.encoder", "bottleneck.decoder"}
        assert monitor.layers()["bottleneck.encoder"][0] == probe_codec.encoder_conv.flops()
        assert monitor.mean_rate("bottleneck.encoder") == pytest.approx(x.popcount() / 8192)

    def test_functional_form(self, probe_codec):
        x = SpikeTensor.ones((512, 4, 4))
        z1 = encode(probe_codec, probe_codec.create_states()[0], x)
        z2 = probe_codec.encode(x, probe_codec.create_states()[0])
        assert z1 == z2
        y1 = decode(probe_codec, probe_codec.create_states()[1], z1)
        y2 = probe_codec.decode(z2, probe_codec.create_states()[1])
        assert y1 == y2

    def test_flops(self, probe_codec):
        assert probe_codec.encoder_flops() == 2 * 16 * 512 * 4 + 2 * 4
        assert probe_codec.decoder_flops() == 2 * 16 * 4 * 512 + 2 * 8192

    def test_shape_mismatch(self, probe_codec):
        enc_state, dec_state = probe_codec.create_states()
        with pytest.raises(CheckError, match="Bottleneck expects"):
            probe_codec.encode(SpikeTensor.zeros((4, 1, 1)), enc_state)
        with pytest.raises(CheckError, match="code must be"):
            probe_codec.decode(SpikeTensor.zeros((512, 4, 4)), dec_state)


class TestBottleneckDynamics:
    SEEDS = range(20)

    @pytest.fixture(scope="class")
    def codec(self):
        return seeded_codec(1.5)

    @pytest.fixture(scope="class")
    def unshifted_codec(self):
        return seeded_codec(0.0)

    def test_stateful(self, codec):
        for seed in self.SEEDS:
            x = random_spikes(codec.in_shape, seed)
            enc_state, _ = codec.create_states()
            first = codec.encode(x, enc_state)
            second = codec.encode(x, enc_state)
            assert first != second, f"seed {seed}"
            enc_state.reset()
            assert codec.encode(x, enc_state) == first, f"seed {seed}"

    def test_stateful_decoder(self, codec):
        enc_state, dec_state = codec.create_states()
        z = codec.encode(random_spikes(codec.in_shape, 0), enc_state)
        first = codec.decode(z, dec_state)
        assert codec.decode(z, dec_state) != first
        dec_state.reset()
        assert codec.decode(z, dec_state) == first

    @pytest.mark.parametrize("density", [0.05, 0.5, 0.95])
    def test_binary(self, codec, density):
        enc_state, dec_state = codec.create_states()
        for seed in self.SEEDS:
            z = codec.encode(random_spikes(codec.in_shape, seed, density), enc_state)
            y = codec.decode(z, dec_state)
            assert z.shape == codec.code_shape and y.shape == codec.in_shape
            assert is_binary(z) and is_binary(y), f"seed {seed}"

    def test_zero_input_gives_zero_code(self, unshifted_codec):
        enc_state, dec_state = unshifted_codec.create_states()
        x = SpikeTensor.zeros(unshifted_codec.in_shape)
        for _ in self.SEEDS:
            z = unshifted_codec.encode(x, enc_state)
            assert z.popcount() == 0
            assert unshifted_codec.decode(z, dec_state).popcount() == 0

    def test_zero_input_with_shift(self, codec):
        # a positive shift makes silent inputs fire eventually
        enc_state, _ = codec.create_states()
        x = SpikeTensor.zeros(codec.in_shape)
        assert sum(codec.encode(x, enc_state).popcount() for _ in range(4)) > 0


class TestPayload:
    def test_payload_bits(self):
        assert payload_bits((512, 4, 4), 2) == 16384
        assert payload_bits((4, 1, 1), 2) == 8
        assert payload_bits((4, 1, 1), 0) == 0
        with pytest.raises(CheckError, match=">= 0"):
            payload_bits((4, 1, 1), -1)

    def test_compression_ratio(self):
        assert compression_ratio(16384, 8) == 2048
        assert compression_ratio(payload_bits((16, 16, 16), 2), payload_bits((4, 4, 4), 2)) == 16
        with pytest.raises(CheckError, match="must be > 0"):
            compression_ratio(16384, 0)
