from spikesplit.model.spike import (
    Shape,
    SpikeTensor,
    BitFormatError,
    pack_bits,
    unpack_bits,
    firing_rate,
    nonzero_fraction,
)
from spikesplit.utils.checker import CheckError
from test.util_fixtures import *

import numpy as np
import pytest
import torch as t


class TestShape:
    param_test_init = [
        ((4, 1, 1), (4, 1, 1), 4),
        (([512, 4, 4],), (512, 4, 4), 8192),
        ((10,), (10,), 10),
        ((np.int64(5),), (5,), 5),
        ((np.array([3, 2]),), (3, 2), 6),
    ]

    @pytest.mark.parametrize("args,dims,numel", param_test_init)
    def test_init(self, args, dims, numel):
        shape = Shape(*args)
        assert shape.dims == dims
        assert shape.numel == numel
        assert len(shape) == len(dims)
        assert list(shape) == list(dims)
        assert all(type(d) is int for d in shape)

    param_test_invalid = [
        ((), "at least one extent"),
        ((0, 4), "invalid extent"),
        ((2 ** 16, 2 ** 16), "2\\^32 or more"),
    ]

    @pytest.mark.parametrize("args,match", param_test_invalid)
    def test_invalid(self, args, match):
        with pytest.raises(CheckError, match=match):
            Shape(*args)

    def test_eq_hash(self):
        assert Shape(4, 1, 1) == Shape([4, 1, 1])
        assert Shape(4, 1, 1) == (4, 1, 1)
        assert Shape(4, 1, 1) == [4, 1, 1]
        assert Shape(4, 1, 1) != Shape(1, 1, 4)
        assert len({Shape(2, 2), Shape([2, 2])}) == 1


class TestPackBits:
    ########################################################################
    # Test for pack_bits
    ########################################################################
    param_test_pack = [
        ([1, 0, 1, 1, 0, 0, 0, 0, 1], bytes([0xB0, 0x80])),
        ([1, 0, 0, 0, 0, 0, 0, 0, 1], bytes([0x80, 0x80])),
        ([1] * 8, bytes([0xFF])),
        ([0] * 8, bytes([0x00])),
        ([], b""),
    ]

    @pytest.mark.parametrize("bits,packed", param_test_pack)
    def test_pack(self, bits, packed):
        assert pack_bits(bits) == packed
        assert pack_bits(np.array(bits, dtype=np.uint8)) == packed
        assert pack_bits(t.tensor(bits, dtype=t.float32)) == packed

    def test_pack_non_binary(self):
        with pytest.raises(CheckError, match="Only 0 and 1"):
            pack_bits([0, 2, 1])

    ########################################################################
    # Test for unpack_bits
    ########################################################################
    def test_unpack(self):
        assert list(unpack_bits(bytes([0xB0, 0x80]), 9)) == [1, 0, 1, 1, 0, 0, 0, 0, 1]
        assert unpack_bits(b"", 0).shape == (0,)

    param_test_unpack_invalid = [
        (bytes([0xB0]), 9, "need 2 bytes"),
        (bytes([0xB0, 0x80, 0x00]), 9, "need 2 bytes"),
        (bytes([0xB0, 0x81]), 9, "padding bit"),
        (bytes([0x01]), 4, "padding bit"),
    ]

    @pytest.mark.parametrize("data,n,match", param_test_unpack_invalid)
    def test_unpack_invalid(self, data, n, match):
        with pytest.raises(BitFormatError, match=match):
            unpack_bits(data, n)

    def test_roundtrip_random(self):
        rng = np.random.default_rng(0)
        for n in [1, 7, 8, 9, 63, 64, 65, 1000]:
            bits = rng.integers(0, 2, size=n)
            packed = pack_bits(bits)
            assert len(packed) == (n + 7) // 8
            assert np.array_equal(unpack_bits(packed, n), bits)


class TestSpikeTensor:
    def test_from_tensor(self):
        x = SpikeTensor.from_tensor(t.tensor([[1.0, 0.0], [0.0, 1.0]]))
        assert x.shape == Shape(2, 2)
        assert x.popcount() == 2
        assert x.bits == bytes([0x90])
        assert t.equal(x.to_dense(), t.tensor([[1.0, 0.0], [0.0, 1.0]]))

    def test_from_tensor_invalid(self):
        with pytest.raises(CheckError, match="values other than 0 and 1"):
            SpikeTensor.from_tensor(t.tensor([0.0, 0.3]))
        with pytest.raises(CheckError, match="can not be viewed"):
            SpikeTensor.from_tensor(t.ones([4]), shape=(2, 3))

    def test_from_bits(self):
        x = SpikeTensor.from_bits((4, 1, 1), bytes([0xA0]))
        assert x.to_bool().reshape(-1).tolist() == [True, False, True, False]
        with pytest.raises(BitFormatError):
            SpikeTensor.from_bits((4, 1, 1), bytes([0xA1]))

    def test_zeros_ones(self):
        assert SpikeTensor.zeros((3, 3)).popcount() == 0
        assert SpikeTensor.ones((3, 3)).popcount() == 9
        assert SpikeTensor.ones((3, 3)).bits == bytes([0xFF, 0x80])

    def test_reshape(self):
        x = SpikeTensor.from_tensor(t.tensor([1, 0, 0, 1, 1, 0]))
        y = x.reshape((2, 3))
        assert y.shape == Shape(2, 3)
        assert y.bits == x.bits
        assert y.reshape(6) == x
        with pytest.raises(CheckError, match="Can not reshape"):
            x.reshape((4, 2))

    def test_eq(self):
        a = SpikeTensor.from_tensor(t.tensor([1, 0, 1]))
        b = SpikeTensor.from_bits((3,), bytes([0xA0]))
        assert a == b
        assert hash(a) == hash(b)
        assert a != SpikeTensor.from_tensor(t.tensor([1, 1, 1]))
        assert a != SpikeTensor.from_tensor(t.tensor([[1, 0, 1]]))


class TestFiringRate:
    def test_firing_rate(self):
        assert firing_rate(SpikeTensor.zeros((4, 4))) == 0.0
        assert firing_rate(SpikeTensor.ones((4, 4))) == 1.0
        assert firing_rate(SpikeTensor.from_tensor(t.tensor([1, 0, 0, 1]))) == 0.5

    def test_nonzero_fraction(self):
        assert nonzero_fraction(t.tensor([0.0, 0.25, 0.0, 3.0])) == 0.5
        spikes = SpikeTensor.from_tensor(t.tensor([1, 0, 0, 0]))
        assert nonzero_fraction(spikes) == firing_rate(spikes) == 0.25
        with pytest.raises(CheckError, match="empty"):
            nonzero_fraction(t.zeros([0]))
