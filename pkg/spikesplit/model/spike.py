"""
Binary activation tensors and the bit packing they travel with.

Packed layout: row-major (last dim fastest), element ``i`` is bit
``7 - (i mod 8)`` of byte ``i // 8`` (MSB first), the last byte is zero
padded. This layout is part of the wire contract.
"""
from typing import Iterable, Union, Sequence
import math
import numpy as np
import torch as t

from spikesplit.utils.checker import CheckError, check_binary, check_positive_dims

MAX_ELEMENTS = 2 ** 32


class BitFormatError(ValueError):
    """
    Raised when packed bits can not be decoded: wrong byte count, or a
    nonzero padding bit (which signals corruption).
    """

    pass


class Shape:
    """
    Ordered list of positive extents, e.g. ``Shape(4, 1, 1)`` or
    ``Shape([2, 512, 4, 4])``.
    """

    __slots__ = ("_dims",)

    def __init__(self, *dims):
        if len(dims) == 1 and not isinstance(dims[0], (int, np.integer)):
            dims = tuple(dims[0])
        dims = tuple(int(d) if isinstance(d, np.integer) else d for d in dims)
        if len(dims) == 0:
            raise CheckError("Shape must have at least one extent.")
        check_positive_dims(dims)
        if math.prod(dims) >= MAX_ELEMENTS:
            raise CheckError(f"Shape {list(dims)} has 2^32 or more elements.")
        self._dims = dims

    @property
    def dims(self):
        return self._dims

    @property
    def numel(self) -> int:
        return math.prod(self._dims)

    def __len__(self):
        return len(self._dims)

    def __iter__(self):
        return iter(self._dims)

    def __getitem__(self, item):
        return self._dims[item]

    def __eq__(self, other):
        if isinstance(other, Shape):
            return self._dims == other._dims
        if isinstance(other, (tuple, list)):
            return self._dims == tuple(other)
        return NotImplemented

    def __hash__(self):
        return hash(self._dims)

    def __repr__(self):
        return f"Shape{self._dims}"


ShapeLike = Union[Shape, Sequence[int]]


def as_shape(shape: ShapeLike) -> Shape:
    return shape if isinstance(shape, Shape) else Shape(shape)


def pack_bits(spikes: Union[Iterable[int], np.ndarray, t.Tensor]) -> bytes:
    """
    Pack a flat binary sequence, MSB first, zero padded to whole bytes.

    Example:
        >>> pack_bits([1, 0, 0, 0, 0, 0, 0, 0, 1])
        b'\\x80\\x80'

    Raises:
        ``CheckError`` if any value is not 0 or 1.
    """
    if t.is_tensor(spikes):
        arr = spikes.detach().cpu().reshape(-1).numpy()
    else:
        arr = np.asarray(list(spikes) if not isinstance(spikes, np.ndarray) else spikes)
        arr = arr.reshape(-1)
    if arr.size == 0:
        return b""
    if arr.dtype != np.bool_ and not np.all((arr == 0) | (arr == 1)):
        raise CheckError("Only 0 and 1 can be packed into bits.")
    return np.packbits(arr.astype(np.uint8), bitorder="big").tobytes()


def unpack_bits(data: bytes, n: int) -> np.ndarray:
    """
    Exact inverse of :func:`pack_bits` for the first ``n`` bits.

    Returns:
        A ``numpy.uint8`` array of length ``n``.

    Raises:
        ``BitFormatError`` if ``len(data) != ceil(n / 8)`` or a padding
        bit is set.
    """
    if n < 0:
        raise CheckError(f"Bit count must be >= 0, got {n}")
    if len(data) != (n + 7) // 8:
        raise BitFormatError(
            f"{n} bits need {(n + 7) // 8} bytes, got {len(data)} bytes"
        )
    if n == 0:
        return np.zeros([0], dtype=np.uint8)
    bits = np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8), bitorder="big")
    if bits[n:].any():
        raise BitFormatError("Nonzero padding bit in packed spikes.")
    return bits[:n]


class SpikeTensor:
    """
    Immutable binary tensor. Values are held unpacked (``torch.bool``) for
    computation, the packed form is produced on demand by :attr:`bits`.

    Do not call the constructor with unchecked data, use
    :meth:`from_tensor`, :meth:`from_bits` or :meth:`zeros`.
    """

    __slots__ = ("_shape", "_values", "_bits")

    def __init__(self, shape: Shape, values: t.Tensor):
        self._shape = shape
        self._values = values
        self._bits = None

    @classmethod
    def from_tensor(cls, tensor: t.Tensor, shape: ShapeLike = None) -> "SpikeTensor":
        """
        Build from a tensor holding only 0 and 1 (any dtype).

        Args:
            tensor: Source values, copied.
            shape: Optional shape to reinterpret the values with, by default
                the shape of ``tensor``.
        """
        shape = as_shape(tensor.shape if shape is None else shape)
        if tensor.numel() != shape.numel:
            raise CheckError(
                f"Tensor with {tensor.numel()} elements can not be "
                f"viewed as {shape}"
            )
        check_binary(tensor, "spikes")
        values = (tensor.detach() != 0).reshape(shape.dims).cpu()
        return cls(shape, values)

    @classmethod
    def from_bits(cls, shape: ShapeLike, bits: bytes) -> "SpikeTensor":
        shape = as_shape(shape)
        unpacked = unpack_bits(bits, shape.numel)
        values = t.from_numpy(unpacked.astype(np.bool_)).reshape(shape.dims)
        result = cls(shape, values)
        result._bits = bytes(bits)
        return result

    @classmethod
    def zeros(cls, shape: ShapeLike) -> "SpikeTensor":
        shape = as_shape(shape)
        return cls(shape, t.zeros(shape.dims, dtype=t.bool))

    @classmethod
    def ones(cls, shape: ShapeLike) -> "SpikeTensor":
        shape = as_shape(shape)
        return cls(shape, t.ones(shape.dims, dtype=t.bool))

    @property
    def shape(self) -> Shape:
        return self._shape

    @property
    def numel(self) -> int:
        return self._shape.numel

    @property
    def bits(self) -> bytes:
        if self._bits is None:
            self._bits = pack_bits(self._values)
        return self._bits

    def to_dense(self, dtype=t.float32) -> t.Tensor:
        """
        Returns:
            A new tensor of ``dtype`` holding 0 and 1.
        """
        return self._values.to(dtype)

    def to_bool(self) -> t.Tensor:
        return self._values.clone()

    def popcount(self) -> int:
        return int(self._values.sum())

    def reshape(self, shape: ShapeLike) -> "SpikeTensor":
        """
        Reinterpret with another shape, element order is preserved.
        """
        shape = as_shape(shape)
        if shape.numel != self.numel:
            raise CheckError(f"Can not reshape {self._shape} to {shape}")
        result = SpikeTensor(shape, self._values.reshape(shape.dims))
        result._bits = self._bits
        return result

    def __eq__(self, other):
        if not isinstance(other, SpikeTensor):
            return NotImplemented
        return self._shape == other._shape and bool(
            t.equal(self._values, other._values)
        )

    def __hash__(self):
        return hash((self._shape, self.bits))

    def __repr__(self):
        return f"SpikeTensor(shape={list(self._shape)}, ones={self.popcount()})"


def firing_rate(x: SpikeTensor) -> float:
    """
    Returns:
        Fraction of 1-bits in ``x``.

    Raises:
        ``CheckError`` on an empty tensor.
    """
    if x.numel == 0:
        raise CheckError("Firing rate of an empty tensor is undefined.")
    return x.popcount() / x.numel


def nonzero_fraction(x: Union[SpikeTensor, t.Tensor]) -> float:
    """
    Fraction of nonzero elements of any activation, equal to
    :func:`firing_rate` for spike tensors.
    """
    if isinstance(x, SpikeTensor):
        return firing_rate(x)
    if x.numel() == 0:
        raise CheckError("Activity of an empty tensor is undefined.")
    return int(t.count_nonzero(x)) / x.numel()
