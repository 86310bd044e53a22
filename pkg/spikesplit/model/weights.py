"""
Weights container and deterministic initialization.

Container layout, all integers big-endian::

    magic        8 bytes  b"NCWTS001"
    count        u32
    entries      count times:
        name_len u16, name (UTF-8), dtype u8 (0 = float32), rank u8,
        extents  rank x u32, values (float32, big-endian, row-major)
    crc          u32, zlib CRC32 of every preceding byte

Seeded initialization draws uniforms from SplitMix64 in counter mode: the
``i``-th draw (0-based, counted over all entries in ``state_dict`` order)
mixes ``state = seed + (i + 1) * 0x9E3779B97F4A7C15 (mod 2^64)`` with the
standard SplitMix64 finalizer and maps it to ``u = (z >> 11) * 2^-53``.
Conv / linear weights are He-uniform, ``(2u - 1) * sqrt(6 / fan_in)``,
``fan_in`` being the product of all but the first extent.
"""
from collections import OrderedDict
from typing import Dict, Iterable, Tuple, Union, ClassVar, Optional, Any
import hashlib
import json
import struct
import zlib
import numpy as np
import torch as t
import torch.nn as nn

from spikesplit.utils.prepare import prep_load_weights, prep_create_parent_dir
from .layers import Conv2d, ConvTranspose2d, Linear, BatchNorm
from .graph import NetworkGraph
from .codec import Bottleneck, WEIGHT_PREFIX

MAGIC = b"NCWTS001"
DTYPE_FLOAT32 = 0

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_1 = 0xBF58476D1CE4E5B9
MIX_2 = 0x94D049BB133111EB

Entries = Dict[str, t.Tensor]


class ContainerError(ValueError):
    """
    Raised on a malformed container: bad magic, truncation, unknown dtype,
    duplicate names.
    """

    pass


class IntegrityError(ContainerError):
    """
    Raised when the CRC32 trailer does not match the content.
    """

    pass


class _Layout:
    header: ClassVar[struct.Struct] = struct.Struct(">8sI")
    name_len: ClassVar[struct.Struct] = struct.Struct(">H")
    tensor_info: ClassVar[struct.Struct] = struct.Struct(">BB")
    extent: ClassVar[struct.Struct] = struct.Struct(">I")
    crc: ClassVar[struct.Struct] = struct.Struct(">I")


def _as_pairs(entries) -> Iterable[Tuple[str, Any]]:
    if isinstance(entries, dict):
        return list(entries.items())
    return list(entries)


def save(entries: Union[Entries, Iterable[Tuple[str, Any]]]) -> bytes:
    """
    Serialize named tensors.

    Args:
        entries: A mapping, or a sequence of ``(name, tensor)`` pairs,
            values may be torch tensors or numpy arrays.

    Raises:
        ``ContainerError`` on duplicate or oversized names.
    """
    pairs = _as_pairs(entries)
    chunks = [_Layout.header.pack(MAGIC, len(pairs))]
    seen = set()
    for name, value in pairs:
        if name in seen:
            raise ContainerError(f'Duplicate weight name "{name}"')
        seen.add(name)
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ContainerError(f'Weight name "{name[:32]}..." is too long')
        if t.is_tensor(value):
            value = value.detach().cpu().numpy()
        array = np.asarray(value, dtype=np.float32)
        if array.ndim > 0xFF:
            raise ContainerError(f'Weight "{name}" has too many dimensions')
        chunks.append(_Layout.name_len.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(_Layout.tensor_info.pack(DTYPE_FLOAT32, array.ndim))
        chunks.extend(_Layout.extent.pack(d) for d in array.shape)
        chunks.append(array.astype(">f4").tobytes())
    body = b"".join(chunks)
    return body + _Layout.crc.pack(zlib.crc32(body))


class _Reader:
    def __init__(self, data: bytes, end: int):
        self.data = data
        self.pos = 0
        self.end = end

    def take(self, size: int) -> bytes:
        if self.pos + size > self.end:
            raise ContainerError("Weights container is truncated.")
        chunk = self.data[self.pos : self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, layout: struct.Struct):
        return layout.unpack(self.take(layout.size))


def load(data: bytes) -> "OrderedDict[str, t.Tensor]":
    """
    Parse a container produced by :func:`save`.

    Returns:
        Named ``float32`` tensors in container order.

    Raises:
        ``ContainerError`` on bad magic, truncation, unknown dtype or
        duplicate names, ``IntegrityError`` on a CRC mismatch.
    """
    data = bytes(data)
    minimum = _Layout.header.size + _Layout.crc.size
    if len(data) < minimum:
        raise ContainerError(
            f"Weights container needs at least {minimum} bytes, got {len(data)}"
        )
    if data[:8] != MAGIC:
        raise ContainerError(f"Bad weights container magic {data[:8]!r}")

    body_end = len(data) - _Layout.crc.size
    reader = _Reader(data, body_end)
    _, count = reader.unpack(_Layout.header)
    entries = OrderedDict()
    for _ in range(count):
        (name_len,) = reader.unpack(_Layout.name_len)
        try:
            name = reader.take(name_len).decode("utf-8")
        except UnicodeDecodeError as e:
            raise ContainerError(f"Weight name is not UTF-8: {e}") from e
        dtype, rank = reader.unpack(_Layout.tensor_info)
        if dtype != DTYPE_FLOAT32:
            raise ContainerError(f'Weight "{name}" has unknown dtype tag {dtype}')
        shape = [reader.unpack(_Layout.extent)[0] for _ in range(rank)]
        numel = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(reader.take(4 * numel), dtype=">f4")
        if name in entries:
            raise ContainerError(f'Duplicate weight name "{name}"')
        entries[name] = t.from_numpy(values.astype(np.float32).reshape(shape))
    if reader.pos != body_end:
        raise ContainerError(
            f"{body_end - reader.pos} unexpected bytes after the last entry"
        )

    (stored,) = _Layout.crc.unpack(data[body_end:])
    actual = zlib.crc32(data[:body_end])
    if stored != actual:
        raise IntegrityError(
            f"Weights container CRC mismatch: stored {stored:08x}, "
            f"computed {actual:08x}"
        )
    return entries


def container_crc(data: bytes) -> int:
    """
    Returns:
        The CRC32 stored in the trailer of a container.
    """
    if len(data) < _Layout.crc.size:
        raise ContainerError("Weights container is truncated.")
    return _Layout.crc.unpack(bytes(data[-_Layout.crc.size :]))[0]


def save_file(path: str, entries: Union[Entries, Iterable[Tuple[str, Any]]]) -> int:
    """
    Returns:
        CRC32 of the written container.
    """
    data = save(entries)
    prep_create_parent_dir(path)
    with open(path, "wb") as file:
        file.write(data)
    return container_crc(data)


def load_file(path: str) -> "OrderedDict[str, t.Tensor]":
    with open(path, "rb") as file:
        return load(file.read())


def splitmix64_uniform(seed: int, offset: int, count: int) -> np.ndarray:
    """
    Uniform ``float64`` values in ``[0, 1)``, draws ``offset .. offset+count-1``
    of the counter mode SplitMix64 stream of ``seed``.
    """
    idx = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * np.uint64(GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_2)
        z = z ^ (z >> np.uint64(31))
    return (z >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def _init_module(
    module: nn.Module,
    prefix: str,
    seed: int,
    entries: Entries,
    offset: int,
    bn_shift: float,
    head: Optional[nn.Module],
    head_gain: float,
) -> int:
    modules = dict(module.named_modules())
    for name, param in module.state_dict().items():
        owner_name, _, attr = name.rpartition(".")
        owner = modules[owner_name]
        shape = tuple(param.shape)
        if isinstance(owner, (Conv2d, ConvTranspose2d, Linear)) and attr == "weight":
            count = int(np.prod(shape))
            fan_in = int(np.prod(shape[1:]))
            u = splitmix64_uniform(seed, offset, count)
            offset += count
            values = (2.0 * u - 1.0) * np.sqrt(6.0 / fan_in)
            if owner is head:
                values = values * head_gain
            value = t.from_numpy(values.astype(np.float32).reshape(shape))
        elif isinstance(owner, BatchNorm):
            fill = {
                "weight": 1.0,
                "bias": bn_shift,
                "running_mean": 0.0,
                "running_var": 1.0,
            }[attr]
            value = t.full(shape, fill, dtype=t.float32)
        else:
            value = t.zeros(shape, dtype=t.float32)
        entries[prefix + name] = value
    return offset


def seeded_init(
    graph: NetworkGraph,
    seed: int,
    bottleneck: Bottleneck = None,
    bn_shift: float = 1.5,
    head_gain: float = 8.0,
) -> "OrderedDict[str, t.Tensor]":
    """
    Deterministic weights of a graph and its optional bottleneck, the same
    seed gives the same bytes on every platform.

    Args:
        graph: Network to initialize.
        seed: 64 bit seed.
        bottleneck: Codec, stored under the ``bottleneck.`` prefix.
        bn_shift: Batch norm shift, a positive shift keeps untrained
            networks spiking.
        head_gain: Scale of the final linear layer, spreads confidences
            over ``(0, 1)``.
    """
    entries = OrderedDict()
    head = graph.layers[-1] if isinstance(graph.layers[-1], Linear) else None
    offset = _init_module(graph, "", seed, entries, 0, bn_shift, head, head_gain)
    if bottleneck is not None:
        _init_module(
            bottleneck, WEIGHT_PREFIX, seed, entries, offset, bn_shift, None, 1.0
        )
    return entries


def load_model(
    entries: Entries, graph: NetworkGraph, bottleneck: Bottleneck = None
):
    """
    Load container entries into a graph and its optional bottleneck.
    """
    graph_entries = {k: v for k, v in entries.items() if not k.startswith(WEIGHT_PREFIX)}
    graph.load_weights(graph_entries)
    if bottleneck is not None:
        codec_entries = {
            k[len(WEIGHT_PREFIX) :]: v
            for k, v in entries.items()
            if k.startswith(WEIGHT_PREFIX)
        }
        prep_load_weights(bottleneck, codec_entries)
        bottleneck.check_weights()


def config_digest(description: Union[str, Dict[str, Any]], crc: int) -> bytes:
    """
    SHA-256 over the canonical JSON of a deployment description followed by
    the 4 byte container CRC. Edge and cloud must agree on it to talk.
    """
    if not isinstance(description, str):
        description = json.dumps(description, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(description.encode("utf-8"))
    digest.update(struct.pack(">I", crc & 0xFFFFFFFF))
    return digest.digest()
