"""
Spike driven compression bottleneck placed at a split point.

The edge encodes ``Z = LIF(BN(Conv(X)))``, the cloud reconstructs
``X' = LIF(BN(ConvTranspose(Z)))``. Both sides are spiking, so the code sent
over the wire is binary and reconstruction is lossy.
"""
from dataclasses import dataclass, field
from typing import Dict, Any, Tuple
import torch.nn as nn

from spikesplit.utils.checker import CheckError
from .spike import Shape, ShapeLike, SpikeTensor, as_shape
from .neuron import LifParams, LifState
from .layers import Conv2d, ConvTranspose2d, BatchNorm, Lif, RateMonitor

WEIGHT_PREFIX = "bottleneck."


def _out_size(size, kernel, stride, padding):
    return (size + 2 * padding - kernel) // stride + 1


@dataclass(frozen=True)
class BottleneckConfig:
    in_shape: Shape
    code_channels: int
    kernel: int
    stride: int
    padding: int = 0
    lif: LifParams = field(default_factory=LifParams)

    def __post_init__(self):
        object.__setattr__(self, "in_shape", as_shape(self.in_shape))
        if len(self.in_shape) != 3:
            raise CheckError(f"Bottleneck input must be (C, H, W), got {self.in_shape}")
        for name in ("code_channels", "kernel", "stride"):
            if getattr(self, name) < 1:
                raise CheckError(f"Bottleneck {name} must be >= 1")
        if self.padding < 0:
            raise CheckError("Bottleneck padding must be >= 0")
        _, h, w = self.in_shape
        code_h = _out_size(h, self.kernel, self.stride, self.padding)
        code_w = _out_size(w, self.kernel, self.stride, self.padding)
        if code_h < 1 or code_w < 1:
            raise CheckError(
                f"Bottleneck kernel {self.kernel} does not fit {list(self.in_shape)}"
            )
        code_shape = Shape(self.code_channels, code_h, code_w)
        if code_shape.numel >= self.in_shape.numel:
            raise CheckError(
                f"Code {list(code_shape)} is not smaller than "
                f"input {list(self.in_shape)}"
            )
        pad_h = h - ((code_h - 1) * self.stride - 2 * self.padding + self.kernel)
        pad_w = w - ((code_w - 1) * self.stride - 2 * self.padding + self.kernel)
        if pad_h != pad_w or not 0 <= pad_h < self.stride:
            raise CheckError(
                f"Transposed conv can not restore {list(self.in_shape)} "
                f"from {list(code_shape)}"
            )
        object.__setattr__(self, "_code_shape", code_shape)
        object.__setattr__(self, "_output_padding", pad_h)

    @property
    def code_shape(self) -> Shape:
        return self._code_shape

    @property
    def output_padding(self) -> int:
        return self._output_padding

    def to_dict(self) -> Dict[str, Any]:
        return {
            "in_shape": list(self.in_shape),
            "code_channels": self.code_channels,
            "kernel": self.kernel,
            "stride": self.stride,
            "padding": self.padding,
            "lif": self.lif.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "BottleneckConfig":
        d = dict(d)
        d["lif"] = LifParams.from_dict(d.get("lif"))
        return cls(**d)


def default_bottleneck(
    in_shape: ShapeLike, code_channels: int = 4, lif: LifParams = None
) -> BottleneckConfig:
    """
    Non overlapping ``k x k`` patches with ``k = min(4, H)``, so a
    ``(512, 4, 4)`` feature map becomes a ``(code_channels, 1, 1)`` code.
    """
    in_shape = as_shape(in_shape)
    kernel = min(4, in_shape[1], in_shape[2])
    return BottleneckConfig(
        in_shape, code_channels, kernel, kernel, 0, lif or LifParams()
    )


class Bottleneck(nn.Module):
    """
    Encoder / decoder pair of one split point. Weights are shared and
    immutable, the two LIF states are per session, see
    :meth:`create_states`.
    """

    def __init__(self, config: BottleneckConfig):
        super().__init__()
        self.config = config
        self.encoder_conv = Conv2d(
            config.in_shape,
            config.code_channels,
            config.kernel,
            stride=config.stride,
            padding=config.padding,
        )
        self.encoder_bn = BatchNorm(config.code_shape)
        self.encoder_lif = Lif(config.code_shape, config.lif)
        self.decoder_conv = ConvTranspose2d(
            config.code_shape,
            config.in_shape[0],
            config.kernel,
            stride=config.stride,
            padding=config.padding,
            output_padding=config.output_padding,
        )
        self.decoder_bn = BatchNorm(config.in_shape)
        self.decoder_lif = Lif(config.in_shape, config.lif)

    @property
    def in_shape(self) -> Shape:
        return self.config.in_shape

    @property
    def code_shape(self) -> Shape:
        return self.config.code_shape

    def create_states(self) -> Tuple[LifState, LifState]:
        """
        Returns:
            Fresh ``(encoder state, decoder state)``.
        """
        return self.encoder_lif.create_state(), self.decoder_lif.create_state()

    def encoder_flops(self) -> int:
        return self.encoder_conv.flops() + self.encoder_bn.flops()

    def decoder_flops(self) -> int:
        return self.decoder_conv.flops() + self.decoder_bn.flops()

    def encode(
        self, x: SpikeTensor, state: LifState, monitor: RateMonitor = None
    ) -> SpikeTensor:
        if x.shape != self.in_shape:
            raise CheckError(
                f"Bottleneck expects {list(self.in_shape)}, got {list(x.shape)}"
            )
        dense = x.to_dense()
        if monitor is not None:
            monitor.record("bottleneck.encoder", self.encoder_conv.flops(), dense)
        out = self.encoder_lif(self.encoder_bn(self.encoder_conv(dense)), state)
        return SpikeTensor.from_tensor(out)

    def decode(
        self, z: SpikeTensor, state: LifState, monitor: RateMonitor = None
    ) -> SpikeTensor:
        if z.shape != self.code_shape:
            raise CheckError(
                f"Bottleneck code must be {list(self.code_shape)}, got {list(z.shape)}"
            )
        dense = z.to_dense()
        if monitor is not None:
            monitor.record("bottleneck.decoder", self.decoder_conv.flops(), dense)
        out = self.decoder_lif(self.decoder_bn(self.decoder_conv(dense)), state)
        return SpikeTensor.from_tensor(out)

    def check_weights(self):
        self.encoder_bn.check_weights()
        self.decoder_bn.check_weights()


def encode(codec: Bottleneck, state: LifState, x: SpikeTensor) -> SpikeTensor:
    return codec.encode(x, state)


def decode(codec: Bottleneck, state: LifState, z: SpikeTensor) -> SpikeTensor:
    return codec.decode(z, state)


def payload_bits(shape: ShapeLike, timesteps_sent: int) -> int:
    """
    Logical bits of ``timesteps_sent`` spike tensors, before byte padding.
    """
    if timesteps_sent < 0:
        raise CheckError(f"Timesteps must be >= 0, got {timesteps_sent}")
    return as_shape(shape).numel * timesteps_sent


def compression_ratio(raw: int, coded: int) -> float:
    """
    Raises:
        ``CheckError`` if ``coded`` is not positive.
    """
    if coded <= 0:
        raise CheckError(f"Coded bit count must be > 0, got {coded}")
    return raw / coded
