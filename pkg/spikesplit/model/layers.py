"""
Inference-only layers of spiking networks.

Activations flowing between layers are unbatched ``torch.float32`` tensors
of shape ``(C, H, W)`` or ``(N,)``; spikes are 0/1 valued floats there.
Every layer knows its input and output shape, and parameters never
require gradients.
"""
from typing import Dict, Any, Union, List
from collections import defaultdict
import numpy as np
import torch as t
import torch.nn as nn
import torch.nn.functional as F

from spikesplit.utils.checker import CheckError, check_shape
from .spike import Shape, SpikeTensor, ShapeLike, as_shape, nonzero_fraction
from .neuron import LifParams, LifState, lif_update

BN_EPS = 1e-5


def _frozen(*size) -> nn.Parameter:
    return nn.Parameter(t.zeros(*size, dtype=t.float32), requires_grad=False)


def _conv_out(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


class Layer(nn.Module):
    """
    Base of all layers.

    Attributes:
        kind: Name used in topology descriptions.
        synaptic: Whether the layer performs synaptic operations, only
            these layers are counted by the energy model.
    """

    kind = ""
    synaptic = False
    stateful = False

    def __init__(self, in_shape: ShapeLike, out_shape: ShapeLike):
        super().__init__()
        self.in_shape = as_shape(in_shape)
        self.out_shape = as_shape(out_shape)

    def flops(self) -> int:
        return 0

    def hyper_parameters(self) -> Dict[str, Any]:
        return {}

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, **self.hyper_parameters()}

    def check_weights(self):
        pass

    def extra_repr(self):
        return f"in={list(self.in_shape)}, out={list(self.out_shape)}"


class Conv2d(Layer):
    kind = "conv2d"
    synaptic = True

    def __init__(
        self,
        in_shape: ShapeLike,
        out_channels: int,
        kernel: int,
        stride: int = 1,
        padding: int = 0,
    ):
        in_shape = as_shape(in_shape)
        if len(in_shape) != 3:
            raise CheckError(f"Conv2d input must be (C, H, W), got {in_shape}")
        if kernel < 1 or stride < 1 or padding < 0:
            raise CheckError(
                f"Invalid conv2d kernel={kernel}, stride={stride}, padding={padding}"
            )
        c, h, w = in_shape
        h_out = _conv_out(h, kernel, stride, padding)
        w_out = _conv_out(w, kernel, stride, padding)
        if h_out < 1 or w_out < 1:
            raise CheckError(
                f"Conv2d with kernel {kernel} does not fit input {list(in_shape)}"
            )
        super().__init__(in_shape, Shape(out_channels, h_out, w_out))
        self.kernel = kernel
        self.stride = stride
        self.padding = padding
        self.weight = _frozen(out_channels, c, kernel, kernel)

    def forward(self, x: t.Tensor) -> t.Tensor:
        return F.conv2d(
            x.unsqueeze(0), self.weight, stride=self.stride, padding=self.padding
        ).squeeze(0)

    def flops(self) -> int:
        c_out, h_out, w_out = self.out_shape
        return 2 * self.kernel * self.kernel * self.in_shape[0] * c_out * h_out * w_out

    def hyper_parameters(self):
        return {
            "out_channels": self.out_shape[0],
            "kernel": self.kernel,
            "stride": self.stride,
            "padding": self.padding,
        }


class ConvTranspose2d(Layer):
    kind = "conv_transpose2d"
    synaptic = True

    def __init__(
        self,
        in_shape: ShapeLike,
        out_channels: int,
        kernel: int,
        stride: int = 1,
        padding: int = 0,
        output_padding: int = 0,
    ):
        in_shape = as_shape(in_shape)
        if len(in_shape) != 3:
            raise CheckError(
                f"ConvTranspose2d input must be (C, H, W), got {in_shape}"
            )
        if not 0 <= output_padding < max(stride, 1) or kernel < 1 or padding < 0:
            raise CheckError(
                f"Invalid transposed conv kernel={kernel}, stride={stride}, "
                f"padding={padding}, output_padding={output_padding}"
            )
        c, h, w = in_shape
        h_out = (h - 1) * stride - 2 * padding + kernel + output_padding
        w_out = (w - 1) * stride - 2 * padding + kernel + output_padding
        super().__init__(in_shape, Shape(out_channels, h_out, w_out))
        self.kernel = kernel
        self.stride = stride
        self.padding = padding
        self.output_padding = output_padding
        self.weight = _frozen(c, out_channels, kernel, kernel)

    def forward(self, x: t.Tensor) -> t.Tensor:
        return F.conv_transpose2d(
            x.unsqueeze(0),
            self.weight,
            stride=self.stride,
            padding=self.padding,
            output_padding=self.output_padding,
        ).squeeze(0)

    def flops(self) -> int:
        c_in, h_in, w_in = self.in_shape
        return 2 * self.kernel * self.kernel * c_in * self.out_shape[0] * h_in * w_in

    def hyper_parameters(self):
        return {
            "out_channels": self.out_shape[0],
            "kernel": self.kernel,
            "stride": self.stride,
            "padding": self.padding,
            "output_padding": self.output_padding,
        }


class BatchNorm(Layer):
    """
    Inference mode batch normalization over the first dimension, running
    statistics are loaded, never computed.
    """

    kind = "batch_norm"

    def __init__(self, in_shape: ShapeLike):
        in_shape = as_shape(in_shape)
        super().__init__(in_shape, in_shape)
        channels = in_shape[0]
        self.weight = nn.Parameter(t.ones(channels), requires_grad=False)
        self.bias = _frozen(channels)
        self.register_buffer("running_mean", t.zeros(channels))
        self.register_buffer("running_var", t.ones(channels))

    def forward(self, x: t.Tensor) -> t.Tensor:
        view = [-1] + [1] * (x.dim() - 1)
        scale = self.weight / t.sqrt(self.running_var + BN_EPS)
        return (x - self.running_mean.view(view)) * scale.view(view) + self.bias.view(
            view
        )

    def flops(self) -> int:
        return 2 * self.in_shape.numel

    def check_weights(self):
        if not bool(t.all(self.running_var > 0)):
            raise CheckError("Batch norm variance must be > 0")


class Linear(Layer):
    kind = "linear"
    synaptic = True

    def __init__(self, in_shape: ShapeLike, out_features: int):
        in_shape = as_shape(in_shape)
        if len(in_shape) != 1:
            raise CheckError(f"Linear input must be flat, got {in_shape}")
        super().__init__(in_shape, Shape(out_features))
        self.weight = _frozen(out_features, in_shape[0])
        self.bias = _frozen(out_features)

    def forward(self, x: t.Tensor) -> t.Tensor:
        return F.linear(x, self.weight, self.bias)

    def flops(self) -> int:
        return 2 * self.in_shape[0] * self.out_shape[0]

    def hyper_parameters(self):
        return {"out_features": self.out_shape[0]}


class AvgPool(Layer):
    kind = "avg_pool"

    def __init__(self, in_shape: ShapeLike, kernel: int):
        in_shape = as_shape(in_shape)
        if len(in_shape) != 3:
            raise CheckError(f"AvgPool input must be (C, H, W), got {in_shape}")
        c, h, w = in_shape
        if kernel < 1 or kernel > min(h, w):
            raise CheckError(f"Pool kernel {kernel} does not fit {list(in_shape)}")
        super().__init__(in_shape, Shape(c, h // kernel, w // kernel))
        self.kernel = kernel

    def forward(self, x: t.Tensor) -> t.Tensor:
        return F.avg_pool2d(x.unsqueeze(0), self.kernel).squeeze(0)

    def flops(self) -> int:
        return self.kernel * self.kernel * self.out_shape.numel

    def hyper_parameters(self):
        return {"kernel": self.kernel}


class Flatten(Layer):
    kind = "flatten"

    def __init__(self, in_shape: ShapeLike):
        in_shape = as_shape(in_shape)
        super().__init__(in_shape, Shape(in_shape.numel))

    def forward(self, x: t.Tensor) -> t.Tensor:
        return x.reshape(-1)


class Lif(Layer):
    kind = "lif"
    stateful = True

    def __init__(self, in_shape: ShapeLike, params: LifParams = None):
        in_shape = as_shape(in_shape)
        super().__init__(in_shape, in_shape)
        self.params = params or LifParams()

    def create_state(self) -> LifState:
        return LifState(self.out_shape, self.params)

    def forward(self, x: t.Tensor, state: LifState = None) -> t.Tensor:
        if state is None:
            raise CheckError("Lif layer needs a LifState.")
        return lif_update(state, x).to(t.float32)

    def hyper_parameters(self):
        return self.params.to_dict()


class ResidualAdd(Layer):
    """
    Adds the activation of an earlier boundary to the input.

    Boundary ``source`` is the input of layer ``source``. When the source
    shape differs from the input shape, a 1x1 strided conv followed by
    batch norm projects it first.
    """

    kind = "residual_add"

    def __init__(self, in_shape: ShapeLike, source: int, source_shape: ShapeLike):
        in_shape = as_shape(in_shape)
        source_shape = as_shape(source_shape)
        super().__init__(in_shape, in_shape)
        self.source = source
        self.source_shape = source_shape
        if source_shape == in_shape:
            self.shortcut_conv = None
            self.shortcut_bn = None
        else:
            if len(source_shape) != 3 or len(in_shape) != 3:
                raise CheckError(
                    f"Can not project residual {source_shape} onto {in_shape}"
                )
            stride = source_shape[1] // in_shape[1]
            if stride < 1 or _conv_out(source_shape[1], 1, stride, 0) != in_shape[1]:
                raise CheckError(
                    f"Can not project residual {source_shape} onto {in_shape}"
                )
            self.shortcut_conv = Conv2d(source_shape, in_shape[0], 1, stride=stride)
            self.shortcut_bn = BatchNorm(self.shortcut_conv.out_shape)
            if self.shortcut_conv.out_shape != in_shape:
                raise CheckError(
                    f"Can not project residual {source_shape} onto {in_shape}"
                )

    def project(self, skip: t.Tensor) -> t.Tensor:
        if self.shortcut_conv is None:
            return skip
        return self.shortcut_bn(self.shortcut_conv(skip))

    def forward(self, x: t.Tensor, skip: t.Tensor = None) -> t.Tensor:
        if skip is None:
            raise CheckError("ResidualAdd needs the source activation.")
        check_shape(skip, self.source_shape.dims, "residual source")
        return x + self.project(skip)

    def flops(self) -> int:
        flops = self.in_shape.numel
        if self.shortcut_conv is not None:
            flops += self.shortcut_conv.flops() + self.shortcut_bn.flops()
        return flops

    def check_weights(self):
        if self.shortcut_bn is not None:
            self.shortcut_bn.check_weights()

    def hyper_parameters(self):
        return {"source": self.source}


LAYER_KINDS = {
    cls.kind: cls
    for cls in (
        Conv2d,
        ConvTranspose2d,
        BatchNorm,
        Linear,
        AvgPool,
        Flatten,
        Lif,
        ResidualAdd,
    )
}


def build_layer(desc: Dict[str, Any], in_shape: Shape, boundaries: List[Shape]) -> Layer:
    """
    Create a layer from its description.

    Args:
        desc: Description as produced by :meth:`Layer.describe`.
        in_shape: Shape of the layer input.
        boundaries: Input shapes of all preceding layers, used to resolve
            residual sources.
    """
    desc = dict(desc)
    kind = desc.pop("kind", None)
    if kind not in LAYER_KINDS:
        raise CheckError(f'Unknown layer kind "{kind}"')
    try:
        if kind == "lif":
            return Lif(in_shape, LifParams.from_dict(desc))
        if kind == "residual_add":
            source = desc["source"]
            if not isinstance(source, int) or not 0 <= source < len(boundaries):
                raise CheckError(f"Residual source {source} is not an earlier boundary")
            return ResidualAdd(in_shape, source, boundaries[source])
        return LAYER_KINDS[kind](in_shape, **desc)
    except (TypeError, KeyError) as e:
        raise CheckError(f'Invalid description of layer "{kind}": {e}') from e


def layer_forward(
    layer: Layer,
    x: Union[t.Tensor, SpikeTensor],
    state: LifState = None,
    skip: t.Tensor = None,
) -> Union[t.Tensor, SpikeTensor]:
    """
    Run one layer on one activation. Spike inputs are used as 0/1 reals.

    Returns:
        A :class:`.SpikeTensor` for :class:`Lif` layers, a float tensor
        otherwise.

    Raises:
        ``CheckError`` on a shape mismatch or a missing LIF state.
    """
    if isinstance(x, SpikeTensor):
        x = x.to_dense()
    check_shape(x, layer.in_shape.dims, f"{layer.kind} input")
    if isinstance(layer, Lif):
        if state is None:
            raise CheckError("Lif layer needs a LifState.")
        return SpikeTensor(layer.out_shape, lif_update(state, x))
    if isinstance(layer, ResidualAdd):
        return layer(x, skip)
    return layer(x)


def layer_flops(layer: Layer) -> int:
    """
    Dense FLOPs of one timestep of ``layer``, a residual add counts its
    shortcut too. LIF and flatten layers count 0.
    """
    return layer.flops()


class RateMonitor:
    """
    Records the input activity of synaptic layers at every timestep of
    one sample, the energy model multiplies it with layer FLOPs.
    """

    def __init__(self):
        self.flops = {}
        self.rates = defaultdict(list)

    def record(self, key: str, flops: int, activation: t.Tensor):
        self.flops[key] = flops
        self.rates[key].append(nonzero_fraction(activation))

    def mean_rate(self, key: str) -> float:
        rates = self.rates[key]
        return float(np.mean(rates)) if rates else 0.0

    def layers(self) -> Dict[str, tuple]:
        """
        Returns:
            ``{key: (flops, mean input rate)}`` of every recorded layer.
        """
        return {key: (self.flops[key], self.mean_rate(key)) for key in self.flops}

    def clear(self):
        self.flops.clear()
        self.rates.clear()


def conv2d_direct(
    x: np.ndarray, weight: np.ndarray, stride: int = 1, padding: int = 0
) -> np.ndarray:
    """
    Nested loop reference convolution.

    Args:
        x: Input of shape ``(C_in, H, W)``.
        weight: Kernel of shape ``(C_out, C_in, K, K)``.
    """
    x = np.asarray(x, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    c_out, _, k, _ = weight.shape
    _, h, w = x.shape
    padded = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    h_out = _conv_out(h, k, stride, padding)
    w_out = _conv_out(w, k, stride, padding)
    out = np.zeros((c_out, h_out, w_out))
    for co in range(c_out):
        for oy in range(h_out):
            for ox in range(w_out):
                window = padded[:, oy * stride : oy * stride + k, ox * stride : ox * stride + k]
                out[co, oy, ox] = np.sum(window * weight[co])
    return out.astype(np.float32)


def conv_transpose2d_direct(
    x: np.ndarray,
    weight: np.ndarray,
    stride: int = 1,
    padding: int = 0,
    output_padding: int = 0,
) -> np.ndarray:
    """
    Scatter based reference transposed convolution.

    Args:
        x: Input of shape ``(C_in, H, W)``.
        weight: Kernel of shape ``(C_in, C_out, K, K)``.
    """
    x = np.asarray(x, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    c_in, c_out, k, _ = weight.shape
    _, h, w = x.shape
    full_h = (h - 1) * stride + k + output_padding
    full_w = (w - 1) * stride + k + output_padding
    full = np.zeros((c_out, full_h, full_w))
    for ci in range(c_in):
        for iy in range(h):
            for ix in range(w):
                full[:, iy * stride : iy * stride + k, ix * stride : ix * stride + k] += (
                    x[ci, iy, ix] * weight[ci]
                )
    h_out = full_h - 2 * padding
    w_out = full_w - 2 * padding
    return full[:, padding : padding + h_out, padding : padding + w_out].astype(
        np.float32
    )
