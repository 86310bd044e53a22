from ..spike import ShapeLike
from ..neuron import LifParams
from ..layers import Conv2d, BatchNorm, AvgPool, Flatten, Linear
from ..graph import NetworkGraph
from .base import GraphBuilder


def split_probe(
    in_shape: ShapeLike = (3, 16, 16),
    channels: int = 512,
    num_classes: int = 10,
    lif: LifParams = None,
) -> NetworkGraph:
    """
    Smallest network whose single split point ``SP1`` carries a wide deep
    feature map: one 4x4 stride 4 conv maps a 16x16 input onto
    ``(channels, 4, 4)``, the ``(512, 4, 4)`` activation a resnet-18 hands
    over at its seventh block.
    """
    builder = GraphBuilder(in_shape, lif)
    builder.add(Conv2d, channels, 4, stride=4)
    builder.add(BatchNorm)
    builder.lif_layer()
    builder.mark_split("SP1")
    builder.add(AvgPool, builder.shape[1])
    builder.add(Flatten)
    builder.add(Linear, num_classes)
    return builder.build(num_classes, "probe")
