from typing import Sequence, Tuple
from ..spike import ShapeLike
from ..neuron import LifParams
from ..graph import NetworkGraph
from .base import GraphBuilder

# (channels, average pool before the LIF)
MINI_PLAN = [
    (8, False),
    (8, True),
    (16, False),
    (16, True),
    (32, False),
    (32, True),
    (64, False),
    (64, True),
]

VGG16_PLAN = [
    (64, False),
    (64, True),
    (128, False),
    (128, True),
    (256, False),
    (256, False),
    (256, True),
    (512, False),
    (512, False),
    (512, True),
    (512, False),
    (512, False),
    (512, True),
]


def spiking_vgg(
    plan: Sequence[Tuple[int, bool]],
    hidden: int,
    in_shape: ShapeLike = (3, 32, 32),
    num_classes: int = 10,
    lif: LifParams = None,
    name: str = "vgg",
) -> NetworkGraph:
    """
    Spiking VGG: conv-bn(-pool)-lif blocks, then a global average pool, a
    hidden linear + LIF, and a linear head. Split point ``SPi`` follows
    conv block ``i``.
    """
    builder = GraphBuilder(in_shape, lif)
    for idx, (channels, pool) in enumerate(plan):
        builder.conv_bn_lif(channels, 3, padding=1, pool=2 if pool else None)
        builder.mark_split(f"SP{idx + 1}")
    builder.classifier(num_classes, hidden=hidden)
    return builder.build(num_classes, name)


def vgg_mini(in_shape: ShapeLike = (3, 32, 32), num_classes=10, lif=None):
    """
    Desk scale spiking VGG with 8 conv blocks of widths 8 .. 64 and split
    points SP1 .. SP8.
    """
    return spiking_vgg(MINI_PLAN, 64, in_shape, num_classes, lif, name="vgg-mini")


def spiking_vgg16(in_shape: ShapeLike = (3, 32, 32), num_classes=10, lif=None):
    return spiking_vgg(VGG16_PLAN, 512, in_shape, num_classes, lif, name="vgg16")
