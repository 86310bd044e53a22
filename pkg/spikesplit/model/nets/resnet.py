from typing import Sequence
from ..spike import ShapeLike
from ..neuron import LifParams
from ..layers import Conv2d, BatchNorm
from ..graph import NetworkGraph
from .base import GraphBuilder


# basic blocks per stage of an 18 layer resnet
BLOCKS_18 = (2, 2, 2, 2)


def basic_block(builder: GraphBuilder, out_channels: int, stride: int = 1) -> int:
    """
    Append a spiking basic block::

        conv3x3 -> bn -> lif -> conv3x3 -> bn -> (+ shortcut) -> lif

    The shortcut is a 1x1 strided conv + bn when the shape changes.

    Returns:
        Boundary after the block.
    """
    source = builder.boundary
    builder.conv_bn_lif(out_channels, 3, stride=stride, padding=1)
    builder.add(Conv2d, out_channels, 3, stride=1, padding=1)
    builder.add(BatchNorm)
    builder.residual(source)
    return builder.lif_layer()


def spiking_resnet(
    widths: Sequence[int],
    blocks: Sequence[int],
    in_shape: ShapeLike = (3, 32, 32),
    num_classes: int = 10,
    lif: LifParams = None,
    name: str = "resnet",
) -> NetworkGraph:
    """
    Spiking resnet with a 3x3 stem, split points ``SP1 .. SP(n-1)`` after
    every basic block but the last one.

    Args:
        widths: Channels of each stage.
        blocks: Number of basic blocks of each stage.
        in_shape: ``(C, H, W)`` of the input, 3 channels for rate coded
            images, 2 polarity channels for event frames.
        num_classes: Number of classes.
        lif: LIF parameters shared by all neurons.
        name: Topology name stored in the description.
    """
    builder = GraphBuilder(in_shape, lif)
    builder.conv_bn_lif(widths[0], 3, padding=1)

    total = sum(blocks)
    count = 0
    for stage, (width, num) in enumerate(zip(widths, blocks)):
        for block in range(num):
            basic_block(builder, width, stride=2 if stage > 0 and block == 0 else 1)
            count += 1
            if count < total:
                builder.mark_split(f"SP{count}")

    builder.classifier(num_classes)
    return builder.build(num_classes, name)


def resnet_mini(in_shape: ShapeLike = (3, 32, 32), num_classes=10, lif=None):
    """
    Desk scale spiking resnet: 4 stages x 2 basic blocks with widths
    8/16/32/64, split points SP1 .. SP7.
    """
    return spiking_resnet(
        (8, 16, 32, 64), BLOCKS_18, in_shape, num_classes, lif, name="resnet-mini"
    )


def spiking_resnet18(in_shape: ShapeLike = (3, 32, 32), num_classes=10, lif=None):
    """
    Resnet-18 shaped spiking network, on a 32x32 input the SP7 activation
    is ``(512, 4, 4)``.
    """
    return spiking_resnet(
        (64, 128, 256, 512), BLOCKS_18, in_shape, num_classes, lif, name="resnet18"
    )
