from .base import GraphBuilder
from .resnet import spiking_resnet, resnet_mini, spiking_resnet18
from .vgg import spiking_vgg, vgg_mini, spiking_vgg16
from .probe import split_probe

from . import base
from . import resnet
from . import vgg
from . import probe

TOPOLOGIES = {
    "resnet-mini": resnet_mini,
    "vgg-mini": vgg_mini,
    "resnet18": spiking_resnet18,
    "vgg16": spiking_vgg16,
    "probe": split_probe,
}


def build_topology(name: str, in_shape=None, num_classes=10, lif=None):
    """
    Build a registered topology by name.

    Raises:
        ``KeyError`` if the name is unknown.
    """
    if name not in TOPOLOGIES:
        raise KeyError(
            f'Unknown topology "{name}", available: {", ".join(TOPOLOGIES)}'
        )
    kwargs = {"num_classes": num_classes, "lif": lif}
    if in_shape is not None:
        kwargs["in_shape"] = tuple(in_shape)
    return TOPOLOGIES[name](**kwargs)


__all__ = [
    "GraphBuilder",
    "spiking_resnet",
    "resnet_mini",
    "spiking_resnet18",
    "spiking_vgg",
    "vgg_mini",
    "spiking_vgg16",
    "split_probe",
    "TOPOLOGIES",
    "build_topology",
    "base",
    "resnet",
    "vgg",
    "probe",
]
