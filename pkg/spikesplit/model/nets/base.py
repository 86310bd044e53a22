from typing import Dict, List
from ..spike import ShapeLike, as_shape
from ..neuron import LifParams
from ..layers import (
    Layer,
    Conv2d,
    BatchNorm,
    AvgPool,
    Flatten,
    Linear,
    Lif,
    ResidualAdd,
)
from ..graph import NetworkGraph


class GraphBuilder:
    """
    Appends layers while tracking the current activation shape, so
    topologies can be written block by block.
    """

    def __init__(self, in_shape: ShapeLike, lif: LifParams = None):
        self.in_shape = as_shape(in_shape)
        self.shape = self.in_shape
        self.lif = lif or LifParams()
        self.layers = []  # type: List[Layer]
        self.split_points = {}  # type: Dict[str, int]

    @property
    def boundary(self) -> int:
        """
        Index of the boundary after the last appended layer.
        """
        return len(self.layers)

    def add(self, layer_cls, *args, **kwargs) -> int:
        layer = layer_cls(self.shape, *args, **kwargs)
        self.layers.append(layer)
        self.shape = layer.out_shape
        return self.boundary

    def lif_layer(self) -> int:
        return self.add(Lif, self.lif)

    def conv_bn_lif(
        self, out_channels, kernel=3, stride=1, padding=1, pool: int = None
    ) -> int:
        """
        Conv, batch norm, an optional average pool, then LIF.
        """
        self.add(Conv2d, out_channels, kernel, stride=stride, padding=padding)
        self.add(BatchNorm)
        if pool is not None:
            self.add(AvgPool, pool)
        return self.lif_layer()

    def residual(self, source: int) -> int:
        return self.add(ResidualAdd, source, self.boundary_shape(source))

    def boundary_shape(self, boundary: int):
        if boundary == len(self.layers):
            return self.shape
        return self.layers[boundary].in_shape

    def classifier(self, num_classes: int, hidden: int = None) -> int:
        """
        Global average pool, flatten, an optional hidden linear + LIF, and a
        linear head producing the logits.
        """
        self.add(AvgPool, min(self.shape[1], self.shape[2]))
        self.add(Flatten)
        if hidden is not None:
            self.add(Linear, hidden)
            self.lif_layer()
        return self.add(Linear, num_classes)

    def mark_split(self, name: str):
        self.split_points[name] = self.boundary

    def build(self, num_classes: int, name: str) -> NetworkGraph:
        return NetworkGraph(
            self.in_shape, self.layers, self.split_points, num_classes, name=name
        )
