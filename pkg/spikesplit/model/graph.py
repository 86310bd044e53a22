from typing import Dict, List, Tuple, Union, Any
import json
import torch as t
import torch.nn as nn

from spikesplit.utils.checker import CheckError, check_shape
from spikesplit.utils.prepare import prep_load_weights
from .spike import Shape, SpikeTensor, ShapeLike, as_shape
from .neuron import LifState
from .layers import Layer, Lif, ResidualAdd, RateMonitor, build_layer, layer_flops

Activation = Union[t.Tensor, SpikeTensor]


class NetworkGraph(nn.Module):
    """
    An ordered list of layers with residual edges and named split points.

    Boundary ``i`` is the input of layer ``i``, boundary ``len(layers)`` is
    the network output (the logits). A split point names a boundary right
    after a :class:`.Lif` layer which no residual edge crosses, so the
    activation handed from edge to cloud is always a spike tensor.

    Weights are immutable after loading and the graph can be shared, LIF
    states are created per session by :meth:`create_states`.
    """

    def __init__(
        self,
        in_shape: ShapeLike,
        layers: List[Layer],
        split_points: Dict[str, int],
        num_classes: int,
        name: str = "custom",
    ):
        super().__init__()
        self.name = name
        self.in_shape = as_shape(in_shape)
        self.num_classes = num_classes
        self.layers = nn.ModuleList(layers)
        self.boundaries = [self.in_shape]  # type: List[Shape]
        self._sources = set()

        for idx, layer in enumerate(layers):
            if layer.in_shape != self.boundaries[-1]:
                raise CheckError(
                    f"Shape chain broken at layer {idx} ({layer.kind}): "
                    f"expects {list(layer.in_shape)}, "
                    f"gets {list(self.boundaries[-1])}"
                )
            if isinstance(layer, ResidualAdd):
                if not 0 <= layer.source < idx:
                    raise CheckError(
                        f"Residual layer {idx} has invalid source {layer.source}"
                    )
                if layer.source_shape != self.boundaries[layer.source]:
                    raise CheckError(
                        f"Residual layer {idx} expects source shape "
                        f"{list(layer.source_shape)}, boundary {layer.source} "
                        f"is {list(self.boundaries[layer.source])}"
                    )
                self._sources.add(layer.source)
            self.boundaries.append(layer.out_shape)

        if self.boundaries[-1] != Shape(num_classes):
            raise CheckError(
                f"Network output {list(self.boundaries[-1])} does not match "
                f"{num_classes} classes"
            )
        self.split_points = dict(split_points)
        self._check_split_points()

    def _check_split_points(self):
        last = 0
        for name, index in self.split_points.items():
            if not isinstance(index, int) or not 0 < index < len(self.layers):
                raise CheckError(f"Split point {name} has invalid index {index}")
            if index <= last:
                raise CheckError(
                    f"Split point indices must be strictly increasing, "
                    f"{name}={index} follows {last}"
                )
            if not isinstance(self.layers[index - 1], Lif):
                raise CheckError(
                    f"Split point {name}={index} does not follow a LIF layer"
                )
            for idx, layer in enumerate(self.layers):
                if isinstance(layer, ResidualAdd) and layer.source < index <= idx:
                    raise CheckError(
                        f"Split point {name}={index} cuts the residual edge "
                        f"{layer.source} -> {idx}"
                    )
            last = index

    @property
    def depth(self) -> int:
        return len(self.layers)

    def shape_at(self, boundary: int) -> Shape:
        return self.boundaries[boundary]

    def split_index(self, split: str) -> int:
        if split not in self.split_points:
            raise CheckError(
                f'Unknown split point "{split}", '
                f"available: {', '.join(self.split_points)}"
            )
        return self.split_points[split]

    def edge_range(self, split: str) -> Tuple[int, int]:
        return 0, self.split_index(split)

    def cloud_range(self, split: str) -> Tuple[int, int]:
        return self.split_index(split), self.depth

    def create_states(self, start: int = 0, end: int = None) -> Dict[int, LifState]:
        """
        Create fresh LIF states of the layers in ``[start, end)``.
        """
        end = self.depth if end is None else end
        return {
            idx: self.layers[idx].create_state()
            for idx in range(start, end)
            if isinstance(self.layers[idx], Lif)
        }

    @staticmethod
    def reset_state(states: Dict[int, LifState]):
        for state in states.values():
            state.reset()

    def synaptic_layers(self, start: int = 0, end: int = None) -> Dict[str, int]:
        """
        Returns:
            ``{key: flops}`` of the synaptic operations in ``[start, end)``,
            keys are the ones :class:`.RateMonitor` records.
        """
        end = self.depth if end is None else end
        result = {}
        for idx in range(start, end):
            layer = self.layers[idx]
            if layer.synaptic:
                result[str(idx)] = layer_flops(layer)
            elif isinstance(layer, ResidualAdd) and layer.shortcut_conv is not None:
                result[f"{idx}.shortcut"] = layer.shortcut_conv.flops()
        return result

    def flops(self, start: int = 0, end: int = None) -> int:
        end = self.depth if end is None else end
        return sum(layer_flops(self.layers[idx]) for idx in range(start, end))

    def forward_timestep(
        self,
        states: Dict[int, LifState],
        x: Activation,
        start: int = 0,
        end: int = None,
        monitor: RateMonitor = None,
    ) -> Activation:
        """
        Run layers ``[start, end)`` for one timestep, membrane potentials
        in ``states`` carry over to the next call.

        Args:
            states: LIF states, must contain every LIF layer of the range.
            x: Activation at boundary ``start``.
            start: First layer.
            end: One past the last layer, defaults to the network depth.
            monitor: Optional recorder of synaptic layer input activity.

        Returns:
            Activation at boundary ``end`` as a float tensor, or ``x``
            itself if the range is empty.
        """
        end = self.depth if end is None else end
        if not 0 <= start <= end <= self.depth:
            raise CheckError(f"Invalid layer range [{start}, {end})")
        if start == end:
            return x
        if isinstance(x, SpikeTensor):
            x = x.to_dense()
        check_shape(x, self.boundaries[start].dims, f"boundary {start}")

        saved = {}
        for idx in range(start, end):
            if idx in self._sources:
                saved[idx] = x
            layer = self.layers[idx]
            if monitor is not None and layer.synaptic:
                monitor.record(str(idx), layer.flops(), x)
            if isinstance(layer, Lif):
                if idx not in states:
                    raise CheckError(f"Missing LIF state of layer {idx}")
                x = layer(x, states[idx])
            elif isinstance(layer, ResidualAdd):
                if layer.source not in saved:
                    raise CheckError(
                        f"Residual source {layer.source} of layer {idx} "
                        f"is outside range [{start}, {end})"
                    )
                skip = saved[layer.source]
                if monitor is not None and layer.shortcut_conv is not None:
                    monitor.record(
                        f"{idx}.shortcut", layer.shortcut_conv.flops(), skip
                    )
                x = layer(x, skip)
            else:
                x = layer(x)
        return x

    def load_weights(self, entries: Dict[str, t.Tensor], strict: bool = True):
        prep_load_weights(self, entries, strict=strict)
        for layer in self.layers:
            layer.check_weights()

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "in_shape": list(self.in_shape),
            "num_classes": self.num_classes,
            "layers": [layer.describe() for layer in self.layers],
            "split_points": dict(self.split_points),
        }

    def describe_json(self) -> str:
        """
        Canonical JSON form of :meth:`describe`, used for config digests.
        """
        return json.dumps(self.describe(), sort_keys=True, separators=(",", ":"))


def graph_from_description(doc: Dict[str, Any]) -> NetworkGraph:
    """
    Build a graph from a JSON-able topology document::

        {
            "name": "tiny",
            "in_shape": [2, 8, 8],
            "num_classes": 10,
            "layers": [
                {"kind": "conv2d", "out_channels": 4, "kernel": 3, "padding": 1},
                {"kind": "batch_norm"},
                {"kind": "lif", "tau": 2.0, "v_th": 1.0, "v_reset": 0.0},
                {"kind": "flatten"},
                {"kind": "linear", "out_features": 10}
            ],
            "split_points": {"SP1": 3}
        }
    """
    try:
        in_shape = as_shape(doc["in_shape"])
        descs = doc["layers"]
        num_classes = doc["num_classes"]
    except KeyError as e:
        raise CheckError(f"Topology description misses key {e}") from e
    layers = []
    boundaries = [in_shape]
    for desc in descs:
        layer = build_layer(desc, boundaries[-1], boundaries[:-1])
        layers.append(layer)
        boundaries.append(layer.out_shape)
    return NetworkGraph(
        in_shape,
        layers,
        doc.get("split_points", {}),
        num_classes,
        name=doc.get("name", "custom"),
    )


def load_graph_file(path: str) -> NetworkGraph:
    with open(path) as file:
        return graph_from_description(json.load(file))
