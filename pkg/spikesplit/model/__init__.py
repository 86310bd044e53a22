from . import spike
from . import neuron
from . import layers
from . import graph
from . import encoding
from . import codec
from . import weights
from . import nets

__all__ = [
    "spike",
    "neuron",
    "layers",
    "graph",
    "encoding",
    "codec",
    "weights",
    "nets",
]
