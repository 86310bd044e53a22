"""
Leaky integrate-and-fire dynamics.

Per neuron and timestep::

    h  = v + (x - (v - v_reset)) / tau
    s  = 1 if h >= v_th else 0
    v' = v_reset if s else h
"""
from dataclasses import dataclass, asdict
from typing import Union
import math
import torch as t

from spikesplit.utils.checker import CheckError, check_shape, check_finite
from .spike import SpikeTensor, Shape, ShapeLike, as_shape


@dataclass(frozen=True)
class LifParams:
    tau: float = 2.0
    v_th: float = 1.0
    v_reset: float = 0.0

    def __post_init__(self):
        for name in ("tau", "v_th", "v_reset"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise CheckError(f"LIF parameter {name} must be finite, got {value!r}")
        if self.tau < 1:
            raise CheckError(f"LIF tau must be >= 1, got {self.tau}")
        if not self.v_th > self.v_reset:
            raise CheckError(
                f"LIF v_th ({self.v_th}) must be larger than v_reset ({self.v_reset})"
            )

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**(d or {}))


class LifState:
    """
    Membrane potentials of one LIF layer for one session.

    Never share a state between concurrent sessions.
    """

    def __init__(self, shape: ShapeLike, params: LifParams = None):
        self.shape = as_shape(shape)
        self.params = params or LifParams()
        self.v = t.full(self.shape.dims, float(self.params.v_reset), dtype=t.float32)

    def reset(self):
        self.v.fill_(float(self.params.v_reset))

    def clone(self) -> "LifState":
        state = LifState(self.shape, self.params)
        state.v.copy_(self.v)
        return state

    def __repr__(self):
        return f"LifState(shape={list(self.shape)}, params={self.params})"


def lif_update(state: LifState, x: t.Tensor) -> t.Tensor:
    """
    Advance ``state`` by one timestep with input current ``x``.

    Returns:
        A ``torch.bool`` tensor of spikes, ``state.v`` is updated in place.
    """
    check_shape(x, state.shape.dims, "lif input")
    check_finite(x, "lif input")
    p = state.params
    x = x.to(t.float32)
    h = state.v + (x - (state.v - p.v_reset)) / p.tau
    spikes = h >= p.v_th
    state.v = t.where(spikes, t.full_like(h, float(p.v_reset)), h)
    return spikes


def lif_step(state: LifState, x: Union[t.Tensor, SpikeTensor]) -> SpikeTensor:
    """
    One LIF timestep, see module docstring.

    Raises:
        ``CheckError`` if shape of ``x`` differs from the state, or ``x``
        has non-finite values.
    """
    if isinstance(x, SpikeTensor):
        x = x.to_dense()
    spikes = lif_update(state, x)
    return SpikeTensor(Shape(state.shape.dims), spikes)
