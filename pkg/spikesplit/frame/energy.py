from dataclasses import dataclass, asdict
from typing import Dict, Iterable, Tuple
import math

from spikesplit.utils.checker import CheckError

#: Energy of one synaptic operation on neuromorphic hardware, in pJ.
DEFAULT_PJ_PER_SYNOP = 23.0
ENCODER_KEY = "bottleneck.encoder"

LayerActivity = Dict[str, Tuple[int, float]]


@dataclass(frozen=True)
class EnergyModel:
    pj_per_synop: float = DEFAULT_PJ_PER_SYNOP

    def __post_init__(self):
        if not (math.isfinite(self.pj_per_synop) and self.pj_per_synop > 0):
            raise CheckError(
                f"pj_per_synop must be a positive number, got {self.pj_per_synop}"
            )

    def joules(self, synop_count: float) -> float:
        return synop_count * self.pj_per_synop * 1e-12


def synops(flops: int, rate: float, timesteps: int) -> float:
    """
    Synaptic operations of a layer: only inputs which spiked trigger work.
    """
    if rate is None or not 0.0 <= rate <= 1.0:
        raise CheckError(f"Firing rate must lie in [0, 1], got {rate}")
    if flops < 0 or timesteps < 0:
        raise CheckError(
            f"FLOPs and timesteps must be >= 0, got {flops} and {timesteps}"
        )
    return flops * rate * timesteps


def edge_energy(
    layers: LayerActivity,
    t_used: int,
    model: EnergyModel = None,
    required: Iterable[str] = None,
) -> float:
    """
    Energy in joules spent by the synaptic layers of the edge half.

    Args:
        layers: ``{key: (flops per timestep, measured input rate)}``.
        t_used: Timesteps the edge executed, i.e. ``t_exit``.
        model: Energy model, 23 pJ per SynOp by default.
        required: Keys which must have a measured rate, e.g. every
            synaptic layer of the edge range.

    Raises:
        ``CheckError`` if a required layer has no rate.
    """
    model = model or EnergyModel()
    if required is not None:
        missing = [key for key in required if key not in layers]
        if missing:
            raise CheckError(f"Missing firing rate of edge layers {missing}")
    total = 0.0
    for key, (flops, rate) in layers.items():
        if rate is None:
            raise CheckError(f"Missing firing rate of edge layer {key}")
        total += synops(flops, rate, t_used)
    return model.joules(total)


def encoder_energy(
    layers: LayerActivity, t_used: int, model: EnergyModel = None
) -> float:
    """
    Share of :func:`edge_energy` spent in the bottleneck encoder, zero
    without a bottleneck.
    """
    if ENCODER_KEY not in layers:
        return 0.0
    return edge_energy({ENCODER_KEY: layers[ENCODER_KEY]}, t_used, model)


def model_compute_time(flops_per_step: int, timesteps: int, flops_per_s: float) -> float:
    """
    Seconds to execute ``timesteps`` dense timesteps on a device with the
    given throughput.
    """
    if not flops_per_s > 0:
        raise CheckError(f"flops_per_s must be > 0, got {flops_per_s}")
    return flops_per_step * timesteps / flops_per_s


@dataclass(frozen=True)
class LatencyBreakdown:
    edge_compute_s: float = 0.0
    uplink_s: float = 0.0
    cloud_compute_s: float = 0.0
    downlink_s: float = 0.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (math.isfinite(value) and value >= 0):
                raise CheckError(f"Latency part {name} must be >= 0, got {value}")

    @property
    def total_s(self) -> float:
        return self.edge_compute_s + self.uplink_s + self.cloud_compute_s + self.downlink_s

    def to_dict(self) -> Dict[str, float]:
        d = asdict(self)
        d["total_s"] = self.total_s
        return d
