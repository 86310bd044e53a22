"""
Analytic link model: store and forward, a message is delivered after its
full serialization time plus the propagation delay.
"""
from dataclasses import dataclass
from threading import Lock
from typing import Optional
import numpy as np

from spikesplit.utils.checker import CheckError

DEFAULT_THROUGHPUT_BPS = 18.9e6


@dataclass(frozen=True)
class ChannelModel:
    """
    Attributes:
        throughput_bps: Link throughput in bits per second.
        propagation_delay_s: One way propagation delay.
        jitter: Serialization time is scaled by ``1 + jitter * u``,
            ``u`` uniform in ``[0, 1)``, must lie in ``[0, 1)``.
        jitter_seed: Seed of the jitter generator.
        framing_bytes: Extra per-message bytes of lower layers.
    """

    throughput_bps: float = DEFAULT_THROUGHPUT_BPS
    propagation_delay_s: float = 0.0
    jitter: float = 0.0
    jitter_seed: Optional[int] = None
    framing_bytes: int = 0

    def __post_init__(self):
        if not self.throughput_bps > 0:
            raise CheckError(f"Throughput must be > 0, got {self.throughput_bps}")
        if not self.propagation_delay_s >= 0:
            raise CheckError(
                f"Propagation delay must be >= 0, got {self.propagation_delay_s}"
            )
        if not 0 <= self.jitter < 1:
            raise CheckError(f"Jitter must be in [0, 1), got {self.jitter}")
        if self.framing_bytes < 0:
            raise CheckError(f"Framing bytes must be >= 0, got {self.framing_bytes}")

    def create_rng(self, offset: int = 0) -> np.random.Generator:
        seed = None if self.jitter_seed is None else self.jitter_seed + offset
        return np.random.default_rng(seed)

    def message_bits(self, nbytes: int) -> int:
        return 8 * (nbytes + self.framing_bytes)


def transmission_time(
    bits: int, ch: ChannelModel, rng: np.random.Generator = None
) -> float:
    """
    Seconds to deliver ``bits``: ``bits / throughput + delay``.

    Example:
        >>> transmission_time(16384, ChannelModel(18.9e6))
        0.000866878...

    Args:
        bits: Bits on the link, ``>= 0``.
        ch: Channel model.
        rng: Jitter generator, only used if ``ch.jitter > 0``. A fresh
            generator seeded with ``ch.jitter_seed`` is used if not given.
    """
    if bits < 0:
        raise CheckError(f"Bit count must be >= 0, got {bits}")
    serialization = bits / ch.throughput_bps
    if ch.jitter > 0:
        rng = rng if rng is not None else ch.create_rng()
        serialization *= 1.0 + ch.jitter * float(rng.random())
    return serialization + ch.propagation_delay_s


class VirtualClock:
    """
    Simulated time shared by both ends of a simulated link. Starts at 0 and
    only moves forward.
    """

    def __init__(self):
        self._now = 0.0
        self._lock = Lock()

    def now(self) -> float:
        return self._now

    def advance(self, seconds: float) -> float:
        """
        Returns:
            The time after advancing.
        """
        if seconds < 0:
            raise CheckError(f"Clock can not go back by {seconds}")
        with self._lock:
            self._now += seconds
            return self._now

    def reset(self):
        with self._lock:
            self._now = 0.0
