"""
Turning samples into input spikes.

Static images are rate coded, every pixel fires with probability equal to
its intensity, independently at each timestep. Event streams are binned
into ``t_max`` frames of equal duration, a pixel of frame ``b`` is 1 iff at
least one event of its polarity falls into bin ``b``.

Event file format, one event per line::

    # sensor 2 32 32
    # window 0 10000
    t_us x y polarity

``#`` starts a comment, the optional ``sensor`` (C H W) and ``window``
(start_us duration_us) comments declare the sensor extent and the time
window to bin over.
"""
from dataclasses import dataclass
from typing import List, Optional, Union
import numpy as np
import torch as t

from spikesplit.utils.checker import CheckError, check_range
from .spike import SpikeTensor, Shape, ShapeLike, as_shape

SEED_STRIDE = 0x9E3779B1
SEED_MASK = 2 ** 63 - 1


class EventFormatError(ValueError):
    pass


@dataclass
class EventStream:
    """
    Attributes:
        events: ``int64`` array of shape ``(N, 4)``, columns are
            ``t_us, x, y, polarity``.
        sensor: ``(2, H, W)``, channel = polarity.
        start_us: Start of the declared time window.
        duration_us: Length of the declared time window, binning uses the
            time range of the events themselves if not declared.
    """

    events: np.ndarray
    sensor: Shape
    start_us: Optional[int] = None
    duration_us: Optional[int] = None

    def __post_init__(self):
        self.sensor = as_shape(self.sensor)
        self.events = np.asarray(self.events, dtype=np.int64).reshape(-1, 4)

    def __len__(self):
        return len(self.events)


SampleInput = Union[t.Tensor, EventStream]


def timestep_generator(seed: int, timestep: int) -> t.Generator:
    """
    Generator whose stream depends only on ``(seed, timestep)``.
    """
    generator = t.Generator()
    generator.manual_seed((seed * SEED_STRIDE + timestep) & SEED_MASK)
    return generator


def rate_encode(img: t.Tensor, timestep: int, seed: int) -> SpikeTensor:
    """
    Bernoulli rate coding of one timestep.

    Args:
        img: ``(C, H, W)`` intensities in ``[0, 1]``.
        timestep: 1-based timestep.
        seed: Sample seed, same seed and timestep give the same spikes.

    Raises:
        ``CheckError`` if a pixel is outside ``[0, 1]``.
    """
    check_range(img, 0.0, 1.0, "image")
    img = img.to(t.float32)
    noise = t.rand(img.shape, generator=timestep_generator(seed, timestep))
    return SpikeTensor(Shape(img.shape), noise < img)


def event_bin(ev: EventStream, t_max: int, sensor: ShapeLike = None) -> List[SpikeTensor]:
    """
    Bin an event stream into ``t_max`` frames.

    Raises:
        ``EventFormatError`` if events are not sorted by time, ``CheckError``
        if an event lies outside the sensor or the declared window.
    """
    if t_max < 1:
        raise CheckError(f"t_max must be >= 1, got {t_max}")
    sensor = as_shape(sensor if sensor is not None else ev.sensor)
    if len(sensor) != 3 or sensor[0] != 2:
        raise CheckError(f"Event sensor must be (2, H, W), got {sensor}")
    frames = np.zeros((t_max,) + sensor.dims, dtype=np.bool_)
    events = ev.events

    if len(events):
        times, xs, ys, ps = events.T
        if np.any(np.diff(times) < 0):
            raise EventFormatError("Events are not sorted by time.")
        if (
            np.any((xs < 0) | (xs >= sensor[2]))
            or np.any((ys < 0) | (ys >= sensor[1]))
            or np.any((ps != 0) & (ps != 1))
        ):
            raise CheckError(f"Event outside of sensor extent {list(sensor)}")

        if ev.duration_us is not None:
            start = 0 if ev.start_us is None else ev.start_us
            duration = ev.duration_us
            if duration < 1:
                raise CheckError(f"Event window duration must be >= 1, got {duration}")
            if times[0] < start or times[-1] >= start + duration:
                raise CheckError(
                    f"Event outside of declared window [{start}, {start + duration})"
                )
        else:
            start = int(times[0])
            duration = int(times[-1]) - start
        if duration == 0:
            bins = np.zeros_like(times)
        else:
            bins = np.minimum((times - start) * t_max // duration, t_max - 1)
        frames[bins, ps, ys, xs] = True

    return [SpikeTensor(sensor, t.from_numpy(frame.copy())) for frame in frames]


def load_event_file(path: str, sensor: ShapeLike = None) -> EventStream:
    """
    Read an event stream in the text format of this module.

    Args:
        path: File path.
        sensor: Sensor extent, overrides the ``# sensor`` comment.
    """
    declared_sensor = None
    start = duration = None
    rows = []
    with open(path) as file:
        for line_no, line in enumerate(file, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                words = line[1:].split()
                try:
                    if words and words[0] == "sensor":
                        declared_sensor = [int(w) for w in words[1:4]]
                    elif words and words[0] == "window":
                        start, duration = int(words[1]), int(words[2])
                except (ValueError, IndexError) as e:
                    raise EventFormatError(
                        f"{path}:{line_no}: invalid directive {line!r}"
                    ) from e
                continue
            fields = line.split("#", 1)[0].split()
            if len(fields) != 4:
                raise EventFormatError(
                    f"{path}:{line_no}: expected 't_us x y polarity', got {line!r}"
                )
            try:
                rows.append([int(f) for f in fields])
            except ValueError as e:
                raise EventFormatError(f"{path}:{line_no}: {e}") from e

    sensor = sensor if sensor is not None else declared_sensor
    if sensor is None:
        raise EventFormatError(f"{path}: sensor extent is not declared")
    return EventStream(
        np.array(rows, dtype=np.int64).reshape(-1, 4), sensor, start, duration
    )


class SampleEncoder:
    """
    Produces the input spikes of one sample timestep by timestep.

    Example::

        encoder = SampleEncoder(img, t_max=4, seed=7)
        x1 = encoder(1)
    """

    def __init__(self, sample: SampleInput, t_max: int, seed: int = 0):
        self.sample = sample
        self.t_max = t_max
        self.seed = seed
        if isinstance(sample, EventStream):
            self._frames = event_bin(sample, t_max)
        else:
            check_range(sample, 0.0, 1.0, "image")
            self._frames = None

    @property
    def shape(self) -> Shape:
        if self._frames is not None:
            return self.sample.sensor
        return Shape(self.sample.shape)

    def __call__(self, timestep: int) -> SpikeTensor:
        if not 1 <= timestep <= self.t_max:
            raise CheckError(f"Timestep {timestep} outside [1, {self.t_max}]")
        if self._frames is not None:
            return self._frames[timestep - 1]
        return rate_encode(self.sample, timestep, self.seed)
