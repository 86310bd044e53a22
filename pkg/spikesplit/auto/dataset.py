"""
Seeded synthetic inputs. Accuracy is not measured, the inputs only need to
drive the network reproducibly with varied activity.
"""
from typing import Iterator, Tuple
import numpy as np
import torch as t

from spikesplit.model.spike import Shape, ShapeLike, as_shape
from spikesplit.model.encoding import EventStream, SampleInput, load_event_file
from spikesplit.utils.checker import CheckError

EVENT_WINDOW_US = 10_000


def sample_seed(seed: int, index: int) -> int:
    """
    Seed of the rate coder of one sample.
    """
    return seed * 1_000_003 + index


def synthetic_image(shape: ShapeLike, seed: int, index: int) -> t.Tensor:
    """
    A smooth ``(C, H, W)`` intensity pattern in ``[0, 1]``: one random
    plane wave per channel times a random brightness.
    """
    c, h, w = as_shape(shape)
    rng = np.random.default_rng([seed, index])
    ys, xs = np.meshgrid(np.linspace(0, 1, h), np.linspace(0, 1, w), indexing="ij")
    img = np.empty((c, h, w), dtype=np.float64)
    for ch in range(c):
        fy, fx = rng.uniform(0.5, 2.0, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        brightness = rng.uniform(0.6, 1.0)
        img[ch] = brightness * (0.5 + 0.5 * np.sin(2 * np.pi * (fy * ys + fx * xs) + phase))
    return t.from_numpy(np.clip(img, 0.0, 1.0).astype(np.float32))


def synthetic_events(
    sensor: ShapeLike, seed: int, index: int, window_us: int = EVENT_WINDOW_US
) -> EventStream:
    """
    Uniformly scattered events of both polarities over a declared window
    of ``window_us`` microseconds.
    """
    sensor = as_shape(sensor)
    if len(sensor) != 3 or sensor[0] != 2:
        raise CheckError(f"Event sensor must be (2, H, W), got {list(sensor)}")
    _, h, w = sensor
    rng = np.random.default_rng([seed, index])
    count = int(rng.integers(h * w // 4, h * w + 1))
    events = np.stack(
        [
            np.sort(rng.integers(0, window_us, size=count)),
            rng.integers(0, w, size=count),
            rng.integers(0, h, size=count),
            rng.integers(0, 2, size=count),
        ],
        axis=1,
    )
    return EventStream(events, sensor, 0, window_us)


class SyntheticDataset:
    """
    Indexable set of ``samples`` inputs of one kind.

    Args:
        kind: ``synthetic-images``, ``synthetic-events`` or ``event-file``.
        shape: Input shape of the network.
        samples: Number of samples.
        seed: Dataset seed.
        event_file: Path of the stream every ``event-file`` sample reuses.
    """

    def __init__(
        self,
        kind: str,
        shape: ShapeLike,
        samples: int,
        seed: int = 0,
        event_file: str = None,
    ):
        self.kind = kind
        self.shape = as_shape(shape)
        self.samples = samples
        self.seed = seed
        self._stream = None
        if kind == "event-file":
            self._stream = load_event_file(event_file)
            if self._stream.sensor != self.shape:
                raise CheckError(
                    f"Event file sensor {list(self._stream.sensor)} does not "
                    f"match the network input {list(self.shape)}"
                )
        elif kind not in ("synthetic-images", "synthetic-events"):
            raise CheckError(f'Unknown input kind "{kind}"')

    def __len__(self):
        return self.samples

    def __getitem__(self, index: int) -> SampleInput:
        if not 0 <= index < self.samples:
            raise IndexError(f"Sample {index} out of range [0, {self.samples})")
        if self.kind == "synthetic-images":
            return synthetic_image(self.shape, self.seed, index)
        if self.kind == "synthetic-events":
            return synthetic_events(self.shape, self.seed, index)
        return self._stream

    def __iter__(self) -> Iterator[Tuple[int, SampleInput]]:
        for index in range(self.samples):
            yield index, self[index]


def event_file_sensor(path: str) -> Shape:
    return load_event_file(path).sensor
