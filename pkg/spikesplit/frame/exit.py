"""
Confidence based early exit.

After timestep ``t`` the edge holds the cumulative decision logits (running
mean of the per-step logits ``y(1) .. y(t)``), turns them into
probabilities and takes the largest one as the confidence score. Inference
stops at the first ``t`` whose score reaches ``alpha``, and always at
``t_max``.
"""
from enum import Enum
from typing import Sequence, Tuple, List
import numpy as np

from spikesplit.utils.checker import CheckError

SUM_TOLERANCE = 1e-6


class ExitDecision(Enum):
    EXIT = "exit"
    CONTINUE = "continue"
    FORCED_EXIT = "forced_exit"

    @property
    def stops(self) -> bool:
        return self is not ExitDecision.CONTINUE


class ExitPolicy:
    """
    Args:
        alpha: Confidence threshold in ``(0, 1)``.
        t_max: Timestep budget in ``[1, 255]``, 255 is the largest timestep
            the wire header can carry.
        dynamic: ``False`` disables early exit, every sample then runs
            ``t_max`` timesteps (the fixed timestep configurations).
    """

    def __init__(self, alpha: float = 0.9, t_max: int = 2, dynamic: bool = True):
        if not isinstance(alpha, (int, float)) or not 0.0 < alpha < 1.0:
            raise CheckError(f"Exit threshold alpha must be in (0, 1), got {alpha}")
        if not isinstance(t_max, int) or not 1 <= t_max <= 255:
            raise CheckError(f"t_max must be in [1, 255], got {t_max}")
        self.alpha = float(alpha)
        self.t_max = t_max
        self.dynamic = dynamic

    def __repr__(self):
        return (
            f"ExitPolicy(alpha={self.alpha}, t_max={self.t_max}, "
            f"dynamic={self.dynamic})"
        )


def softmax(y: Sequence[float]) -> np.ndarray:
    """
    Max shifted softmax in ``float64``.

    Raises:
        ``CheckError`` on empty or non-finite input.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise CheckError("Softmax of empty logits.")
    if not np.all(np.isfinite(y)):
        raise CheckError("Logits contain nan or inf!")
    e = np.exp(y - np.max(y))
    return e / np.sum(e)


def confidence_score(p: Sequence[float]) -> float:
    """
    Raises:
        ``CheckError`` if ``p`` is not a probability vector.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.size == 0 or np.any(p < 0) or abs(float(np.sum(p)) - 1.0) > SUM_TOLERANCE:
        raise CheckError("Confidence needs a valid probability distribution.")
    return float(np.max(p))


def predict(logits: Sequence[float]) -> int:
    """
    Arg max, ties go to the lowest class index.
    """
    return int(np.argmax(np.asarray(logits)))


def should_exit(cs: float, t: int, policy: ExitPolicy) -> ExitDecision:
    if not 1 <= t <= policy.t_max:
        raise CheckError(f"Timestep {t} outside [1, {policy.t_max}]")
    if t == policy.t_max:
        return ExitDecision.FORCED_EXIT
    if policy.dynamic and cs >= policy.alpha:
        return ExitDecision.EXIT
    return ExitDecision.CONTINUE


def exit_timestep(cs_seq: Sequence[float], policy: ExitPolicy) -> int:
    """
    Returns:
        The 1-based timestep at which ``should_exit`` first stops.

    Raises:
        ``CheckError`` if ``len(cs_seq) != t_max``.
    """
    if len(cs_seq) != policy.t_max:
        raise CheckError(
            f"Expected {policy.t_max} confidence scores, got {len(cs_seq)}"
        )
    for t, cs in enumerate(cs_seq, 1):
        if should_exit(cs, t, policy).stops:
            return t
    return policy.t_max  # pragma: no cover


class LogitsRecord:
    """
    Per-timestep logits of one sample and their running mean.

    Sums are kept in ``float64``; :meth:`cumulative` returns ``float32``,
    the precision sent over the wire.
    """

    def __init__(self, num_classes: int):
        self.num_classes = num_classes
        self.steps = []  # type: List[np.ndarray]
        self._sum = np.zeros(num_classes, dtype=np.float64)

    def __len__(self):
        return len(self.steps)

    def add(self, y) -> np.ndarray:
        """
        Append the logits of the next timestep.

        Returns:
            Cumulative decision logits after this timestep.
        """
        y = np.asarray(y, dtype=np.float32).reshape(-1)
        if y.shape[0] != self.num_classes:
            raise CheckError(
                f"Expected {self.num_classes} logits, got {y.shape[0]}"
            )
        if not np.all(np.isfinite(y)):
            raise CheckError("Logits contain nan or inf!")
        self.steps.append(y)
        self._sum += y
        return self.cumulative()

    def cumulative(self) -> np.ndarray:
        if not self.steps:
            raise CheckError("No logits recorded yet.")
        return (self._sum / len(self.steps)).astype(np.float32)

    def reset(self):
        self.steps = []
        self._sum = np.zeros(self.num_classes, dtype=np.float64)


def decide(logits, t: int, policy: ExitPolicy) -> Tuple[ExitDecision, float, int]:
    """
    Exit decision on cumulative logits received at timestep ``t``.

    Returns:
        ``(decision, confidence score, prediction)``.
    """
    cs = confidence_score(softmax(logits))
    return should_exit(cs, t, policy), cs, predict(logits)
