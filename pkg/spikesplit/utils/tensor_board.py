from typing import Dict
from tensorboardX import SummaryWriter


class TensorBoard:
    """
    Create a tensor board object.

    Attributes:
        writer: ``SummaryWriter`` of package ``tensorboardX``.
    """

    def __init__(self):
        self.writer = None

    def init(self, *writer_args):
        if self.writer is None:
            self.writer = SummaryWriter(*writer_args)
        else:
            raise RuntimeError("Writer has been initialized!")

    def is_inited(self) -> bool:
        """
        Returns: whether the board has been initialized with a writer.
        """
        return self.writer is not None

    def add_sample_scalars(self, tag: str, scalars: Dict[str, float], step: int):
        """
        Write a group of per-sample scalars, does nothing if the board is
        not initialized.
        """
        if self.writer is None:
            return
        for name, value in scalars.items():
            self.writer.add_scalar(f"{tag}/{name}", value, step)

    def close(self):
        if self.writer is not None:
            self.writer.flush()
            self.writer.close()
            self.writer = None
