from typing import Dict, Iterable
import os
import torch as t
import torch.nn as nn

from .logging import default_logger


def prep_create_dirs(dirs: Iterable[str]):
    """
    Note: will recursively create directories.

    Args:
        dirs: a list of directories to create if these directories
            are not found.
    """
    for dir_ in dirs:
        if dir_ and not os.path.exists(dir_):
            os.makedirs(dir_)


def prep_create_parent_dir(file_path: str):
    """
    Create the directory a output file will be written to.
    """
    prep_create_dirs([os.path.dirname(os.path.abspath(file_path))])


def prep_load_weights(
    model: nn.Module, entries: Dict[str, t.Tensor], strict: bool = True, logger=None
):
    """
    Load named weights loaded from a weights container into a model.

    Note:
        Tensors are reshaped / cast to the shape and dtype of the
        receiving parameter or buffer, a shape mismatch is still an error.

    Args:
        model: Model receiving the weights.
        entries: Mapping of names (as in ``model.state_dict()``) to tensors.
        strict: Raise if the model has names missing from ``entries``,
            otherwise only log a warning and keep the current value.
        logger: Logger to use.
    """
    logger = logger or default_logger
    own = model.state_dict()
    state = {}
    for name, param in own.items():
        if name not in entries:
            if strict:
                raise RuntimeError(f'Weight "{name}" is missing from the container.')
            logger.warning(f'Weight "{name}" is missing, keeping current value.')
            state[name] = param
            continue
        value = entries[name]
        if list(value.shape) != list(param.shape):
            raise RuntimeError(
                f'Weight "{name}" has shape {list(value.shape)}, '
                f"model expects {list(param.shape)}"
            )
        state[name] = value.to(dtype=param.dtype, device=param.device)
    model.load_state_dict(state)
