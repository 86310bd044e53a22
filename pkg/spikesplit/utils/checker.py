from typing import Sequence
import torch as t


class CheckError(ValueError):
    """
    Raised when a value violates a domain constraint: wrong shape,
    non-binary spikes, non-finite reals, parameters out of range.
    """

    pass


def check_shape(tensor: t.Tensor, required_shape: Sequence[int], name=""):
    """
    Check whether tensor has the specified shape.

    Args:
        tensor: Tensor to check.
        required_shape: A list of ``int`` specifying shape of each dimension.
        name: Name of tensor, will be printed in the error message.

    Raises:
        ``CheckError`` if shape of the tensor doesn't match.
    """
    shape = list(tensor.shape)
    if shape != list(required_shape):
        raise CheckError(
            f"Tensor {name} has invalid shape, "
            f"required shape {list(required_shape)}, actual is {shape}"
        )


def check_finite(tensor: t.Tensor, name=""):
    """
    Check whether tensor has ``nan`` or ``inf`` elements.

    Raises:
        ``CheckError`` if tensor has any non-finite element.
    """
    if tensor.is_floating_point() and not bool(t.all(t.isfinite(tensor))):
        raise CheckError(f"Tensor {name} contains nan or inf!")


def check_binary(tensor: t.Tensor, name=""):
    """
    Check whether every element of tensor is 0 or 1.

    Raises:
        ``CheckError`` if any other value is found.
    """
    if tensor.dtype == t.bool:
        return
    if not bool(t.all((tensor == 0) | (tensor == 1))):
        raise CheckError(f"Tensor {name} contains values other than 0 and 1!")


def check_range(tensor: t.Tensor, low: float, high: float, name=""):
    """
    Check whether every element of tensor lies in ``[low, high]``.

    Raises:
        ``CheckError`` if any element is outside the closed interval,
        ``nan`` elements are outside every interval.
    """
    if tensor.numel() == 0:
        return
    if not bool(t.all((tensor >= low) & (tensor <= high))):
        raise CheckError(f"Tensor {name} has values outside [{low}, {high}]!")


def check_positive_dims(dims: Sequence[int], name=""):
    """
    Check a list of extents, all of them must be integers ``>= 1``.
    """
    for d in dims:
        if not isinstance(d, int) or isinstance(d, bool) or d < 1:
            raise CheckError(
                f"Shape {name} has invalid extent {d!r}, "
                f"all extents must be integers >= 1: {list(dims)}"
            )
