from . import checker, conf, helper_classes, logging, prepare, tensor_board

__all__ = [
    "checker",
    "conf",
    "helper_classes",
    "logging",
    "prepare",
    "tensor_board",
]
