from . import utils, model, frame, parallel, auto

__version__ = "0.1.0"
__all__ = ["utils", "model", "frame", "parallel", "auto"]
