from . import config
from . import dataset
from . import launcher

__all__ = ["config", "dataset", "launcher"]
