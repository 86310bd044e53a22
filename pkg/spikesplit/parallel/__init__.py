from multiprocessing import get_context, get_start_method
from . import thread, process, channel, transport, server

__all__ = [
    "get_context",
    "get_start_method",
    "thread",
    "process",
    "channel",
    "transport",
    "server",
]
