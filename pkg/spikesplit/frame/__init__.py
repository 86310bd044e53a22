from . import exit, protocol, energy, report, session

__all__ = ["exit", "protocol", "energy", "report", "session"]
