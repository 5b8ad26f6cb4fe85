"""Distance-vector routing protocols on a deterministic event simulator."""

from .engine import ASYNCHRONOUS, SYNCHRONOUS, Engine, Trace, run
from .topology import Topology

__all__ = ["ASYNCHRONOUS", "SYNCHRONOUS", "Engine", "Topology", "Trace", "run"]
__version__ = "0.1.0"
