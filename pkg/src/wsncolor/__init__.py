"""Distributed 3-hop node coloring for wireless sensor networks."""

from .engine import FieldSizes, RunConfig, RunResult, run
from .firstfit import firstfit_3hop, verify_coloring
from .priority import Priority, compute_prio, higher_priority
from .topology import Topology, generate_udg, khop_neighbors, load_topology, save_topology

__version__ = "0.1.0"
