"""Simulation and analysis of loss-tolerant quantum oblivious transfer."""

from .engine import ChannelConfig, run_protocol, run_trials
from .protocols import build_protocol, REGISTRY

__all__ = ["ChannelConfig", "run_protocol", "run_trials", "build_protocol", "REGISTRY"]
__version__ = "0.1.0"
