"""Simulator and solvers for content-aware association, MU-MIMO
beamforming, and edge-cache placement in a clustered cellular network."""

from . import association, beamforming, caching, evaluation, network, popularity

__version__ = "0.1.0"

__all__ = ["association", "beamforming", "caching", "evaluation", "network",
           "popularity", "__version__"]
