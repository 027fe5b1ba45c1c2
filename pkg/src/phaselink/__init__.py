"""Simulator and analysis toolkit for phase-encoded quantum communication
over cascaded free-space and fiber links: turbulence-aware link budgets,
decoy-state secrecy capacities, photon-level Monte Carlo, and an
executable two-endpoint protocol with key recycling."""

from . import config, errors, montecarlo, optics, protocol, rates, rng

__version__ = "0.1.0"

__all__ = ["config", "errors", "montecarlo", "optics", "protocol", "rates", "rng", "__version__"]
