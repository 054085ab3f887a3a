"""Co-simulation of frequent controller resets with diversification on inertial plants."""

__version__ = "0.1.0"
