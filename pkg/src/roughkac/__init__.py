"""Telegraph-driven approximations of fractional Brownian motion and rough differential equations."""

__version__ = "0.1.0"
