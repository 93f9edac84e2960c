"""Simulation and decoding toolkit for 2D fault-tolerant computation with
3D color codes: lattice construction, Z2 charge decoders, just-in-time
decoding, noise models and Monte Carlo harness."""

__version__ = "0.1.0"
