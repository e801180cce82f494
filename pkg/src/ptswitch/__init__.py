"""Noise-driven PT-symmetry breaking transitions in a three-mode optomechanical system."""

__version__ = "0.1.0"
