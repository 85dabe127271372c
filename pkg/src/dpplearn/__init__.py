"""Learning determinantal point process kernels by Picard fixed-point iteration."""

__version__ = "0.1.0"
