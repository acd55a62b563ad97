"""delay-average: reduce stochastic DDEs at the verge of oscillatory instability to averaged SDEs."""

__version__ = "0.1.0"
