"""Fair regression toolkit: adversarial accuracy-parity training and disparity bounds."""

__version__ = "0.1.0"
