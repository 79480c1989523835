"""Wave propagation exterior to a torus via conical-function kernels."""
__version__ = "0.1.0"
