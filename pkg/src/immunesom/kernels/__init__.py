"""Hot loops, each in a numba and a numpy flavour with identical results."""
