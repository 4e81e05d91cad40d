"""frontlab: numerical laboratory for accelerated fronts in nonlocal
monostable equations with heavy-tailed dispersal kernels."""

__version__ = "0.1.0"
