"""Numerical laboratory for Calderon commutators with rough homogeneous kernels.

Modules
-------
grid       periodic lattice, transforms, weighted norms
sphere     the symbol Omega on the unit sphere
weights    Muckenhoupt characteristics
lp         Littlewood-Paley pieces and jump schedules
operators  kernel bands, truncated operators, commutators, multipliers
normlab    operator norms and the experiment suite
io         configs, run records, plot scripts
cli        the ``roughsing`` command
"""
__version__ = "0.1.0"
