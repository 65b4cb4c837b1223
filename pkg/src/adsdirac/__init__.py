"""Channel Hamiltonians for the massive Dirac field outside a
Schwarzschild-Anti-de-Sitter black hole.

Each half-integer angular channel reduces the field to a two-component
system on a half-line squeezed between the horizon (x → −∞) and the
conformal wall (x → 0⁻).  The subpackages build the geometry and grids,
assemble the channel operators with bag-type or natural wall behaviour,
evolve wave packets, and run the scattering and spectral experiments
exposed through the ``adsdirac`` command line tool.
"""

__version__ = "0.1.0"
