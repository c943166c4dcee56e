"""Traveling fronts of nonlocal reaction-dispersion dynamics.

Subpackages: `measure` (jump measures and moments), `nonlinearity`
(reaction classes), `operators` (the discrete jump operator on grids),
`solver` (Newton fronts, continuation, cutoff ladders), `diagnostics`
(identities, bounds, decay), `cauchy` (time evolution and spreading
regimes), `cli` (the `frontforge` batch entry point).
"""

__version__ = "0.1.0"
