"""Photon-pair generation from non-phase-matched lithium niobate microcubes.

Submodules
----------
tensor      second-order susceptibility tensors (3x6 / 3x3x3), rotations
efficiency  Sellmeier dispersion and SHG/SFG conversion efficiency
pairrate    classical efficiency -> SPDC pair rate, size/power sweeps
radiator    Born-approximation dipole grid, far field, collection
hbt         Monte Carlo HBT experiment, correlation histogram, CAR
fitting     cos^2 / linear fits, efficiency normalisation, bundled efficiency table
"""

__version__ = "0.1.0"
