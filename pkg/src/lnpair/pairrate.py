"""SPDC pair rate from the classical SFG/SHG efficiency.

Quantum-classical correspondence, evaluated exactly as printed with all
quantities in SI::

    (1/P_p) dN/dt = 2 pi eta_SFG * lam_p^4 / (lam_s^3 lam_i^3) * c dlam / lam_s^2

Degenerate forms:

``paper``     lam_s = lam_i = lam_p / 2  ->  2 pi eta_SHG 256 c dlam / lam_p^4
``physical``  lam_s = lam_i = 2 lam_p    ->  2 pi eta_SHG c dlam / (256 lam_p^4)

The wavelength prefactor is not dimensionless (it leaves a 1/m^2), so the
"Hz" produced here is the formula's literal SI value; see README.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .efficiency import (C, Beam, CubeGeometry, SellmeierCoeffs, default_sellmeier,
                         shg_coupling, shg_efficiency)
from .tensor import PolarizationVector, Rank3Tensor, expand, lithium_niobate_d

LENGTH_UNITS = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9}
CONVENTIONS = ("paper", "physical")


@dataclass(frozen=True)
class SpdcConfig:
    lambda_p: float
    lambda_s: float
    lambda_i: float
    delta_lambda: float
    pump_power: float

    def __post_init__(self):
        if min(self.lambda_p, self.lambda_s, self.lambda_i) <= 0:
            raise ValueError("wavelengths must be positive")
        if self.delta_lambda <= 0:
            raise ValueError("delta_lambda must be positive")
        if self.pump_power < 0:
            raise ValueError("pump power must be nonnegative")

    @classmethod
    def in_units(cls, lambda_p, lambda_s, lambda_i, delta_lambda, pump_power,
                 unit: str = "m") -> "SpdcConfig":
        """Build from lengths given in ``unit`` (m, mm, um, nm); stored in metres."""
        s = LENGTH_UNITS[unit]
        return cls(lambda_p * s, lambda_s * s, lambda_i * s, delta_lambda * s, pump_power)

    @classmethod
    def degenerate(cls, lambda_p, delta_lambda, pump_power,
                   convention: str = "paper") -> "SpdcConfig":
        ls = degenerate_signal_wavelength(lambda_p, convention)
        return cls(lambda_p, ls, ls, delta_lambda, pump_power)


@dataclass(frozen=True)
class RatePrediction:
    pair_rate: float
    rate_per_power: float
    eta: float
    config: SpdcConfig
    convention: str = "general"


def degenerate_signal_wavelength(lambda_p: float, convention: str = "paper") -> float:
    if convention == "paper":
        return lambda_p / 2.0
    if convention == "physical":
        return 2.0 * lambda_p
    raise ValueError(f"unknown degenerate convention {convention!r}")


def pair_rate_general(eta_sfg: float, cfg: SpdcConfig) -> RatePrediction:
    if eta_sfg < 0:
        raise ValueError("efficiency must be nonnegative")
    lp, ls, li = cfg.lambda_p, cfg.lambda_s, cfg.lambda_i
    per_power = (2.0 * np.pi * eta_sfg * lp**4 / (ls**3 * li**3)
                 * C * cfg.delta_lambda / ls**2)
    return RatePrediction(per_power * cfg.pump_power, per_power, eta_sfg, cfg)


def pair_rate_degenerate(eta_shg: float, lambda_p: float, delta_lambda: float,
                         P_p: float, convention: str = "paper") -> RatePrediction:
    if eta_shg < 0:
        raise ValueError("efficiency must be nonnegative")
    if convention == "paper":
        factor = 256.0
    elif convention == "physical":
        factor = 1.0 / 256.0
    else:
        raise ValueError(f"unknown degenerate convention {convention!r}")
    per_power = 2.0 * np.pi * eta_shg * factor * C * delta_lambda / lambda_p**4
    cfg = SpdcConfig.degenerate(lambda_p, delta_lambda, P_p, convention)
    return RatePrediction(per_power * P_p, per_power, eta_shg, cfg, convention)


@dataclass(frozen=True)
class RateSetup:
    """Everything needed to go from a cube size to a predicted pair rate.

    The SHG fundamental is at ``spdc.lambda_s`` (the signal wavelength of
    the physical experiment) polarized at ``pump_angle_deg`` in the lab xy
    plane; the crystal tensor is rotated by the geometry's orientation.
    """

    spdc: SpdcConfig
    geometry: CubeGeometry
    tensor: Rank3Tensor = field(default_factory=lambda: expand(lithium_niobate_d()))
    coeffs: SellmeierCoeffs = field(default_factory=default_sellmeier)
    pump_angle_deg: float = 90.0
    spot_diameter: float = 10e-6
    convention: str = "paper"
    area: str = "spot"
    spot_convention: str = "hard_disk"

    def fundamental_beam(self) -> Beam:
        return Beam(self.spdc.lambda_s, self.spdc.pump_power, self.spot_diameter,
                    PolarizationVector.in_plane(self.pump_angle_deg))


def shg_eta_for_size(setup: RateSetup, edge_length: float) -> float:
    geom = setup.geometry.with_edge(edge_length)
    beam = setup.fundamental_beam()
    d_eff, e_out = shg_coupling(geom.lab_tensor(setup.tensor), beam.polarization,
                                beam.propagation)
    if e_out is None:
        return 0.0
    return shg_efficiency(geom, beam, d_eff, setup.coeffs, harmonic_polarization=e_out,
                          area=setup.area, spot_convention=setup.spot_convention)


def predict(setup: RateSetup, edge_length: float | None = None,
            pump_power: float | None = None) -> RatePrediction:
    L = setup.geometry.edge_length if edge_length is None else edge_length
    P = setup.spdc.pump_power if pump_power is None else pump_power
    eta = shg_eta_for_size(setup, L)
    return pair_rate_degenerate(eta, setup.spdc.lambda_p, setup.spdc.delta_lambda, P,
                                setup.convention)


def size_sweep(sizes, setup: RateSetup):
    """Rows of (size_m, eta_per_W, pair_rate_Hz)."""
    rows = []
    for L in sizes:
        if L <= 0:
            raise ValueError("sizes must be positive")
        p = predict(setup, edge_length=L)
        rows.append((float(L), p.eta, p.pair_rate))
    return rows


def power_sweep(powers, setup: RateSetup):
    """Rows of (power_W, eta_per_W, pair_rate_Hz); exactly linear in power."""
    base = predict(setup, pump_power=1.0)
    rows = []
    for P in powers:
        if P < 0:
            raise ValueError("powers must be nonnegative")
        rows.append((float(P), base.eta, base.rate_per_power * P))
    return rows
