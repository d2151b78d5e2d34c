"""Dispersion and non-phase-matched SHG/SFG conversion efficiency.

Plane-wave, undepleted-pump model for a slab of thickness L (the cube
edge) traversed along the beam direction::

    eta_SHG = 8 pi^2 d^2 L^2 / (n_2w n_w^2 eps0 c lam_w^2 A) * sinc^2(dk L / 2)
    eta_SFG = 8 pi^2 d^2 L^2 / (n_1 n_2 n_3 eps0 c lam_3^2 A) * sinc^2(dk L / 2)

with sinc(x) = sin(x)/x.  For identical inputs eta_SFG = 4 eta_SHG (the
nonlinear polarization at 2w carries a factor 1/2 relative to the
nondegenerate mixing term).
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import OutOfValidityRange
from .tensor import (PolarizationVector, Rank3Tensor, Rotation, effective_d,
                     nonlinear_drive, rotate_tensor)

EPS0 = 8.8541878128e-12
C = 299792458.0

ORDINARY = "ordinary"
EXTRAORDINARY = "extraordinary"


@dataclass(frozen=True)
class SellmeierCoeffs:
    """n^2 = 1 + sum B_k L^2 / (L^2 - C_k), L in micrometres."""

    ordinary_B: tuple
    ordinary_C: tuple
    extraordinary_B: tuple
    extraordinary_C: tuple
    window_um: tuple = (0.4, 5.0)

    def __post_init__(self):
        for b, c in ((self.ordinary_B, self.ordinary_C),
                     (self.extraordinary_B, self.extraordinary_C)):
            if len(b) != len(c) or not b:
                raise ValueError("B and C coefficient lists must match in length")
        lo, hi = self.window_um
        if not 0 < lo < hi:
            raise ValueError("validity window must satisfy 0 < lo < hi")

    @classmethod
    def from_section(cls, section) -> "SellmeierCoeffs":
        def nums(key):
            return tuple(float(v) for v in section[key].replace(",", " ").split())
        return cls(nums("ordinary_B"), nums("ordinary_C"),
                   nums("extraordinary_B"), nums("extraordinary_C"),
                   nums("window_um"))


def default_sellmeier() -> SellmeierCoeffs:
    """Constants shipped in the bundled ``default.cfg``."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    parser.read_string(resources.files("lnpair").joinpath("data/default.cfg").read_text())
    return SellmeierCoeffs.from_section(parser["sellmeier"])


def refractive_index(coeffs: SellmeierCoeffs, wavelength: float, branch: str) -> float:
    lam = wavelength * 1e6
    lo, hi = coeffs.window_um
    # relative slack absorbs unit-conversion round-off at the window edges
    if not lo * (1 - 1e-12) <= lam <= hi * (1 + 1e-12):
        raise OutOfValidityRange(
            f"wavelength {lam:g} um outside Sellmeier window [{lo:g}, {hi:g}] um")
    if branch == ORDINARY:
        B, Cc = coeffs.ordinary_B, coeffs.ordinary_C
    elif branch == EXTRAORDINARY:
        B, Cc = coeffs.extraordinary_B, coeffs.extraordinary_C
    else:
        raise ValueError(f"unknown branch {branch!r}")
    lam2 = lam * lam
    n2 = 1.0 + sum(b * lam2 / (lam2 - c) for b, c in zip(B, Cc))
    return float(np.sqrt(n2))


def index_for_polarization(coeffs: SellmeierCoeffs, wavelength: float,
                           polarization, optic_axis) -> float:
    """Index seen by a field polarized at angle a to the optic axis.

    1/n^2 = cos^2(a)/n_e^2 + sin^2(a)/n_o^2 (index-ellipse interpolation).
    """
    e = _unit(polarization)
    c = _unit(optic_axis)
    cos2 = min(float(e @ c) ** 2, 1.0)
    ne = refractive_index(coeffs, wavelength, EXTRAORDINARY)
    no = refractive_index(coeffs, wavelength, ORDINARY)
    return float(1.0 / np.sqrt(cos2 / ne**2 + (1.0 - cos2) / no**2))


def delta_k(lambda_fund: float, n_fund: float, n_harm: float) -> float:
    """k_2w - 2 k_w for SHG, rad/m."""
    if lambda_fund <= 0:
        raise ValueError("wavelength must be positive")
    return 4.0 * np.pi * (n_harm - n_fund) / lambda_fund


def delta_k_sfg(lambdas, indices) -> float:
    """k_3 - k_1 - k_2 with lambda_3 from energy conservation."""
    l1, l2 = lambdas
    n1, n2, n3 = indices
    l3 = 1.0 / (1.0 / l1 + 1.0 / l2)
    return 2.0 * np.pi * (n3 / l3 - n1 / l1 - n2 / l2)


def coherence_length(dk: float) -> float:
    if dk == 0:
        return float("inf")
    return float(np.pi / abs(dk))


def sinc2(x):
    """(sin x / x)^2, with the x -> 0 limit."""
    return np.sinc(np.asarray(x) / np.pi) ** 2


@dataclass(frozen=True)
class CubeGeometry:
    edge_length: float
    orientation: Rotation = field(default_factory=Rotation.identity)
    n_below: float = 1.45
    n_above: float = 1.0

    def __post_init__(self):
        if not self.edge_length > 0:
            raise ValueError("edge length must be positive")
        if self.n_below < 1 or self.n_above < 1:
            raise ValueError("half-space indices must be >= 1")

    @property
    def optic_axis(self) -> np.ndarray:
        return self.orientation.R[:, 2].copy()

    def with_edge(self, edge_length: float) -> "CubeGeometry":
        return CubeGeometry(edge_length, self.orientation, self.n_below, self.n_above)

    def lab_tensor(self, crystal_tensor: Rank3Tensor) -> Rank3Tensor:
        return rotate_tensor(crystal_tensor, self.orientation)


@dataclass(frozen=True)
class Beam:
    wavelength: float
    power: float
    spot_diameter: float
    polarization: PolarizationVector
    propagation: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        if self.power < 0:
            raise ValueError("power must be nonnegative")
        if not self.spot_diameter > 0:
            raise ValueError("spot diameter must be positive")
        k = np.asarray(self.propagation, dtype=float)
        if abs(np.linalg.norm(k) - 1.0) > 1e-12:
            raise ValueError("propagation must be a unit vector")
        if abs(float(k @ self.polarization.e)) > 1e-9:
            raise ValueError("polarization must be transverse to propagation")

    def with_polarization(self, pol: PolarizationVector) -> "Beam":
        return Beam(self.wavelength, self.power, self.spot_diameter, pol, self.propagation)

    def with_wavelength(self, wavelength: float) -> "Beam":
        return Beam(wavelength, self.power, self.spot_diameter, self.polarization,
                    self.propagation)


SPOT_CONVENTIONS = ("hard_disk", "gaussian_1e2", "gaussian_fwhm")


def spot_area(spot_diameter: float, convention: str = "hard_disk") -> float:
    """Area A such that the on-axis intensity is P / A.

    hard_disk      uniform disk of the stated diameter: pi d^2 / 4
    gaussian_1e2   Gaussian with 1/e^2 diameter d: peak I = 2P / (pi w^2)
    gaussian_fwhm  Gaussian with intensity FWHM d: peak I = 4 ln2 P / (pi d^2)
    """
    if convention == "hard_disk":
        return np.pi * spot_diameter**2 / 4.0
    if convention == "gaussian_1e2":
        return np.pi * spot_diameter**2 / 8.0
    if convention == "gaussian_fwhm":
        return np.pi * spot_diameter**2 / (4.0 * np.log(2.0))
    raise ValueError(f"unknown spot convention {convention!r}")


AREA_CONVENTIONS = ("spot", "facet", "min")


def effective_area(geom: CubeGeometry, spot_diameter: float, area: str = "spot",
                   spot_convention: str = "hard_disk") -> float:
    a_spot = spot_area(spot_diameter, spot_convention)
    a_facet = geom.edge_length**2
    if area == "spot":
        return a_spot
    if area == "facet":
        return a_facet
    if area == "min":
        return min(a_spot, a_facet)
    raise ValueError(f"unknown area convention {area!r}")


def shg_efficiency(geom: CubeGeometry, beam: Beam, d_eff: float, coeffs: SellmeierCoeffs,
                   harmonic_polarization=None, area: str = "spot",
                   spot_convention: str = "hard_disk") -> float:
    """SHG power conversion efficiency P_2w / P_w^2 in 1/W.

    ``d_eff`` in pm/V.  The harmonic is taken co-polarized with the pump
    unless ``harmonic_polarization`` is given.
    """
    axis = geom.optic_axis
    e_h = beam.polarization if harmonic_polarization is None else harmonic_polarization
    n_w = index_for_polarization(coeffs, beam.wavelength, beam.polarization, axis)
    n_2w = index_for_polarization(coeffs, beam.wavelength / 2.0, e_h, axis)
    L = geom.edge_length
    dk = delta_k(beam.wavelength, n_w, n_2w)
    a_eff = effective_area(geom, beam.spot_diameter, area, spot_convention)
    d = d_eff * 1e-12
    pref = 8.0 * np.pi**2 * d**2 * L**2 / (n_2w * n_w**2 * EPS0 * C * beam.wavelength**2 * a_eff)
    return float(pref * sinc2(dk * L / 2.0))


def sfg_efficiency(geom: CubeGeometry, beams, d_eff: float, coeffs: SellmeierCoeffs,
                   out_polarization=None, area: str = "spot",
                   spot_convention: str = "hard_disk") -> float:
    """SFG efficiency P_3 / (P_1 P_2) in 1/W; equals 4 x shg_efficiency for
    identical inputs.

    The output polarization defaults to the common input polarization; for
    differently polarized inputs it must be given explicitly.
    """
    b1, b2 = beams
    axis = geom.optic_axis
    if out_polarization is None:
        if abs(abs(float(b1.polarization.e @ b2.polarization.e)) - 1.0) > 1e-12:
            raise ValueError("out_polarization required for differently polarized inputs")
        out_polarization = b1.polarization
    l1, l2 = b1.wavelength, b2.wavelength
    l3 = 1.0 / (1.0 / l1 + 1.0 / l2)
    n1 = index_for_polarization(coeffs, l1, b1.polarization, axis)
    n2 = index_for_polarization(coeffs, l2, b2.polarization, axis)
    n3 = index_for_polarization(coeffs, l3, out_polarization, axis)
    L = geom.edge_length
    dk = delta_k_sfg((l1, l2), (n1, n2, n3))
    # the two inputs share the focus; use the first beam's spot
    a_eff = effective_area(geom, b1.spot_diameter, area, spot_convention)
    d = d_eff * 1e-12
    pref = 8.0 * np.pi**2 * d**2 * L**2 / (n1 * n2 * n3 * EPS0 * C * l3**2 * a_eff)
    return float(pref * sinc2(dk * L / 2.0))


def shg_coupling(lab_tensor: Rank3Tensor, polarization, propagation=(0.0, 0.0, 1.0)):
    """Effective coefficient and harmonic polarization for a pump field.

    The harmonic is emitted along the transverse part of the nonlinear
    drive d:ee, which is the output polarization maximizing the coupling;
    d_eff = |drive_perp| >= 0 in pm/V.  Returns (d_eff, e_out) where
    e_out is None when the transverse drive vanishes.
    """
    e = _unit(polarization)
    k = _unit(propagation)
    drive = nonlinear_drive(lab_tensor, e, e)
    perp = drive - (drive @ k) * k
    mag = float(np.linalg.norm(perp))
    if mag == 0.0:
        return 0.0, None
    e_out = PolarizationVector(perp / mag)
    return effective_d(lab_tensor, e_out, e, e), e_out


def transverse_basis(propagation, reference=None):
    """Orthonormal (u, v) transverse to ``propagation``; u follows ``reference``
    (default lab x, or lab y when x is parallel to the beam)."""
    k = _unit(propagation)
    ref = np.array([1.0, 0.0, 0.0]) if reference is None else np.asarray(reference, float)
    u = ref - (ref @ k) * k
    if np.linalg.norm(u) < 1e-9:
        ref = np.array([0.0, 1.0, 0.0])
        u = ref - (ref @ k) * k
    u = u / np.linalg.norm(u)
    v = np.cross(k, u)
    return u, v


def orientation_sweep(geom: CubeGeometry, beam: Beam, tensor: Rank3Tensor,
                      coeffs: SellmeierCoeffs, angles, reference=None,
                      area: str = "spot", spot_convention: str = "hard_disk"):
    """SHG efficiency versus in-plane pump polarization angle.

    ``tensor`` is in crystal coordinates; the geometry's orientation is
    applied.  Returns a list of (angle_deg, d_eff_pm_per_V, eta_per_W).
    """
    lab = geom.lab_tensor(tensor)
    u, v = transverse_basis(beam.propagation, reference)
    rows = []
    for ang in angles:
        a = np.deg2rad(float(ang))
        pol = PolarizationVector.normalized(np.cos(a) * u + np.sin(a) * v)
        d_eff, e_out = shg_coupling(lab, pol, beam.propagation)
        if e_out is None:
            rows.append((float(ang), 0.0, 0.0))
            continue
        eta = shg_efficiency(geom, beam.with_polarization(pol), d_eff, coeffs,
                             harmonic_polarization=e_out, area=area,
                             spot_convention=spot_convention)
        rows.append((float(ang), d_eff, eta))
    return rows


def _unit(v):
    a = v.e if isinstance(v, PolarizationVector) else np.asarray(v, dtype=float)
    return a / np.linalg.norm(a)
