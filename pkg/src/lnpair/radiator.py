"""Born-approximation radiator: nonlinear dipole grid and its far field.

Frame: the pump travels along +z.  The half-space the pump crosses before
the cube (``side``) fills z < 0 ("backward"), the other one z > 0
("forward").  The substrate only enters through the Fresnel factor at the
entry face and through the wavenumber used in each far-field hemisphere;
there are no image dipoles.

For grids built by :func:`nonlinear_polarization` the moment density is a
plane wave inside each cell, so each cell is integrated exactly: the point
sum is multiplied by prod_a sinc(q_a h / 2) with q = k_internal - k r_hat.
Grids without ``k_internal`` are plain point dipoles.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .efficiency import (C, EPS0, Beam, CubeGeometry, SellmeierCoeffs, default_sellmeier,
                         index_for_polarization, spot_area)
from .errors import InvalidNA
from .tensor import PolarizationVector, Rank3Tensor

CHUNK = 1024  # directions per work unit; fixed so results don't depend on --threads
SIDES = ("air", "glass")


@dataclass(frozen=True)
class InternalField:
    amplitude: np.ndarray      # complex 3-vector, V/m, at the entry face
    k: np.ndarray              # wavevector inside the cube, rad/m
    wavelength: float
    n_cube: float
    n_entry: float
    transmission: float


@dataclass(frozen=True, eq=False)
class DipoleGrid:
    positions: np.ndarray      # (N, 3) m
    moments: np.ndarray        # (N, 3) complex, C m
    cell_size: float
    k_internal: np.ndarray | None = None
    shape: tuple | None = None  # (n, n, n) when positions form a regular C-ordered grid
    axes: tuple | None = None   # per-axis coordinates for regular grids

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        mom = np.asarray(self.moments, dtype=complex).reshape(-1, 3)
        if pos.shape != mom.shape or pos.shape[0] == 0:
            raise ValueError("need one moment per position and at least one dipole")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "moments", mom)

    @classmethod
    def points(cls, positions, moments) -> "DipoleGrid":
        return cls(positions, moments, cell_size=0.0)

    def scaled(self, factor) -> "DipoleGrid":
        return DipoleGrid(self.positions, self.moments * factor, self.cell_size,
                          self.k_internal, self.shape, self.axes)

    def collapsed(self) -> "DipoleGrid":
        """All moments summed onto the grid centroid (point dipole)."""
        centre = self.positions.mean(axis=0, keepdims=True)
        return DipoleGrid.points(centre, self.moments.sum(axis=0, keepdims=True))


@dataclass(frozen=True, eq=False)
class FarFieldMap:
    theta: np.ndarray          # cell-centre polar angles, rad, from +z
    phi: np.ndarray            # rad
    field: np.ndarray          # (n_theta, n_phi, 3) complex transverse amplitude
    intensity: np.ndarray      # (n_theta, n_phi) W/sr (relative)
    n_forward: float
    n_backward: float
    wavelength: float

    @property
    def theta_weights(self) -> np.ndarray:
        """Exact integral of sin(theta) over each polar cell."""
        h = np.pi / self.theta.size
        return np.cos(self.theta - h / 2) - np.cos(self.theta + h / 2)

    @property
    def phi_weight(self) -> float:
        return 2.0 * np.pi / self.phi.size

    def _ring_power(self) -> np.ndarray:
        # azimuthal sums first, then polar weights
        return self.intensity.sum(axis=1) * self.phi_weight

    def total_power(self) -> float:
        return float(self._ring_power() @ self.theta_weights)

    def cone_power(self, half_angle: float, hemisphere: str = "forward") -> float:
        """Power within ``half_angle`` of +z (forward) or -z (backward)."""
        h = np.pi / self.theta.size
        if hemisphere == "forward":
            lo, hi = self.theta - h / 2, self.theta + h / 2
            a, b = 0.0, half_angle
        elif hemisphere == "backward":
            lo, hi = self.theta - h / 2, self.theta + h / 2
            a, b = np.pi - half_angle, np.pi
        else:
            raise ValueError(f"unknown hemisphere {hemisphere!r}")
        lo_c = np.clip(lo, a, b)
        hi_c = np.clip(hi, a, b)
        w = np.where(hi_c > lo_c, np.cos(lo_c) - np.cos(hi_c), 0.0)
        return float(self._ring_power() @ w)

    def hemisphere_power(self, hemisphere: str) -> float:
        return self.cone_power(np.pi / 2, hemisphere)

    def to_csv_rows(self):
        th = np.rad2deg(self.theta)
        ph = np.rad2deg(self.phi)
        for i, t in enumerate(th):
            for j, p in enumerate(ph):
                yield (t, p, self.intensity[i, j])


def half_space_indices(geom: CubeGeometry, side: str):
    """(n_backward, n_forward) for pump entering through ``side``."""
    if side == "glass":
        return geom.n_below, geom.n_above
    if side == "air":
        return geom.n_above, geom.n_below
    raise ValueError(f"side must be 'air' or 'glass', got {side!r}")


def fresnel_t(n1: float, n2: float) -> float:
    """Normal-incidence amplitude transmission from n1 into n2."""
    return 2.0 * n1 / (n1 + n2)


def internal_field(beam: Beam, geom: CubeGeometry, side: str = "air",
                   coeffs: SellmeierCoeffs | None = None,
                   n_cube: float | None = None) -> InternalField:
    """Undepleted plane wave inside the cube.

    The incident amplitude follows from the beam's peak intensity in the
    entry medium; ``n_cube`` overrides the dispersive index when given.
    """
    n_entry, _ = half_space_indices(geom, side)
    if n_cube is None:
        coeffs = coeffs or default_sellmeier()
        n_cube = index_for_polarization(coeffs, beam.wavelength, beam.polarization,
                                        geom.optic_axis)
    t = fresnel_t(n_entry, n_cube)
    intensity = beam.power / spot_area(beam.spot_diameter)
    e0 = np.sqrt(2.0 * intensity / (n_entry * EPS0 * C))
    k = 2.0 * np.pi * n_cube / beam.wavelength * np.asarray(beam.propagation, dtype=float)
    return InternalField(t * e0 * beam.polarization.e.astype(complex), k, beam.wavelength,
                         n_cube, n_entry, t)


def nonlinear_polarization(E1: InternalField, E2: InternalField, tensor: Rank3Tensor,
                           geom: CubeGeometry, resolution: int = 16) -> DipoleGrid:
    """Cell-centred dipoles p = eps0 d:E1 E2 * cell volume (``tensor`` in lab frame).

    The phase is that of the product of the two internal plane waves,
    referenced to the entry face z = -L/2.
    """
    if resolution < 8:
        raise ValueError("grid resolution must be at least 8 cells per edge")
    L = geom.edge_length
    h = L / resolution
    ax = -L / 2 + (np.arange(resolution) + 0.5) * h
    X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
    pos = np.stack([X, Y, Z], axis=-1).reshape(-1, 3)
    drive = np.einsum("ijk,j,k->i", tensor.d * 1e-12, E1.amplitude, E2.amplitude)
    k_sum = E1.k + E2.k
    entry = np.array([0.0, 0.0, -L / 2])
    phase = np.exp(1j * ((pos - entry) @ k_sum))
    moments = EPS0 * h**3 * phase[:, None] * drive[None, :]
    return DipoleGrid(pos, moments, h, k_internal=k_sum, shape=(resolution,) * 3,
                      axes=(ax, ax, ax))


def _directions(n_theta, n_phi, phi_offset):
    theta = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    phi = phi_offset + np.arange(n_phi) * 2.0 * np.pi / n_phi
    T, P = np.meshgrid(theta, phi, indexing="ij")
    rhat = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1)
    return theta, phi, rhat.reshape(-1, 3)


def _sum_regular(grid: DipoleGrid, kvec):
    n = grid.shape[0]
    ax, ay, az = grid.axes
    M = grid.moments.reshape(n, n, n, 3)
    ex = np.exp(-1j * kvec[:, 0:1] * ax[None, :])
    ey = np.exp(-1j * kvec[:, 1:2] * ay[None, :])
    ez = np.exp(-1j * kvec[:, 2:3] * az[None, :])
    # contract z, then y, then x
    Mz = M.transpose(2, 0, 1, 3).reshape(n, -1)
    t1 = (ez @ Mz).reshape(-1, n, n, 3)
    t2 = np.einsum("dj,dijc->dic", ey, t1)
    return np.einsum("di,dic->dc", ex, t2)


def _sum_points(grid: DipoleGrid, kvec):
    ph = np.exp(-1j * (kvec @ grid.positions.T))
    return ph @ grid.moments


def _chunk_field(grid, rhat, kmag):
    kvec = rhat * kmag[:, None]
    if grid.shape is not None and grid.axes is not None:
        F = _sum_regular(grid, kvec)
    else:
        F = _sum_points(grid, kvec)
    if grid.k_internal is not None and grid.cell_size > 0:
        q = grid.k_internal[None, :] - kvec
        F = F * np.prod(np.sinc(q * grid.cell_size / (2.0 * np.pi)), axis=1)[:, None]
    # transverse projection (I - r r^T) F
    return F - rhat * np.sum(rhat * F, axis=1)[:, None]


def far_field(grid: DipoleGrid, lambda_out: float, geom: CubeGeometry, side: str = "air",
              n_theta: int = 180, n_phi: int = 360, phi_offset: float = 0.0,
              threads: int = 1) -> FarFieldMap:
    """Coherent far field of the dipole grid on a (theta, phi) cell grid.

    Intensity per solid angle uses the radiation of a dipole embedded in the
    hemisphere's medium: n w^4 |p_perp|^2 / (32 pi^2 eps0 c^3).
    """
    if n_theta % 2:
        raise ValueError("n_theta must be even so no cell straddles the equator")
    n_back, n_fwd = half_space_indices(geom, side)
    theta, phi, rhat = _directions(n_theta, n_phi, phi_offset)
    nh = np.where(rhat[:, 2] > 0, n_fwd, n_back)
    kmag = 2.0 * np.pi * nh / lambda_out
    starts = range(0, rhat.shape[0], CHUNK)

    def work(s):
        return _chunk_field(grid, rhat[s:s + CHUNK], kmag[s:s + CHUNK])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    field = np.concatenate(parts, axis=0)
    omega = 2.0 * np.pi * C / lambda_out
    pref = nh * omega**4 / (32.0 * np.pi**2 * EPS0 * C**3)
    intensity = pref * np.sum(np.abs(field) ** 2, axis=1)
    return FarFieldMap(theta, phi, field.reshape(n_theta, n_phi, 3),
                       intensity.reshape(n_theta, n_phi), n_fwd, n_back, lambda_out)


def collection_half_angle(numerical_aperture: float, n_medium: float) -> float:
    if not 0.0 < numerical_aperture <= 1.0:
        raise InvalidNA(f"numerical aperture must be in (0, 1], got {numerical_aperture}")
    return float(np.arcsin(min(numerical_aperture / n_medium, 1.0)))


def collected_power(ffmap: FarFieldMap, numerical_aperture: float,
                    hemisphere: str = "forward") -> float:
    n = ffmap.n_forward if hemisphere == "forward" else ffmap.n_backward
    return ffmap.cone_power(collection_half_angle(numerical_aperture, n), hemisphere)


def collection_fraction(ffmap: FarFieldMap, numerical_aperture: float,
                        hemisphere: str = "forward") -> float:
    total = ffmap.total_power()
    if total == 0:
        return 0.0
    return collected_power(ffmap, numerical_aperture, hemisphere) / total


def forward_backward_ratio(ffmap: FarFieldMap) -> float:
    back = ffmap.hemisphere_power("backward")
    fwd = ffmap.hemisphere_power("forward")
    return float(fwd / back) if back > 0 else float("inf")


def forward_fraction(ffmap: FarFieldMap) -> float:
    total = ffmap.total_power()
    return ffmap.hemisphere_power("forward") / total if total > 0 else 0.0


def sfg_wavelength(lambda_s: float, lambda_i: float) -> float:
    return 1.0 / (1.0 / lambda_s + 1.0 / lambda_i)


def sfg_map(lab_tensor: Rank3Tensor, geom: CubeGeometry, lambda_s: float, lambda_i: float,
            pol_s, pol_i, side: str = "air", resolution: int = 16,
            coeffs: SellmeierCoeffs | None = None, n_theta: int = 180, n_phi: int = 360,
            spot_diameter: float = 10e-6, threads: int = 1) -> FarFieldMap:
    """Far field of SFG driven by two 1 W plane waves along +z."""
    coeffs = coeffs or default_sellmeier()
    b1 = Beam(lambda_s, 1.0, spot_diameter, _pol(pol_s))
    b2 = Beam(lambda_i, 1.0, spot_diameter, _pol(pol_i))
    E1 = internal_field(b1, geom, side, coeffs)
    E2 = internal_field(b2, geom, side, coeffs)
    grid = nonlinear_polarization(E1, E2, lab_tensor, geom, resolution)
    return far_field(grid, sfg_wavelength(lambda_s, lambda_i), geom, side,
                     n_theta, n_phi, threads=threads)


def polarization_matrix(tensor: Rank3Tensor, geom: CubeGeometry, lambda_s: float,
                        lambda_i: float, numerical_aperture: float, side: str = "air",
                        hemisphere: str = "forward", resolution: int = 16,
                        coeffs: SellmeierCoeffs | None = None, n_theta: int = 180,
                        n_phi: int = 360, threads: int = 1) -> np.ndarray:
    """2x2 collected SFG power, rows = signal {x, y}, cols = idler {x, y}.

    ``tensor`` is in crystal coordinates and is rotated by the geometry.
    """
    coeffs = coeffs or default_sellmeier()
    lab = geom.lab_tensor(tensor)
    basis = (PolarizationVector.in_plane(0.0), PolarizationVector.in_plane(90.0))
    out = np.zeros((2, 2))
    for a, ps in enumerate(basis):
        for b, pi in enumerate(basis):
            m = sfg_map(lab, geom, lambda_s, lambda_i, ps, pi, side, resolution, coeffs,
                        n_theta, n_phi, threads=threads)
            out[a, b] = collected_power(m, numerical_aperture, hemisphere)
    return out


def _pol(p):
    return p if isinstance(p, PolarizationVector) else PolarizationVector.normalized(p)
