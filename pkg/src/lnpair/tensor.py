"""Second-order nonlinear susceptibility tensors.

Contracted (Voigt) notation used throughout::

    1 <-> (1,1)   2 <-> (2,2)   3 <-> (3,3)
    4 <-> (2,3)   5 <-> (1,3)   6 <-> (1,2)

so ``d[i, m]`` with ``m = voigt(j, k)`` equals ``d_ijk = d_ikj``.  Only the
intrinsic permutation symmetry in the last two indices is assumed; Kleinman
symmetry is not imposed.  All values are in pm/V.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SymmetryViolation

VOIGT = np.array([[0, 5, 4],
                  [5, 1, 3],
                  [4, 3, 2]])

# (j, k) pair used when reading a contracted column back out of a full tensor
_VOIGT_PAIRS = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)]

SYMMETRY_RTOL = 1e-12
ORTHO_ATOL = 1e-12


def _frozen(a, shape):
    arr = np.array(a, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("entries must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ContractedDMatrix:
    """3x6 contracted d-matrix in pm/V."""

    d: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "d", _frozen(self.d, (3, 6)))

    def __eq__(self, other):
        return isinstance(other, ContractedDMatrix) and np.array_equal(self.d, other.d)

    def is_c3v(self, atol=1e-12) -> bool:
        """Zero pattern and equalities of the 3m point group (optic axis = z)."""
        d = self.d
        checks = [
            d[0, 0], d[0, 1], d[0, 2], d[0, 3],
            d[0, 5] + d[1, 1],
            d[1, 0] + d[1, 1],
            d[1, 3] - d[0, 4],
            d[1, 4], d[1, 5],
            d[2, 0] - d[2, 1],
            d[2, 3], d[2, 4], d[2, 5],
        ]
        return bool(np.all(np.abs(checks) <= atol))

    def to_text(self) -> str:
        """Row-major 3x6 whitespace-separated block (config file format)."""
        return "\n".join(" ".join(repr(float(v)) for v in row) for row in self.d)

    @classmethod
    def from_text(cls, text: str) -> "ContractedDMatrix":
        rows = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
        if len(rows) != 3 or any(len(r) != 6 for r in rows):
            raise ValueError("d-matrix block must have 3 rows of 6 numbers")
        return cls(np.array([[float(v) for v in r] for r in rows]))


@dataclass(frozen=True, eq=False)
class Rank3Tensor:
    """Full 3x3x3 tensor d_ijk in pm/V, symmetric in (j, k)."""

    d: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.d, (3, 3, 3))
        scale = max(np.max(np.abs(arr)), 1.0)
        if np.max(np.abs(arr - arr.transpose(0, 2, 1))) > SYMMETRY_RTOL * scale:
            raise SymmetryViolation("d_ijk must equal d_ikj")
        object.__setattr__(self, "d", arr)

    def allclose(self, other: "Rank3Tensor", rtol=1e-9) -> bool:
        scale = max(np.max(np.abs(self.d)), np.max(np.abs(other.d)), 1e-300)
        return bool(np.max(np.abs(self.d - other.d)) <= rtol * scale)


@dataclass(frozen=True, eq=False)
class Rotation:
    """Proper rotation matrix taking crystal coordinates to lab coordinates."""

    R: np.ndarray

    def __post_init__(self):
        R = _frozen(self.R, (3, 3))
        if np.max(np.abs(R.T @ R - np.eye(3))) > ORTHO_ATOL:
            raise ValueError("rotation matrix is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > ORTHO_ATOL:
            raise ValueError("rotation matrix must have det = +1")
        object.__setattr__(self, "R", R)

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return Rotation(_reorthonormalize(self.R @ other.R))

    def apply(self, v):
        return self.R @ np.asarray(v, dtype=float)

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.eye(3))

    @classmethod
    def about_axis(cls, axis, angle_deg: float) -> "Rotation":
        """Right-handed rotation by ``angle_deg`` about ``axis`` (Rodrigues)."""
        u = np.asarray(axis, dtype=float)
        u = u / np.linalg.norm(u)
        a = np.deg2rad(angle_deg)
        K = np.array([[0.0, -u[2], u[1]],
                      [u[2], 0.0, -u[0]],
                      [-u[1], u[0], 0.0]])
        R = np.eye(3) + np.sin(a) * K + (1.0 - np.cos(a)) * (K @ K)
        return cls(_reorthonormalize(R))

    @classmethod
    def optic_axis_to(cls, direction) -> "Rotation":
        """Shortest rotation carrying crystal z onto ``direction`` (lab frame)."""
        v = np.asarray(direction, dtype=float)
        v = v / np.linalg.norm(v)
        z = np.array([0.0, 0.0, 1.0])
        axis = np.cross(z, v)
        s = np.linalg.norm(axis)
        cosang = float(np.clip(z @ v, -1.0, 1.0))
        if s < 1e-15:
            if cosang > 0:
                return cls.identity()
            return cls.about_axis([1.0, 0.0, 0.0], 180.0)
        return cls.about_axis(axis, np.rad2deg(np.arctan2(s, cosang)))


def _reorthonormalize(R):
    # polar decomposition; removes round-off drift from products
    U, _, Vt = np.linalg.svd(R)
    return U @ Vt


def cube_diagonal_axis(projection_deg: float, tilt: str = "body") -> np.ndarray:
    """Lab-frame optic axis for a cube resting on a face, pump along +z.

    ``tilt='body'`` puts the axis along a body diagonal whose in-plane
    projection (a face diagonal) makes ``projection_deg`` with lab x; the
    axis then sits at arccos(1/sqrt(3)) from z.  ``tilt='in_plane'`` lays the
    axis in the xy plane.
    """
    phi = np.deg2rad(projection_deg)
    if tilt == "body":
        ct = 1.0 / np.sqrt(3.0)
        st = np.sqrt(2.0 / 3.0)
    elif tilt == "in_plane":
        ct, st = 0.0, 1.0
    else:
        raise ValueError(f"unknown tilt {tilt!r}")
    return np.array([st * np.cos(phi), st * np.sin(phi), ct])


def cube_orientation(projection_deg: float, tilt: str = "body") -> Rotation:
    """Crystal-to-lab rotation with crystal z on the cube's optic axis.

    The roll about the optic axis is fixed so that the crystal yz mirror
    plane contains the lab z axis; crystal x is then the in-plane normal
    (-sin p, cos p, 0).  Changing ``projection_deg`` is a rigid rotation of
    the whole crystal about lab z.
    """
    zc = cube_diagonal_axis(projection_deg, tilt)
    phi = np.deg2rad(projection_deg)
    xc = np.array([-np.sin(phi), np.cos(phi), 0.0])
    yc = np.cross(zc, xc)
    return Rotation(_reorthonormalize(np.column_stack([xc, yc, zc])))


@dataclass(frozen=True, eq=False)
class PolarizationVector:
    """Real unit vector for a linear polarization."""

    e: np.ndarray

    def __post_init__(self):
        e = _frozen(self.e, (3,))
        if abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise ValueError("polarization vector must be unit length")
        object.__setattr__(self, "e", e)

    @classmethod
    def normalized(cls, v) -> "PolarizationVector":
        v = np.asarray(v, dtype=float)
        return cls(v / np.linalg.norm(v))

    @classmethod
    def in_plane(cls, angle_deg: float) -> "PolarizationVector":
        """Transverse polarization for propagation along +z, angle from x."""
        a = np.deg2rad(angle_deg)
        return cls(np.array([np.cos(a), np.sin(a), 0.0]))


def lithium_niobate_d(d15=-4.88, d22=2.58, d31=-4.88, d33=-34.0) -> ContractedDMatrix:
    """Contracted d-matrix of LiNbO3 (C3v, optic axis along crystal z)."""
    return ContractedDMatrix(np.array([
        [0.0, 0.0, 0.0, 0.0, d15, -d22],
        [-d22, d22, 0.0, d15, 0.0, 0.0],
        [d31, d31, d33, 0.0, 0.0, 0.0],
    ]))


def expand(c: ContractedDMatrix) -> Rank3Tensor:
    return Rank3Tensor(c.d[:, VOIGT])


def contract(t) -> ContractedDMatrix:
    """Inverse of :func:`expand`; accepts a Rank3Tensor or a raw 3x3x3 array."""
    d = np.asarray(t.d if isinstance(t, Rank3Tensor) else t, dtype=float)
    if d.shape != (3, 3, 3):
        raise ValueError("expected a 3x3x3 tensor")
    scale = max(np.max(np.abs(d)), 1.0)
    if np.max(np.abs(d - d.transpose(0, 2, 1))) > SYMMETRY_RTOL * scale:
        raise SymmetryViolation("tensor is not symmetric in its last two indices")
    return ContractedDMatrix(np.stack([d[:, j, k] for j, k in _VOIGT_PAIRS], axis=1))


def rotate_tensor(t: Rank3Tensor, r: Rotation) -> Rank3Tensor:
    """d'_ijk = R_ia R_jb R_kc d_abc."""
    R = r.R
    out = np.einsum("ia,jb,kc,abc->ijk", R, R, R, t.d)
    # restore exact (j, k) symmetry lost to round-off
    return Rank3Tensor(0.5 * (out + out.transpose(0, 2, 1)))


def nonlinear_drive(t: Rank3Tensor, e1, e2) -> np.ndarray:
    """Vector sum_jk d_ijk e1_j e2_k (pm/V)."""
    return np.einsum("ijk,j,k->i", t.d, _vec(e1), _vec(e2))


def effective_d(t: Rank3Tensor, e_out, e_in1, e_in2) -> float:
    """sum_ijk e_out_i d_ijk e_in1_j e_in2_k in pm/V."""
    return float(_vec(e_out) @ nonlinear_drive(t, e_in1, e_in2))


def _vec(e):
    if isinstance(e, PolarizationVector):
        return e.e
    return np.asarray(e, dtype=float)
