"""Curve fits and efficiency normalisation.

The cos^2 fit is linear in the double-angle basis::

    A cos^2(t - t0) + B = (B + A/2) + (A/2) cos 2t0 cos 2t + (A/2) sin 2t0 sin 2t

so it is solved by ordinary (or sigma-weighted) least squares with no
starting guess, and t0 follows from an arctangent.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .efficiency import spot_area
from .errors import IllConditionedFit, InvalidTransmission


@dataclass(frozen=True, eq=False)
class XYSeries:
    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("x and y must be 1-D and the same length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("x and y must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.sigma is not None:
            s = np.asarray(self.sigma, dtype=float)
            if s.shape != x.shape or not np.all(s > 0):
                raise ValueError("sigma must be positive and match x")
            object.__setattr__(self, "sigma", s)

    def __len__(self):
        return self.x.size

    @property
    def weights(self) -> np.ndarray:
        return np.ones_like(self.x) if self.sigma is None else 1.0 / self.sigma**2

    @classmethod
    def from_csv(cls, text: str) -> "XYSeries":
        """Columns x, y[, sigma]; '#' comments and a non-numeric header are skipped."""
        xs, ys, ss = [], [], []
        seen_header = False
        for row in csv.reader(ln for ln in io.StringIO(text) if not ln.lstrip().startswith("#")):
            if not row or not "".join(row).strip():
                continue
            try:
                vals = [float(v) for v in row]
            except ValueError:
                if xs or seen_header:
                    raise ValueError(f"non-numeric row: {','.join(row)}") from None
                seen_header = True
                continue
            if len(vals) not in (2, 3):
                raise ValueError(f"expected 2 or 3 columns, got {len(vals)}")
            xs.append(vals[0])
            ys.append(vals[1])
            if len(vals) == 3:
                ss.append(vals[2])
        if ss and len(ss) != len(xs):
            raise ValueError("sigma column must be present on every row or none")
        return cls(np.array(xs), np.array(ys), np.array(ss) if ss else None)


@dataclass(frozen=True)
class Cos2Fit:
    amplitude: float
    theta0_deg: float
    offset: float
    residual_norm: float
    theta0_defined: bool = True


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    intercept_stderr: float


def fit_cos2(data: XYSeries, amplitude_rtol: float = 1e-9) -> Cos2Fit:
    """Least-squares fit of y = A cos^2(theta - theta0) + B, theta in degrees.

    theta0 is reported in [0, 180).  When the fitted amplitude is below
    ``amplitude_rtol`` times the data scale theta0 is NaN and flagged.
    """
    th = np.deg2rad(data.x)
    if len(data) < 4 or np.ptp(data.x) < 90.0:
        raise IllConditionedFit("cos^2 fit needs >= 4 points spanning >= 90 degrees")
    X = np.column_stack([np.ones_like(th), np.cos(2 * th), np.sin(2 * th)])
    sw = np.sqrt(data.weights)
    Xw = X * sw[:, None]
    if np.linalg.matrix_rank(Xw) < 3:
        raise IllConditionedFit("angles do not determine the double-angle basis")
    coef, *_ = np.linalg.lstsq(Xw, data.y * sw, rcond=None)
    c0, c1, c2 = coef
    half_amp = math.hypot(c1, c2)
    A = 2.0 * half_amp
    B = c0 - half_amp
    resid = data.y - X @ coef
    scale = max(np.max(np.abs(data.y)), 1e-300)
    if A <= amplitude_rtol * scale:
        return Cos2Fit(A, float("nan"), B, float(np.linalg.norm(resid)), False)
    theta0 = (0.5 * math.degrees(math.atan2(c2, c1))) % 180.0
    return Cos2Fit(A, theta0, B, float(np.linalg.norm(resid)), True)


def fit_linear(data: XYSeries) -> LinearFit:
    """Straight line by the closed-form (weighted) normal equations.

    With sigmas the parameter errors are 1/sqrt(sum w (x - xbar)^2) etc.;
    without, they are scaled by the residual variance RSS / (n - 2).
    """
    x, y, w = data.x, data.y, data.weights
    if len(data) < 2 or np.ptp(x) == 0:
        raise IllConditionedFit("linear fit needs at least two distinct x values")
    W = w.sum()
    xm = (w @ x) / W
    ym = (w @ y) / W
    sxx = w @ (x - xm) ** 2
    slope = (w @ ((x - xm) * (y - ym))) / sxx
    intercept = ym - slope * xm
    resid = y - (slope * x + intercept)
    rss = w @ resid**2
    tss = w @ (y - ym) ** 2
    r2 = 1.0 - rss / tss if tss > 0 else (1.0 if rss == 0 else 0.0)
    if data.sigma is None:
        dof = len(data) - 2
        s2 = rss / dof if dof > 0 else 0.0
    else:
        s2 = 1.0
    slope_se = math.sqrt(s2 / sxx)
    intercept_se = math.sqrt(s2 * (1.0 / W + xm**2 / sxx))
    return LinearFit(float(slope), float(intercept), float(r2), slope_se, intercept_se)


def conversion_efficiency(rate: float, power: float, spot_diameter: float,
                          cube_size: float, spot_convention: str = "hard_disk") -> float:
    """rate / (I V) in Hz/(W m); divide by 1e9 for GHz/Wm.

    I = power / spot area (see :func:`lnpair.efficiency.spot_area`),
    V = cube_size^3.
    """
    if min(rate, power, spot_diameter, cube_size) <= 0:
        raise ValueError("all inputs must be positive")
    intensity = power / spot_area(spot_diameter, spot_convention)
    return rate / (intensity * cube_size**3)


LOSS_MODES = ("per_pair", "per_photon")


def loss_correction(raw_rate: float, transmissions, mode: str = "per_pair") -> float:
    """Undo transmission losses.

    per_pair    each factor is the survival probability of a detected pair
    per_photon  each factor applies to both photons: divide by T^2
    """
    ts = [float(t) for t in transmissions]
    for t in ts:
        if not 0.0 < t <= 1.0:
            raise InvalidTransmission(f"transmission must lie in (0, 1], got {t}")
    if mode == "per_pair":
        power = 1
    elif mode == "per_photon":
        power = 2
    else:
        raise ValueError(f"unknown loss mode {mode!r}")
    return raw_rate / math.prod(t**power for t in ts)


@dataclass(frozen=True)
class EfficiencyRecord:
    cube_id: str
    size: float                # m
    biphoton_rate: float       # Hz
    pump_power: float          # W
    spot_diameter: float       # m
    reported_ghz_per_wm: float | None = None

    def __post_init__(self):
        if min(self.size, self.biphoton_rate, self.pump_power, self.spot_diameter) <= 0:
            raise ValueError(f"cube {self.cube_id}: all quantities must be positive")

    def efficiency(self, spot_convention: str = "hard_disk") -> float:
        return conversion_efficiency(self.biphoton_rate, self.pump_power,
                                     self.spot_diameter, self.size, spot_convention)


def default_table1_records():
    text = resources.files("lnpair").joinpath("data/table1.csv").read_text()
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        rows.append(EfficiencyRecord(
            r["cube_id"], float(r["size_um"]) * 1e-6, float(r["rate_hz"]),
            float(r["power_mw"]) * 1e-3, float(r["spot_um"]) * 1e-6,
            float(r["reported_ghz_per_wm"]) if r.get("reported_ghz_per_wm") else None))
    return rows


TABLE1_COLUMNS = ("cube_id", "size_um", "rate_hz", "power_mw", "spot_um",
                  "efficiency_ghz_per_wm", "reported_ghz_per_wm")


def table1_report(records, spot_convention: str = "hard_disk"):
    """Efficiency per record, input order preserved.

    Returns (rows, text) where rows are tuples matching TABLE1_COLUMNS and
    text is an aligned plain-text table.
    """
    records = list(records)
    if not records:
        raise ValueError("need at least one record")
    rows = []
    for r in records:
        eff = r.efficiency(spot_convention) / 1e9
        rows.append((r.cube_id, r.size * 1e6, r.biphoton_rate, r.pump_power * 1e3,
                     r.spot_diameter * 1e6, eff, r.reported_ghz_per_wm))
    header = ("cube", "size[um]", "rate[Hz]", "P[mW]", "spot[um]", "eff[GHz/Wm]",
              "reported")
    cells = [header] + [
        (str(c), _g(s), _g(q), _g(p), _g(d), f"{e:.3f}", "-" if rep is None else _g(rep))
        for c, s, q, p, d, e, rep in rows
    ]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return rows, "\n".join(lines)


def _g(v):
    return f"{v:g}"
