"""Command-line entry point: ``lnpair <command> [options]``.

Exit codes: 0 success, 2 configuration or usage error, 3 numeric domain
error.  Every output file starts with a ``#`` header carrying the tool
version, the seed and the fully resolved config; pass that file back via
``--config`` to regenerate it.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import efficiency as eff
from . import fitting, hbt, pairrate, radiator
from .config import as_list_text, load_config, parse_number_list
from .errors import ConfigError, LnPairError
from .report import render_csv, render_text, write_outputs
from .tensor import PolarizationVector, cube_orientation, expand, lithium_niobate_d


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---- config -> model objects ----------------------------------------------

def crystal_tensor(cfg):
    d = cfg["crystal"]["d_matrix"]
    return expand(d if d is not None else lithium_niobate_d())


def sellmeier(cfg):
    s = cfg["sellmeier"]
    return eff.SellmeierCoeffs(tuple(s["ordinary_B"]), tuple(s["ordinary_C"]),
                               tuple(s["extraordinary_B"]), tuple(s["extraordinary_C"]),
                               tuple(s["window_um"]))


def geometry(cfg, edge_um=None):
    g, c = cfg["geometry"], cfg["crystal"]
    edge = g["edge_um"] if edge_um is None else edge_um
    return eff.CubeGeometry(edge * 1e-6, cube_orientation(c["projection_deg"], c["tilt"]),
                            g["n_below"], g["n_above"])


def rate_setup(cfg):
    o, conv = cfg["optics"], cfg["conventions"]
    spdc = pairrate.SpdcConfig.in_units(o["pump_nm"], o["signal_nm"], o["idler_nm"],
                                        o["delta_lambda_nm"], o["power_mw"] * 1e-3, "nm")
    return pairrate.RateSetup(spdc, geometry(cfg), crystal_tensor(cfg), sellmeier(cfg),
                              o["pump_angle_deg"], o["spot_um"] * 1e-6,
                              conv["degenerate_convention"], conv["area_convention"],
                              conv["spot_convention"])


def detectors(cfg):
    h = cfg["hbt"]
    return tuple(hbt.DetectorModel(h[f"efficiency{i}"], h[f"dark_hz{i}"] + h[f"background_hz{i}"],
                                   h[f"jitter_ps{i}"] * 1e-12, h[f"dead_time_ns{i}"] * 1e-9)
                 for i in (1, 2))


# ---- commands ----------------------------------------------------------------

def cmd_rate(cfg, args):
    setup = rate_setup(cfg)
    o, conv = cfg["optics"], cfg["conventions"]
    rows = []
    for L, eta, rate in pairrate.size_sweep([s * 1e-6 for s in cfg["geometry"]["sizes_um"]], setup):
        rows.append(("size", L * 1e6, o["power_mw"], eta, rate, setup.convention))
    for P, eta, rate in pairrate.power_sweep([p * 1e-3 for p in o["powers_mw"]], setup):
        rows.append(("power", setup.geometry.edge_length * 1e6, P * 1e3, eta, rate,
                     setup.convention))

    pred = pairrate.predict(setup)
    eta = pred.eta
    lp, dl, P = setup.spdc.lambda_p, setup.spdc.delta_lambda, setup.spdc.pump_power
    paper = pairrate.pair_rate_degenerate(eta, lp, dl, P, "paper").pair_rate
    physical = pairrate.pair_rate_degenerate(eta, lp, dl, P, "physical").pair_rate
    coeffs = setup.coeffs
    ls = setup.spdc.lambda_s
    dk = eff.delta_k(ls, eff.refractive_index(coeffs, ls, eff.EXTRAORDINARY),
                     eff.refractive_index(coeffs, ls / 2, eff.EXTRAORDINARY))
    m = cfg["measured"]
    corrected = fitting.loss_correction(m["rate_hz"], m["transmissions"], conv["loss_mode"])
    L = setup.geometry.edge_length
    spot = setup.spot_diameter
    summary = [
        ("edge_um", L * 1e6),
        ("pump_power_mw", P * 1e3),
        ("delta_lambda_nm", dl * 1e9),
        ("eta_shg_per_w", eta),
        ("degenerate_convention", conv["degenerate_convention"]),
        ("pair_rate_hz", pred.pair_rate),
        ("pair_rate_paper_hz", paper),
        ("pair_rate_physical_hz", physical),
        ("convention_ratio_paper_over_physical", paper / physical if physical else float("nan")),
        ("coherence_length_ee_um", eff.coherence_length(dk) * 1e6),
        ("spot_convention", conv["spot_convention"]),
        ("area_convention", conv["area_convention"]),
        ("predicted_efficiency_ghz_per_wm",
         fitting.conversion_efficiency(pred.pair_rate, P, spot, L, conv["spot_convention"]) / 1e9
         if pred.pair_rate > 0 and P > 0 else 0.0),
        ("measured_rate_hz", m["rate_hz"]),
        ("loss_mode", conv["loss_mode"]),
        ("loss_corrected_rate_hz", corrected),
        ("measured_efficiency_ghz_per_wm",
         fitting.conversion_efficiency(corrected, P, spot, L, conv["spot_convention"]) / 1e9
         if P > 0 else float("nan")),
    ]
    head = cfg.header_lines("rate", __version__)
    return {
        "rate.csv": render_csv(head, ("sweep", "size_um", "power_mw", "eta_per_w",
                                      "pair_rate_hz", "convention"), rows),
        "rate_summary.csv": render_csv(head, ("key", "value"), summary),
    }


def cmd_polarization(cfg, args):
    setup = rate_setup(cfg)
    angles = cfg["optics"]["angles_deg"]
    beam = setup.fundamental_beam()
    sweep = eff.orientation_sweep(setup.geometry, beam, setup.tensor, setup.coeffs, angles,
                                  area=setup.area, spot_convention=setup.spot_convention)
    s = setup.spdc
    rows = []
    for ang, d_eff, eta in sweep:
        rate = pairrate.pair_rate_degenerate(eta, s.lambda_p, s.delta_lambda, s.pump_power,
                                             setup.convention).pair_rate
        rows.append((ang, d_eff, eta, rate))
    etas = np.array([r[2] for r in rows])
    summary = [("n_angles", len(rows)),
               ("projection_deg", cfg["crystal"]["projection_deg"]),
               ("max_eta_per_w", etas.max()), ("min_eta_per_w", etas.min()),
               ("max_min_ratio", etas.max() / etas.min() if etas.min() > 0 else float("inf"))]
    xs = np.array([r[0] for r in rows])
    if len(rows) >= 4 and np.ptp(xs) >= 90:
        fit = fitting.fit_cos2(fitting.XYSeries(xs, etas))
        summary += [("fit", "cos2"), ("amplitude", fit.amplitude),
                    ("theta0_deg", fit.theta0_deg), ("offset", fit.offset),
                    ("residual_norm", fit.residual_norm), ("theta0_defined", fit.theta0_defined)]
    else:
        summary += [("fit", "skipped: need >= 4 angles spanning >= 90 deg")]
    head = cfg.header_lines("polarization", __version__)
    return {
        "polarization.csv": render_csv(head, ("angle_deg", "d_eff_pm_per_v", "eta_per_w",
                                              "pair_rate_hz"), rows),
        "polarization_fit.csv": render_csv(head, ("key", "value"), summary),
    }


def cmd_farfield(cfg, args):
    f, o = cfg["farfield"], cfg["optics"]
    geom = geometry(cfg, f["edge_um"])
    T = crystal_tensor(cfg)
    lab = geom.lab_tensor(T)
    coeffs = sellmeier(cfg)
    ls, li = o["signal_nm"] * 1e-9, o["idler_nm"] * 1e-9
    pol = PolarizationVector.in_plane(o["pump_angle_deg"])
    na = o["na"]
    rows, last, prev = [], None, None
    for g in f["grid"]:
        m = radiator.sfg_map(lab, geom, ls, li, pol, pol, f["side"], g, coeffs,
                             f["n_theta"], f["n_phi"], o["spot_um"] * 1e-6, args.threads)
        total = m.total_power()
        drift = abs(total - prev) / prev if prev else float("nan")
        rows.append((g, f["side"], total, m.hemisphere_power("forward"),
                     m.hemisphere_power("backward"), radiator.forward_fraction(m), na,
                     radiator.collected_power(m, na, "forward"),
                     radiator.collection_fraction(m, na, "forward"),
                     radiator.collection_fraction(m, na, "backward"), drift))
        prev, last = total, m
    M = radiator.polarization_matrix(T, geom, ls, li, na, f["side"], "forward", f["grid"][-1],
                                     coeffs, f["n_theta"], f["n_phi"], args.threads)
    pm = [(sig, idl, M[a, b], M[a, b] / M.max() if M.max() > 0 else 0.0)
          for a, sig in enumerate("xy") for b, idl in enumerate("xy")]
    head = cfg.header_lines("farfield", __version__)
    return {
        "farfield_map.csv": render_csv(head, ("theta_deg", "phi_deg", "intensity_w_per_sr"),
                                       last.to_csv_rows()),
        "farfield_summary.csv": render_csv(
            head, ("grid", "side", "total_power_w", "forward_power_w", "backward_power_w",
                   "forward_fraction", "na", "collected_power_w", "collection_fraction_forward",
                   "collection_fraction_backward", "relative_drift"), rows),
        "polarization_matrix.csv": render_csv(head, ("signal", "idler", "collected_power_w",
                                                     "normalized"), pm),
    }


def cmd_hbt(cfg, args):
    h = cfg["hbt"]
    dets = detectors(cfg)
    s1, s2 = hbt.simulate(h["pair_rate_hz"], h["duration_s"], dets, h["seed"], h["split"],
                          h["chunks"], args.threads)
    bw = h["bin_ps"] * 1e-12
    hist = hbt.correlate((s1, s2), bw, h["window_ns"] * 1e-9)
    sigma = math.hypot(dets[0].jitter_sigma, dets[1].jitter_sigma)
    halfwidth = h["peak_halfwidth_sigma"] * sigma
    res = hbt.car(hist, halfwidth)
    r1, r2 = s1.rate, s2.rate
    width = res.peak_bins * bw
    lo = -(res.peak_bins / 2) * bw
    rcc = hbt.expected_coincidence_rate(h["pair_rate_hz"], dets, h["split"], (lo, lo + width),
                                        singles_rates=(r1, r2))
    side_bins = np.abs(hist.centers) > 2 * halfwidth
    side_mean = hist.counts[side_bins].mean()
    side_expected = r1 * r2 * bw * hist.duration
    summary = [
        ("pair_rate_hz", h["pair_rate_hz"]), ("duration_s", h["duration_s"]),
        ("singles_hz_1", r1), ("singles_hz_2", r2),
        ("peak_halfwidth_ps", halfwidth * 1e12), ("peak_bins", res.peak_bins),
        ("sideband_bins", res.sideband_bins), ("peak_counts", res.peak_counts),
        ("accidentals", res.accidental_mean), ("car", res.car), ("car_stderr", res.car_stderr),
        ("g2_zero_minus_1", res.g2_zero_minus_1),
        ("analytic_car", hbt.analytic_car(rcc, (r1, r2), width) if r1 > 0 and r2 > 0
         else float("nan")),
        ("sideband_mean_per_bin", side_mean), ("sideband_expected_per_bin", side_expected),
    ]
    head = cfg.header_lines("hbt", __version__)
    files = {
        "histogram.csv": render_csv(head, ("tau_s", "counts"), zip(hist.centers, hist.counts)),
        "car.csv": render_csv(head, ("key", "value"), summary),
    }
    if h["write_tags"]:
        # repr keeps full precision (ps resolution over long acquisitions)
        files["tags.csv"] = render_csv(head, ("time_s", "channel"),
                                       ((repr(t), c) for t, c in hbt.tags_to_csv_rows((s1, s2))))
    return files


FIT_COLUMNS = ("input", "kind", "n_points", "amplitude", "theta0_deg", "offset",
               "residual_norm", "theta0_defined", "slope", "intercept", "r_squared",
               "slope_stderr", "intercept_stderr")


def cmd_fit(cfg, args):
    if not args.inputs and not args.table1:
        raise UsageError("fit needs input files and/or --table1")
    head = cfg.header_lines("fit", __version__)
    files = {}
    rows = []
    for name in args.inputs:
        p = Path(name)
        try:
            text = p.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise ConfigError(f"cannot read input {name}: {e}") from None
        try:
            data = fitting.XYSeries.from_csv(text)
        except ValueError as e:
            raise ConfigError(f"{name}: {e}") from None
        if args.kind == "cos2":
            r = fitting.fit_cos2(data)
            rows.append((p.name, "cos2", len(data), r.amplitude, r.theta0_deg, r.offset,
                         r.residual_norm, r.theta0_defined) + (None,) * 5)
        else:
            r = fitting.fit_linear(data)
            rows.append((p.name, "linear", len(data)) + (None,) * 5
                        + (r.slope, r.intercept, r.r_squared, r.slope_stderr, r.intercept_stderr))
    if rows:
        files["fit.csv"] = render_csv(head, FIT_COLUMNS, rows)
    if args.table1:
        trows, text = fitting.table1_report(fitting.default_table1_records(),
                                            cfg["conventions"]["spot_convention"])
        files["table1.csv"] = render_csv(head, fitting.TABLE1_COLUMNS, trows)
        files["table1.txt"] = render_text(head, text)
    return files


COMMANDS = {"rate": cmd_rate, "polarization": cmd_polarization, "farfield": cmd_farfield,
            "hbt": cmd_hbt, "fit": cmd_fit}


# ---- argument handling ---------------------------------------------------------

def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="config file, or any output file carrying a header")
    common.add_argument("--preset", help="bundled preset: cube1 .. cube4")
    common.add_argument("--out", help="output directory (overrides [output] dir)")
    common.add_argument("--seed", type=int, help="master seed (overrides [hbt] seed)")
    common.add_argument("--threads", type=int, default=1, help="worker threads; outputs do not depend on it")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override any config key (repeatable)")

    p = _Parser(prog="lnpair", description="Photon-pair rate, far-field and HBT simulation "
                                           "for nonlinear microcubes.")
    p.add_argument("--version", action="version", version=f"lnpair {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    r = sub.add_parser("rate", parents=[common], help="pair rate size and power sweeps")
    r.add_argument("--powers", help="pump powers in mW, e.g. 30,60")
    r.add_argument("--sizes", help="cube edges in um, e.g. 1:5:0.5")

    q = sub.add_parser("polarization", parents=[common], help="pump polarization sweep and cos^2 fit")
    q.add_argument("--angles", help="angles in degrees, e.g. 0:180:10")

    f = sub.add_parser("farfield", parents=[common], help="far-field SFG map and collection")
    f.add_argument("--side", choices=("air", "glass"), help="half-space the pump enters from")
    f.add_argument("--grid", type=int, action="append", help="cells per edge (repeatable)")
    f.add_argument("--na", help="collection numerical aperture")

    h = sub.add_parser("hbt", parents=[common], help="Monte Carlo HBT histogram and CAR")
    h.add_argument("--pair-rate", help="emitted pair rate in Hz")
    h.add_argument("--duration", help="acquisition time in s")
    h.add_argument("--write-tags", action="store_true", help="also write the time tags")

    t = sub.add_parser("fit", parents=[common], help="cos^2 / linear fits and the bundled efficiency table")
    t.add_argument("inputs", nargs="*", help="CSV files with columns x, y[, sigma]")
    t.add_argument("--kind", choices=("cos2", "linear"), default="cos2")
    t.add_argument("--table1", action="store_true", help="efficiency table for the bundled cubes")
    return p


def overrides_from_args(args) -> dict:
    ov = {}
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        ov[key.strip()] = val
    if args.seed is not None:
        if args.seed < 0:
            raise UsageError("--seed must be nonnegative")
        ov["hbt.seed"] = str(args.seed)
    if args.out is not None:
        ov["output.dir"] = args.out
    flag_map = {"powers": ("optics.powers_mw", "--powers"),
                "sizes": ("geometry.sizes_um", "--sizes"),
                "angles": ("optics.angles_deg", "--angles")}
    for attr, (key, flag) in flag_map.items():
        val = getattr(args, attr, None)
        if val is not None:
            ov[key] = as_list_text(parse_number_list(val, flag))
    if getattr(args, "side", None):
        ov["farfield.side"] = args.side
    if getattr(args, "grid", None):
        ov["farfield.grid"] = " ".join(str(g) for g in args.grid)
    if getattr(args, "na", None) is not None:
        ov["optics.na"] = args.na
    if getattr(args, "pair_rate", None) is not None:
        ov["hbt.pair_rate_hz"] = args.pair_rate
    if getattr(args, "duration", None) is not None:
        ov["hbt.duration_s"] = args.duration
    if getattr(args, "write_tags", False):
        ov["hbt.write_tags"] = "yes"
    return ov


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        cfg = load_config(args.config, args.preset, overrides_from_args(args))
        files = COMMANDS[args.command](cfg, args)
        for path in write_outputs(cfg.output_dir, files):
            print(path)
        return 0
    except ConfigError as e:
        print(f"lnpair: error: {e}", file=sys.stderr)
        return 2
    except (LnPairError, ValueError, ArithmeticError) as e:
        print(f"lnpair: numeric error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"lnpair: cannot write output: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # keep the exit-code contract even on bugs
        print(f"lnpair: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
