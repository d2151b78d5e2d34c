"""Run configuration: INI grammar, validation, header round trip.

Grammar (see data/default.cfg for every key):

* ``[section]`` headers, ``key = value`` lines, ``#`` comments (full line,
  or inline after whitespace).
* Lists are comma and/or whitespace separated; a token ``start:stop:step``
  expands like ``numpy.arange`` (stop excluded).
* Multi-line values continue on indented lines (used by ``d_matrix``).

A user file only needs the keys it changes; it is layered over the bundled
defaults, then command-line overrides are applied.  Unknown sections or keys
are errors.  The resolved configuration can be rendered as text
(:meth:`RunConfig.to_text`) and embedded in output headers; loading such an
output file as a config recovers it exactly.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .tensor import ContractedDMatrix

HEADER_BEGIN = "# --- resolved config ---"
HEADER_END = "# --- end config ---"
PRESETS = ("cube1", "cube2", "cube3", "cube4")
NOT_ECHOED = {("output", "dir")}


# kind strings: pos / nonneg / real / frac / int+ / int0 / ints / list+ / list0 /
# angles / bool / window / matrix / str / choice:a|b
SCHEMA = {
    "crystal": {"preset": "choice:lithium_niobate", "tilt": "choice:body|in_plane",
                "projection_deg": "real", "d_matrix": "matrix"},
    "sellmeier": {"window_um": "window", "extraordinary_B": "list+",
                  "extraordinary_C": "list+", "ordinary_B": "list+", "ordinary_C": "list+"},
    "optics": {"pump_nm": "pos", "signal_nm": "pos", "idler_nm": "pos",
               "delta_lambda_nm": "pos", "power_mw": "nonneg", "powers_mw": "list0",
               "spot_um": "pos", "na": "pos", "pump_angle_deg": "real",
               "angles_deg": "angles"},
    "geometry": {"edge_um": "pos", "sizes_um": "list+", "n_below": "pos", "n_above": "pos"},
    "farfield": {"edge_um": "pos", "grid": "ints", "n_theta": "int+", "n_phi": "int+",
                 "side": "choice:air|glass"},
    "hbt": {"pair_rate_hz": "nonneg", "duration_s": "pos", "split": "frac",
            "efficiency1": "frac", "efficiency2": "frac", "dark_hz1": "nonneg",
            "dark_hz2": "nonneg", "background_hz1": "nonneg", "background_hz2": "nonneg",
            "jitter_ps1": "nonneg", "jitter_ps2": "nonneg", "dead_time_ns1": "nonneg",
            "dead_time_ns2": "nonneg", "bin_ps": "pos", "window_ns": "pos",
            "peak_halfwidth_sigma": "pos", "chunks": "int+", "write_tags": "bool",
            "seed": "int0"},
    "measured": {"rate_hz": "pos", "transmissions": "list+"},
    "conventions": {"degenerate_convention": "choice:paper|physical",
                    "spot_convention": "choice:hard_disk|gaussian_1e2|gaussian_fwhm",
                    "area_convention": "choice:spot|facet|min",
                    "loss_mode": "choice:per_pair|per_photon"},
    "output": {"dir": "str"},
}

_BOOL = {"yes": True, "true": True, "on": True, "1": True,
         "no": False, "false": False, "off": False, "0": False}


def _parser():
    p = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                  strict=True, empty_lines_in_values=False,
                                  default_section="__defaults__")
    p.optionxform = str
    return p


def _line_index(text: str):
    """(section, key) -> 1-based line number of its definition."""
    where = {}
    section = None
    for i, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            continue
        m = re.match(r"([^\s#;=:][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            where[(section, m.group(1).strip())] = i
    return where


def extract_header_config(text: str) -> str | None:
    """Config block embedded in an output file header, or None."""
    lines = text.splitlines()
    try:
        a = lines.index(HEADER_BEGIN)
        b = lines.index(HEADER_END, a)
    except ValueError:
        return None
    out = []
    for ln in lines[a + 1:b]:
        if ln.startswith("# "):
            out.append(ln[2:])
        elif ln == "#":
            out.append("")
        else:
            raise ConfigError("corrupt embedded config header", line=lines.index(ln) + 1)
    return "\n".join(out) + "\n"


def parse_list(text: str, field_name: str = None) -> list[float]:
    vals = []
    for tok in re.split(r"[,\s]+", text.strip()):
        if not tok:
            continue
        if ":" in tok:
            parts = tok.split(":")
            if len(parts) != 3:
                raise ConfigError(f"range {tok!r} must be start:stop:step", field=field_name)
            a, b, s = (_float(p, field_name) for p in parts)
            if s == 0 or (b - a) / s < 0:
                raise ConfigError(f"range {tok!r} has a bad step", field=field_name)
            n = int(math.ceil((b - a) / s - 1e-9))
            if n > 10**6:
                raise ConfigError(f"range {tok!r} is too long", field=field_name)
            vals.extend(float(a + k * s) for k in range(n))
        else:
            vals.append(_float(tok, field_name))
    return vals


def _float(tok: str, field_name=None) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ConfigError(f"not a number: {tok!r}", field=field_name) from None
    if not math.isfinite(v):
        raise ConfigError(f"value must be finite: {tok!r}", field=field_name)
    return v


def _convert(kind: str, raw: str, name: str):
    raw = raw.strip()
    if kind == "str":
        if not raw:
            raise ConfigError("must not be empty", field=name)
        return raw
    if kind.startswith("choice:"):
        choices = kind[7:].split("|")
        if raw not in choices:
            raise ConfigError(f"must be one of {', '.join(choices)}; got {raw!r}", field=name)
        return raw
    if kind == "bool":
        if raw.lower() not in _BOOL:
            raise ConfigError(f"expected yes/no, got {raw!r}", field=name)
        return _BOOL[raw.lower()]
    if kind in ("int+", "int0"):
        try:
            v = int(raw)
        except ValueError:
            raise ConfigError(f"expected an integer, got {raw!r}", field=name) from None
        if v < (1 if kind == "int+" else 0):
            raise ConfigError(f"out of range: {v}", field=name)
        return v
    if kind == "ints":
        vals = parse_list(raw, name)
        if not vals or any(v != int(v) or v < 1 for v in vals):
            raise ConfigError("expected one or more positive integers", field=name)
        return [int(v) for v in vals]
    if kind == "matrix":
        if not raw:
            return None
        try:
            return ContractedDMatrix.from_text(raw)
        except Exception as e:
            raise ConfigError(f"d_matrix must be 3 rows of 6 numbers ({e})", field=name) from None
    if kind in ("list+", "list0", "angles", "window"):
        vals = parse_list(raw, name)
        if not vals:
            raise ConfigError("list is empty", field=name)
        if kind == "list+" and min(vals) <= 0:
            raise ConfigError("values must be positive", field=name)
        if kind == "list0" and min(vals) < 0:
            raise ConfigError("values must be nonnegative", field=name)
        if kind == "window" and (len(vals) != 2 or not 0 < vals[0] < vals[1]):
            raise ConfigError("window needs two increasing positive values", field=name)
        return vals
    v = _float(raw, name)
    if kind == "pos" and v <= 0:
        raise ConfigError(f"must be positive, got {v:g}", field=name)
    if kind == "nonneg" and v < 0:
        raise ConfigError(f"must be nonnegative, got {v:g}", field=name)
    if kind == "frac" and not 0 <= v <= 1:
        raise ConfigError(f"must lie in [0, 1], got {v:g}", field=name)
    return v


def _read_layer(text: str, source: str, into: dict):
    embedded = extract_header_config(text)
    if embedded is not None:
        text = embedded
    lines = _line_index(text)
    p = _parser()
    try:
        p.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: {e.message.splitlines()[0] if hasattr(e, 'message') else e}",
                          line=getattr(e, "lineno", None)) from None
    for sec in p.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{source}: unknown section", field=sec,
                              line=_section_line(text, sec))
        for key, val in p.items(sec, raw=True):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{source}: unknown key", field=f"{sec}.{key}",
                                  line=lines.get((sec, key)))
            into[sec][key] = (val.strip(), source, lines.get((sec, key)))


def _section_line(text, sec):
    for i, line in enumerate(text.splitlines(), 1):
        if line.strip() == f"[{sec}]":
            return i
    return None


def default_text() -> str:
    return resources.files("lnpair").joinpath("data/default.cfg").read_text()


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("lnpair").joinpath(f"data/{name}.cfg").read_text()


@dataclass(frozen=True)
class RunConfig:
    """Resolved, validated configuration.

    ``raw`` keeps the canonical string value of every key (schema order);
    ``values`` the typed value.  Access typed values as ``cfg["optics"]["na"]``.
    """

    raw: dict
    values: dict = field(repr=False)

    def __getitem__(self, section):
        return self.values[section]

    @property
    def output_dir(self) -> Path:
        return Path(self.values["output"]["dir"])

    @property
    def seed(self) -> int:
        return self.values["hbt"]["seed"]

    def to_text(self) -> str:
        """Canonical INI text of the resolved config (output dir omitted)."""
        out = []
        for sec, keys in SCHEMA.items():
            lines = [f"{k} = {_render(self.raw[sec][k])}".rstrip() for k in keys
                     if (sec, k) not in NOT_ECHOED]
            if lines:
                out.append(f"[{sec}]")
                out.extend(lines)
        return "\n".join(out) + "\n"

    def header_lines(self, command: str, version: str) -> list[str]:
        body = [f"# lnpair {version}", f"# command: {command}", f"# seed: {self.seed}",
                HEADER_BEGIN]
        body += [f"# {ln}" if ln else "#" for ln in self.to_text().splitlines()]
        body.append(HEADER_END)
        return body

    def replace(self, overrides: dict) -> "RunConfig":
        """New config with ``{"section.key": value}`` applied and revalidated."""
        layers = {s: {k: (v, "resolved", None) for k, v in d.items()} for s, d in self.raw.items()}
        _apply_overrides(layers, overrides)
        return _validate(layers)


def _render(value: str) -> str:
    if "\n" in value:
        return "\n" + "\n".join("    " + ln.strip() for ln in value.splitlines() if ln.strip())
    return value


def _apply_overrides(layers, overrides):
    for name, val in (overrides or {}).items():
        sec, _, key = name.partition(".")
        if sec not in SCHEMA or key not in SCHEMA[sec]:
            raise ConfigError("unknown override", field=name)
        layers[sec][key] = (str(val).strip(), "command line", None)


def load_config(path=None, preset: str | None = None, overrides: dict | None = None,
                text: str | None = None) -> RunConfig:
    """Defaults, then a bundled preset, then a file (or ``text``), then overrides."""
    layers = {sec: {} for sec in SCHEMA}
    _read_layer(default_text(), "default.cfg", layers)
    if preset is not None:
        _read_layer(preset_text(preset), f"{preset}.cfg", layers)
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {p}") from None
        except (OSError, UnicodeDecodeError) as e:
            raise ConfigError(f"cannot read config {p}: {e}") from None
        _read_layer(text, p.name, layers)
    elif text is not None:
        _read_layer(text, "<text>", layers)
    _apply_overrides(layers, overrides)
    return _validate(layers)


def _validate(layers) -> RunConfig:
    raw, values = {}, {}
    for sec, keys in SCHEMA.items():
        raw[sec], values[sec] = {}, {}
        for key, kind in keys.items():
            if key not in layers[sec]:
                raise ConfigError("missing key", field=f"{sec}.{key}")
            val, source, line = layers[sec][key]
            try:
                values[sec][key] = _convert(kind, val, f"{sec}.{key}")
            except ConfigError as e:
                raise ConfigError(f"{source}: {str(e).split('] ', 1)[-1]}",
                                  line=line, field=f"{sec}.{key}") from None
            raw[sec][key] = "\n".join(ln.strip() for ln in val.splitlines() if ln.strip()) \
                if kind == "matrix" else val
    cfg = RunConfig(raw, values)
    _cross_check(cfg, layers)
    return cfg


def _cross_check(cfg: RunConfig, layers):
    def fail(msg, sec, key):
        _, source, line = layers[sec][key]
        raise ConfigError(f"{source}: {msg}", line=line, field=f"{sec}.{key}")

    o = cfg["optics"]
    lp, ls, li = o["pump_nm"], o["signal_nm"], o["idler_nm"]
    if abs(1 / lp - 1 / ls - 1 / li) > 1e-6 / lp:
        fail(f"energy conservation 1/pump = 1/signal + 1/idler fails "
             f"({lp:g}, {ls:g}, {li:g} nm)", "optics", "signal_nm")
    if abs(ls - li) > 1e-9 * ls:
        fail("the rate pipeline is degenerate: signal_nm must equal idler_nm",
             "optics", "idler_nm")
    if o["na"] > 1:
        fail("numerical aperture must lie in (0, 1]", "optics", "na")
    lo, hi = cfg["sellmeier"]["window_um"]
    for key, lam in (("pump_nm", lp), ("signal_nm", ls)):
        if not lo <= lam * 1e-3 <= hi:
            fail(f"{lam:g} nm is outside the Sellmeier window {lo:g}-{hi:g} um",
                 "optics", key)
    s = cfg["sellmeier"]
    for br in ("extraordinary", "ordinary"):
        if len(s[f"{br}_B"]) != len(s[f"{br}_C"]):
            fail("B and C lists must have equal length", "sellmeier", f"{br}_C")
    f = cfg["farfield"]
    if min(f["grid"]) < 8:
        fail("dipole grid must be at least 8 per edge", "farfield", "grid")
    if f["n_theta"] % 2:
        fail("n_theta must be even", "farfield", "n_theta")
    h = cfg["hbt"]
    if h["window_ns"] * 1e3 < h["bin_ps"]:
        fail("window must be at least one bin", "hbt", "window_ns")
    if h["window_ns"] * 1e3 / h["bin_ps"] > 10**6:
        fail("too many histogram bins", "hbt", "window_ns")
    if h["efficiency1"] == 0 or h["efficiency2"] == 0:
        fail("detector efficiency must be positive", "hbt", "efficiency1")
    if max(cfg["measured"]["transmissions"]) > 1:
        fail("transmissions must lie in (0, 1]", "measured", "transmissions")
    return cfg


def parse_number_list(text: str, flag: str) -> list[float]:
    """Flag value like ``30,60`` or ``0:180:10``; empty is an error."""
    vals = parse_list(text, flag)
    if not vals:
        raise ConfigError("empty list", field=flag)
    return vals


def as_list_text(vals) -> str:
    return " ".join(format(v, ".17g") for v in np.asarray(vals, dtype=float))
