"""Run configuration files: parsing, validation, canonical serialization.

Configurations are TOML with four sections. ``[shape]`` describes the
initial island boundary, ``[model]`` the surface-energy density,
``[physical]`` the material parameters, ``[numerics]`` the discretization,
and ``[output]`` where results go. Any key outside the documented schema is
a hard error (catching typos beats silently ignoring them), reported with
the line it appears on.

:func:`serialize` emits one canonical form: fixed section and key order,
shortest round-tripping float literals, every active field written. A file
produced by it parses back to an equal configuration, and re-serializing
that parse reproduces the file byte for byte.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

from .anisotropy import AnisotropyModel, PhysicalParams
from .evolution import SimParams
from .geometry import Curve, resample
from .shapes import rectangle_curve, trapezoid_curve, tube_curve

__all__ = [
    "ConfigError",
    "ShapeSpec",
    "SimConfig",
    "parse_config",
    "parse_string",
    "serialize",
    "write_config",
]


class ConfigError(ValueError):
    """A configuration file failed validation."""


_SHAPE_KEYS = {
    "rectangle": ("width", "height"),
    "trapezoid": ("top", "bottom", "height"),
    "tube": ("length", "height", "cap_radius"),
    "polyline": ("path", "closed"),
}


@dataclass(frozen=True)
class ShapeSpec:
    """Initial-shape description from the ``[shape]`` section.

    ``rectangle`` and ``trapezoid`` are open islands on the substrate,
    ``tube`` the closed capsule, and ``polyline`` reads node coordinates
    (two columns, comments with #) from a file. The tube cap radius
    defaults to half its height, keeping the boundary C^1.
    """

    kind: str
    width: float = 0.0
    height: float = 0.0
    top: float = 0.0
    bottom: float = 0.0
    length: float = 0.0
    cap_radius: float = 0.0
    path: str = ""
    closed: bool = False

    def __post_init__(self):
        if self.kind not in _SHAPE_KEYS:
            raise ConfigError(
                f"unknown shape kind {self.kind!r}; "
                f"expected one of {sorted(_SHAPE_KEYS)}"
            )

    def build(self, n_segments: int) -> Curve:
        if self.kind == "rectangle":
            return rectangle_curve(n_segments, self.width, self.height)
        if self.kind == "trapezoid":
            return trapezoid_curve(n_segments, self.top, self.bottom, self.height)
        if self.kind == "tube":
            cap = self.cap_radius if self.cap_radius > 0 else self.height / 2.0
            if abs(cap - self.height / 2.0) > 1e-12 * self.height:
                raise ConfigError(
                    "tube cap radius must equal half the height; "
                    f"got {cap} for height {self.height}"
                )
            return tube_curve(n_segments, self.length, self.height)
        text = Path(self.path).read_text().replace(",", " ")
        pts = np.loadtxt(io.StringIO(text), comments="#", ndmin=2)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ConfigError(
                f"polyline file {self.path} must hold two columns (x, y)"
            )
        return resample(Curve(pts, closed=self.closed), n_segments)


@dataclass(frozen=True)
class SimConfig:
    """A complete, validated run description."""

    shape: ShapeSpec
    model: AnisotropyModel = field(default_factory=AnisotropyModel)
    sim: SimParams = field(default_factory=SimParams)
    out_dir: str = "out"
    seed: int = 0

    def build_curve(self) -> Curve:
        if self.sim.n_segments is None:
            raise ConfigError("numerics.n_segments is required to build the curve")
        return self.shape.build(self.sim.n_segments)


_SCHEMA = {
    "shape": {"kind", "width", "height", "top", "bottom", "length", "cap_radius",
              "path", "closed"},
    "model": {"beta", "k", "phi", "cusp_angles", "delta"},
    "physical": {"sigma", "eta", "epsilon"},
    "numerics": {"n_segments", "tau", "t_end", "psi_c", "snapshot_stride",
                 "regime", "pinch_tol", "equilibrium_tol", "redistribute_weak"},
    "output": {"directory", "seed"},
}


def _key_line(text: str, section: str, key: str) -> int | None:
    """Best-effort line number of ``key`` inside ``[section]``."""
    in_section = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("["):
            in_section = stripped == f"[{section}]"
            continue
        if in_section and re.match(rf"{re.escape(key)}\s*=", stripped):
            return lineno
    return None


def _fail(text: str, section: str, key: str | None, message: str):
    where = f"[{section}]" if key is None else f"[{section}] {key}"
    line = _key_line(text, section, key) if key else None
    loc = f" (line {line})" if line is not None else ""
    raise ConfigError(f"{where}{loc}: {message}")


def _check_type(text, section, key, value, types, label):
    if isinstance(value, bool) and bool not in (types if isinstance(types, tuple) else (types,)):
        _fail(text, section, key, f"expected {label}, got a boolean")
    if not isinstance(value, types):
        _fail(text, section, key, f"expected {label}, got {value!r}")
    return value


def _as_float(text, section, key, value):
    _check_type(text, section, key, value, (int, float), "a number")
    return float(value)


def parse_string(text: str, base_dir: Path | None = None) -> SimConfig:
    """Parse and validate configuration text (see :func:`parse_config`)."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"not valid configuration syntax: {err}") from err

    for section, body in raw.items():
        if section not in _SCHEMA:
            _fail(text, section, None, "unknown section")
        if not isinstance(body, dict):
            _fail(text, section, None, "expected a [section], not a bare value")
        for key in body:
            if key not in _SCHEMA[section]:
                _fail(text, section, key, "unknown key")

    shape_raw = raw.get("shape")
    if not shape_raw:
        raise ConfigError("missing required [shape] section")
    kind = shape_raw.get("kind")
    if kind is None:
        _fail(text, "shape", None, "missing required key 'kind'")
    _check_type(text, "shape", "kind", kind, str, "a string")
    if kind not in _SHAPE_KEYS:
        _fail(text, "shape", "kind",
              f"unknown shape kind {kind!r}; expected one of {sorted(_SHAPE_KEYS)}")
    allowed = set(_SHAPE_KEYS[kind]) | {"kind"}
    for key in shape_raw:
        if key not in allowed:
            _fail(text, "shape", key, f"key does not belong to shape kind {kind!r}")
    shape_kwargs = {"kind": kind}
    for key in _SHAPE_KEYS[kind]:
        if key in shape_raw:
            value = shape_raw[key]
            if key == "path":
                _check_type(text, "shape", key, value, str, "a string")
                resolved = Path(value)
                if base_dir is not None and not resolved.is_absolute():
                    resolved = base_dir / resolved
                if not resolved.exists():
                    _fail(text, "shape", key, f"file not found: {resolved}")
                shape_kwargs[key] = str(resolved)
            elif key == "closed":
                _check_type(text, "shape", key, value, bool, "a boolean")
                shape_kwargs[key] = value
            else:
                shape_kwargs[key] = _as_float(text, "shape", key, value)
        elif key not in ("cap_radius", "closed"):
            _fail(text, "shape", None,
                  f"shape kind {kind!r} requires key '{key}'")

    model_raw = raw.get("model", {})
    model_kwargs = {}
    if "beta" in model_raw:
        model_kwargs["beta"] = _as_float(text, "model", "beta", model_raw["beta"])
    if "k" in model_raw:
        k = model_raw["k"]
        _check_type(text, "model", "k", k, int, "an integer")
        model_kwargs["k"] = k
    if "phi" in model_raw:
        model_kwargs["phi"] = _as_float(text, "model", "phi", model_raw["phi"])
    if "cusp_angles" in model_raw:
        angles = model_raw["cusp_angles"]
        _check_type(text, "model", "cusp_angles", angles, list, "a list of numbers")
        model_kwargs["cusp_angles"] = tuple(
            _as_float(text, "model", "cusp_angles", a) for a in angles
        )
    if "delta" in model_raw:
        model_kwargs["delta"] = _as_float(text, "model", "delta", model_raw["delta"])
    try:
        model = AnisotropyModel(**model_kwargs)
    except ValueError as err:
        _fail(text, "model", None, str(err))

    phys_raw = raw.get("physical", {})
    phys_kwargs = {}
    for key in ("sigma", "eta", "epsilon"):
        if key in phys_raw:
            phys_kwargs[key] = _as_float(text, "physical", key, phys_raw[key])
    try:
        physical = PhysicalParams(**phys_kwargs)
    except ValueError as err:
        _fail(text, "physical", None, str(err))

    num_raw = raw.get("numerics", {})
    sim_kwargs = {"physical": physical}
    for key in ("tau", "t_end", "psi_c", "pinch_tol", "equilibrium_tol"):
        if key in num_raw:
            sim_kwargs[key] = _as_float(text, "numerics", key, num_raw[key])
    for key in ("n_segments", "snapshot_stride"):
        if key in num_raw:
            value = num_raw[key]
            _check_type(text, "numerics", key, value, int, "an integer")
            sim_kwargs[key] = value
    if "redistribute_weak" in num_raw:
        value = num_raw["redistribute_weak"]
        _check_type(text, "numerics", "redistribute_weak", value, bool, "a boolean")
        sim_kwargs["redistribute_weak"] = value
    if "regime" in num_raw:
        regime = num_raw["regime"]
        _check_type(text, "numerics", "regime", regime, str, "a string")
        if regime not in ("auto", "weak", "strong"):
            _fail(text, "numerics", "regime",
                  f"expected 'auto', 'weak' or 'strong', got {regime!r}")
        sim_kwargs["regime"] = None if regime == "auto" else regime
    try:
        sim = SimParams(**sim_kwargs)
    except ValueError as err:
        _fail(text, "numerics", None, str(err))

    out_raw = raw.get("output", {})
    out_dir = out_raw.get("directory", "out")
    _check_type(text, "output", "directory", out_dir, str, "a string")
    seed = out_raw.get("seed", 0)
    _check_type(text, "output", "seed", seed, int, "an integer")

    try:
        return SimConfig(
            shape=ShapeSpec(**shape_kwargs),
            model=model,
            sim=sim,
            out_dir=out_dir,
            seed=seed,
        )
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(str(err)) from err


def parse_config(path: str | Path) -> SimConfig:
    """Read, parse and validate a configuration file.

    Unknown sections or keys, type errors and values the solver would
    reject are all reported as :class:`ConfigError` with the offending
    line where one can be located. Relative polyline paths resolve
    against the config file's directory.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        return parse_string(path.read_text(), base_dir=path.parent)
    except ConfigError as err:
        raise ConfigError(f"{path}: {err}") from None


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if value != value or value in (math.inf, -math.inf):
            raise ConfigError(f"cannot serialize non-finite number {value}")
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (tuple, list)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize {value!r}")


def serialize(config: SimConfig) -> str:
    """Canonical text form of a configuration.

    Deterministic section and key order; parsing the output reproduces an
    equal SimConfig, and serializing that parse reproduces the text.
    """
    lines = ["[shape]", f"kind = {_fmt(config.shape.kind)}"]
    for key in _SHAPE_KEYS[config.shape.kind]:
        lines.append(f"{key} = {_fmt(getattr(config.shape, key))}")
    m = config.model
    lines += [
        "",
        "[model]",
        f"beta = {_fmt(m.beta)}",
        f"k = {_fmt(int(m.k))}",
        f"phi = {_fmt(m.phi)}",
        f"cusp_angles = {_fmt(m.cusp_angles)}",
        f"delta = {_fmt(m.delta)}",
    ]
    p = config.sim.physical
    lines += [
        "",
        "[physical]",
        f"sigma = {_fmt(p.sigma)}",
        f"eta = {_fmt(p.eta)}",
        f"epsilon = {_fmt(p.epsilon)}",
    ]
    s = config.sim
    lines += ["", "[numerics]"]
    if s.n_segments is not None:
        lines.append(f"n_segments = {_fmt(s.n_segments)}")
    lines += [
        f"tau = {_fmt(s.tau)}",
        f"t_end = {_fmt(s.t_end)}",
        f"psi_c = {_fmt(s.psi_c)}",
        f"snapshot_stride = {_fmt(s.snapshot_stride)}",
        f"regime = {_fmt(s.regime if s.regime is not None else 'auto')}",
    ]
    if s.pinch_tol is not None:
        lines.append(f"pinch_tol = {_fmt(s.pinch_tol)}")
    lines.append(f"equilibrium_tol = {_fmt(s.equilibrium_tol)}")
    if s.redistribute_weak:
        lines.append("redistribute_weak = true")
    lines += [
        "",
        "[output]",
        f"directory = {_fmt(config.out_dir)}",
        f"seed = {_fmt(config.seed)}",
        "",
    ]
    return "\n".join(lines)


def write_config(config: SimConfig, path: str | Path) -> None:
    Path(path).write_text(serialize(config))
