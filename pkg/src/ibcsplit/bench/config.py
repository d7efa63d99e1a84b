"""Experiment configuration: YAML files validated into `ExperimentSpec`.

Top-level keys (all optional except ``initial.preset``)::

    name: ex5_1                  # output file prefix, defaults to the preset id
    dimension: 1                 # must match the preset
    grid: {n_interior: 499}      # int in 1D, [nx, ny] in 2D
    faces:                       # per-face overrides of the preset
      - {side: left, alpha: 1, beta: 0, data: from_trace}
      - {side: right, alpha: 1, beta: 0, data: 3.0}
    reaction: {kind: square, params: []}
    initial: {preset: ex5_1, params: {}}
    t_end: 0.5
    taus: [0.1, 0.05, 0.025]     # strictly decreasing
    schemes: [classic, ibc]
    reference: {abs_tol: 1.0e-9, rel_tol: 1.0e-9, max_steps: 5000000}
    output: {format: csv, dir: results}

Face ``data`` is ``from_trace`` (default), ``literal`` (the value printed with
the preset), a number, or a list of per-node samples for a 2D face.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import yaml

from ..discretize import SIDES_1D, SIDES_2D
from ..flows import ReactionTerm
from ..integrators import ReferenceConfig, SchemeKind
from .presets import Preset, get_preset


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FaceSpec:
    alpha: float
    beta: float
    data: Union[str, float, tuple] = "from_trace"

    @property
    def mode(self) -> str:
        return self.data if isinstance(self.data, str) else "explicit"


@dataclass(frozen=True)
class ExperimentSpec:
    preset: str
    dimension: int
    n_interior: tuple[int, ...]
    faces: Mapping[str, FaceSpec]
    reaction: ReactionTerm
    t_end: float
    taus: tuple[float, ...]
    schemes: tuple[SchemeKind, ...]
    reference: ReferenceConfig = ReferenceConfig()
    name: str = ""
    preset_params: Mapping[str, Any] = field(default_factory=dict)
    output_format: str = "csv"
    output_dir: Optional[str] = None

    def __post_init__(self):
        if not self.name:
            object.__setattr__(self, "name", self.preset)
        validate_spec(self)

    def with_overrides(self, **kw) -> "ExperimentSpec":
        return replace(self, **kw)


_TOP_KEYS = {"name", "dimension", "grid", "faces", "reaction", "initial", "t_end",
             "taus", "schemes", "reference", "output"}
_DATA_MODES = ("from_trace", "literal")


def validate_spec(spec: ExperimentSpec) -> None:
    preset = get_preset(spec.preset)
    if spec.preset_params:
        raise ConfigError(f"initial.params: preset {spec.preset!r} takes no parameters")
    if spec.dimension != preset.dimension:
        raise ConfigError(f"dimension: preset {spec.preset!r} is {preset.dimension}D, got {spec.dimension}")
    if len(spec.n_interior) != spec.dimension or any(n < 2 for n in spec.n_interior):
        raise ConfigError(f"grid.n_interior: need {spec.dimension} value(s) >= 2, got {spec.n_interior}")
    sides = SIDES_1D if spec.dimension == 1 else SIDES_2D
    if set(spec.faces) != set(sides):
        raise ConfigError(f"faces: expected sides {sides}, got {sorted(spec.faces)}")
    for side, fs in spec.faces.items():
        if fs.alpha == 0.0 and fs.beta == 0.0:
            raise ConfigError(f"faces.{side}: alpha and beta cannot both be zero")
        if isinstance(fs.data, str) and fs.data not in _DATA_MODES:
            raise ConfigError(f"faces.{side}.data: unknown mode {fs.data!r}")
        if fs.data == "literal" and side not in preset.literal_data:
            raise ConfigError(f"faces.{side}.data: preset {spec.preset!r} has no literal value here")
    if not spec.t_end > 0:
        raise ConfigError("t_end: must be positive")
    if not spec.taus or any(not t > 0 for t in spec.taus):
        raise ConfigError("taus: need at least one positive step size")
    if any(b >= a for a, b in zip(spec.taus, spec.taus[1:])):
        raise ConfigError("taus: must be strictly decreasing")
    if spec.output_format not in ("csv", "json"):
        raise ConfigError(f"output.format: expected csv or json, got {spec.output_format!r}")


def _check_keys(obj, allowed, where):
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{where}: expected a mapping, got {type(obj).__name__}")
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")


def _float(value, where) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {value!r}") from None


def _face_data(raw, where):
    if raw is None:
        return "from_trace"
    if isinstance(raw, str):
        if raw in _DATA_MODES:
            return raw
        return _float(raw, where)
    if isinstance(raw, (list, tuple)):
        return tuple(_float(v, where) for v in raw)
    return _float(raw, where)


def spec_from_dict(cfg: Mapping[str, Any]) -> ExperimentSpec:
    """Validate a parsed configuration mapping, filling defaults from the preset."""
    _check_keys(cfg, _TOP_KEYS, "config")
    initial = cfg.get("initial")
    if initial is None:
        raise ConfigError("initial.preset: required")
    _check_keys(initial, {"preset", "params"}, "initial")
    if "preset" not in initial:
        raise ConfigError("initial.preset: required")
    try:
        preset: Preset = get_preset(str(initial["preset"]))
    except KeyError as exc:
        raise ConfigError(f"initial.preset: {exc.args[0]}") from None
    params = initial.get("params") or {}

    dimension = int(cfg.get("dimension", preset.dimension))

    n_interior = preset.n_interior
    if "grid" in cfg:
        _check_keys(cfg["grid"], {"n_interior"}, "grid")
        raw = cfg["grid"].get("n_interior", list(n_interior))
        raw = [raw] if isinstance(raw, (int, float, str)) else list(raw)
        try:
            n_interior = tuple(int(v) for v in raw)
        except (TypeError, ValueError):
            raise ConfigError(f"grid.n_interior: expected integer(s), got {raw!r}") from None

    faces = {side: FaceSpec(a, b) for side, (a, b) in preset.faces.items()}
    for i, entry in enumerate(cfg.get("faces") or []):
        where = f"faces[{i}]"
        _check_keys(entry, {"side", "alpha", "beta", "data"}, where)
        side = entry.get("side")
        if side not in faces:
            raise ConfigError(f"{where}.side: unknown side {side!r}")
        base = faces[side]
        faces[side] = FaceSpec(_float(entry.get("alpha", base.alpha), f"{where}.alpha"),
                               _float(entry.get("beta", base.beta), f"{where}.beta"),
                               _face_data(entry.get("data"), f"{where}.data"))

    reaction = ReactionTerm()
    if "reaction" in cfg:
        _check_keys(cfg["reaction"], {"kind", "params"}, "reaction")
        try:
            reaction = ReactionTerm(str(cfg["reaction"].get("kind", "square")),
                                    tuple(cfg["reaction"].get("params") or ()))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"reaction: {exc}") from None

    t_end = _float(cfg.get("t_end", preset.t_end), "t_end")
    taus = cfg.get("taus")
    taus = preset.default_taus if taus is None else tuple(_float(t, "taus") for t in taus)

    try:
        schemes = tuple(SchemeKind.parse(s) for s in cfg.get("schemes", ["classic", "ibc"]))
    except ValueError as exc:
        raise ConfigError(f"schemes: {exc}") from None

    reference = ReferenceConfig()
    if "reference" in cfg:
        ref = cfg["reference"]
        _check_keys(ref, {"abs_tol", "rel_tol", "max_steps"}, "reference")
        try:
            reference = ReferenceConfig(_float(ref.get("abs_tol", 1e-9), "reference.abs_tol"),
                                        _float(ref.get("rel_tol", 1e-9), "reference.rel_tol"),
                                        int(ref.get("max_steps", reference.max_steps)))
        except ValueError as exc:
            raise ConfigError(f"reference: {exc}") from None

    fmt, out_dir = "csv", None
    if "output" in cfg:
        _check_keys(cfg["output"], {"format", "dir"}, "output")
        fmt = str(cfg["output"].get("format", fmt))
        out_dir = cfg["output"].get("dir")

    return ExperimentSpec(preset=preset.id, dimension=dimension, n_interior=n_interior,
                          faces=faces, reaction=reaction, t_end=t_end, taus=taus,
                          schemes=schemes, reference=reference,
                          name=str(cfg.get("name", "") or ""), preset_params=dict(params),
                          output_format=fmt, output_dir=out_dir)


def load_config(path) -> ExperimentSpec:
    """Read and validate a YAML experiment file."""
    path = Path(path)
    text = path.read_text()
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        raise ConfigError(f"{path}: parse error{loc}: {getattr(exc, 'problem', exc)}") from None
    if cfg is None:
        cfg = {}
    return spec_from_dict(cfg)


def preset_spec(preset_id: str, **overrides) -> ExperimentSpec:
    """Experiment for a built-in preset with its default grid, sweep and schemes."""
    spec = spec_from_dict({"initial": {"preset": preset_id}})
    return spec.with_overrides(**overrides) if overrides else spec
