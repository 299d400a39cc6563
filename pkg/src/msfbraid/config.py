"""Run configuration: loading, presets, schema validation and resolution.

A configuration is a nested mapping read from a YAML or JSON file.  An
optional ``preset`` key names one of :data:`PRESETS`; the file's own keys are
merged over the preset, which is merged over :data:`DEFAULTS`.  Every key is
checked against ``schemas/config.schema.json`` before anything is built.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import yaml

from .errors import ConfigError
from .lattice import Boundary, CouplingParams, LatticeGeometry, NoiseConfig
from .protocol import DefectPath
from .protocol.compiler import DEFAULT_TAU_SITE, default_substeps

DEFAULTS = {
    "lattice": {"Lx": 18, "Ly": 10, "boundary": ["open", "open"]},
    "couplings": {"J": 1.0, "Delta": 1.0},
    "potentials": {"mu0": 10.0, "mud": 0.1},
    "defects": {},
    "protocol": {"builtin": "identity", "repeat": 1},
    "noise": {"alpha": 1.0, "V_T": 0.0, "lambda_R": 0.0},
    "engine": {
        "tau_site": DEFAULT_TAU_SITE,
        "substeps": None,
        "stride": None,
        "gap_stride": None,
        "threshold": 1e-6,
        "method": "vector",
        "shape": "smoothstep",
    },
    "track_sites": None,
    "sector": 1,
    "seed": 0,
    "chern": {"mu": [-3.0, -1.0, -0.1, 0.1, 1.0, 3.0], "nk": [24]},
}

_TWO_DEFECT_DELTA = 0.91

PRESETS = {
    # 18x10 lattice with one 14-site defect
    "line": {
        "defects": {"d1": {"from": [2, 5], "to": [15, 5]}},
        "track_sites": [[2, 5], [15, 5]],
    },
    # single-defect exchange through a T-junction below the defect
    "exchange": {
        "defects": {"d1": {"from": [2, 7], "to": [15, 7]}},
        "protocol": {
            "builtin": "exchange_same_defect",
            "defect": "d1",
            "junction_column": 8,
            "arm_direction": "down",
            "arm_length": 6,
        },
        "track_sites": [[2, 7], [15, 7]],
    },
    # exchange of the facing ends of two parallel defects
    "two_defects": {
        "lattice": {"Lx": 12, "Ly": 28},
        "couplings": {"J": 1.0, "Delta": _TWO_DEFECT_DELTA},
        "potentials": {"mu0": 10 * _TWO_DEFECT_DELTA, "mud": 0.1 * _TWO_DEFECT_DELTA},
        "defects": {"d1": {"from": [2, 9], "to": [9, 9]}, "d2": {"from": [9, 18], "to": [2, 18]}},
        "protocol": {
            "builtin": "exchange_two_defects",
            "d1": "d1",
            "d2": "d2",
            "junction_path": {"from": [9, 10], "to": [9, 17]},
            "junction": [9, 13],
            "arm_direction": "left",
            "arm_length": 5,
        },
        "engine": {"tau_site": 80.0},
        "track_sites": [[2, 9], [9, 9], [9, 18], [2, 18]],
    },
    # exchange of the two ends of the lower defect of the two-defect layout
    "two_defects_sigma12": {
        "preset": "two_defects",
        "protocol": {
            "builtin": "exchange_same_defect",
            "defect": "d1",
            "junction_column": 5,
            "arm_direction": "down",
            "arm_length": 6,
        },
    },
    "fuse": {
        "preset": "line",
        "protocol": {"builtin": "fuse_to_site", "defect": "d1", "target_end": "center"},
    },
    # single-defect exchange on the larger lattice used for the imperfection study
    "noise": {
        "lattice": {"Lx": 20, "Ly": 12},
        "defects": {"d1": {"from": [3, 8], "to": [16, 8]}},
        "protocol": {
            "builtin": "exchange_same_defect",
            "defect": "d1",
            "junction_column": 9,
            "arm_direction": "down",
            "arm_length": 6,
        },
        "noise": {"alpha": 0.9, "V_T": 0.5, "lambda_R": 0.05},
        # crosstalk lifts the end-mode splitting to ~1e-3, far below the ~0.3 gap
        "engine": {"threshold": 1e-2},
        "track_sites": [[3, 8], [16, 8]],
        "sweep": {"axis": "V_T", "values": [0.1, 0.5, 1.0]},
    },
    "trivial": {"potentials": {"mu0": 10.0, "mud": 10.0}, "defects": {}},
}


def _schema():
    text = resources.files("msfbraid").joinpath("schemas/config.schema.json").read_text()
    return json.loads(text)


def deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "defects":
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _expand_preset(raw: dict, seen=()) -> dict:
    name = raw.get("preset")
    if name is None:
        return dict(raw)
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    if name in seen:
        raise ConfigError(f"preset cycle through {name!r}")
    base = _expand_preset(PRESETS[name], seen + (name,))
    rest = {k: v for k, v in raw.items() if k != "preset"}
    return deep_merge(base, rest)


def validate(raw: dict) -> None:
    try:
        jsonschema.validate(raw, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None


def load_config_file(path) -> dict:
    """Read a YAML or JSON configuration file into a mapping."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {p}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {p} must be a mapping at top level")
    proto = data.get("protocol")
    if isinstance(proto, dict) and "file" in proto:
        src = (p.parent / proto["file"]).resolve()
        try:
            proto["source"] = src.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read protocol file {src}: {exc.strerror}") from None
        del proto["file"]
    return data


@dataclass(frozen=True)
class EngineParams:
    tau_site: float = DEFAULT_TAU_SITE
    substeps: Optional[int] = None
    stride: Optional[int] = None
    gap_stride: Optional[int] = None
    threshold: float = 1e-6
    method: str = "vector"
    shape: str = "smoothstep"

    @property
    def resolved_substeps(self) -> int:
        return default_substeps(self.tau_site) if self.substeps is None else int(self.substeps)


@dataclass
class RunConfig:
    """Validated, fully resolved configuration; ``raw`` is the merged mapping."""

    geom: LatticeGeometry
    cpl: CouplingParams
    mu0: float
    mud: float
    defects: dict
    protocol: dict
    noise: NoiseConfig
    engine: EngineParams
    track_sites: Optional[list]
    sector: int
    seed: int
    chern: dict
    sweep: Optional[dict]
    raw: dict = field(repr=False, default_factory=dict)

    def with_overrides(self, **changes) -> "RunConfig":
        """Re-resolve with dotted-path overrides, e.g. ``{"noise.V_T": 0.5}``."""
        raw = copy.deepcopy(self.raw)
        for key, val in changes.items():
            node = raw
            parts = key.split(".")
            for part in parts[:-1]:
                node = node.setdefault(part, {})
            node[parts[-1]] = val
        return resolve(raw)


def _defect(name, entry):
    if "sites" in entry:
        return DefectPath(name, tuple(tuple(s) for s in entry["sites"]))
    return DefectPath.segment(name, tuple(entry["from"]), tuple(entry["to"]))


def resolve(raw: dict, seed: Optional[int] = None) -> RunConfig:
    """Merge presets and defaults, validate, and build the typed configuration."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    merged = deep_merge(DEFAULTS, _expand_preset(raw))
    merged.pop("preset", None)
    if seed is not None:
        merged["seed"] = int(seed)
    validate(merged)
    lat = merged["lattice"]
    bx, by = lat.get("boundary", ["open", "open"])
    geom = LatticeGeometry(lat["Lx"], lat["Ly"], Boundary(bx), Boundary(by))
    cpl = CouplingParams(**merged["couplings"])
    defects = {n: _defect(n, s) for n, s in merged["defects"].items()}
    for d in defects.values():
        for s in d.sites:
            if not geom.contains(*s):
                raise ConfigError(f"defect {d.id!r}: site {tuple(s)} lies outside the lattice")
    nz = merged["noise"]
    noise = NoiseConfig(alpha=nz["alpha"], V_T=nz["V_T"], lambda_R=nz["lambda_R"], seed=int(merged["seed"]))
    engine = EngineParams(**merged["engine"])
    track = merged.get("track_sites")
    return RunConfig(
        geom=geom,
        cpl=cpl,
        mu0=float(merged["potentials"]["mu0"]),
        mud=float(merged["potentials"]["mud"]),
        defects=defects,
        protocol=dict(merged["protocol"]),
        noise=noise,
        engine=engine,
        track_sites=[tuple(s) for s in track] if track else None,
        sector=int(merged["sector"]),
        seed=int(merged["seed"]),
        chern=dict(merged["chern"]),
        sweep=merged.get("sweep"),
        raw=merged,
    )


def load(path, seed: Optional[int] = None) -> RunConfig:
    return resolve(load_config_file(path), seed=seed)


def preset(name: str, **overrides) -> RunConfig:
    """Resolved configuration of a named preset with dotted-path overrides."""
    cfg = resolve({"preset": name})
    return cfg.with_overrides(**overrides) if overrides else cfg
