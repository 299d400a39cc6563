"""High-level runs built from a :class:`~msfbraid.config.RunConfig`."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from . import engine as eng
from .bloch import BlochParams, chern_number
from .config import RunConfig
from .errors import ConfigError
from .lattice import defect_potential
from .observables import FusionReport, fusion_report, ground_covariance, msf_correlation_series
from .protocol import (
    builtin_exchange_same_defect,
    builtin_exchange_two_defects,
    builtin_fuse_to_site,
    compile_program,
    parse,
)
from .protocol.language import DefectPath, ProtocolProgram
from .spectral import canonical_form, match_modes_to_sites, mode_matrix, zero_modes


def potential(cfg: RunConfig) -> np.ndarray:
    sites = [s for d in cfg.defects.values() for s in d.sites]
    return defect_potential(cfg.geom, sites, cfg.mu0, cfg.mud)


def initial_matrix(cfg: RunConfig) -> np.ndarray:
    """Initial Hamiltonian matrix including noise."""
    return eng.Model(cfg.geom, cfg.cpl, cfg.noise, mu0=cfg.mu0).skew(potential(cfg))


def _defect(cfg, name):
    if name not in cfg.defects:
        raise ConfigError(f"protocol refers to undeclared defect {name!r}")
    return cfg.defects[name]


def _path(entry):
    if isinstance(entry, dict):
        return list(DefectPath.segment("path", tuple(entry["from"]), tuple(entry["to"])).sites)
    return [tuple(s) for s in entry]


def build_program(cfg: RunConfig) -> ProtocolProgram:
    """The protocol described by ``cfg.protocol``, repeated ``repeat`` times."""
    p = cfg.protocol
    params = {"mu0": cfg.mu0, "mud": cfg.mud, "tau_site": cfg.engine.tau_site}
    if cfg.engine.substeps is not None:
        params["substeps"] = int(cfg.engine.substeps)
    if "source" in p:
        prog = parse(p["source"], defects=cfg.defects)
        merged = dict(params)
        merged.update(prog.params)
        prog.params = merged
    else:
        kind = p.get("builtin", "identity")
        if kind == "identity":
            prog = ProtocolProgram(defects=dict(cfg.defects), params=params, statements=[])
        elif kind == "exchange_same_defect":
            d = _defect(cfg, p.get("defect", "d1"))
            if "junction_column" not in p:
                raise ConfigError("exchange_same_defect needs protocol.junction_column")
            prog = builtin_exchange_same_defect(
                cfg.geom, d, p["junction_column"], p.get("arm_direction"), p.get("arm_length"), params
            )
            prog.defects = {**cfg.defects, **prog.defects}
        elif kind == "exchange_two_defects":
            d1, d2 = _defect(cfg, p.get("d1", "d1")), _defect(cfg, p.get("d2", "d2"))
            if "junction_path" not in p:
                raise ConfigError("exchange_two_defects needs protocol.junction_path")
            prog = builtin_exchange_two_defects(
                cfg.geom,
                d1,
                d2,
                _path(p["junction_path"]),
                junction=tuple(p["junction"]) if "junction" in p else None,
                arm_direction=p.get("arm_direction"),
                arm_length=p.get("arm_length"),
                params=params,
            )
            prog.defects = {**cfg.defects, **prog.defects}
        elif kind == "fuse_to_site":
            d = _defect(cfg, p.get("defect", "d1"))
            prog = builtin_fuse_to_site(cfg.geom, d, p.get("target_end", "center"), params)
            prog.defects = {**cfg.defects, **prog.defects}
        else:
            raise ConfigError(f"unknown built-in protocol {kind!r}")
    reps = int(p.get("repeat", 1))
    if reps > 1:
        prog = ProtocolProgram(prog.defects, prog.params, list(prog.statements) * reps)
    return prog


def build_schedule(cfg: RunConfig):
    return compile_program(build_program(cfg), cfg.geom, shape=cfg.engine.shape)


@dataclass
class SpectrumResult:
    energies: np.ndarray
    modes: list
    zero_mode_count: int
    splitting: float
    gap: float
    site_weights: np.ndarray


def run_spectrum(cfg: RunConfig) -> SpectrumResult:
    A = initial_matrix(cfg)
    thr = cfg.engine.threshold
    E = canonical_form(A).energies
    below = E < thr
    n = int(np.sum(below))
    modes = zero_modes(A, cfg.geom, thr)
    if cfg.track_sites and len(cfg.track_sites) == len(modes):
        modes = match_modes_to_sites(modes, cfg.geom, cfg.track_sites)
    weights = np.array([m.site_weight() for m in modes]).reshape(len(modes), cfg.geom.n_sites)
    return SpectrumResult(
        energies=E,
        modes=modes,
        zero_mode_count=2 * n,
        splitting=float(E[below].max()) if n else 0.0,
        gap=float(E[n]) if n < len(E) else float("inf"),
        site_weights=weights,
    )


def run_chern(cfg: RunConfig):
    """Rows ``(mu, nk, C1)``; raises :class:`GapClosedError` at a transition."""
    rows = []
    for mu in cfg.chern["mu"]:
        p = BlochParams(J=cfg.cpl.J, Delta=cfg.cpl.Delta, mu=float(mu))
        for nk in cfg.chern["nk"]:
            rows.append((float(mu), int(nk), chern_number(p, int(nk))))
    return rows


@dataclass
class BraidRun:
    schedule: object
    evolution: eng.Evolution
    result: eng.BraidResult
    correlations: np.ndarray
    Gamma0: np.ndarray

    @property
    def B(self):
        return self.result.B


def initial_modes(cfg: RunConfig, A0=None) -> np.ndarray:
    A0 = initial_matrix(cfg) if A0 is None else A0
    found = zero_modes(A0, cfg.geom, cfg.engine.threshold)
    if cfg.track_sites is not None:
        found = match_modes_to_sites(found, cfg.geom, cfg.track_sites)
    return mode_matrix(found) if found else np.zeros((A0.shape[0], 0))


def run_braid(cfg: RunConfig, schedule=None, substeps=None, modes=None) -> BraidRun:
    sch = build_schedule(cfg) if schedule is None else schedule
    A0 = initial_matrix(cfg)
    if modes is None:
        modes = initial_modes(cfg, A0)
    e = cfg.engine
    evo = eng.evolve(
        sch,
        cfg.geom,
        cpl=cfg.cpl,
        noise=cfg.noise,
        substeps=substeps if substeps is not None else sch.substeps,
        stride=e.stride,
        modes=modes,
        threshold=e.threshold,
        method=e.method,
        gap_stride=e.gap_stride,
    )
    m = modes.shape[1]
    sectors = [cfg.sector] * max(m // 2, 1)
    G0 = ground_covariance(A0, msf_sector=sectors, modes=modes if m else None, threshold=e.threshold).Gamma
    corr = msf_correlation_series(modes, evo.checkpoints, G0)
    res = eng.braid_result(evo, corr)
    return BraidRun(schedule=sch, evolution=evo, result=res, correlations=corr, Gamma0=G0)


def run_fuse(cfg: RunConfig, schedule=None) -> FusionReport:
    sch = build_schedule(cfg) if schedule is None else schedule
    return fusion_report(
        sch,
        cfg.geom,
        cpl=cfg.cpl,
        noise=cfg.noise,
        method=cfg.engine.method,
        sector=cfg.sector,
        threshold=cfg.engine.threshold,
    )


def cell_seed(seed: int, axis: str, value: float) -> int:
    """Per-cell seed ``hash(seed, axis, value)``, independent of execution order.

    Cells at ``lambda_R = 0`` draw no disorder, so their seed is irrelevant.
    """
    h = hashlib.blake2b(f"{int(seed)}|{axis}|{float(value)!r}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def sweep_cell_config(cfg: RunConfig, axis: str, value: float) -> RunConfig:
    key = {"tau_site": "engine.tau_site", "V_T": "noise.V_T", "lambda_R": "noise.lambda_R", "alpha": "noise.alpha"}
    if axis not in key:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    over = {key[axis]: float(value), "seed": cell_seed(cfg.seed, axis, value)}
    if axis == "tau_site" and cfg.engine.substeps is not None:
        # keep the time step fixed across the sweep
        over["engine.substeps"] = None
    return cfg.with_overrides(**over)


def ideal_braid(m: int, pair=(0, 1)) -> np.ndarray:
    return eng.ideal_exchange(m, pair[0])


def braid_deviation(B, pair=None) -> float:
    """Distance of ``B`` to the ideal exchange of ``pair`` (either orientation).

    Modes outside the pair must map to themselves.
    """
    m = B.shape[0]
    if pair is None:
        pair = (0, 1) if m == 2 else (1, 2)
    Ib = eng.ideal_exchange(m, pair[0])
    return float(min(np.max(np.abs(B - Ib)), np.max(np.abs(B - Ib.T))))


def run_sweep(cfg: RunConfig):
    """One braid per sweep value; rows of ``(value, seed, deviation, max leakage, min gap)``."""
    if not cfg.sweep:
        raise ConfigError("sweep needs a 'sweep' section with axis and values")
    axis = cfg.sweep["axis"]
    rows = []
    for v in cfg.sweep["values"]:
        c = sweep_cell_config(cfg, axis, v)
        run = run_braid(c)
        B = run.B
        rows.append(
            {
                "axis": axis,
                "value": float(v),
                "seed": c.seed,
                "deviation": braid_deviation(B),
                "max_leakage": float(np.max(run.result.leakage)) if B.size else 0.0,
                "min_gap": run.result.min_gap,
            }
        )
    return rows


def noiseless(cfg: RunConfig) -> RunConfig:
    return cfg.with_overrides(**{"noise.alpha": 1.0, "noise.V_T": 0.0, "noise.lambda_R": 0.0})


__all__ = [
    "BraidRun",
    "SpectrumResult",
    "build_program",
    "build_schedule",
    "braid_deviation",
    "cell_seed",
    "ideal_braid",
    "initial_matrix",
    "initial_modes",
    "noiseless",
    "potential",
    "run_braid",
    "run_chern",
    "run_fuse",
    "run_spectrum",
    "run_sweep",
    "sweep_cell_config",
]
