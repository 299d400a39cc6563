"""Command-line entry point: ``msfbraid <command> --config FILE --out DIR``.

Exit codes: 0 success, 2 configuration or protocol error, 3 numerical or
precondition failure.  Errors are reported on stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
from importlib import metadata as _md
from pathlib import Path

import numpy as np
import scipy

from . import experiments as ex
from .config import load
from .engine import checkpoint_csv
from .errors import ConfigError, MSFError, NumericError
from .io import atomic_write, write_csv, write_json
from .lattice import RNG_ALGORITHM

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("spectrum", "chern", "braid", "fuse", "sweep", "compile")


def _version() -> str:
    try:
        return _md.version("artifact")
    except _md.PackageNotFoundError:
        return "0+unknown"


def run_metadata(cfg, command) -> dict:
    """Everything needed to re-run: resolved config, versions, RNG algorithm."""
    return {
        "command": command,
        "config": cfg.raw,
        "seed": cfg.seed,
        "rng_algorithm": RNG_ALGORITHM,
        "versions": {
            "msfbraid": _version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }


def _say(args, msg):
    if not args.quiet:
        print(msg)


def cmd_spectrum(cfg, out: Path, args):
    res = ex.run_spectrum(cfg)
    write_csv(out / "energies.csv", ["index", "energy"], enumerate(res.energies))
    xy = cfg.geom.site_xy.astype(int)
    head = ["x", "y"] + [f"weight_{i}" for i in range(len(res.modes))]
    rows = [[x, y, *res.site_weights[:, r]] for r, (x, y) in enumerate(xy)]
    write_csv(out / "modes.csv", head, rows)
    summary = {
        "zero_mode_count": res.zero_mode_count,
        "splitting": res.splitting,
        "gap": res.gap,
        "threshold": cfg.engine.threshold,
        "lowest_energies": res.energies[: min(6, len(res.energies))],
    }
    write_json(out / "summary.json", summary)
    _say(args, f"zero modes: {res.zero_mode_count}  splitting: {res.splitting:.3e}  gap: {res.gap:.4f}")


def cmd_chern(cfg, out: Path, args):
    rows = ex.run_chern(cfg)
    write_csv(out / "chern.csv", ["mu", "nk", "C1"], rows)
    for mu, nk, c in rows:
        _say(args, f"mu={mu:g} nk={nk} C1={c:+d}")


def cmd_compile(cfg, out: Path, args):
    sch = ex.build_schedule(cfg)
    atomic_write(out / "schedule.csv", sch.to_csv())
    _say(args, f"{len(sch.events)} events, total time {sch.total_time:g}")


def _corr_rows(run):
    m = run.B.shape[0]
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    t = [c.t for c in run.evolution.checkpoints]
    head = ["t"] + [f"C_{i}_{j}" for i, j in pairs]
    rows = [[tk, *[run.correlations[k, i, j] for i, j in pairs]] for k, tk in enumerate(t)]
    return head, rows


def cmd_braid(cfg, out: Path, args):
    run = ex.run_braid(cfg)
    atomic_write(out / "schedule.csv", run.schedule.to_csv())
    write_csv(out / "gap.csv", ["t", "gap"], zip(run.result.gap_t, run.result.gap))
    atomic_write(out / "checkpoints.csv", checkpoint_csv(run.evolution))
    head, rows = _corr_rows(run)
    write_csv(out / "corr.csv", head, rows)
    B = run.B
    m = B.shape[0]
    doc = {
        "B": B,
        "leakage": run.result.leakage,
        "modes": m,
        "deviation": ex.braid_deviation(B) if m >= 2 else None,
        "min_gap": run.result.min_gap,
        "max_orthogonality_error": run.evolution.max_orthogonality_error,
        "events": len(run.schedule.events),
        "total_time": run.schedule.total_time,
        "substeps": run.schedule.substeps,
        "method": run.evolution.method,
        "correlation_initial": run.correlations[0] if m else [],
        "correlation_final": run.correlations[-1] if m else [],
    }
    write_json(out / "braid.json", doc)
    _say(args, "B =\n" + np.array2string(B, precision=4, suppress_small=True))
    if m:
        _say(args, f"max leakage {np.max(run.result.leakage):.3e}  min gap {doc['min_gap']}")


def cmd_fuse(cfg, out: Path, args):
    sch = ex.build_schedule(cfg)
    rep = ex.run_fuse(cfg, sch)
    atomic_write(out / "schedule.csv", sch.to_csv())
    write_csv(out / "fusion.csv", ["t", "overlap"], zip(rep.t, rep.overlap_series))
    doc = {
        "r0": list(rep.r0),
        "final_fidelity": rep.final_fidelity,
        "initial_overlap": rep.initial_overlap,
        "orientation": rep.orientation,
        "sector": rep.sector,
        "occupation_expectation": rep.occupation_expectation,
        "occupation_by_sector": {str(k): v for k, v in rep.occupation.items()},
        "readout_fidelity": rep.readout_fidelity,
    }
    write_json(out / "readout.json", doc)
    _say(args, f"fidelity {rep.final_fidelity:.4f}  readout {rep.readout_fidelity:.4f}  r0={rep.r0}")


def cmd_sweep(cfg, out: Path, args):
    rows = ex.run_sweep(cfg)
    head = ["axis", "value", "seed", "deviation", "max_leakage", "min_gap"]
    write_csv(out / "sweep.csv", head, [[r[k] for k in head] for r in rows])
    for r in rows:
        _say(args, f"{r['axis']}={r['value']:g}  deviation {r['deviation']:.3e}  leakage {r['max_leakage']:.3e}")


HANDLERS = {
    "spectrum": cmd_spectrum,
    "chern": cmd_chern,
    "braid": cmd_braid,
    "fuse": cmd_fuse,
    "sweep": cmd_sweep,
    "compile": cmd_compile,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="msfbraid", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="YAML or JSON run configuration")
    ap.add_argument("--out", default="out", help="output directory (default: ./out)")
    ap.add_argument("--seed", type=int, default=None, help="override the configured seed")
    ap.add_argument("--quiet", action="store_true", help="no summary on stdout")
    return ap


def _fail(code, exc):
    print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args.config, seed=args.seed)
        out = Path(args.out)
        HANDLERS[args.command](cfg, out, args)
        write_json(out / "metadata.json", run_metadata(cfg, args.command))
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc)
    except NumericError as exc:
        return _fail(EXIT_NUMERIC, exc)
    except np.linalg.LinAlgError as exc:
        return _fail(EXIT_NUMERIC, exc)
    except MSFError as exc:
        return _fail(EXIT_NUMERIC, exc)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
