"""Compile protocol programs into sequential per-site ramp schedules."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ProtocolError
from .language import (
    DIRECTIONS,
    Cut,
    DefectPath,
    Exchange,
    Fuse,
    Grow,
    ProtocolProgram,
    Shrink,
    direction_of,
)

DEFAULT_MU0 = 10.0
DEFAULT_MUD = 0.0
DEFAULT_TAU_SITE = 120.0
# substeps default to ceil(tau_site / DEFAULT_DT); the midpoint rule is
# converged at this step for the lattices shipped here
DEFAULT_DT = 0.5
RAMP_SHAPES = ("smoothstep", "linear")
CSV_HEADER = ("site_x", "site_y", "t_start", "t_end", "mu_from", "mu_to", "shape")


@dataclass(frozen=True)
class RampEvent:
    site: tuple
    t_start: float
    t_end: float
    mu_from: float
    mu_to: float
    shape: str = "smoothstep"

    def value(self, t):
        """Commanded potential at time ``t`` (clamped to the event window)."""
        s = np.clip((t - self.t_start) / (self.t_end - self.t_start), 0.0, 1.0)
        if self.shape == "smoothstep":
            s = np.sin(0.5 * np.pi * s) ** 2
        return self.mu_from + (self.mu_to - self.mu_from) * s


@dataclass
class Schedule:
    """Time-ordered ramp events plus the defect layout they act on.

    ``initial_defects`` and ``final_defects`` map defect names to site tuples;
    ``mu0`` is the background and ``mud`` the defect potential.
    """

    total_time: float
    events: list
    mu0: float = DEFAULT_MU0
    mud: float = DEFAULT_MUD
    tau_site: float = DEFAULT_TAU_SITE
    substeps: int = 240
    initial_defects: dict = field(default_factory=dict)
    final_defects: dict = field(default_factory=dict)

    @property
    def initial_sites(self):
        return [s for sites in self.initial_defects.values() for s in sites]

    @property
    def final_sites(self):
        return [s for sites in self.final_defects.values() for s in sites]

    def site_sets(self):
        """Defect site set after every event, starting with the initial one."""
        cur = set(self.initial_sites)
        out = [frozenset(cur)]
        for ev in self.events:
            if ev.mu_to == self.mud:
                cur.add(ev.site)
            else:
                cur.discard(ev.site)
            out.append(frozenset(cur))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for ev in self.events:
            w.writerow(
                [
                    ev.site[0],
                    ev.site[1],
                    "%.17g" % ev.t_start,
                    "%.17g" % ev.t_end,
                    "%.17g" % ev.mu_from,
                    "%.17g" % ev.mu_to,
                    ev.shape,
                ]
            )
        return buf.getvalue()


def schedule_events_from_csv(text: str):
    rows = list(csv.DictReader(io.StringIO(text)))
    return [
        RampEvent(
            (int(r["site_x"]), int(r["site_y"])),
            float(r["t_start"]),
            float(r["t_end"]),
            float(r["mu_from"]),
            float(r["mu_to"]),
            r["shape"],
        )
        for r in rows
    ]


class DefectState:
    """Site-set simulator used by the compiler and the built-in generators.

    Each defect is an ordered path; ``moves`` records one ``(site, added)``
    pair per unit move.
    """

    def __init__(self, geom, defects):
        self.geom = geom
        self.paths = {}
        self.owner = {}
        self.last_end = {}
        self.moves = []
        for d in defects.values() if isinstance(defects, dict) else defects:
            for s in d.sites:
                self._check_inside(s, d.id)
                if s in self.owner:
                    raise ProtocolError(
                        f"defects {self.owner[s]!r} and {d.id!r} overlap at {s}"
                    )
                self.owner[s] = d.id
            self.paths[d.id] = list(d.sites)

    def _check_inside(self, s, name):
        if not self.geom.contains(*s):
            raise ProtocolError(
                f"defect {name!r}: site {s} outside the {self.geom.Lx}x{self.geom.Ly} lattice"
            )

    def path(self, name):
        if name not in self.paths:
            raise ProtocolError(f"defect {name!r} does not exist at this point of the program")
        return self.paths[name]

    def snapshot(self):
        return {k: tuple(v) for k, v in self.paths.items()}

    @staticmethod
    def _pointing(path, end):
        if len(path) == 1:
            return None
        if end == 0:
            return direction_of(path[1], path[0])
        return direction_of(path[-2], path[-1])

    def shrink(self, name, direction):
        p = self.path(name)
        if len(p) == 1:
            site = p.pop()
            del self.paths[name]
            self.last_end.pop(name, None)
        else:
            ends = [e for e in (0, -1) if self._pointing(p, e) == direction]
            if not ends:
                raise ProtocolError(f"no end of defect {name!r} points {direction}")
            site = p.pop(ends[0])
            self.last_end[name] = ends[0]
        del self.owner[site]
        self.moves.append((site, False))
        return site

    def end_index(self, name, site):
        p = self.path(name)
        site = tuple(site)
        if p[-1] == site:
            return -1
        if p[0] == site:
            return 0
        raise ProtocolError(f"site {site} is not an end of defect {name!r}")

    def grow(self, name, direction, end=None):
        p = self.path(name)
        if end is not None:
            pass
        elif len(p) == 1:
            end = -1
        else:
            ends = [e for e in (0, -1) if self._pointing(p, e) == direction]
            if len(ends) == 1:
                end = ends[0]
            elif name in self.last_end:
                end = self.last_end[name]
            else:
                raise ProtocolError(
                    f"grow {name} {direction}: ambiguous end; neither end points {direction} "
                    "and no end has moved yet"
                )
        dx, dy = DIRECTIONS[direction]
        x, y = p[end]
        site = (x + dx, y + dy)
        if not self.geom.contains(*site):
            raise ProtocolError(f"grow {name} {direction}: site {site} lies outside the lattice")
        if site in self.owner:
            raise ProtocolError(
                f"grow {name} {direction}: site {site} is occupied by defect {self.owner[site]!r}"
            )
        if end == 0:
            p.insert(0, site)
        else:
            p.append(site)
        self.owner[site] = name
        self.last_end[name] = end
        self.moves.append((site, True))
        return site

    def cut(self, name, at, new_id):
        p = self.path(name)
        at = tuple(at)
        if new_id in self.paths:
            raise ProtocolError(f"cut: defect {new_id!r} already exists")
        if at not in p:
            raise ProtocolError(f"cut: site {at} is not part of defect {name!r}")
        i = p.index(at)
        if i == 0 or i == len(p) - 1:
            raise ProtocolError(f"cut: {at} is an end of defect {name!r}; use shrink")
        # the piece carrying the most recently moved end is split off
        moved = self.last_end.get(name, -1)
        head, tail = p[:i], p[i + 1 :]
        keep, split = (tail, head) if moved == 0 else (head, tail)
        self.paths[name] = keep
        self.paths[new_id] = split
        for s in split:
            self.owner[s] = new_id
        del self.owner[at]
        self.last_end.pop(name, None)
        self.last_end[new_id] = moved
        self.moves.append((at, False))
        return at

    def check_connected(self):
        for name, p in self.paths.items():
            for a, b in zip(p, p[1:]):
                if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
                    raise ProtocolError(f"connectivity violated in defect {name!r} at {a}-{b}")

    def apply(self, stmt):
        """Execute a primitive statement, returning the touched sites."""
        if isinstance(stmt, Shrink):
            return [self.shrink(stmt.defect, stmt.direction) for _ in range(stmt.count)]
        if isinstance(stmt, Grow):
            out = []
            end = None if stmt.origin is None else self.end_index(stmt.defect, stmt.origin)
            for _ in range(stmt.count):
                out.append(self.grow(stmt.defect, stmt.direction, end))
                # later units continue from the end that just moved
                end = self.last_end[stmt.defect] if end is not None else None
            return out
        if isinstance(stmt, Cut):
            return [self.cut(stmt.defect, stmt.at, stmt.new_id)]
        raise TypeError(f"not a primitive statement: {stmt!r}")


def expand(prog: ProtocolProgram, geom) -> list:
    """Replace ``exchange`` and ``fuse`` statements by primitive moves.

    Macro statements expand against the defect layout at the point where
    they occur, so they may follow arbitrary earlier moves.
    """
    from . import builtins as _b

    state = DefectState(geom, prog.defects)
    out = []
    for k, stmt in enumerate(prog.statements):
        line = prog.lines[k] if k < len(prog.lines) else None
        try:
            if isinstance(stmt, Exchange):
                current = {n: DefectPath(n, tuple(p)) for n, p in state.paths.items()}
                if len(stmt.defects) == 1:
                    prims = _b.same_defect_moves(geom, current[stmt.defects[0]], stmt.at)
                else:
                    a, b = (current[n] for n in stmt.defects)
                    prims = _b.two_defect_moves(geom, a, b, at=stmt.at, occupied=state.owner)
            elif isinstance(stmt, Fuse):
                prims = _b.fuse_moves(DefectPath(stmt.defect, tuple(state.path(stmt.defect))), stmt.end)
            else:
                prims = [stmt]
            for p in prims:
                state.apply(p)
                state.check_connected()
        except ProtocolError as exc:
            if line is not None and exc.line is None:
                raise ProtocolError(exc.message, line) from None
            raise
        except KeyError as exc:
            raise ProtocolError(f"defect {exc.args[0]!r} does not exist", line) from None
        out.extend(prims)
    return out


def default_substeps(tau_site) -> int:
    return max(1, int(np.ceil(float(tau_site) / DEFAULT_DT - 1e-9)))


def compile_program(prog: ProtocolProgram, geom, shape="smoothstep", defaults=None) -> Schedule:
    """Compile a program into a strictly sequential :class:`Schedule`.

    Parameters
    ----------
    prog : ProtocolProgram
    geom : LatticeGeometry
    shape : {"smoothstep", "linear"}
        Ramp profile of every event.
    defaults : dict, optional
        Values for ``mu0``, ``mud``, ``tau_site`` and ``substeps`` used when
        the program does not set them.  Without an explicit ``substeps`` the
        step is ``DEFAULT_DT``.
    """
    if shape not in RAMP_SHAPES:
        raise ConfigError(f"unknown ramp shape {shape!r}; choose from {RAMP_SHAPES}")
    par = {
        "mu0": DEFAULT_MU0,
        "mud": DEFAULT_MUD,
        "tau_site": DEFAULT_TAU_SITE,
        "substeps": None,
    }
    par.update(defaults or {})
    par.update(prog.params)
    mu0, mud, tau = float(par["mu0"]), float(par["mud"]), float(par["tau_site"])
    if not tau > 0:
        raise ConfigError(f"tau_site must be positive, got {tau}")
    substeps = default_substeps(tau) if par["substeps"] is None else int(par["substeps"])
    if substeps < 1:
        raise ConfigError("substeps must be >= 1")
    prims = expand(prog, geom)
    if mu0 == mud and prims:
        raise ConfigError("mu0 and mud must differ")
    state = DefectState(geom, prog.defects)
    initial = state.snapshot()
    events = []
    t = 0.0
    for stmt in prims:
        state.apply(stmt)
        for site, added in state.moves[len(events) :]:
            a, b = (mu0, mud) if added else (mud, mu0)
            events.append(RampEvent(site, t, t + tau, a, b, shape))
            t += tau
    return Schedule(
        total_time=t,
        events=events,
        mu0=mu0,
        mud=mud,
        tau_site=tau,
        substeps=substeps,
        initial_defects=initial,
        final_defects=state.snapshot(),
    )


def compile(prog: ProtocolProgram, geom, **kw) -> Schedule:  # noqa: A001
    """Alias of :func:`compile_program`."""
    return compile_program(prog, geom, **kw)
